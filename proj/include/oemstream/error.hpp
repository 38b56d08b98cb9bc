#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oem {

// Malformed caller input (bad arguments, invariant violations in data).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Invalid configuration or template files.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Out-of-order or duplicate appends to an append-only log.
class SequencingError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class LoadError : public std::runtime_error {
public:
    LoadError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ConnectivityError : public std::runtime_error {
public:
    ConnectivityError(std::string endpoint, const std::string& what)
        : std::runtime_error(endpoint + ": " + what), endpoint_(std::move(endpoint)) {}

    const std::string& endpoint() const noexcept { return endpoint_; }

private:
    std::string endpoint_;
};

// A measurement campaign that produced no usable sample.
class CampaignError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace oem
