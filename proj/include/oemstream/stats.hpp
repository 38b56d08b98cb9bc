#pragma once

#include <cstddef>
#include <span>

namespace oem {

struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n - 1); 0 when count < 2
};

// Welford accumulator.
class RunningStats {
public:
    void add(double x);
    std::size_t count() const noexcept { return n_; }
    Summary summary() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

Summary summarize(std::span<const double> values);

}  // namespace oem
