#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "oemstream/bench.hpp"
#include "oemstream/stats.hpp"

namespace oem {

enum class TableFormat { csv, markdown };

// Throws InputError for anything but "csv", "markdown" or "md".
TableFormat table_format_from_string(const std::string& name);
const char* extension(TableFormat f);

// Sweep table. Violating rows carry VIOLATION (FAILED for failed points) in
// the status column and the selected row is marked with `*`.
std::string emit_table(const MetricsTable& table, TableFormat format);

struct AccuracyRow {
    std::string label;  // e.g. "2B+8B"
    Summary accuracy;   // percent over seeds
    std::size_t items = 0;
    std::size_t skipped = 0;
};

AccuracyRow accuracy_row(std::string label, const BenchmarkReport& report);
std::string emit_accuracy_table(std::span<const AccuracyRow> rows, TableFormat format);

struct TtftRow {
    std::string label;
    Summary ttft;
    Summary total_time;
    std::size_t samples = 0;
    std::size_t failures = 0;
    bool failed = false;  // campaign produced no sample (rendered as the failure text)
    std::string failure;
};

TtftRow ttft_row(std::string label, const TtftReport& report);
std::string emit_ttft_table(std::span<const TtftRow> rows, TableFormat format);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace oem
