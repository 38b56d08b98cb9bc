#include "oemstream/report.hpp"

#include <fstream>

#include <fmt/format.h>

#include "oemstream/error.hpp"

namespace oem {

TableFormat table_format_from_string(const std::string& name) {
    if (name == "csv") return TableFormat::csv;
    if (name == "markdown" || name == "md") return TableFormat::markdown;
    throw InputError("unknown table format '" + name + "'");
}

const char* extension(TableFormat f) { return f == TableFormat::csv ? "csv" : "md"; }

namespace {

std::string fixed2(double v) { return fmt::format("{:.2f}", v); }

std::string pm(const Summary& s) { return fmt::format("{:.2f}±{:.2f}", s.mean, s.stddev); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string md_field(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += '\\';
        out += c == '\n' ? ' ' : c;
    }
    return out;
}

void csv_line(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) out += ',';
        out += csv_field(cells[i]);
    }
    out += '\n';
}

void md_line(std::string& out, const std::vector<std::string>& cells) {
    out += '|';
    for (const auto& c : cells) out += ' ' + md_field(c) + " |";
    out += '\n';
}

void md_rule(std::string& out, std::size_t n) {
    out += '|';
    for (std::size_t i = 0; i < n; ++i) out += "---|";
    out += '\n';
}

const char* status_of(const SweepRow& row) {
    if (row.failed) return "FAILED";
    return row.compliant ? "OK" : "VIOLATION";
}

}  // namespace

std::string emit_table(const MetricsTable& table, TableFormat format) {
    std::string out;
    if (format == TableFormat::csv) {
        csv_line(out, {"selected", "quantization", "model", "fps", "resolution", "batch_size", "time_per_clip_mean",
                       "time_per_clip_std", "tokens_per_second_mean", "tokens_per_second_std", "peak_memory_gb_mean",
                       "peak_memory_gb_std", "violating_clips_pct", "status"});
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const SweepRow& r = table.rows[i];
            const bool sel = table.selected == i;
            if (r.failed) {
                csv_line(out, {sel ? "*" : "", r.axes.quantization_label, r.axes.model_name, fmt::format("{}", r.axes.fps),
                               to_string(r.axes.resolution), std::to_string(r.axes.batch_size), "", "", "", "", "",
                               "", "", std::string(status_of(r)) + ": " + r.failure});
                continue;
            }
            csv_line(out, {sel ? "*" : "", r.axes.quantization_label, r.axes.model_name, fmt::format("{}", r.axes.fps),
                           to_string(r.axes.resolution), std::to_string(r.axes.batch_size),
                           fixed2(r.time_per_clip.mean), fixed2(r.time_per_clip.stddev),
                           fixed2(r.tokens_per_second.mean), fixed2(r.tokens_per_second.stddev),
                           r.peak_memory_gb ? fixed2(r.peak_memory_gb->mean) : "n/a",
                           r.peak_memory_gb ? fixed2(r.peak_memory_gb->stddev) : "n/a",
                           fixed2(100.0 * r.violating_clip_fraction), status_of(r)});
        }
        return out;
    }

    const std::vector<std::string> header = {"",           "Quant", "Model",          "FPS",    "Res",
                                             "BS",         "Time/Clip (s)", "Tok/s", "Peak Mem (GB)",
                                             fmt::format("Clips >= {} s (%)", table.budget_s), "Status"};
    md_line(out, header);
    md_rule(out, header.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const SweepRow& r = table.rows[i];
        const bool sel = table.selected == i;
        std::vector<std::string> cells = {sel ? "*" : "", r.axes.quantization_label, r.axes.model_name,
                                          fmt::format("{}", r.axes.fps), to_string(r.axes.resolution),
                                          std::to_string(r.axes.batch_size)};
        if (r.failed) {
            cells.insert(cells.end(), {"-", "-", "-", "-", std::string(status_of(r)) + ": " + r.failure});
        } else {
            cells.insert(cells.end(), {pm(r.time_per_clip), pm(r.tokens_per_second),
                                       r.peak_memory_gb ? pm(*r.peak_memory_gb) : "n/a",
                                       fixed2(100.0 * r.violating_clip_fraction), status_of(r)});
        }
        md_line(out, cells);
    }
    return out;
}

AccuracyRow accuracy_row(std::string label, const BenchmarkReport& report) {
    AccuracyRow row;
    row.label = std::move(label);
    row.accuracy = report.accuracy;
    row.items = report.per_seed.empty() ? 0 : report.per_seed.front().total;
    row.skipped = report.audit.size();
    return row;
}

std::string emit_accuracy_table(std::span<const AccuracyRow> rows, TableFormat format) {
    std::string out;
    if (format == TableFormat::csv) {
        csv_line(out, {"configuration", "accuracy_mean", "accuracy_std", "seeds", "items", "skipped"});
        for (const auto& r : rows)
            csv_line(out, {r.label, fixed2(r.accuracy.mean), fixed2(r.accuracy.stddev),
                           std::to_string(r.accuracy.count), std::to_string(r.items), std::to_string(r.skipped)});
        return out;
    }
    const std::vector<std::string> header = {"Configuration", "Accuracy (%)", "Seeds", "Items", "Skipped"};
    md_line(out, header);
    md_rule(out, header.size());
    for (const auto& r : rows)
        md_line(out, {r.label, pm(r.accuracy), std::to_string(r.accuracy.count), std::to_string(r.items),
                      std::to_string(r.skipped)});
    return out;
}

TtftRow ttft_row(std::string label, const TtftReport& report) {
    TtftRow row;
    row.label = std::move(label);
    row.ttft = report.ttft;
    row.total_time = report.total_time;
    row.samples = report.samples.size();
    row.failures = report.failures;
    return row;
}

std::string emit_ttft_table(std::span<const TtftRow> rows, TableFormat format) {
    std::string out;
    if (format == TableFormat::csv) {
        csv_line(out, {"configuration", "ttft_mean", "ttft_std", "t_ans_mean", "t_ans_std", "samples", "failures",
                       "status"});
        for (const auto& r : rows) {
            if (r.failed) {
                csv_line(out, {r.label, "", "", "", "", std::to_string(r.samples), std::to_string(r.failures),
                               r.failure});
                continue;
            }
            csv_line(out, {r.label, fixed2(r.ttft.mean), fixed2(r.ttft.stddev), fixed2(r.total_time.mean),
                           fixed2(r.total_time.stddev), std::to_string(r.samples), std::to_string(r.failures), "OK"});
        }
        return out;
    }
    const std::vector<std::string> header = {"Configuration", "TTFT (s)", "T_ans (s)", "Samples", "Failures"};
    md_line(out, header);
    md_rule(out, header.size());
    for (const auto& r : rows) {
        if (r.failed) {
            md_line(out, {r.label, r.failure, "-", std::to_string(r.samples), std::to_string(r.failures)});
            continue;
        }
        md_line(out, {r.label, pm(r.ttft), pm(r.total_time), std::to_string(r.samples), std::to_string(r.failures)});
    }
    out += "\nTTFT is measured from request dispatch to the first streamed token, so it includes transport.\n";
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    if (!out) throw InputError("write failed for " + path.string());
}

}  // namespace oem
