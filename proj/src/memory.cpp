#include "oemstream/memory.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "oemstream/error.hpp"

namespace oem {

void MemoryEntry::validate() const {
    if (k == 0) throw InputError("memory entry index must start at 1");
    if (!(gen_time >= 0.0)) throw InputError(fmt::format("memory entry {} has negative generation time", k));
    if (text.empty() && !failure_reason)
        throw InputError(fmt::format("memory entry {} has no text and no failure reason", k));
}

void to_json(nlohmann::json& j, const MemoryEntry& e) {
    j = nlohmann::json{{"k", e.k},
                       {"clip_start", e.clip_start},
                       {"clip_end", e.clip_end},
                       {"text", e.text},
                       {"gen_time", e.gen_time},
                       {"output_tokens", e.output_tokens},
                       {"tokens_per_second", e.tokens_per_second},
                       {"backend_id", e.backend_id},
                       {"partial", e.partial}};
    if (e.failure_reason) j["failure_reason"] = *e.failure_reason;
}

void from_json(const nlohmann::json& j, MemoryEntry& e) {
    if (!j.is_object()) throw InputError("memory entry must be a JSON object");
    e.k = j.at("k").get<std::size_t>();
    e.clip_start = j.at("clip_start").get<double>();
    e.clip_end = j.at("clip_end").get<double>();
    e.text = j.at("text").get<std::string>();
    e.gen_time = j.at("gen_time").get<double>();
    e.output_tokens = j.at("output_tokens").get<std::size_t>();
    e.tokens_per_second = j.at("tokens_per_second").get<double>();
    e.backend_id = j.at("backend_id").get<std::string>();
    e.partial = j.at("partial").get<bool>();
    if (auto it = j.find("failure_reason"); it != j.end() && !it->is_null())
        e.failure_reason = it->get<std::string>();
    else
        e.failure_reason.reset();
}

const MemoryEntry& MemoryView::operator[](std::size_t i) const {
    if (i >= size()) throw std::out_of_range("memory view index out of range");
    const std::size_t abs = begin_ + i;
    return (*dir_)[abs / detail::MemoryBlock::kCapacity]->slots[abs % detail::MemoryBlock::kCapacity];
}

MemoryView MemoryView::prefix(std::size_t n) const {
    return MemoryView(dir_, begin_, begin_ + std::min(n, size()));
}

MemoryView MemoryView::drop_front(std::size_t n) const {
    return MemoryView(dir_, begin_ + std::min(n, size()), end_);
}

std::vector<MemoryEntry> MemoryView::to_vector() const {
    return std::vector<MemoryEntry>(begin(), end());
}

TextualMemory::TextualMemory(std::string stream_id)
    : stream_id_(std::move(stream_id)), dir_(std::make_shared<const detail::MemoryDirectory>()) {}

TextualMemory::TextualMemory(std::string stream_id, const std::vector<MemoryEntry>& entries)
    : TextualMemory(std::move(stream_id)) {
    for (const auto& e : entries) append(e);
}

std::size_t TextualMemory::append(MemoryEntry entry) {
    std::lock_guard write_lock(write_mu_);
    const std::size_t n = size_;
    if (entry.k != n + 1)
        throw SequencingError(fmt::format("append of clip {} to a memory of length {} (expected {})", entry.k, n,
                                          n + 1));
    entry.validate();

    constexpr std::size_t cap = detail::MemoryBlock::kCapacity;
    std::shared_ptr<const detail::MemoryDirectory> dir = dir_;
    if (n / cap == dir->size()) {
        auto grown = std::make_shared<detail::MemoryDirectory>(*dir);
        grown->push_back(std::make_shared<detail::MemoryBlock>());
        dir = std::move(grown);
    }
    // The slot at index n is invisible to every existing snapshot.
    (*dir)[n / cap]->slots[n % cap] = std::move(entry);

    {
        std::lock_guard lock(mu_);
        dir_ = std::move(dir);
        size_ = n + 1;
    }
    grown_.notify_all();
    return n + 1;
}

MemoryView TextualMemory::snapshot() const {
    std::lock_guard lock(mu_);
    return MemoryView(dir_, 0, size_);
}

std::size_t TextualMemory::size() const {
    std::lock_guard lock(mu_);
    return size_;
}

std::size_t TextualMemory::wait_for_growth(std::size_t n, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    grown_.wait_for(lock, timeout, [&] { return size_ > n; });
    return size_;
}

std::string render_entry(const MemoryEntry& entry, const RenderOptions& options) {
    std::string out;
    if (options.timestamps)
        out = fmt::format("[clip {} | {}–{} s]\n", entry.k, entry.clip_start, entry.clip_end);
    if (entry.failed())
        out += "(no description available)";
    else
        out += entry.text;
    return out;
}

std::string render_context(const MemoryView& view, const RenderOptions& options) {
    std::string out;
    bool first = true;
    for (const MemoryEntry& e : view) {
        if (!first) out += "\n\n";
        out += render_entry(e, options);
        first = false;
    }
    return out;
}

std::string to_jsonl(const MemoryView& view) {
    std::string out;
    for (const MemoryEntry& e : view) {
        out += nlohmann::json(e).dump();
        out += '\n';
    }
    return out;
}

void persist(const MemoryView& view, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write memory file " + path.string());
    out << to_jsonl(view);
    if (!out) throw std::runtime_error("write failed for memory file " + path.string());
}

std::vector<MemoryEntry> load_memory(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(0, "cannot open memory file " + path.string());

    std::vector<MemoryEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        MemoryEntry e;
        try {
            e = nlohmann::json::parse(line).get<MemoryEntry>();
            e.validate();
        } catch (const std::exception& ex) {
            throw LoadError(line_no, ex.what());
        }
        if (e.k != entries.size() + 1)
            throw LoadError(line_no, fmt::format("clip index {} out of sequence (expected {})", e.k,
                                                 entries.size() + 1));
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace oem
