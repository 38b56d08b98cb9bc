#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <iterator>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace oem {

struct MemoryEntry {
    std::size_t k = 0;
    double clip_start = 0.0;
    double clip_end = 0.0;
    std::string text;
    double gen_time = 0.0;  // seconds spent producing the description (amortized per clip)
    std::size_t output_tokens = 0;
    double tokens_per_second = 0.0;
    std::string backend_id;
    bool partial = false;
    std::optional<std::string> failure_reason;  // set for recorded backend failures and skipped clips

    bool failed() const noexcept { return failure_reason.has_value(); }
    void validate() const;

    bool operator==(const MemoryEntry&) const = default;
};

void to_json(nlohmann::json& j, const MemoryEntry& e);
void from_json(const nlohmann::json& j, MemoryEntry& e);

namespace detail {

// Fixed-capacity block; slots below the published length are never written again.
struct MemoryBlock {
    static constexpr std::size_t kCapacity = 256;
    std::vector<MemoryEntry> slots = std::vector<MemoryEntry>(kCapacity);
};

using MemoryDirectory = std::vector<std::shared_ptr<MemoryBlock>>;

}  // namespace detail

/// Immutable view of the first `size()` entries of a memory (optionally a
/// sub-range). Cheap to copy; reading never touches the writer's lock.
class MemoryView {
public:
    MemoryView() = default;

    std::size_t size() const noexcept { return end_ - begin_; }
    bool empty() const noexcept { return size() == 0; }
    const MemoryEntry& operator[](std::size_t i) const;

    // Entries [0, n) of this view.
    MemoryView prefix(std::size_t n) const;
    // Drops the first n entries of this view.
    MemoryView drop_front(std::size_t n) const;

    std::vector<MemoryEntry> to_vector() const;

    class iterator {
    public:
        using iterator_category = std::forward_iterator_tag;
        using value_type = MemoryEntry;
        using difference_type = std::ptrdiff_t;
        using pointer = const MemoryEntry*;
        using reference = const MemoryEntry&;

        iterator() = default;
        reference operator*() const { return (*view_)[i_]; }
        pointer operator->() const { return &(*view_)[i_]; }
        iterator& operator++() {
            ++i_;
            return *this;
        }
        iterator operator++(int) {
            auto tmp = *this;
            ++i_;
            return tmp;
        }
        bool operator==(const iterator& o) const { return i_ == o.i_; }

    private:
        friend class MemoryView;
        iterator(const MemoryView* v, std::size_t i) : view_(v), i_(i) {}
        const MemoryView* view_ = nullptr;
        std::size_t i_ = 0;
    };

    iterator begin() const { return iterator(this, 0); }
    iterator end() const { return iterator(this, size()); }

private:
    friend class TextualMemory;
    MemoryView(std::shared_ptr<const detail::MemoryDirectory> dir, std::size_t begin, std::size_t end)
        : dir_(std::move(dir)), begin_(begin), end_(end) {}

    std::shared_ptr<const detail::MemoryDirectory> dir_;
    std::size_t begin_ = 0;
    std::size_t end_ = 0;
};

/// Append-only ordered log of clip descriptions.
///
/// One writer appends; any number of readers take snapshots. Snapshot
/// creation and append publication are serialized by a short critical
/// section that only copies a pointer and a length.
class TextualMemory {
public:
    explicit TextualMemory(std::string stream_id = {});
    // Validates that `entries` are numbered 1..n.
    TextualMemory(std::string stream_id, const std::vector<MemoryEntry>& entries);

    TextualMemory(const TextualMemory&) = delete;
    TextualMemory& operator=(const TextualMemory&) = delete;

    const std::string& stream_id() const noexcept { return stream_id_; }

    // Returns the new length. Throws SequencingError unless entry.k == size() + 1.
    std::size_t append(MemoryEntry entry);

    MemoryView snapshot() const;
    std::size_t size() const;

    // Blocks until size() > n or the timeout elapses; returns the current size.
    std::size_t wait_for_growth(std::size_t n, std::chrono::milliseconds timeout) const;

private:
    std::string stream_id_;
    std::mutex write_mu_;
    mutable std::mutex mu_;
    mutable std::condition_variable grown_;
    std::shared_ptr<const detail::MemoryDirectory> dir_;
    std::size_t size_ = 0;
};

struct RenderOptions {
    bool timestamps = true;  // prefix each block with "[clip k | a–b s]"
};

/// One block per entry in index order, blocks separated by a blank line.
/// Failed entries keep their header so the timeline stays visible.
std::string render_context(const MemoryView& view, const RenderOptions& options = {});
std::string render_entry(const MemoryEntry& entry, const RenderOptions& options = {});

// JSONL, one entry per line.
void persist(const MemoryView& view, const std::filesystem::path& path);
std::string to_jsonl(const MemoryView& view);
// Throws LoadError with the 1-based line number of the first bad line.
std::vector<MemoryEntry> load_memory(const std::filesystem::path& path);

}  // namespace oem
