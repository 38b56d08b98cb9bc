#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>

namespace oem {

// FIFO with a fixed capacity. push blocks while full; pop blocks while empty
// until close() is called, after which remaining items drain and pop returns
// nullopt.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

    // Returns true if the call had to wait for space.
    bool push(T item) {
        std::unique_lock lock(mu_);
        const bool waited = items_.size() >= capacity_ && !closed_;
        not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
        if (closed_) return waited;
        items_.push_back(std::move(item));
        lock.unlock();
        not_empty_.notify_one();
        return waited;
    }

    std::optional<T> pop() {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        lock.unlock();
        not_full_.notify_one();
        return item;
    }

    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        not_full_.notify_all();
        not_empty_.notify_all();
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return items_.size();
    }

    std::size_t capacity() const noexcept { return capacity_; }

private:
    const std::size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<T> items_;
    bool closed_ = false;
};

}  // namespace oem
