#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <vector>

namespace uwstack {

// Bounded FIFO safe for multi-producer / single-consumer use (and more).
template <typename T>
class ConcurrentQueue {
 public:
  explicit ConcurrentQueue(std::size_t cap = 1000) : cap_(cap) {}

  // Returns false when the queue is at capacity (backpressure).
  bool try_push(T item) {
    {
      std::lock_guard lk(mu_);
      if (items_.size() >= cap_) return false;
      items_.push_back(std::move(item));
    }
    cv_.notify_one();
    return true;
  }

  std::optional<T> try_pop() {
    std::lock_guard lk(mu_);
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    return item;
  }

  // Removes everything currently queued, preserving FIFO order.
  std::vector<T> drain() {
    std::lock_guard lk(mu_);
    std::vector<T> out(std::make_move_iterator(items_.begin()),
                       std::make_move_iterator(items_.end()));
    items_.clear();
    return out;
  }

  std::size_t size() const {
    std::lock_guard lk(mu_);
    return items_.size();
  }

  bool empty() const { return size() == 0; }
  std::size_t capacity() const { return cap_; }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> items_;
  std::size_t cap_;
};

}  // namespace uwstack
