#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "uwstack/time.hpp"

namespace uwstack {

using EventId = std::uint64_t;
constexpr EventId kInvalidEvent = 0;

struct SchedulerConfig {
  Millis to_rx{10};       // RX queue polling period
  double jitter_bound_ms = 2.0;

  static SchedulerConfig from_env() {
    SchedulerConfig cfg;
    if (const char* v = std::getenv("to_rx_ms")) {
      long ms = std::strtol(v, nullptr, 10);
      if (ms > 0) cfg.to_rx = Millis(ms);
    }
    return cfg;
  }
};

// Single-threaded timed-event loop. Timer events and modem notifications both
// run in this one context; reception queues are drained every to_rx via
// run_polling. schedule/cancel are safe from any thread.
class EventScheduler {
 public:
  using Action = std::function<void()>;

  EventScheduler() = default;
  ~EventScheduler() { stop(); }

  EventScheduler(const EventScheduler&) = delete;
  EventScheduler& operator=(const EventScheduler&) = delete;

  void start() {
    std::lock_guard lk(mu_);
    if (running_ || shutdown_) return;
    running_ = true;
    loop_ = std::thread([this] { run_loop(); });
  }

  void stop() {
    {
      std::lock_guard lk(mu_);
      if (!running_) {
        shutdown_ = true;
        return;
      }
      running_ = false;
      shutdown_ = true;
    }
    cv_.notify_all();
    if (loop_.joinable()) loop_.join();
  }

  // Returns kInvalidEvent once the scheduler has been shut down.
  EventId schedule(Action action, Duration delay) {
    std::lock_guard lk(mu_);
    if (shutdown_) return kInvalidEvent;
    EventId id = next_id_++;
    TimePoint fire_at = now() + (delay.count() > 0 ? delay : Duration::zero());
    heap_.push(Entry{fire_at, id, std::move(action)});
    pending_.insert(id);
    cv_.notify_all();
    return id;
  }

  // True only if the event existed and had not fired; such an event never fires.
  bool cancel(EventId id) {
    bool hit = false;
    {
      std::lock_guard lk(mu_);
      auto it = pending_.find(id);
      if (it != pending_.end() && !cancelled_.count(id)) {
        cancelled_.insert(id);
        hit = true;
      }
    }
    if (hit) log_event("cancel", id);
    return hit;
  }

  // Error strings collected from polling drainers that threw.
  std::vector<std::string> drain_errors() const {
    std::lock_guard lk(err_mu_);
    return errors_;
  }

  void set_event_log(const std::string& path) {
    std::lock_guard lk(log_mu_);
    log_.emplace(path, std::ios::out | std::ios::trunc);
    log_origin_ = now();
  }

  // Periodic RX-queue polling. Each drainer empties one driver's reception
  // queue and dispatches its contents; ticks stay on the t0 + k*to_rx grid.
  class PollingRun {
   public:
    void stop() {
      if (flag_) flag_->store(true);
    }
    ~PollingRun() { stop(); }
    PollingRun(PollingRun&&) = default;
    PollingRun& operator=(PollingRun&&) = default;

   private:
    friend class EventScheduler;
    explicit PollingRun(std::shared_ptr<std::atomic<bool>> flag)
        : flag_(std::move(flag)) {}
    std::shared_ptr<std::atomic<bool>> flag_;
  };

  using Drainer = std::function<void()>;

  PollingRun run_polling(std::vector<Drainer> drainers, SchedulerConfig cfg) {
    auto stop_flag = std::make_shared<std::atomic<bool>>(false);
    auto state = std::make_shared<TickState>();
    state->drainers = std::move(drainers);
    state->period = cfg.to_rx;
    state->next_tick = now() + cfg.to_rx;
    schedule_tick(state, stop_flag);
    return PollingRun(stop_flag);
  }

 private:
  struct Entry {
    TimePoint fire_at;
    EventId id;  // also the insertion order: ties fire FIFO
    mutable Action action;

    bool operator>(const Entry& o) const {
      if (fire_at != o.fire_at) return fire_at > o.fire_at;
      return id > o.id;
    }
  };

  struct TickState {
    std::vector<Drainer> drainers;
    Millis period{10};
    TimePoint next_tick;
  };

  void schedule_tick(std::shared_ptr<TickState> st,
                     std::shared_ptr<std::atomic<bool>> stop_flag) {
    Duration delay = st->next_tick - now();
    schedule(
        [this, st, stop_flag] {
          if (stop_flag->load()) return;
          for (auto& d : st->drainers) {
            try {
              d();
            } catch (const std::exception& e) {
              std::lock_guard lk(err_mu_);
              errors_.emplace_back(e.what());
            }
          }
          st->next_tick += st->period;
          // catch up rather than pile up after a stall
          TimePoint t = now();
          while (st->next_tick + st->period < t) st->next_tick += st->period;
          schedule_tick(st, stop_flag);
        },
        delay);
  }

  void run_loop() {
    std::unique_lock lk(mu_);
    while (running_) {
      if (heap_.empty()) {
        cv_.wait(lk, [this] { return !running_ || !heap_.empty(); });
        continue;
      }
      TimePoint next = heap_.top().fire_at;
      if (now() < next) {
        cv_.wait_until(lk, next);
        continue;
      }
      // collect everything due, then run unlocked in order
      std::vector<Entry> due;
      TimePoint t = now();
      while (!heap_.empty() && heap_.top().fire_at <= t) {
        Entry e = std::move(const_cast<Entry&>(heap_.top()));
        heap_.pop();
        pending_.erase(e.id);
        if (cancelled_.erase(e.id)) continue;
        due.push_back(std::move(e));
      }
      lk.unlock();
      for (auto& e : due) {
        log_event("fire", e.id);
        e.action();
      }
      lk.lock();
    }
  }

  void log_event(const char* ev, EventId id) {
    std::lock_guard lk(log_mu_);
    if (!log_) return;
    *log_ << "{\"t_ms\":" << to_ms(now() - log_origin_) << ",\"ev\":\"" << ev
          << "\",\"id\":" << id << "}\n";
  }

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap_;
  std::unordered_set<EventId> pending_;
  std::unordered_set<EventId> cancelled_;
  EventId next_id_ = 1;
  bool running_ = false;
  bool shutdown_ = false;
  std::thread loop_;

  mutable std::mutex err_mu_;
  std::vector<std::string> errors_;

  std::mutex log_mu_;
  std::optional<std::ofstream> log_;
  TimePoint log_origin_{};
};

}  // namespace uwstack
