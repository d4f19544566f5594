#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "uwstack/time.hpp"

namespace uwstack {

// One benchmarked packet, timestamps on the shared steady clock.
struct TxRxRecord {
  std::uint64_t id = 0;
  std::size_t payload_bits = 0;
  TimePoint t_enqueued{};
  std::optional<TimePoint> t_sent;
  std::optional<TimePoint> t_delivered;
};

struct MetricsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Received throughput in bit/s over the delivered packets: total payload
// bits divided by the delivery span widened by one mean inter-arrival gap,
// so a single cycle of n packets measures n full cycles, not n-1.
inline double compute_rrx(const std::vector<TxRxRecord>& log) {
  std::vector<const TxRxRecord*> done;
  for (const auto& r : log)
    if (r.t_delivered) done.push_back(&r);
  if (done.size() < 2)
    throw MetricsError("throughput needs at least two delivered packets");
  auto [lo, hi] = std::minmax_element(
      done.begin(), done.end(),
      [](const TxRxRecord* a, const TxRxRecord* b) {
        return *a->t_delivered < *b->t_delivered;
      });
  double span = to_s(*(*hi)->t_delivered - *(*lo)->t_delivered);
  if (span <= 0) throw MetricsError("deliveries span zero time");
  double mean_gap = span / static_cast<double>(done.size() - 1);
  std::size_t bits = 0;
  for (const auto* r : done) bits += r->payload_bits;
  return static_cast<double>(bits) / (span + mean_gap);
}

// Mean data-delivery delay in seconds: enqueue to delivery, delivered
// packets only.
inline double compute_pdd(const std::vector<TxRxRecord>& log) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& r : log) {
    if (!r.t_delivered) continue;
    sum += to_s(*r.t_delivered - r.t_enqueued);
    ++n;
  }
  if (n == 0) throw MetricsError("delay needs at least one delivered packet");
  return sum / static_cast<double>(n);
}

inline double delivered_fraction(const std::vector<TxRxRecord>& log) {
  if (log.empty()) return 0;
  std::size_t n = 0;
  for (const auto& r : log)
    if (r.t_delivered) ++n;
  return static_cast<double>(n) / static_cast<double>(log.size());
}

// One JSON line per packet, times in seconds relative to the given origin.
inline void write_jsonl(const std::string& path,
                        const std::vector<TxRxRecord>& log, TimePoint origin) {
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) throw MetricsError("cannot open log file: " + path);
  auto rel = [origin](TimePoint t) { return to_s(t - origin); };
  for (const auto& r : log) {
    out << "{\"pkt\":" << r.id << ",\"t_enq\":" << rel(r.t_enqueued);
    if (r.t_sent) out << ",\"t_sent\":" << rel(*r.t_sent);
    if (r.t_delivered) out << ",\"t_dlv\":" << rel(*r.t_delivered);
    out << ",\"bits\":" << r.payload_bits << "}\n";
  }
}

}  // namespace uwstack
