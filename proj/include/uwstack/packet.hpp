#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uwstack/time.hpp"

namespace uwstack {

using Bytes = std::vector<std::uint8_t>;

inline Bytes to_bytes(const std::string& s) {
  return Bytes(s.begin(), s.end());
}

inline std::string to_string(const Bytes& b) {
  return std::string(b.begin(), b.end());
}

enum class TrafficClass : std::uint8_t { IM = 0, BURST = 1, DATAGRAM = 2 };

inline const char* to_cstr(TrafficClass t) {
  switch (t) {
    case TrafficClass::IM: return "IM";
    case TrafficClass::BURST: return "BURST";
    case TrafficClass::DATAGRAM: return "DATAGRAM";
  }
  return "?";
}

using NodeAddress = std::uint16_t;
constexpr NodeAddress kBroadcast = 0xFFFF;

// Unit of data moving through the stack.
struct Packet {
  NodeAddress src = 0;
  NodeAddress dst = 0;
  std::uint32_t seq = 0;
  TrafficClass tclass = TrafficClass::IM;
  Bytes payload;

  std::optional<TimePoint> t_created;
  std::optional<TimePoint> t_sent;
  std::optional<TimePoint> t_delivered;

  bool operator==(const Packet& o) const {
    return src == o.src && dst == o.dst && seq == o.seq && tclass == o.tclass &&
           payload == o.payload;
  }
};

}  // namespace uwstack
