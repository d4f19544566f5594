#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "uwstack/packet.hpp"

namespace uwstack {

// One multi-destination rule: an inclusive destination range (or the
// catch-all default) mapped to a stack id. First matching rule wins.
struct RouteRule {
  bool all = false;  // dst-range = *
  NodeAddress lo = 0;
  NodeAddress hi = 0;
  std::string stack_id;
};

inline std::optional<std::string> multidest_route(
    NodeAddress dst, const std::vector<RouteRule>& rules) {
  for (const auto& r : rules) {
    if (r.all || (dst >= r.lo && dst <= r.hi)) return r.stack_id;
  }
  return std::nullopt;  // no-route: caller drops the packet with notification
}

}  // namespace uwstack
