#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "uwstack/modem/ahoi_driver.hpp"
#include "uwstack/modem/csa_driver.hpp"
#include "uwstack/modem/s2c_driver.hpp"
#include "uwstack/net/app_codec.hpp"
#include "uwstack/net/routing.hpp"
#include "uwstack/scheduler.hpp"
#include "uwstack/util/config.hpp"

namespace uwstack {

struct StackSpec {
  std::string id;
  std::string kind;  // s2c | ahoi | csa-tcp | csa-udp
  std::string endpoint;
  ConfigDoc::Table params;
};

struct AppSpec {
  std::string ingest;           // tcps:// or udp:// listener; empty = none
  std::size_t packet_size = 64; // driver payload incl. app header
  NodeAddress default_dst = 0;
};

struct NodeConfig {
  NodeAddress address = 0;
  std::vector<StackSpec> stacks;
  std::vector<RouteRule> routes;
  AppSpec app;
  SchedulerConfig sched = SchedulerConfig::from_env();

  // Sections: [node] address, to_rx_ms; [[stack]] id/kind/endpoint + driver
  // params; [[route]] dst ("lo..hi" or "*") and stack; [app] ingest,
  // packet_size, default_dst.
  static NodeConfig from_doc(const ConfigDoc& doc) {
    NodeConfig cfg;
    if (const auto* node = doc.table("node")) {
      cfg.address = static_cast<NodeAddress>(ConfigDoc::get_int(*node, "address"));
      long to_rx = ConfigDoc::get_int(*node, "to_rx_ms", 0);
      if (to_rx > 0) cfg.sched.to_rx = Millis(to_rx);
    }
    for (const auto& t : doc.tables("stack")) {
      StackSpec s;
      s.id = ConfigDoc::get_str(t, "id");
      s.kind = ConfigDoc::get_str(t, "kind");
      s.endpoint = ConfigDoc::get_str(t, "endpoint");
      s.params = t;
      cfg.stacks.push_back(std::move(s));
    }
    for (const auto& t : doc.tables("route")) {
      RouteRule r;
      std::string dst = ConfigDoc::get_str(t, "dst", "*");
      if (dst == "*") {
        r.all = true;
      } else if (auto dots = dst.find(".."); dots != std::string::npos) {
        r.lo = static_cast<NodeAddress>(std::stoul(dst.substr(0, dots)));
        r.hi = static_cast<NodeAddress>(std::stoul(dst.substr(dots + 2)));
      } else {
        r.lo = r.hi = static_cast<NodeAddress>(std::stoul(dst));
      }
      r.stack_id = ConfigDoc::get_str(t, "stack");
      cfg.routes.push_back(std::move(r));
    }
    if (const auto* app = doc.table("app")) {
      cfg.app.ingest = ConfigDoc::get_str(*app, "ingest");
      cfg.app.packet_size =
          static_cast<std::size_t>(ConfigDoc::get_int(*app, "packet_size", 64));
      cfg.app.default_dst =
          static_cast<NodeAddress>(ConfigDoc::get_int(*app, "default_dst"));
    }
    return cfg;
  }

  static NodeConfig from_file(const std::string& path) {
    return from_doc(ConfigDoc::parse_file(path));
  }

  void validate() const {
    std::map<std::string, const StackSpec*> ids;
    for (const auto& s : stacks) {
      if (s.id.empty() || s.kind.empty() || s.endpoint.empty())
        throw std::invalid_argument("stack needs id, kind and endpoint");
      if (!ids.emplace(s.id, &s).second)
        throw std::invalid_argument("duplicate stack id: " + s.id);
    }
    for (const auto& r : routes)
      if (!ids.count(r.stack_id))
        throw std::invalid_argument("route targets unknown stack: " + r.stack_id);
    if (app.packet_size <= kAppHeaderSize)
      throw std::invalid_argument("packet_size must exceed the app header");
  }
};

// Builds the driver named by a stack spec. Throws on unknown kinds.
inline std::unique_ptr<ModemDriver> make_driver(const StackSpec& s,
                                                NodeAddress own) {
  const auto& t = s.params;
  if (s.kind == "s2c") {
    S2cDriverConfig c;
    c.name = s.id;
    c.endpoint = s.endpoint;
    c.own_address = own;
    c.limits.im_max =
        static_cast<std::size_t>(ConfigDoc::get_int(t, "im_max", 64));
    c.limits.burst_max =
        static_cast<std::size_t>(ConfigDoc::get_int(t, "burst_max", 512));
    c.max_payload = c.limits.burst_max;
    c.im_ack = ConfigDoc::get_bool(t, "im_ack", true);
    c.confirm_on = ConfigDoc::get_str(t, "confirm_on", "delivered") == "ok"
                       ? S2cConfirmOn::Ok
                       : S2cConfirmOn::Delivered;
    return std::make_unique<S2cDriver>(std::move(c));
  }
  if (s.kind == "ahoi") {
    AhoiDriverConfig c;
    c.name = s.id;
    c.endpoint = s.endpoint;
    c.own_address = own;
    c.max_payload =
        static_cast<std::size_t>(ConfigDoc::get_int(t, "max_payload", 32));
    c.ack_request = ConfigDoc::get_bool(t, "ack_request", true);
    c.max_retrans = static_cast<int>(ConfigDoc::get_int(t, "max_retrans", 0));
    c.bitrate = ConfigDoc::get_double(t, "bitrate", 260.0);
    c.distance = ConfigDoc::get_double(t, "distance", 5.0);
    c.sound_speed = ConfigDoc::get_double(t, "sound_speed", 1500.0);
    if (double ms = ConfigDoc::get_double(t, "ack_timeout_ms", 0); ms > 0)
      c.ack_timeout_ms = ms;
    return std::make_unique<AhoiDriver>(std::move(c));
  }
  if (s.kind == "csa-tcp" || s.kind == "csa-udp") {
    CsaDriverConfig c;
    c.name = s.id;
    c.endpoint = s.endpoint;
    c.own_address = own;
    c.udp = s.kind == "csa-udp";
    if (long mp = ConfigDoc::get_int(t, "max_payload", 0); mp > 0)
      c.max_payload = static_cast<std::size_t>(mp);
    return std::make_unique<CsaDriver>(std::move(c));
  }
  throw std::invalid_argument("unknown stack kind: " + s.kind);
}

enum class SendStatus { Ok, SelfDelivered, NoRoute, Backpressure, Oversize, NotRunning };

// One node: drivers + scheduler + application layer. Packets received for
// other destinations are re-routed through the multi-destination rules and
// forwarded (two-hop relaying).
class Node {
 public:
  explicit Node(NodeConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  ~Node() { stop(); }

  // Set before start(); invoked from the scheduler context.
  std::function<void(const Packet&, const std::string& stack_id)> on_packet;
  std::function<void(const Packet&, bool ok, const std::string& stack_id)> on_tx_result;
  std::function<void(Bytes stream, std::uint16_t stream_id, NodeAddress src)>
      on_stream_complete;

  // Instantiates and starts every stack; refuses to run if any fails.
  void start() {
    if (running_) return;
    for (const auto& spec : cfg_.stacks) {
      auto d = make_driver(spec, cfg_.address);
      drivers_.emplace_back(spec.id, std::move(d));
    }
    try {
      for (auto& [id, d] : drivers_) d->start();
    } catch (...) {
      for (auto& [id, d] : drivers_) d->stop();
      drivers_.clear();
      throw;
    }
    scheduler_.start();
    std::vector<EventScheduler::Drainer> drainers;
    for (auto& [id, d] : drivers_) {
      std::string stack_id = id;
      ModemDriver* drv = d.get();
      drainers.push_back([this, stack_id, drv] { drain_driver(stack_id, drv); });
    }
    polling_.emplace(scheduler_.run_polling(std::move(drainers), cfg_.sched));
    if (!cfg_.app.ingest.empty())
      ingest_thread_ = std::thread([this] { ingest_loop(); });
    running_ = true;
  }

  void stop() {
    if (!running_) return;
    running_ = false;
    if (polling_) polling_->stop();
    if (ingest_thread_.joinable()) ingest_thread_.join();
    for (auto& [id, d] : drivers_) d->stop();
    scheduler_.stop();
  }

  // Routes by destination; self-addressed packets never hit a driver.
  SendStatus send(Packet p) {
    if (p.dst == cfg_.address) {
      deliver_local(p, "local");
      return SendStatus::SelfDelivered;
    }
    auto stack_id = multidest_route(p.dst, cfg_.routes);
    if (!stack_id) {
      ++no_route_drops_;
      return SendStatus::NoRoute;
    }
    ModemDriver* d = stack(*stack_id);
    if (!d) return SendStatus::NoRoute;
    switch (d->enqueue_tx(std::move(p))) {
      case EnqueueResult::Accepted: return SendStatus::Ok;
      case EnqueueResult::Oversize: return SendStatus::Oversize;
      case EnqueueResult::Backpressure: return SendStatus::Backpressure;
      case EnqueueResult::NotRunning: return SendStatus::NotRunning;
    }
    return SendStatus::NotRunning;
  }

  // Chunks a stream and enqueues every packet (unpaced).
  SendStatus send_stream(const Bytes& data, NodeAddress dst,
                         std::uint16_t stream_id,
                         TrafficClass cls = TrafficClass::IM) {
    auto packets = app_chunk(data, cfg_.app.packet_size - kAppHeaderSize,
                             stream_id, cfg_.address, dst, cls, next_seq_);
    next_seq_ += static_cast<std::uint32_t>(packets.size());
    for (auto& p : packets) {
      SendStatus st = send(std::move(p));
      if (st != SendStatus::Ok && st != SendStatus::SelfDelivered) return st;
    }
    return SendStatus::Ok;
  }

  ModemDriver* stack(const std::string& id) {
    for (auto& [sid, d] : drivers_)
      if (sid == id) return d.get();
    return nullptr;
  }

  NodeAddress address() const { return cfg_.address; }
  const NodeConfig& config() const { return cfg_; }
  EventScheduler& scheduler() { return scheduler_; }
  std::uint64_t relay_drops() const { return relay_drops_.load(); }
  std::uint64_t no_route_drops() const { return no_route_drops_.load(); }
  std::uint64_t relayed() const { return relayed_.load(); }

 private:
  void drain_driver(const std::string& stack_id, ModemDriver* drv) {
    for (auto& item : drv->rx_queue().drain()) {
      switch (item.type) {
        case RxItem::Type::PacketReceived: {
          Packet& p = item.packet;
          if (p.dst == cfg_.address || p.dst == kBroadcast) {
            deliver_local(p, stack_id);
          } else {
            SendStatus st = send(p);  // two-hop forwarding
            if (st == SendStatus::Ok)
              ++relayed_;
            else
              ++relay_drops_;  // drop-new under backpressure, keeps order
          }
          break;
        }
        case RxItem::Type::TxResult:
          if (on_tx_result) on_tx_result(item.packet, item.ok, stack_id);
          break;
        case RxItem::Type::ConfigDone:
          break;
      }
    }
  }

  void deliver_local(const Packet& p, const std::string& stack_id) {
    if (on_packet) on_packet(p, stack_id);
    if (auto h = app_header_decode(p.payload)) {
      auto st = reassembler_.add(p);
      if (st.complete) {
        if (auto data = reassembler_.assemble(h->stream_id)) {
          if (on_stream_complete)
            on_stream_complete(std::move(*data), h->stream_id, p.src);
          reassembler_.reset(h->stream_id);
        }
      }
    }
  }

  // App ingest: a TCP connection is one stream (read to EOF); a UDP
  // datagram is one stream of its own.
  void ingest_loop() {
    try {
      Endpoint ep = Endpoint::parse(cfg_.app.ingest);
      auto conn = open_endpoint(ep, Millis(60000));
      Bytes acc;
      std::uint16_t sid = 1;
      while (running_) {
        auto data = conn->read_available(65536);
        if (!data) break;
        if (data->empty()) {
          std::this_thread::sleep_for(Millis(1));
          continue;
        }
        if (ep.kind == Endpoint::Kind::Udp) {
          send_stream(*data, cfg_.app.default_dst, sid++);
        } else {
          acc.insert(acc.end(), data->begin(), data->end());
        }
      }
      if (!acc.empty()) send_stream(acc, cfg_.app.default_dst, sid);
    } catch (const std::exception&) {
      // ingest is best-effort; the node keeps running
    }
  }

  NodeConfig cfg_;
  std::vector<std::pair<std::string, std::unique_ptr<ModemDriver>>> drivers_;
  EventScheduler scheduler_;
  std::optional<EventScheduler::PollingRun> polling_;
  std::thread ingest_thread_;
  AppReassembler reassembler_;  // scheduler context only
  std::uint32_t next_seq_ = 0;
  bool running_ = false;
  std::atomic<std::uint64_t> relay_drops_{0};
  std::atomic<std::uint64_t> no_route_drops_{0};
  std::atomic<std::uint64_t> relayed_{0};
};

}  // namespace uwstack
