#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "uwstack/packet.hpp"
#include "uwstack/scheduler.hpp"
#include "uwstack/time.hpp"

namespace uwstack {

// Emulated link parameters. Rates in bit/s, distance in m, delays in ms.
struct ChannelConfig {
  double bitrate_im = 976.0;
  double bitrate_burst = 3246.0;
  double distance = 5.0;
  double sound_speed = 1500.0;
  double loss_prob = 0.0;
  std::size_t per_packet_overhead = 16;  // header+coding surrogate
  double proc_delay_ms = 120.0;          // command processing before airtime
  double confirm_delay_ms = 30.0;        // confirmation processing on return

  void validate() const {
    if (bitrate_im <= 0 || bitrate_burst <= 0)
      throw std::invalid_argument("bitrates must be > 0");
    if (loss_prob < 0 || loss_prob > 1)
      throw std::invalid_argument("loss_prob must be in [0,1]");
    if (distance < 0) throw std::invalid_argument("distance must be >= 0");
    if (sound_speed <= 0) throw std::invalid_argument("sound_speed must be > 0");
  }

  double bitrate_for(TrafficClass cls) const {
    return cls == TrafficClass::IM ? bitrate_im : bitrate_burst;
  }
};

inline double tx_duration_s(std::size_t payload_len, std::size_t overhead,
                            double bitrate) {
  if (bitrate <= 0) throw std::invalid_argument("bitrate must be > 0");
  return static_cast<double>(payload_len + overhead) * 8.0 / bitrate;
}

inline double prop_delay_s(double distance, double sound_speed) {
  if (sound_speed <= 0) throw std::invalid_argument("sound_speed must be > 0");
  return distance / sound_speed;
}

enum class ConfirmPolicy : std::uint8_t {
  None,        // fire-and-forget
  AtAirEnd,    // source is told when its transmitter goes idle
  AtDelivery,  // source is told after reception plus the return path
};

// Callbacks run on the medium's timeline thread; keep them short.
class MediumClient {
 public:
  virtual ~MediumClient() = default;
  // dst is the addressed destination; acoustic reception is promiscuous, so
  // a client may hear frames addressed to someone else.
  virtual void on_medium_receive(NodeAddress src, NodeAddress dst,
                                 const Bytes& data, TrafficClass cls,
                                 bool ack_flag) = 0;
  virtual void on_medium_confirm(NodeAddress dst, TrafficClass cls,
                                 bool delivered, std::uint64_t tag) = 0;
};

struct MediumTx {
  NodeAddress src = 0;
  NodeAddress dst = 0;
  Bytes data;
  std::size_t payload_len = 0;  // airtime basis; 0 means data.size()
  TrafficClass cls = TrafficClass::IM;
  ConfirmPolicy confirm = ConfirmPolicy::AtDelivery;
  bool ack_flag = false;        // surfaced to the receiver (RECVIM flag)
  std::uint64_t tag = 0;
};

class Medium {
 public:
  virtual ~Medium() = default;
  virtual void attach(NodeAddress addr, MediumClient* client) = 0;
  virtual void detach(NodeAddress addr) = 0;
  virtual void transmit(const MediumTx& tx) = 0;
  // Control traffic (driver-level ACKs): negligible airtime, not serialized.
  virtual void send_control(NodeAddress src, NodeAddress dst, Bytes data) = 0;
};

// Shared emulated channel with per-source serialization and its own event
// timeline, independent of any node-side scheduler.
class VirtualMedium : public Medium {
 public:
  explicit VirtualMedium(ChannelConfig defaults = {}, std::uint32_t seed = 1)
      : defaults_(defaults), rng_(seed) {
    defaults_.validate();
    timeline_.start();
  }

  ~VirtualMedium() override { timeline_.stop(); }

  void attach(NodeAddress addr, MediumClient* client) override {
    std::lock_guard lk(mu_);
    if (clients_.count(addr))
      throw std::invalid_argument("address already attached: " +
                                  std::to_string(addr));
    clients_[addr] = client;
  }

  void detach(NodeAddress addr) override {
    std::lock_guard lk(mu_);
    clients_.erase(addr);
  }

  void set_channel(const ChannelConfig& cfg) {
    cfg.validate();
    std::lock_guard lk(mu_);
    defaults_ = cfg;
  }

  // Symmetric unless both directions are set explicitly.
  void set_channel(NodeAddress a, NodeAddress b, const ChannelConfig& cfg) {
    cfg.validate();
    std::lock_guard lk(mu_);
    pair_cfg_[{a, b}] = cfg;
  }

  ChannelConfig channel(NodeAddress a, NodeAddress b) const {
    std::lock_guard lk(mu_);
    auto it = pair_cfg_.find({a, b});
    if (it != pair_cfg_.end()) return it->second;
    it = pair_cfg_.find({b, a});
    if (it != pair_cfg_.end()) return it->second;
    return defaults_;
  }

  // A transmission is heard by every other attached client (acoustic
  // broadcast); the addressed destination determines the delivery outcome
  // reported back to the source.
  void transmit(const MediumTx& tx) override {
    ChannelConfig cfg = channel(tx.src, tx.dst);
    std::size_t plen = tx.payload_len ? tx.payload_len : tx.data.size();
    double tx_dur =
        tx_duration_s(plen, cfg.per_packet_overhead, cfg.bitrate_for(tx.cls));
    double prop = prop_delay_s(cfg.distance, cfg.sound_speed);

    TimePoint t0 = now();
    TimePoint air_start;
    bool dst_known;
    bool lost;
    std::vector<NodeAddress> hearers;
    {
      std::lock_guard lk(mu_);
      TimePoint ready = t0 + from_s(cfg.proc_delay_ms / 1e3);
      TimePoint& busy = busy_until_[tx.src];
      air_start = std::max(ready, busy);
      busy = air_start + from_s(tx_dur);
      dst_known = clients_.count(tx.dst) > 0;
      lost = std::bernoulli_distribution(cfg.loss_prob)(rng_);
      if (lost) ++frames_lost_;
      ++frames_sent_;
      for (const auto& [addr, c] : clients_)
        if (addr != tx.src) hearers.push_back(addr);
    }
    TimePoint arrival = air_start + from_s(tx_dur + prop);
    TimePoint confirm_at =
        arrival + from_s(prop + cfg.confirm_delay_ms / 1e3);

    bool delivered = dst_known && !lost;
    if (!lost) {
      for (NodeAddress rcv : hearers) {
        ChannelConfig rcfg = channel(tx.src, rcv);
        double rprop = prop_delay_s(rcfg.distance, rcfg.sound_speed);
        MediumTx copy = tx;
        timeline_.schedule(
            [this, copy, rcv] {
              if (MediumClient* c = client_of(rcv))
                c->on_medium_receive(copy.src, copy.dst, copy.data, copy.cls,
                                     copy.ack_flag);
            },
            (air_start + from_s(tx_dur + rprop)) - t0);
      }
    }
    switch (tx.confirm) {
      case ConfirmPolicy::None:
        break;
      case ConfirmPolicy::AtAirEnd: {
        auto [src, dst, cls, tag] = std::tuple{tx.src, tx.dst, tx.cls, tx.tag};
        timeline_.schedule(
            [this, src, dst, cls, tag, delivered] {
              if (MediumClient* c = client_of(src))
                c->on_medium_confirm(dst, cls, delivered, tag);
            },
            (air_start + from_s(tx_dur)) - t0);
        break;
      }
      case ConfirmPolicy::AtDelivery: {
        auto [src, dst, cls, tag] = std::tuple{tx.src, tx.dst, tx.cls, tx.tag};
        timeline_.schedule(
            [this, src, dst, cls, tag, delivered] {
              if (MediumClient* c = client_of(src))
                c->on_medium_confirm(dst, cls, delivered, tag);
            },
            confirm_at - t0);
        break;
      }
    }
  }

  void send_control(NodeAddress src, NodeAddress dst, Bytes data) override {
    ChannelConfig cfg = channel(src, dst);
    bool lost;
    {
      std::lock_guard lk(mu_);
      lost = std::bernoulli_distribution(cfg.loss_prob)(rng_);
    }
    if (lost) return;
    double prop = prop_delay_s(cfg.distance, cfg.sound_speed);
    TrafficClass cls = TrafficClass::IM;
    timeline_.schedule(
        [this, src, dst, data = std::move(data), cls] {
          if (MediumClient* c = client_of(dst))
            c->on_medium_receive(src, dst, data, cls, false);
        },
        from_s(prop + cfg.confirm_delay_ms / 1e3));
  }

  std::uint64_t frames_sent() const {
    std::lock_guard lk(mu_);
    return frames_sent_;
  }
  std::uint64_t frames_lost() const {
    std::lock_guard lk(mu_);
    return frames_lost_;
  }

 private:
  MediumClient* client_of(NodeAddress addr) {
    std::lock_guard lk(mu_);
    auto it = clients_.find(addr);
    return it == clients_.end() ? nullptr : it->second;
  }

  mutable std::mutex mu_;
  ChannelConfig defaults_;
  std::map<std::pair<NodeAddress, NodeAddress>, ChannelConfig> pair_cfg_;
  std::map<NodeAddress, MediumClient*> clients_;
  std::map<NodeAddress, TimePoint> busy_until_;
  std::mt19937 rng_;
  std::uint64_t frames_sent_ = 0;
  std::uint64_t frames_lost_ = 0;
  EventScheduler timeline_;
};

// Named in-process mediums (shm://name in the CLI).
class MediumRegistry {
 public:
  static MediumRegistry& instance() {
    static MediumRegistry reg;
    return reg;
  }

  std::shared_ptr<VirtualMedium> get_or_create(const std::string& name,
                                               ChannelConfig defaults = {}) {
    std::lock_guard lk(mu_);
    auto& slot = mediums_[name];
    if (!slot) slot = std::make_shared<VirtualMedium>(defaults);
    return slot;
  }

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<VirtualMedium>> mediums_;
};

}  // namespace uwstack
