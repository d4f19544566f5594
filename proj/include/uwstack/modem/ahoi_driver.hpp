#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uwstack/emu/channel.hpp"
#include "uwstack/modem/ahoi_codec.hpp"
#include "uwstack/modem/driver.hpp"

namespace uwstack {

struct AhoiDriverConfig : DriverConfig {
  AhoiDriverConfig() { max_payload = 32; }

  bool ack_request = true;  // ask the peer modem for a driver-level ACK
  int max_retrans = 0;      // retransmissions after ACK timeout, up to 3

  // link parameters used only to size the ACK timeout
  double bitrate = 260.0;
  double distance = 5.0;
  double sound_speed = 1500.0;
  std::size_t frame_overhead = 8;
  std::optional<double> ack_timeout_ms;  // overrides the computed value
};

// Serial-framed driver for the low-rate acoustic modem. One frame at a time;
// confirmation is a peer ACK frame matching the outstanding sequence number.
class AhoiDriver : public ModemDriver {
 public:
  explicit AhoiDriver(AhoiDriverConfig cfg)
      : ModemDriver(cfg), ahoi_cfg_(std::move(cfg)) {
    double airtime =
        tx_duration_s(ahoi_cfg_.max_payload, ahoi_cfg_.frame_overhead,
                      ahoi_cfg_.bitrate);
    double prop = prop_delay_s(ahoi_cfg_.distance, ahoi_cfg_.sound_speed);
    double timeout_s = ahoi_cfg_.ack_timeout_ms
                           ? *ahoi_cfg_.ack_timeout_ms / 1e3
                           : 2.0 * (airtime + 2.0 * prop + 0.1);
    ack_timeout_ = from_s(timeout_s);
  }

  std::uint64_t crc_errors() const { return decoder_copy_errors_.load(); }

  bool configure(const std::vector<std::pair<std::string, std::string>>& kv,
                 std::string* err = nullptr) override {
    for (const auto& [key, value] : kv) {
      if (key == "address") {
        set_address(static_cast<NodeAddress>(std::stoul(value)));
      } else {
        if (err) *err = "unknown config key: " + key;
        return false;
      }
    }
    return true;  // local-only settings, nothing goes to the device
  }

 protected:
  Bytes format_packet(const Packet& p) override {
    AhoiFrame f;
    f.src = static_cast<std::uint8_t>(address() & 0xFF);
    f.dst = static_cast<std::uint8_t>(p.dst & 0xFF);
    f.type = kAhoiTypeData;
    f.flags = ahoi_cfg_.ack_request ? kAhoiFlagAckReq : 0;
    f.seq = static_cast<std::uint8_t>(p.seq & 0xFF);
    f.payload = p.payload;
    Bytes encoded = ahoi_encode(f, ahoi_cfg_.max_payload);
    {
      std::lock_guard lk(retx_mu_);
      last_frame_ = encoded;
      retrans_left_ = ahoi_cfg_.max_retrans;
      deadline_ = now() + ack_timeout_;
      awaiting_ack_ = ahoi_cfg_.ack_request;
    }
    return encoded;
  }

  void on_rx_bytes(const Bytes& data) override {
    for (auto& f : decoder_.feed(data)) {
      bool for_us = f.dst == (address() & 0xFF) || f.dst == 0xFF;
      if (f.type == kAhoiTypeData) {
        // data frames go up regardless of address: the network layer
        // relays overheard frames bound elsewhere
        DriverEventIn ev{DriverEventKind::DEVICE_RECV};
        Packet p;
        p.src = f.src;
        p.dst = f.dst == 0xFF ? kBroadcast : f.dst;
        p.seq = f.seq;
        p.tclass = TrafficClass::IM;
        p.payload = std::move(f.payload);
        ev.packet = std::move(p);
        handle_event(ev);
      } else if (f.type == kAhoiTypeAck && for_us) {
        {
          std::lock_guard lk(retx_mu_);
          awaiting_ack_ = false;
        }
        DriverEventIn ev{DriverEventKind::DEVICE_DELIVERED};
        ev.addr = f.src;
        ev.seq = f.seq;
        handle_event(ev);
      }
    }
    decoder_copy_errors_.store(decoder_.crc_errors());
  }

  bool event_confirms(const DriverEventIn& ev,
                      const OutstandingCommand& out) const override {
    if (!ahoi_cfg_.ack_request) return ev.kind == DriverEventKind::DEVICE_OK;
    if (ev.kind == DriverEventKind::DEVICE_DELIVERED ||
        ev.kind == DriverEventKind::DEVICE_FAILED)
      return ev.seq == (out.packet.seq & 0xFF);
    return false;
  }

  bool confirm_on_write() const override { return !ahoi_cfg_.ack_request; }

  void on_rx_tick() override {
    Bytes resend;
    bool give_up = false;
    std::uint8_t seq = 0;
    {
      std::lock_guard lk(retx_mu_);
      if (!awaiting_ack_ || now() < deadline_) return;
      if (retrans_left_ > 0) {
        --retrans_left_;
        deadline_ = now() + ack_timeout_;
        resend = last_frame_;
      } else {
        awaiting_ack_ = false;
        give_up = true;
      }
    }
    if (!resend.empty()) {
      emit_bytes(std::move(resend));
      return;
    }
    if (give_up) {
      ModemStatus st = status();
      if (st.outstanding) seq = static_cast<std::uint8_t>(st.outstanding->packet.seq & 0xFF);
      DriverEventIn ev{DriverEventKind::DEVICE_FAILED};
      ev.seq = seq;
      ev.note = "ack timeout";
      handle_event(ev);
    }
  }

 private:
  AhoiDriverConfig ahoi_cfg_;
  AhoiDecoder decoder_;  // RX context only
  std::atomic<std::uint64_t> decoder_copy_errors_{0};

  std::mutex retx_mu_;
  Bytes last_frame_;
  int retrans_left_ = 0;
  bool awaiting_ack_ = false;
  TimePoint deadline_{};
  Duration ack_timeout_{};
};

}  // namespace uwstack
