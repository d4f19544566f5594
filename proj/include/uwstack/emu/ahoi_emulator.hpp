#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include "uwstack/connector.hpp"
#include "uwstack/emu/channel.hpp"
#include "uwstack/modem/ahoi_codec.hpp"

namespace uwstack {

struct AhoiEmulatorConfig {
  std::string listen = "pipe://ahoi0";
  NodeAddress addr = 1;
  std::size_t max_payload = 32;
  Millis accept_timeout{30000};
};

// Emulated serial peer for the low-rate modem: forwards DLE frames through
// the medium (260 bit/s by default, set on the medium) and answers ACK
// frames when the sender asked for one. Bad-CRC frames are dropped silently.
class AhoiEmulator : public MediumClient {
 public:
  AhoiEmulator(AhoiEmulatorConfig cfg, std::shared_ptr<Medium> medium)
      : cfg_(std::move(cfg)), medium_(std::move(medium)) {}

  ~AhoiEmulator() override { stop(); }

  void start() {
    if (running_.exchange(true)) return;
    medium_->attach(cfg_.addr, this);
    started_.store(true);
    service_ = std::thread([this] { serve(); });
  }

  void stop() {
    running_.store(false);
    if (service_.joinable()) service_.join();
    if (started_.exchange(false)) medium_->detach(cfg_.addr);
    std::lock_guard lk(mu_);
    if (conn_) conn_->close();
  }

  std::uint64_t crc_errors() const { return crc_errors_.load(); }

 private:
  void serve() {
    std::unique_ptr<Connection> conn;
    try {
      conn = open_endpoint(Endpoint::parse(cfg_.listen), cfg_.accept_timeout);
    } catch (const std::exception&) {
      running_.store(false);
      return;
    }
    {
      std::lock_guard lk(mu_);
      conn_ = std::move(conn);
    }
    while (running_.load()) {
      Connection* c;
      {
        std::lock_guard lk(mu_);
        c = conn_.get();
      }
      auto data = c->read_available(4096);
      if (!data) break;
      if (data->empty()) {
        std::this_thread::sleep_for(Millis(1));
        continue;
      }
      for (auto& f : decoder_.feed(*data)) {
        if (f.type != kAhoiTypeData) continue;  // modems do not relay ACK writes
        if (f.payload.size() > cfg_.max_payload) continue;
        MediumTx tx;
        tx.src = cfg_.addr;
        tx.dst = f.dst == 0xFF ? kBroadcast : f.dst;
        tx.payload_len = f.payload.size();
        tx.data = ahoi_encode(f, 255);
        tx.cls = TrafficClass::IM;
        tx.confirm = ConfirmPolicy::None;  // reliability is the ACK frame
        if (tx.dst == kBroadcast) continue;  // point-to-point only for now
        medium_->transmit(tx);
      }
      crc_errors_.store(decoder_.crc_errors());
    }
  }

  // medium timeline context
  void on_medium_receive(NodeAddress src, NodeAddress, const Bytes& data,
                         TrafficClass, bool) override {
    write_raw(data);
    AhoiDecoder d;
    for (auto& f : d.feed(data)) {
      if (f.type == kAhoiTypeData && (f.flags & kAhoiFlagAckReq)) {
        AhoiFrame ack;
        ack.src = static_cast<std::uint8_t>(cfg_.addr & 0xFF);
        ack.dst = f.src;
        ack.type = kAhoiTypeAck;
        ack.seq = f.seq;
        medium_->send_control(cfg_.addr, src, ahoi_encode(ack, 255));
      }
    }
  }

  void on_medium_confirm(NodeAddress, TrafficClass, bool, std::uint64_t) override {}

  void write_raw(const Bytes& b) {
    Connection* c;
    {
      std::lock_guard lk(mu_);
      c = conn_.get();
    }
    if (!c) return;
    try {
      c->write_bytes(b);
    } catch (const ConnectorError&) {
    }
  }

  AhoiEmulatorConfig cfg_;
  std::shared_ptr<Medium> medium_;
  std::atomic<bool> running_{false};
  std::atomic<bool> started_{false};
  std::thread service_;
  AhoiDecoder decoder_;
  std::atomic<std::uint64_t> crc_errors_{0};

  std::mutex mu_;
  std::unique_ptr<Connection> conn_;
};

}  // namespace uwstack
