#pragma once

#include <atomic>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include "uwstack/connector.hpp"
#include "uwstack/emu/channel.hpp"
#include "uwstack/modem/s2c_codec.hpp"

namespace uwstack {

struct S2cEmulatorConfig {
  std::string listen = "tcps://127.0.0.1:9200";
  NodeAddress addr = 1;
  std::size_t im_max = 64;
  std::size_t burst_max = 512;
  Millis accept_timeout{30000};
};

// Local command-mode device: accepts one client, speaks the dialect
// bit-exactly, and keeps its own AVAILABLE/TRANSMITTING state. A second
// in-flight IM or config command gets `ERROR busy`; burst transmissions are
// buffered internally and confirmed as they complete.
class S2cEmulator : public MediumClient {
 public:
  S2cEmulator(S2cEmulatorConfig cfg, std::shared_ptr<Medium> medium)
      : cfg_(std::move(cfg)), medium_(std::move(medium)) {}

  ~S2cEmulator() override { stop(); }

  void start() {
    if (running_.exchange(true)) return;
    medium_->attach(cfg_.addr, this);
    started_.store(true);
    attached_addr_ = cfg_.addr;
    service_ = std::thread([this] { serve(); });
  }

  void stop() {
    running_.store(false);
    if (service_.joinable()) service_.join();
    if (started_.exchange(false)) medium_->detach(attached_addr_);
    std::lock_guard lk(mu_);
    if (conn_) conn_->close();
  }

  NodeAddress address() const { return attached_addr_.load(); }

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
      auto data = conn_ptr()->read_available(4096);
      if (!data) break;  // client gone
      if (data->empty()) {
        std::this_thread::sleep_for(Millis(1));
        continue;
      }
      for (auto& cmd : parser_.feed(*data)) handle_command(cmd);
    }
  }

  void handle_command(S2cCommand& cmd) {
    switch (cmd.type) {
      case S2cCommand::Type::SendIm: {
        if (cmd.payload.size() > cfg_.im_max) {
          reply("ERROR length");
          return;
        }
        bool busy;
        {
          std::lock_guard lk(mu_);
          busy = im_busy_;
          if (!busy) {
            im_busy_ = true;
            im_ack_ = cmd.ack;
            im_dst_ = cmd.dst;
          }
        }
        if (busy) {
          reply("ERROR busy");
          return;
        }
        reply("OK");
        MediumTx tx;
        tx.src = attached_addr_.load();
        tx.dst = cmd.dst;
        tx.data = std::move(cmd.payload);
        tx.cls = TrafficClass::IM;
        tx.ack_flag = cmd.ack;
        // noack senders are released at air end, ack senders on delivery
        tx.confirm = cmd.ack ? ConfirmPolicy::AtDelivery : ConfirmPolicy::AtAirEnd;
        tx.tag = next_tag_++;
        medium_->transmit(tx);
        break;
      }
      case S2cCommand::Type::Send: {
        if (cmd.payload.size() > cfg_.burst_max) {
          reply("ERROR length");
          return;
        }
        // burst: stored in the internal buffer, sent as fast as possible
        reply("OK");
        MediumTx tx;
        tx.src = attached_addr_.load();
        tx.dst = cmd.dst;
        tx.data = std::move(cmd.payload);
        tx.cls = TrafficClass::BURST;
        tx.confirm = ConfirmPolicy::AtDelivery;
        tx.tag = next_tag_++;
        medium_->transmit(tx);
        break;
      }
      case S2cCommand::Type::SetAddress: {
        bool busy;
        {
          std::lock_guard lk(mu_);
          busy = im_busy_;
        }
        if (busy) {
          reply("ERROR busy");
          return;
        }
        NodeAddress old = attached_addr_.load();
        if (cmd.addr != old) {
          medium_->detach(old);
          try {
            medium_->attach(cmd.addr, this);
            attached_addr_.store(cmd.addr);
          } catch (const std::exception&) {
            medium_->attach(old, this);  // address taken, keep the old one
            reply("ERROR address in use");
            return;
          }
        }
        reply("OK");
        break;
      }
      case S2cCommand::Type::Syntax:
        reply("ERROR syntax");
        break;
    }
  }

  // medium timeline context
  void on_medium_receive(NodeAddress src, NodeAddress dst, const Bytes& data,
                         TrafficClass cls, bool ack_flag) override {
    std::string head;
    if (cls == TrafficClass::IM) {
      head = "RECVIM," + std::to_string(data.size()) + "," +
             std::to_string(src) + "," + std::to_string(dst) + "," +
             (ack_flag ? "ack," : "noack,");
    } else {
      head = "RECV," + std::to_string(data.size()) + "," + std::to_string(src) +
             "," + std::to_string(dst) + ",";
    }
    Bytes line(head.begin(), head.end());
    line.insert(line.end(), data.begin(), data.end());
    line.push_back('\r');
    line.push_back('\n');
    write_raw(line);
  }

  void on_medium_confirm(NodeAddress dst, TrafficClass cls, bool delivered,
                         std::uint64_t) override {
    if (cls == TrafficClass::IM) {
      bool ack;
      {
        std::lock_guard lk(mu_);
        ack = im_ack_;
        im_busy_ = false;
      }
      if (ack)
        reply((delivered ? "DELIVEREDIM," : "FAILEDIM,") + std::to_string(dst));
      // noack: the air-end confirm only frees the device
    } else {
      reply((delivered ? "DELIVERED," : "FAILED,") + std::to_string(dst));
    }
  }

  Connection* conn_ptr() {
    std::lock_guard lk(mu_);
    return conn_.get();
  }

  void reply(const std::string& line) { write_raw(to_bytes(line + "\r\n")); }

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
      // client went away; serve() will notice
    }
  }

  S2cEmulatorConfig cfg_;
  std::shared_ptr<Medium> medium_;
  std::atomic<bool> running_{false};
  std::atomic<bool> started_{false};
  std::atomic<NodeAddress> attached_addr_{0};
  std::thread service_;
  S2cCommandParser parser_;

  std::mutex mu_;
  std::unique_ptr<Connection> conn_;
  bool im_busy_ = false;
  bool im_ack_ = false;
  NodeAddress im_dst_ = 0;
  std::uint64_t next_tag_ = 1;
};

}  // namespace uwstack
