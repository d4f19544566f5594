#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "uwstack/connector.hpp"
#include "uwstack/modem/status.hpp"
#include "uwstack/packet.hpp"
#include "uwstack/queue.hpp"
#include "uwstack/time.hpp"

namespace uwstack {

// What the scheduler finds when it drains a driver's reception queue.
struct RxItem {
  enum class Type { PacketReceived, TxResult, ConfigDone };

  Type type = Type::PacketReceived;
  Packet packet;          // received packet, or the transmitted one for TxResult
  bool ok = true;         // TxResult / ConfigDone outcome
  std::string note;
  TimePoint t{};          // when the driver produced the item
};

struct DriverConfig {
  std::string name = "modem0";
  std::string endpoint;             // connector URI
  NodeAddress own_address = 0;
  std::size_t max_payload = 64;
  std::size_t tx_queue_cap = 1000;
  Millis rx_poll{1};                // RX context read granularity
};

enum class EnqueueResult { Accepted, Oversize, Backpressure, NotRunning };

// Base modem driver: one connector, a TX emitter context, an RX reader
// context, the (S, S_TX) machines under a single driver lock, and a
// reception queue drained by the node scheduler.
class ModemDriver {
 public:
  explicit ModemDriver(DriverConfig cfg)
      : cfg_(std::move(cfg)), rx_items_(4096), tx_queue_cap_(cfg_.tx_queue_cap) {
    own_addr_.store(cfg_.own_address);
  }

  virtual ~ModemDriver() { stop(); }

  ModemDriver(const ModemDriver&) = delete;
  ModemDriver& operator=(const ModemDriver&) = delete;

  // Opens the connector and starts the TX/RX contexts. Throws ConnectorError.
  void start() {
    if (running_.exchange(true)) return;
    conn_ = open_endpoint(Endpoint::parse(cfg_.endpoint));
    on_started();
    tx_thread_ = std::thread([this] { tx_loop(); });
    rx_thread_ = std::thread([this] { rx_loop(); });
  }

  void stop() {
    if (!running_.exchange(false)) return;
    cmd_cv_.notify_all();
    if (tx_thread_.joinable()) tx_thread_.join();
    if (rx_thread_.joinable()) rx_thread_.join();
    if (conn_) conn_->close();
  }

  bool running() const { return running_.load(); }
  const DriverConfig& config() const { return cfg_; }
  NodeAddress address() const { return own_addr_.load(); }

  virtual std::size_t max_payload_for(TrafficClass) const {
    return cfg_.max_payload;
  }

  // FIFO; transmission starts whenever the machines are idle.
  EnqueueResult enqueue_tx(Packet p) {
    if (!running_.load()) return EnqueueResult::NotRunning;
    if (p.payload.size() > max_payload_for(p.tclass))
      return EnqueueResult::Oversize;
    if (!p.t_created) p.t_created = now();
    {
      std::lock_guard lk(mu_);
      if (tx_queue_.size() >= tx_queue_cap_) return EnqueueResult::Backpressure;
      tx_queue_.push_back(std::move(p));
    }
    maybe_start_tx();
    return EnqueueResult::Accepted;
  }

  // Key-value device configuration; executed one command at a time.
  // Unknown keys are rejected locally and nothing is sent.
  virtual bool configure(const std::vector<std::pair<std::string, std::string>>& kv,
                         std::string* err = nullptr) {
    if (!kv.empty()) {
      if (err) *err = "unknown config key: " + kv.front().first;
      return false;
    }
    return true;
  }

  ConcurrentQueue<RxItem>& rx_queue() { return rx_items_; }

  ModemStatus status() const {
    std::lock_guard lk(mu_);
    return status_;
  }

  std::size_t tx_backlog() const {
    std::lock_guard lk(mu_);
    return tx_queue_.size();
  }

  std::uint64_t protocol_violations() const { return violations_.load(); }
  std::uint64_t parse_errors() const { return parse_errors_.load(); }

 protected:
  // Raw bytes for the device representing this packet.
  virtual Bytes format_packet(const Packet& p) = 0;

  // Feed device bytes to the interpreter; implementations call handle_event.
  virtual void on_rx_bytes(const Bytes& data) = 0;

  // Per-driver stop-and-wait confirmation rule.
  virtual bool event_confirms(const DriverEventIn& ev,
                              const OutstandingCommand& out) const = 0;

  // CSA uses only the S_TX machine.
  virtual bool uses_general_machine() const { return true; }

  // Confirmation is local write completion (CSA).
  virtual bool confirm_on_write() const { return false; }

  virtual void on_started() {}

  // Called from the RX context every rx_poll; AHOI uses it for ACK timeouts.
  virtual void on_rx_tick() {}

  void set_address(NodeAddress a) { own_addr_.store(a); }

  // Runs both state machines and executes the resulting actions.
  void handle_event(const DriverEventIn& ev) {
    std::vector<DriverAction> actions;
    std::optional<Packet> prev_outstanding;
    {
      std::lock_guard lk(mu_);
      step_locked(ev, actions, prev_outstanding);
    }
    run_actions(actions, ev, prev_outstanding);
  }

  // Bytes queued for the TX context to write.
  void emit_bytes(Bytes b) {
    {
      std::lock_guard lk(cmd_mu_);
      cmd_queue_.push_back({std::move(b), false});
    }
    cmd_cv_.notify_one();
  }

  void push_rx_item(RxItem item) {
    item.t = now();
    rx_items_.try_push(std::move(item));
  }

  void note_parse_error() { ++parse_errors_; }

  // Starts the next queued packet if both machines are idle. The pop and the
  // state step happen under one lock so no request can be absorbed mid-flight.
  void maybe_start_tx() {
    std::vector<DriverAction> actions;
    std::optional<Packet> prev_outstanding;
    std::optional<DriverEventIn> ev;
    {
      std::lock_guard lk(mu_);
      bool idle = status_.s_tx == TxState::TX_IDLE &&
                  (!uses_general_machine() || status_.s == GeneralState::AVAILABLE);
      if (!idle) return;
      if (!cfg_queue_.empty()) {  // configuration commands take precedence
        ev.emplace(DriverEventIn{DriverEventKind::CONFIG_REQUEST});
        ev->note = std::move(cfg_queue_.front());
        cfg_queue_.pop_front();
      } else if (!tx_queue_.empty()) {
        ev.emplace(DriverEventIn{DriverEventKind::TX_REQUEST});
        ev->packet = std::move(tx_queue_.front());
        tx_queue_.pop_front();
      } else {
        return;
      }
      step_locked(*ev, actions, prev_outstanding);
    }
    run_actions(actions, *ev, prev_outstanding);
  }

  // Queues raw device commands, emitted one at a time through CONFIGURING.
  void request_config_commands(std::vector<std::string> cmds) {
    {
      std::lock_guard lk(mu_);
      for (auto& c : cmds) cfg_queue_.push_back(std::move(c));
    }
    maybe_start_tx();
  }

  Connection* connection() { return conn_.get(); }
  mutable std::mutex mu_;
  ModemStatus status_;

 private:
  struct CmdEntry {
    Bytes bytes;
    bool confirm_after;  // synthesize DEVICE_OK once written (CSA)
  };

  // Requires mu_ held.
  void step_locked(const DriverEventIn& ev, std::vector<DriverAction>& actions,
                   std::optional<Packet>& prev_outstanding) {
    bool confirm =
        status_.outstanding && event_confirms(ev, *status_.outstanding);
    if (status_.outstanding) prev_outstanding = status_.outstanding->packet;

    ModemStatus after_tx = step_tx(status_, ev, confirm);
    if (uses_general_machine()) {
      StepResult r = step_general(status_, ev);
      status_.s = r.status.s;
      actions = std::move(r.actions);
    } else {
      actions = csa_actions(status_, ev, confirm);
    }
    status_.s_tx = after_tx.s_tx;
    status_.outstanding = after_tx.outstanding;
  }

  static std::vector<DriverAction> csa_actions(const ModemStatus& st,
                                               const DriverEventIn& ev,
                                               bool confirm) {
    std::vector<DriverAction> a;
    switch (ev.kind) {
      case DriverEventKind::TX_REQUEST:
        if (st.s_tx == TxState::TX_IDLE)
          a.push_back({DriverActionKind::EMIT_COMMAND, ev.packet, {}});
        break;
      case DriverEventKind::DEVICE_OK:
      case DriverEventKind::DEVICE_DELIVERED:
        if (st.s_tx == TxState::TX_WAITING && confirm) {
          a.push_back({DriverActionKind::NOTIFY_DELIVERED, std::nullopt, {}});
          a.push_back({DriverActionKind::TRY_NEXT, std::nullopt, {}});
        }
        break;
      case DriverEventKind::DEVICE_FAILED:
        if (st.s_tx == TxState::TX_WAITING) {
          a.push_back({DriverActionKind::NOTIFY_FAILED, std::nullopt, ev.note});
          a.push_back({DriverActionKind::TRY_NEXT, std::nullopt, {}});
        }
        break;
      case DriverEventKind::DEVICE_RECV:
        a.push_back({DriverActionKind::DELIVER_UP, ev.packet, {}});
        break;
      case DriverEventKind::TRANSPORT_ERROR:
        if (st.s_tx == TxState::TX_WAITING)
          a.push_back({DriverActionKind::NOTIFY_FAILED, std::nullopt, ev.note});
        break;
      default:
        break;
    }
    return a;
  }

  void run_actions(const std::vector<DriverAction>& actions,
                   const DriverEventIn& ev,
                   const std::optional<Packet>& prev_outstanding) {
    for (const auto& a : actions) {
      switch (a.kind) {
        case DriverActionKind::EMIT_COMMAND: {
          Packet p = a.packet ? *a.packet : Packet{};
          p.t_sent = now();
          {
            std::lock_guard lk(mu_);
            if (status_.outstanding) status_.outstanding->packet.t_sent = p.t_sent;
          }
          Bytes b = format_packet(p);
          {
            std::lock_guard lk(cmd_mu_);
            cmd_queue_.push_back({std::move(b), confirm_on_write()});
          }
          cmd_cv_.notify_one();
          break;
        }
        case DriverActionKind::EMIT_CONFIG:
          emit_bytes(Bytes(a.note.begin(), a.note.end()));
          break;
        case DriverActionKind::NOTIFY_DELIVERED:
        case DriverActionKind::NOTIFY_FAILED: {
          RxItem item;
          item.type = RxItem::Type::TxResult;
          item.ok = a.kind == DriverActionKind::NOTIFY_DELIVERED;
          if (prev_outstanding) item.packet = *prev_outstanding;
          item.note = a.note;
          push_rx_item(std::move(item));
          break;
        }
        case DriverActionKind::DELIVER_UP: {
          if (!a.packet) break;
          RxItem item;
          item.type = RxItem::Type::PacketReceived;
          item.packet = *a.packet;
          item.packet.t_delivered = now();
          push_rx_item(std::move(item));
          break;
        }
        case DriverActionKind::TRY_NEXT:
          maybe_start_tx();
          break;
        case DriverActionKind::CONFIG_COMPLETE: {
          RxItem item;
          item.type = RxItem::Type::ConfigDone;
          item.ok = ev.note != "failed";
          push_rx_item(std::move(item));
          break;
        }
        case DriverActionKind::PROTOCOL_VIOLATION:
          ++violations_;
          break;
      }
    }
  }

  void tx_loop() {
    while (running_.load()) {
      CmdEntry entry;
      {
        std::unique_lock lk(cmd_mu_);
        cmd_cv_.wait(lk, [this] { return !running_.load() || !cmd_queue_.empty(); });
        if (!running_.load()) return;
        entry = std::move(cmd_queue_.front());
        cmd_queue_.pop_front();
      }
      try {
        conn_->write_bytes(entry.bytes);
        if (entry.confirm_after)
          handle_event(DriverEventIn{DriverEventKind::DEVICE_OK});
      } catch (const ConnectorError& e) {
        DriverEventIn ev{DriverEventKind::TRANSPORT_ERROR};
        ev.note = e.what();
        handle_event(ev);
      }
    }
  }

  void rx_loop() {
    bool eof_reported = false;
    while (running_.load()) {
      auto data = conn_->read_available(4096);
      if (!data) {
        if (!eof_reported) {
          eof_reported = true;
          DriverEventIn ev{DriverEventKind::TRANSPORT_ERROR};
          ev.note = "end of stream";
          handle_event(ev);
        }
        std::this_thread::sleep_for(cfg_.rx_poll);
        continue;
      }
      if (data->empty()) {
        on_rx_tick();
        std::this_thread::sleep_for(cfg_.rx_poll);
        continue;
      }
      on_rx_bytes(*data);
      on_rx_tick();
    }
  }

  DriverConfig cfg_;
  std::unique_ptr<Connection> conn_;
  std::atomic<bool> running_{false};
  std::atomic<NodeAddress> own_addr_{0};

  std::deque<Packet> tx_queue_;
  std::deque<std::string> cfg_queue_;

  std::mutex cmd_mu_;
  std::condition_variable cmd_cv_;
  std::deque<CmdEntry> cmd_queue_;

  ConcurrentQueue<RxItem> rx_items_;
  std::size_t tx_queue_cap_;
  std::thread tx_thread_, rx_thread_;
  std::atomic<std::uint64_t> violations_{0};
  std::atomic<std::uint64_t> parse_errors_{0};
};

}  // namespace uwstack
