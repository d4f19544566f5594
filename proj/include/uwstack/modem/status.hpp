#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uwstack/packet.hpp"

namespace uwstack {

enum class GeneralState : std::uint8_t { AVAILABLE, TRANSMITTING, CONFIGURING };
enum class TxState : std::uint8_t { TX_IDLE, TX_WAITING };

inline const char* to_cstr(GeneralState s) {
  switch (s) {
    case GeneralState::AVAILABLE: return "AVAILABLE";
    case GeneralState::TRANSMITTING: return "TRANSMITTING";
    case GeneralState::CONFIGURING: return "CONFIGURING";
  }
  return "?";
}

inline const char* to_cstr(TxState s) {
  return s == TxState::TX_IDLE ? "TX_IDLE" : "TX_WAITING";
}

struct OutstandingCommand {
  Packet packet;       // the packet (or config surrogate) awaiting confirmation
  bool is_config = false;
};

// The (S, S_TX) pair plus the single outstanding-command slot.
struct ModemStatus {
  GeneralState s = GeneralState::AVAILABLE;
  TxState s_tx = TxState::TX_IDLE;
  std::optional<OutstandingCommand> outstanding;

  bool idle() const {
    return s == GeneralState::AVAILABLE && s_tx == TxState::TX_IDLE;
  }
};

enum class DriverEventKind : std::uint8_t {
  TX_REQUEST,
  DEVICE_OK,
  DEVICE_DELIVERED,
  DEVICE_FAILED,
  DEVICE_RECV,
  CONFIG_REQUEST,
  CONFIG_DONE,
  TRANSPORT_ERROR,
};

inline const char* to_cstr(DriverEventKind k) {
  switch (k) {
    case DriverEventKind::TX_REQUEST: return "TX_REQUEST";
    case DriverEventKind::DEVICE_OK: return "DEVICE_OK";
    case DriverEventKind::DEVICE_DELIVERED: return "DEVICE_DELIVERED";
    case DriverEventKind::DEVICE_FAILED: return "DEVICE_FAILED";
    case DriverEventKind::DEVICE_RECV: return "DEVICE_RECV";
    case DriverEventKind::CONFIG_REQUEST: return "CONFIG_REQUEST";
    case DriverEventKind::CONFIG_DONE: return "CONFIG_DONE";
    case DriverEventKind::TRANSPORT_ERROR: return "TRANSPORT_ERROR";
  }
  return "?";
}

// Input to the driver state machines; kind determines which fields are set.
struct DriverEventIn {
  DriverEventIn() = default;
  explicit DriverEventIn(DriverEventKind k) : kind(k) {}

  DriverEventKind kind = DriverEventKind::TX_REQUEST;
  std::optional<Packet> packet;   // TX_REQUEST / DEVICE_RECV
  NodeAddress addr = 0;           // DELIVERED/FAILED destination echo
  std::uint32_t seq = 0;          // ACK sequence echo (AHOI)
  std::string note;               // raw notification text / error detail
};

enum class DriverActionKind : std::uint8_t {
  EMIT_COMMAND,        // format and write the outstanding packet
  EMIT_CONFIG,         // write the pending config command
  NOTIFY_DELIVERED,
  NOTIFY_FAILED,
  DELIVER_UP,          // hand a received packet to the reception queue
  TRY_NEXT,            // attempt the next queued packet
  CONFIG_COMPLETE,
  PROTOCOL_VIOLATION,  // illegal (state, event) pair, logged, state unchanged
};

struct DriverAction {
  DriverActionKind kind;
  std::optional<Packet> packet;
  std::string note;
};

struct StepResult {
  ModemStatus status;
  std::vector<DriverAction> actions;
};

// General machine S. Total over all (state, event) pairs: anything not a
// listed transition yields PROTOCOL_VIOLATION or is absorbed (see below).
inline StepResult step_general(const ModemStatus& st, const DriverEventIn& ev) {
  StepResult r{st, {}};
  auto violation = [&](const char* what) {
    r.actions.push_back({DriverActionKind::PROTOCOL_VIOLATION, std::nullopt, what});
  };

  switch (ev.kind) {
    case DriverEventKind::TX_REQUEST:
      if (st.s == GeneralState::AVAILABLE) {
        r.status.s = GeneralState::TRANSMITTING;
        r.actions.push_back({DriverActionKind::EMIT_COMMAND, ev.packet, {}});
      }
      // while TRANSMITTING/CONFIGURING the packet just stays queued
      break;
    case DriverEventKind::DEVICE_DELIVERED:
    case DriverEventKind::DEVICE_FAILED:
      if (st.s == GeneralState::TRANSMITTING) {
        r.status.s = GeneralState::AVAILABLE;
        r.actions.push_back({ev.kind == DriverEventKind::DEVICE_DELIVERED
                                 ? DriverActionKind::NOTIFY_DELIVERED
                                 : DriverActionKind::NOTIFY_FAILED,
                             std::nullopt, {}});
        r.actions.push_back({DriverActionKind::TRY_NEXT, std::nullopt, {}});
      } else {
        violation("delivery notification while not TRANSMITTING");
      }
      break;
    case DriverEventKind::CONFIG_REQUEST:
      if (st.s == GeneralState::AVAILABLE) {
        r.status.s = GeneralState::CONFIGURING;
        r.actions.push_back({DriverActionKind::EMIT_CONFIG, std::nullopt, ev.note});
      }
      // otherwise deferred: stays pending until AVAILABLE
      break;
    case DriverEventKind::CONFIG_DONE:
      if (st.s == GeneralState::CONFIGURING) {
        r.status.s = GeneralState::AVAILABLE;
        r.actions.push_back({DriverActionKind::CONFIG_COMPLETE, std::nullopt, {}});
        r.actions.push_back({DriverActionKind::TRY_NEXT, std::nullopt, {}});
      } else {
        violation("CONFIG_DONE while not CONFIGURING");
      }
      break;
    case DriverEventKind::DEVICE_RECV:
      // reception is orthogonal to S
      r.actions.push_back({DriverActionKind::DELIVER_UP, ev.packet, {}});
      break;
    case DriverEventKind::DEVICE_OK:
      // handled by the TX machine; no S transition
      break;
    case DriverEventKind::TRANSPORT_ERROR:
      // failure-safe: abort any in-flight command, report it, return to idle
      if (st.s != GeneralState::AVAILABLE) {
        r.status.s = GeneralState::AVAILABLE;
        r.actions.push_back({DriverActionKind::NOTIFY_FAILED, std::nullopt, ev.note});
      }
      break;
  }
  return r;
}

// Transmission-flow machine S_TX. `confirm` tells whether this driver treats
// the event as the stop-and-wait confirmation (per-driver definition).
inline ModemStatus step_tx(const ModemStatus& st, const DriverEventIn& ev,
                           bool confirm) {
  ModemStatus out = st;
  switch (ev.kind) {
    case DriverEventKind::TX_REQUEST:
      if (st.s_tx == TxState::TX_IDLE && ev.packet) {
        out.s_tx = TxState::TX_WAITING;
        out.outstanding = OutstandingCommand{*ev.packet, false};
      }
      // TX_WAITING: request stays queued; never two outstanding
      break;
    case DriverEventKind::DEVICE_OK:
    case DriverEventKind::DEVICE_DELIVERED:
    case DriverEventKind::DEVICE_FAILED:
      if (st.s_tx == TxState::TX_WAITING && confirm) {
        out.s_tx = TxState::TX_IDLE;
        out.outstanding.reset();
      }
      break;
    case DriverEventKind::TRANSPORT_ERROR:
      out.s_tx = TxState::TX_IDLE;
      out.outstanding.reset();
      break;
    default:
      break;
  }
  return out;
}

}  // namespace uwstack
