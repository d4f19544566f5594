#pragma once

#include <string>
#include <utility>
#include <vector>

#include "uwstack/modem/driver.hpp"
#include "uwstack/modem/s2c_codec.hpp"

namespace uwstack {

// Which reply ends the stop-and-wait cycle for ack-mode IMs.
enum class S2cConfirmOn : std::uint8_t { Delivered, Ok };

struct S2cDriverConfig : DriverConfig {
  S2cLimits limits{};               // 64 B IM, 512 B burst
  bool im_ack = true;
  S2cConfirmOn confirm_on = S2cConfirmOn::Delivered;
};

// Command-mode driver: AT*SENDIM / AT*SEND over a socket connector, replies
// and asynchronous notifications decoded by the interpreter.
class S2cDriver : public ModemDriver {
 public:
  explicit S2cDriver(S2cDriverConfig cfg)
      : ModemDriver(cfg), s2c_cfg_(std::move(cfg)) {}

  std::size_t max_payload_for(TrafficClass cls) const override {
    return cls == TrafficClass::BURST ? s2c_cfg_.limits.burst_max
                                      : s2c_cfg_.limits.im_max;
  }

  bool configure(const std::vector<std::pair<std::string, std::string>>& kv,
                 std::string* err = nullptr) override {
    std::vector<std::string> cmds;
    for (const auto& [key, value] : kv) {
      if (key == "address") {
        NodeAddress a = static_cast<NodeAddress>(std::stoul(value));
        cmds.push_back(to_string(s2c_format_set_address(a)));
        set_address(a);
      } else {
        if (err) *err = "unknown config key: " + key;
        return false;
      }
    }
    request_config_commands(std::move(cmds));
    return true;
  }

 protected:
  Bytes format_packet(const Packet& p) override {
    return s2c_format(p, mode_for(p), s2c_cfg_.limits);
  }

  void on_rx_bytes(const Bytes& data) override {
    for (auto& n : parser_.feed(data)) {
      switch (n.type) {
        case S2cNotification::Type::Ok:
          if (status().s == GeneralState::CONFIGURING)
            handle_event(DriverEventIn{DriverEventKind::CONFIG_DONE});
          else
            handle_event(DriverEventIn{DriverEventKind::DEVICE_OK});
          break;
        case S2cNotification::Type::Error: {
          DriverEventIn ev{status().s == GeneralState::CONFIGURING
                               ? DriverEventKind::CONFIG_DONE
                               : DriverEventKind::DEVICE_FAILED};
          ev.note = ev.kind == DriverEventKind::CONFIG_DONE ? "failed" : n.text;
          handle_event(ev);
          break;
        }
        case S2cNotification::Type::DeliveredIm:
        case S2cNotification::Type::Delivered: {
          if (n.type == S2cNotification::Type::DeliveredIm &&
              s2c_cfg_.confirm_on == S2cConfirmOn::Ok)
            break;  // informational: the OK already confirmed
          DriverEventIn ev{DriverEventKind::DEVICE_DELIVERED};
          ev.addr = n.addr;
          handle_event(ev);
          break;
        }
        case S2cNotification::Type::FailedIm:
        case S2cNotification::Type::Failed: {
          if (n.type == S2cNotification::Type::FailedIm &&
              s2c_cfg_.confirm_on == S2cConfirmOn::Ok)
            break;
          DriverEventIn ev{DriverEventKind::DEVICE_FAILED};
          ev.addr = n.addr;
          handle_event(ev);
          break;
        }
        case S2cNotification::Type::RecvIm:
        case S2cNotification::Type::Recv: {
          DriverEventIn ev{DriverEventKind::DEVICE_RECV};
          ev.packet = std::move(n.packet);
          handle_event(ev);
          break;
        }
        case S2cNotification::Type::ParseError:
          note_parse_error();
          break;
      }
    }
  }

  bool event_confirms(const DriverEventIn& ev,
                      const OutstandingCommand& out) const override {
    if (ev.kind == DriverEventKind::DEVICE_FAILED) return true;
    switch (mode_for(out.packet)) {
      case S2cMode::ImAck:
        return s2c_cfg_.confirm_on == S2cConfirmOn::Ok
                   ? ev.kind == DriverEventKind::DEVICE_OK
                   : ev.kind == DriverEventKind::DEVICE_DELIVERED;
      case S2cMode::ImNoAck:
        return ev.kind == DriverEventKind::DEVICE_OK;
      case S2cMode::Burst:
        return ev.kind == DriverEventKind::DEVICE_DELIVERED;
    }
    return false;
  }

 private:
  S2cMode mode_for(const Packet& p) const {
    if (p.tclass == TrafficClass::BURST) return S2cMode::Burst;
    return s2c_cfg_.im_ack ? S2cMode::ImAck : S2cMode::ImNoAck;
  }

  S2cDriverConfig s2c_cfg_;
  S2cParser parser_;  // touched only by the RX context
};

}  // namespace uwstack
