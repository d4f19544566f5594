#pragma once

#include <utility>

#include "uwstack/modem/csa_codec.hpp"
#include "uwstack/modem/driver.hpp"

namespace uwstack {

struct CsaDriverConfig : DriverConfig {
  CsaDriverConfig() { max_payload = kCsaMaxUdpPayload; }
  bool udp = false;
};

// End-to-end socket "modem". Only the S_TX machine is used: a packet goes out
// as soon as the flow is TX_IDLE and local write completion confirms it.
class CsaDriver : public ModemDriver {
 public:
  explicit CsaDriver(CsaDriverConfig cfg)
      : ModemDriver(cfg), csa_cfg_(std::move(cfg)) {}

 protected:
  Bytes format_packet(const Packet& p) override {
    return csa_encode(p, csa_cfg_.udp);
  }

  void on_rx_bytes(const Bytes& data) override {
    if (csa_cfg_.udp) {
      if (auto p = csa_decode_datagram(data)) deliver(std::move(*p));
      else note_parse_error();
      return;
    }
    for (auto& p : decoder_.feed(data)) deliver(std::move(p));
  }

  bool event_confirms(const DriverEventIn& ev,
                      const OutstandingCommand&) const override {
    return ev.kind == DriverEventKind::DEVICE_OK;
  }

  bool uses_general_machine() const override { return false; }
  bool confirm_on_write() const override { return true; }

 private:
  void deliver(Packet p) {
    DriverEventIn ev{DriverEventKind::DEVICE_RECV};
    ev.packet = std::move(p);
    handle_event(ev);
  }

  CsaDriverConfig csa_cfg_;
  CsaDecoder decoder_;  // RX context only
};

}  // namespace uwstack
