#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "uwstack/packet.hpp"

namespace uwstack {

// Socket-modem wire format. All integers big-endian.
//   TCP: u32 length (= 8 + payload) | u16 src | u16 dst | u32 seq | payload
//   UDP: u16 src | u16 dst | u32 seq | payload   (one packet per datagram)

constexpr std::size_t kCsaHeaderSize = 8;
constexpr std::size_t kCsaMaxUdpPayload = 65507 - kCsaHeaderSize;
constexpr std::size_t kCsaMaxTcpPayload = 1 << 24;

class CsaFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

inline void put_u32(Bytes& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 24));
  b.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  b.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  b.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

}  // namespace detail

inline Bytes csa_encode(const Packet& p, bool udp = false) {
  std::size_t cap = udp ? kCsaMaxUdpPayload : kCsaMaxTcpPayload;
  if (p.payload.size() > cap)
    throw CsaFormatError("payload " + std::to_string(p.payload.size()) +
                         " exceeds limit " + std::to_string(cap));
  Bytes out;
  out.reserve(12 + p.payload.size());
  if (!udp)
    detail::put_u32(out, static_cast<std::uint32_t>(kCsaHeaderSize + p.payload.size()));
  detail::put_u16(out, p.src);
  detail::put_u16(out, p.dst);
  detail::put_u32(out, p.seq);
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  return out;
}

inline std::optional<Packet> csa_decode_datagram(const Bytes& dgram) {
  if (dgram.size() < kCsaHeaderSize) return std::nullopt;
  Packet p;
  p.src = detail::get_u16(dgram.data());
  p.dst = detail::get_u16(dgram.data() + 2);
  p.seq = detail::get_u32(dgram.data() + 4);
  p.tclass = TrafficClass::DATAGRAM;
  p.payload.assign(dgram.begin() + kCsaHeaderSize, dgram.end());
  return p;
}

// Incremental TCP-stream decoder; a truncated message stays buffered.
class CsaDecoder {
 public:
  std::vector<Packet> feed(const Bytes& chunk) {
    buf_.insert(buf_.end(), chunk.begin(), chunk.end());
    std::vector<Packet> out;
    while (buf_.size() >= 4) {
      std::uint32_t msg_len = detail::get_u32(buf_.data());
      if (msg_len < kCsaHeaderSize || msg_len > kCsaHeaderSize + kCsaMaxTcpPayload) {
        ++framing_errors_;
        buf_.clear();  // stream is desynchronized beyond repair
        break;
      }
      if (buf_.size() < 4 + msg_len) break;
      Packet p;
      p.src = detail::get_u16(buf_.data() + 4);
      p.dst = detail::get_u16(buf_.data() + 6);
      p.seq = detail::get_u32(buf_.data() + 8);
      p.tclass = TrafficClass::DATAGRAM;
      p.payload.assign(buf_.begin() + 4 + kCsaHeaderSize,
                       buf_.begin() + 4 + static_cast<long>(msg_len));
      out.push_back(std::move(p));
      buf_.erase(buf_.begin(), buf_.begin() + 4 + static_cast<long>(msg_len));
    }
    return out;
  }

  const Bytes& residual() const { return buf_; }
  std::uint64_t framing_errors() const { return framing_errors_; }

 private:
  Bytes buf_;
  std::uint64_t framing_errors_ = 0;
};

}  // namespace uwstack
