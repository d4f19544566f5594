#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "uwstack/crc16.hpp"
#include "uwstack/packet.hpp"

namespace uwstack {

// DLE-framed serial packet:
//   0x10 0x02 | src dst type flags seq len | payload | crc16 (BE) | 0x10 0x03
// CRC-16/CCITT-FALSE covers header+payload; every 0x10 in the stuffed region
// (header, payload, crc) is doubled.

constexpr std::uint8_t kDle = 0x10;
constexpr std::uint8_t kStx = 0x02;
constexpr std::uint8_t kEtx = 0x03;

constexpr std::uint8_t kAhoiTypeData = 0x00;
constexpr std::uint8_t kAhoiTypeAck = 0x01;
constexpr std::uint8_t kAhoiFlagAckReq = 0x01;

struct AhoiFrame {
  std::uint8_t src = 0;
  std::uint8_t dst = 0;
  std::uint8_t type = kAhoiTypeData;
  std::uint8_t flags = 0;
  std::uint8_t seq = 0;
  Bytes payload;

  bool operator==(const AhoiFrame& o) const {
    return src == o.src && dst == o.dst && type == o.type && flags == o.flags &&
           seq == o.seq && payload == o.payload;
  }
};

class AhoiFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Bytes ahoi_encode(const AhoiFrame& f, std::size_t max_payload = 32) {
  if (f.payload.size() > max_payload || f.payload.size() > 255)
    throw AhoiFormatError("payload " + std::to_string(f.payload.size()) +
                          " exceeds limit " + std::to_string(max_payload));
  Bytes content{f.src, f.dst, f.type, f.flags, f.seq,
                static_cast<std::uint8_t>(f.payload.size())};
  content.insert(content.end(), f.payload.begin(), f.payload.end());
  std::uint16_t crc = crc16_ccitt(content.data(), content.size());
  content.push_back(static_cast<std::uint8_t>(crc >> 8));
  content.push_back(static_cast<std::uint8_t>(crc & 0xFF));

  Bytes out{kDle, kStx};
  for (std::uint8_t b : content) {
    out.push_back(b);
    if (b == kDle) out.push_back(kDle);
  }
  out.push_back(kDle);
  out.push_back(kEtx);
  return out;
}

// Incremental decoder. Garbage before a start marker is skipped; frames with
// a bad CRC are dropped and counted.
class AhoiDecoder {
 public:
  std::vector<AhoiFrame> feed(const Bytes& chunk) {
    std::vector<AhoiFrame> out;
    for (std::uint8_t b : chunk) {
      switch (state_) {
        case State::Search:
          if (b == kDle) state_ = State::SearchDle;
          break;
        case State::SearchDle:
          if (b == kStx) {
            content_.clear();
            state_ = State::Content;
          } else if (b != kDle) {  // DLE DLE in garbage keeps waiting
            state_ = State::Search;
          }
          break;
        case State::Content:
          if (b == kDle) {
            state_ = State::ContentDle;
          } else {
            push_content(b);
          }
          break;
        case State::ContentDle:
          if (b == kDle) {
            push_content(kDle);
            state_ = State::Content;
          } else if (b == kEtx) {
            finish(out);
            state_ = State::Search;
          } else if (b == kStx) {
            // fresh start marker: abandon the partial frame
            ++framing_errors_;
            content_.clear();
            state_ = State::Content;
          } else {
            ++framing_errors_;
            content_.clear();
            state_ = State::Search;
          }
          break;
      }
    }
    return out;
  }

  std::uint64_t crc_errors() const { return crc_errors_; }
  std::uint64_t framing_errors() const { return framing_errors_; }

 private:
  enum class State { Search, SearchDle, Content, ContentDle };

  void push_content(std::uint8_t b) {
    if (content_.size() >= kMaxContent) {
      ++framing_errors_;
      content_.clear();
      state_ = State::Search;
      return;
    }
    content_.push_back(b);
  }

  void finish(std::vector<AhoiFrame>& out) {
    if (content_.size() < 8) {  // header + crc minimum
      ++framing_errors_;
      content_.clear();
      return;
    }
    std::size_t len = content_[5];
    if (content_.size() != 6 + len + 2) {
      ++framing_errors_;
      content_.clear();
      return;
    }
    std::uint16_t got = static_cast<std::uint16_t>(
        (content_[content_.size() - 2] << 8) | content_[content_.size() - 1]);
    std::uint16_t want = crc16_ccitt(content_.data(), content_.size() - 2);
    if (got != want) {
      ++crc_errors_;
      content_.clear();
      return;
    }
    AhoiFrame f;
    f.src = content_[0];
    f.dst = content_[1];
    f.type = content_[2];
    f.flags = content_[3];
    f.seq = content_[4];
    f.payload.assign(content_.begin() + 6,
                     content_.begin() + 6 + static_cast<long>(len));
    out.push_back(std::move(f));
    content_.clear();
  }

  static constexpr std::size_t kMaxContent = 6 + 255 + 2;

  State state_ = State::Search;
  Bytes content_;
  std::uint64_t crc_errors_ = 0;
  std::uint64_t framing_errors_ = 0;
};

}  // namespace uwstack
