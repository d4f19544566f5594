#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "uwstack/packet.hpp"

namespace uwstack {

// Command-mode dialect, CRLF-terminated lines. Payloads are raw bytes whose
// length comes from the <len> field, so they may contain CR/LF.
//
//   AT*SENDIM,<len>,<dst>,<ack|noack>,<raw>      AT*SEND,<len>,<dst>,<raw>
//   AT!AL<addr>
//   OK | ERROR <text>
//   DELIVEREDIM,<dst> | FAILEDIM,<dst> | DELIVERED,<dst> | FAILED,<dst>
//   RECVIM,<len>,<src>,<dst>,<ack|noack>,<raw>   RECV,<len>,<src>,<dst>,<raw>

enum class S2cMode : std::uint8_t { ImAck, ImNoAck, Burst };

struct S2cLimits {
  std::size_t im_max = 64;
  std::size_t burst_max = 512;
};

class S2cFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Bytes s2c_format(const Packet& p, S2cMode mode, S2cLimits limits = {}) {
  std::size_t cap = (mode == S2cMode::Burst) ? limits.burst_max : limits.im_max;
  if (p.payload.size() > cap)
    throw S2cFormatError("payload " + std::to_string(p.payload.size()) +
                         " exceeds limit " + std::to_string(cap));
  std::string head;
  if (mode == S2cMode::Burst) {
    head = "AT*SEND," + std::to_string(p.payload.size()) + "," +
           std::to_string(p.dst) + ",";
  } else {
    head = "AT*SENDIM," + std::to_string(p.payload.size()) + "," +
           std::to_string(p.dst) + "," +
           (mode == S2cMode::ImAck ? "ack," : "noack,");
  }
  Bytes out(head.begin(), head.end());
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  out.push_back('\r');
  out.push_back('\n');
  return out;
}

inline Bytes s2c_format_set_address(NodeAddress addr) {
  std::string s = "AT!AL" + std::to_string(addr) + "\r\n";
  return Bytes(s.begin(), s.end());
}

struct S2cNotification {
  enum class Type {
    Ok,
    Error,        // text in `text`
    DeliveredIm,  // addr = dst echo
    FailedIm,
    Delivered,
    Failed,
    RecvIm,       // packet filled; text = ack|noack flag
    Recv,
    ParseError,   // text = offending bytes
  };

  Type type{};
  NodeAddress addr = 0;
  Packet packet;
  std::string text;
};

namespace detail {

// Incremental comma-field scanner over a byte buffer.
struct FieldCursor {
  const Bytes& buf;
  std::size_t pos;
  bool malformed = false;
  bool incomplete = false;

  // Unsigned decimal terminated by ','.
  std::uint64_t uint_field() {
    std::uint64_t v = 0;
    bool any = false;
    while (true) {
      if (pos >= buf.size()) {
        incomplete = true;
        return 0;
      }
      char c = static_cast<char>(buf[pos]);
      if (c == ',') {
        if (!any) malformed = true;
        ++pos;
        return v;
      }
      if (c < '0' || c > '9' || (pos - 0) > 10000) {
        malformed = true;
        return 0;
      }
      v = v * 10 + static_cast<std::uint64_t>(c - '0');
      if (v > 0xFFFFFFFFull) {
        malformed = true;
        return 0;
      }
      any = true;
      ++pos;
    }
  }

  // Lowercase word terminated by ','.
  std::string word_field() {
    std::string w;
    while (true) {
      if (pos >= buf.size()) {
        incomplete = true;
        return w;
      }
      char c = static_cast<char>(buf[pos]);
      if (c == ',') {
        ++pos;
        return w;
      }
      if (c < 'a' || c > 'z' || w.size() > 8) {
        malformed = true;
        return w;
      }
      w.push_back(c);
      ++pos;
    }
  }

  // len raw bytes followed by CRLF.
  std::optional<Bytes> raw_field(std::size_t len) {
    if (buf.size() - pos < len + 2) {
      incomplete = true;
      return std::nullopt;
    }
    Bytes raw(buf.begin() + static_cast<long>(pos),
              buf.begin() + static_cast<long>(pos + len));
    if (buf[pos + len] != '\r' || buf[pos + len + 1] != '\n') {
      malformed = true;
      return std::nullopt;
    }
    pos += len + 2;
    return raw;
  }
};

inline bool starts_with(const Bytes& buf, const char* s) {
  std::size_t n = std::char_traits<char>::length(s);
  if (buf.size() < n) return false;
  for (std::size_t i = 0; i < n; ++i)
    if (buf[i] != static_cast<std::uint8_t>(s[i])) return false;
  return true;
}

// True while buf could still grow into a line starting with s.
inline bool is_prefix_of(const Bytes& buf, const char* s) {
  std::size_t n = std::char_traits<char>::length(s);
  for (std::size_t i = 0; i < buf.size() && i < n; ++i)
    if (buf[i] != static_cast<std::uint8_t>(s[i])) return false;
  return buf.size() < n;
}

inline std::optional<std::size_t> find_crlf(const Bytes& buf, std::size_t from = 0) {
  for (std::size_t i = from; i + 1 < buf.size(); ++i)
    if (buf[i] == '\r' && buf[i + 1] == '\n') return i;
  return std::nullopt;
}

}  // namespace detail

// Incremental parser for modem -> driver notifications. feed() may be called
// with arbitrary chunks; partial units stay buffered as residual.
class S2cParser {
 public:
  std::vector<S2cNotification> feed(const Bytes& chunk) {
    buf_.insert(buf_.end(), chunk.begin(), chunk.end());
    std::vector<S2cNotification> out;
    while (step(out)) {
    }
    return out;
  }

  const Bytes& residual() const { return buf_; }

 private:
  bool step(std::vector<S2cNotification>& out) {
    using namespace detail;
    if (skipping_) {
      auto crlf = find_crlf(buf_);
      if (!crlf) return false;
      S2cNotification n;
      n.type = S2cNotification::Type::ParseError;
      n.text = std::string(buf_.begin(), buf_.begin() + static_cast<long>(*crlf));
      out.push_back(std::move(n));
      consume(*crlf + 2);
      skipping_ = false;
      return true;
    }
    if (buf_.empty()) return false;

    if (starts_with(buf_, "RECVIM,") || starts_with(buf_, "RECV,")) {
      bool im = buf_[4] == 'I';
      FieldCursor cur{buf_, im ? 7u : 5u};
      std::uint64_t len = cur.uint_field();
      std::uint64_t src = cur.incomplete || cur.malformed ? 0 : cur.uint_field();
      std::uint64_t dst = cur.incomplete || cur.malformed ? 0 : cur.uint_field();
      std::string flag;
      if (im && !cur.incomplete && !cur.malformed) flag = cur.word_field();
      std::optional<Bytes> raw;
      if (!cur.incomplete && !cur.malformed) {
        if (src > 0xFFFF || dst > 0xFFFF || len > kMaxDeclaredLen ||
            (im && flag != "ack" && flag != "noack"))
          cur.malformed = true;
        else
          raw = cur.raw_field(static_cast<std::size_t>(len));
      }
      if (cur.malformed) {
        skipping_ = true;
        return true;
      }
      if (cur.incomplete) return false;
      S2cNotification n;
      n.type = im ? S2cNotification::Type::RecvIm : S2cNotification::Type::Recv;
      n.packet.src = static_cast<NodeAddress>(src);
      n.packet.dst = static_cast<NodeAddress>(dst);
      n.packet.tclass = im ? TrafficClass::IM : TrafficClass::BURST;
      n.packet.payload = std::move(*raw);
      n.text = flag;
      out.push_back(std::move(n));
      consume(cur.pos);
      return true;
    }
    if (is_prefix_of(buf_, "RECVIM,") || is_prefix_of(buf_, "RECV,"))
      return false;  // could still become a reception header

    auto crlf = detail::find_crlf(buf_);
    if (!crlf) return false;
    std::string line(buf_.begin(), buf_.begin() + static_cast<long>(*crlf));
    consume(*crlf + 2);
    out.push_back(parse_line(line));
    return true;
  }

  static S2cNotification parse_line(const std::string& line) {
    S2cNotification n;
    auto with_addr = [&](S2cNotification::Type t, const std::string& rest) {
      n.type = t;
      try {
        unsigned long v = std::stoul(rest);
        if (v > 0xFFFF || rest.find_first_not_of("0123456789") != std::string::npos)
          throw std::invalid_argument("addr");
        n.addr = static_cast<NodeAddress>(v);
      } catch (...) {
        n.type = S2cNotification::Type::ParseError;
        n.text = line;
      }
    };
    if (line == "OK") {
      n.type = S2cNotification::Type::Ok;
    } else if (line.rfind("ERROR", 0) == 0) {
      n.type = S2cNotification::Type::Error;
      n.text = line.size() > 6 ? line.substr(6) : "";
    } else if (line.rfind("DELIVEREDIM,", 0) == 0) {
      with_addr(S2cNotification::Type::DeliveredIm, line.substr(12));
    } else if (line.rfind("FAILEDIM,", 0) == 0) {
      with_addr(S2cNotification::Type::FailedIm, line.substr(9));
    } else if (line.rfind("DELIVERED,", 0) == 0) {
      with_addr(S2cNotification::Type::Delivered, line.substr(10));
    } else if (line.rfind("FAILED,", 0) == 0) {
      with_addr(S2cNotification::Type::Failed, line.substr(7));
    } else {
      n.type = S2cNotification::Type::ParseError;
      n.text = line;
    }
    return n;
  }

  void consume(std::size_t n) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<long>(n));
  }

  static constexpr std::uint64_t kMaxDeclaredLen = 1 << 20;

  Bytes buf_;
  bool skipping_ = false;
};

// Driver -> modem commands, as seen by the emulator.
struct S2cCommand {
  enum class Type { SendIm, Send, SetAddress, Syntax };

  Type type{};
  NodeAddress dst = 0;
  NodeAddress addr = 0;  // SetAddress
  bool ack = false;      // SendIm
  Bytes payload;
  std::string text;      // offending bytes for Syntax
};

class S2cCommandParser {
 public:
  std::vector<S2cCommand> feed(const Bytes& chunk) {
    buf_.insert(buf_.end(), chunk.begin(), chunk.end());
    std::vector<S2cCommand> out;
    while (step(out)) {
    }
    return out;
  }

  const Bytes& residual() const { return buf_; }

 private:
  bool step(std::vector<S2cCommand>& out) {
    using namespace detail;
    if (skipping_) {
      auto crlf = find_crlf(buf_);
      if (!crlf) return false;
      S2cCommand c;
      c.type = S2cCommand::Type::Syntax;
      c.text = std::string(buf_.begin(), buf_.begin() + static_cast<long>(*crlf));
      out.push_back(std::move(c));
      consume(*crlf + 2);
      skipping_ = false;
      return true;
    }
    if (buf_.empty()) return false;

    if (starts_with(buf_, "AT*SENDIM,") || starts_with(buf_, "AT*SEND,")) {
      bool im = buf_[7] == 'I';
      FieldCursor cur{buf_, im ? 10u : 8u};
      std::uint64_t len = cur.uint_field();
      std::uint64_t dst = cur.incomplete || cur.malformed ? 0 : cur.uint_field();
      std::string flag;
      if (im && !cur.incomplete && !cur.malformed) flag = cur.word_field();
      std::optional<Bytes> raw;
      if (!cur.incomplete && !cur.malformed) {
        if (dst > 0xFFFF || len > (1 << 20) ||
            (im && flag != "ack" && flag != "noack"))
          cur.malformed = true;
        else
          raw = cur.raw_field(static_cast<std::size_t>(len));
      }
      if (cur.malformed) {
        skipping_ = true;
        return true;
      }
      if (cur.incomplete) return false;
      S2cCommand c;
      c.type = im ? S2cCommand::Type::SendIm : S2cCommand::Type::Send;
      c.dst = static_cast<NodeAddress>(dst);
      c.ack = flag == "ack";
      c.payload = std::move(*raw);
      out.push_back(std::move(c));
      consume(cur.pos);
      return true;
    }
    if (is_prefix_of(buf_, "AT*SENDIM,") || is_prefix_of(buf_, "AT*SEND,"))
      return false;

    auto crlf = detail::find_crlf(buf_);
    if (!crlf) return false;
    std::string line(buf_.begin(), buf_.begin() + static_cast<long>(*crlf));
    consume(*crlf + 2);
    S2cCommand c;
    if (line.rfind("AT!AL", 0) == 0 && line.size() > 5 &&
        line.find_first_not_of("0123456789", 5) == std::string::npos &&
        std::stoul(line.substr(5)) <= 0xFFFF) {
      c.type = S2cCommand::Type::SetAddress;
      c.addr = static_cast<NodeAddress>(std::stoul(line.substr(5)));
    } else {
      c.type = S2cCommand::Type::Syntax;
      c.text = line;
    }
    out.push_back(std::move(c));
    return true;
  }

  void consume(std::size_t n) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<long>(n));
  }

  Bytes buf_;
  bool skipping_ = false;
};

}  // namespace uwstack
