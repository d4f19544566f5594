#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uwstack/modem/csa_codec.hpp"  // u16/u32 byte helpers
#include "uwstack/packet.hpp"

namespace uwstack {

// Application chunk header, prepended to every packet payload:
//   u16 stream id | u32 chunk index | u32 total chunks | u16 chunk length
constexpr std::size_t kAppHeaderSize = 12;

struct AppHeader {
  std::uint16_t stream_id = 0;
  std::uint32_t chunk_index = 0;
  std::uint32_t total_chunks = 0;
  std::uint16_t chunk_len = 0;
};

inline Bytes app_header_encode(const AppHeader& h) {
  Bytes out;
  out.reserve(kAppHeaderSize);
  detail::put_u16(out, h.stream_id);
  detail::put_u32(out, h.chunk_index);
  detail::put_u32(out, h.total_chunks);
  detail::put_u16(out, h.chunk_len);
  return out;
}

inline std::optional<AppHeader> app_header_decode(const Bytes& payload) {
  if (payload.size() < kAppHeaderSize) return std::nullopt;
  AppHeader h;
  h.stream_id = detail::get_u16(payload.data());
  h.chunk_index = detail::get_u32(payload.data() + 2);
  h.total_chunks = detail::get_u32(payload.data() + 6);
  h.chunk_len = detail::get_u16(payload.data() + 10);
  if (payload.size() != kAppHeaderSize + h.chunk_len) return std::nullopt;
  if (h.total_chunks == 0 || h.chunk_index >= h.total_chunks) return std::nullopt;
  return h;
}

// Splits a byte stream into packets of chunk_payload bytes each (plus the
// app header). The last chunk may be short; an empty stream yields nothing.
inline std::vector<Packet> app_chunk(const Bytes& stream,
                                     std::size_t chunk_payload,
                                     std::uint16_t stream_id, NodeAddress src,
                                     NodeAddress dst,
                                     TrafficClass cls = TrafficClass::IM,
                                     std::uint32_t seq_start = 0) {
  if (chunk_payload == 0)
    throw std::invalid_argument("chunk_payload must be > 0");
  std::vector<Packet> out;
  if (stream.empty()) return out;
  std::size_t total = (stream.size() + chunk_payload - 1) / chunk_payload;
  out.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t off = i * chunk_payload;
    std::size_t len = std::min(chunk_payload, stream.size() - off);
    AppHeader h;
    h.stream_id = stream_id;
    h.chunk_index = static_cast<std::uint32_t>(i);
    h.total_chunks = static_cast<std::uint32_t>(total);
    h.chunk_len = static_cast<std::uint16_t>(len);
    Packet p;
    p.src = src;
    p.dst = dst;
    p.seq = seq_start + static_cast<std::uint32_t>(i);
    p.tclass = cls;
    p.payload = app_header_encode(h);
    p.payload.insert(p.payload.end(), stream.begin() + static_cast<long>(off),
                     stream.begin() + static_cast<long>(off + len));
    out.push_back(std::move(p));
  }
  return out;
}

// Per-stream reassembly: duplicates ignored, out-of-order tolerated,
// conflicting totals flagged as a stream error.
class AppReassembler {
 public:
  struct Status {
    bool complete = false;
    bool error = false;
    std::string error_text;
    std::vector<std::uint32_t> missing;  // filled by status() when incomplete
  };

  // Returns the stream status after absorbing this packet.
  Status add(const Packet& p) {
    auto h = app_header_decode(p.payload);
    std::uint16_t sid = h ? h->stream_id : 0;
    if (!h) {
      Status s;
      s.error = true;
      s.error_text = "malformed app header";
      return s;
    }
    Stream& st = streams_[sid];
    if (st.total == 0) st.total = h->total_chunks;
    if (st.total != h->total_chunks) {
      st.error = true;
      st.error_text = "conflicting total-chunks values";
    }
    if (!st.error)
      st.chunks.emplace(h->chunk_index,
                        Bytes(p.payload.begin() + kAppHeaderSize, p.payload.end()));
    return status(sid);
  }

  Status status(std::uint16_t stream_id) const {
    Status s;
    auto it = streams_.find(stream_id);
    if (it == streams_.end()) return s;
    const Stream& st = it->second;
    if (st.error) {
      s.error = true;
      s.error_text = st.error_text;
      return s;
    }
    if (st.chunks.size() == st.total && st.total > 0) {
      s.complete = true;
      return s;
    }
    for (std::uint32_t i = 0; i < st.total; ++i)
      if (!st.chunks.count(i)) s.missing.push_back(i);
    return s;
  }

  // Exact original bytes once every chunk index is present.
  std::optional<Bytes> assemble(std::uint16_t stream_id) const {
    auto it = streams_.find(stream_id);
    if (it == streams_.end() || it->second.error) return std::nullopt;
    const Stream& st = it->second;
    if (st.chunks.size() != st.total || st.total == 0) return std::nullopt;
    Bytes out;
    for (const auto& [idx, chunk] : st.chunks)
      out.insert(out.end(), chunk.begin(), chunk.end());
    return out;
  }

  void reset(std::uint16_t stream_id) { streams_.erase(stream_id); }

 private:
  struct Stream {
    std::uint32_t total = 0;
    std::map<std::uint32_t, Bytes> chunks;
    bool error = false;
    std::string error_text;
  };

  std::map<std::uint16_t, Stream> streams_;
};

}  // namespace uwstack
