#pragma once

#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <vector>

#include "streamfec/code_params.hpp"
#include "streamfec/stream_codec.hpp"

namespace streamfec {

// Datagram layouts. All multi-byte integers big-endian.
//
// channel packet:
//   C5 01 flags seq[4] T B N payload_len[2] payload parity_len[2] parity
//   [flags bit0: B2 N2 parity2_len[2] parity2]
//
// feedback packet (fixed 9 bytes):
//   C5 01 FB ack_seq[4] B N

inline constexpr std::uint8_t kMagic = 0xC5;
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::uint8_t kFeedbackType = 0xFB;
inline constexpr std::uint8_t kFlagDualParity = 0x01;
inline constexpr std::size_t kMaxDatagram = 1472;
inline constexpr std::size_t kFeedbackSize = 9;

struct ChannelPacket {
  std::uint8_t flags = 0;
  std::uint32_t seq = 0;
  std::uint8_t delay = 0, burst = 0, isolated = 0;
  std::vector<std::uint8_t> payload;
  std::vector<std::uint8_t> parity;
  std::uint8_t burst2 = 0, isolated2 = 0;
  std::vector<std::uint8_t> parity2;

  bool dual() const { return flags & kFlagDualParity; }
};

struct FeedbackPacket {
  std::uint32_t ack_seq = 0;
  std::uint8_t burst_estimate = 0;
  std::uint8_t isolated_estimate = 0;
};

namespace wire_detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v)
{
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

struct Cursor {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;

  bool take(std::size_t count, const std::uint8_t** out)
  {
    if (pos + count > data.size()) return false;
    *out = data.data() + pos;
    pos += count;
    return true;
  }

  bool u8(std::uint8_t* v)
  {
    const std::uint8_t* p;
    if (!take(1, &p)) return false;
    *v = *p;
    return true;
  }

  bool u16(std::uint16_t* v)
  {
    const std::uint8_t* p;
    if (!take(2, &p)) return false;
    *v = static_cast<std::uint16_t>(p[0] << 8 | p[1]);
    return true;
  }

  bool u32(std::uint32_t* v)
  {
    const std::uint8_t* p;
    if (!take(4, &p)) return false;
    *v = static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
         static_cast<std::uint32_t>(p[2]) << 8 | static_cast<std::uint32_t>(p[3]);
    return true;
  }

  bool bytes(std::size_t count, std::vector<std::uint8_t>* out)
  {
    const std::uint8_t* p;
    if (!take(count, &p)) return false;
    out->assign(p, p + count);
    return true;
  }
};

}  // namespace wire_detail

inline std::vector<std::uint8_t> serialize(const ChannelPacket& pkt)
{
  using namespace wire_detail;
  if (pkt.payload.size() > 0xFFFF || pkt.parity.size() > 0xFFFF ||
      pkt.parity2.size() > 0xFFFF)
    throw std::invalid_argument("serialize: field exceeds 16-bit length");

  std::vector<std::uint8_t> out;
  out.reserve(16 + pkt.payload.size() + pkt.parity.size() + pkt.parity2.size());
  out.push_back(kMagic);
  out.push_back(kVersion);
  out.push_back(pkt.flags);
  put_u32(out, pkt.seq);
  out.push_back(pkt.delay);
  out.push_back(pkt.burst);
  out.push_back(pkt.isolated);
  put_u16(out, static_cast<std::uint16_t>(pkt.payload.size()));
  out.insert(out.end(), pkt.payload.begin(), pkt.payload.end());
  put_u16(out, static_cast<std::uint16_t>(pkt.parity.size()));
  out.insert(out.end(), pkt.parity.begin(), pkt.parity.end());
  if (pkt.dual()) {
    out.push_back(pkt.burst2);
    out.push_back(pkt.isolated2);
    put_u16(out, static_cast<std::uint16_t>(pkt.parity2.size()));
    out.insert(out.end(), pkt.parity2.begin(), pkt.parity2.end());
  }
  if (out.size() > kMaxDatagram)
    throw std::invalid_argument("serialize: datagram exceeds " + std::to_string(kMaxDatagram));
  return out;
}

inline std::optional<ChannelPacket> parse_channel_packet(std::span<const std::uint8_t> data)
{
  using namespace wire_detail;
  Cursor c{data};
  std::uint8_t magic, version;
  ChannelPacket pkt;
  if (!c.u8(&magic) || magic != kMagic) return std::nullopt;
  if (!c.u8(&version) || version != kVersion) return std::nullopt;
  if (!c.u8(&pkt.flags) || (pkt.flags & ~kFlagDualParity)) return std::nullopt;
  if (!c.u32(&pkt.seq)) return std::nullopt;
  if (!c.u8(&pkt.delay) || !c.u8(&pkt.burst) || !c.u8(&pkt.isolated)) return std::nullopt;
  std::uint16_t len;
  if (!c.u16(&len) || !c.bytes(len, &pkt.payload)) return std::nullopt;
  if (!c.u16(&len) || !c.bytes(len, &pkt.parity)) return std::nullopt;
  if (pkt.dual()) {
    if (!c.u8(&pkt.burst2) || !c.u8(&pkt.isolated2)) return std::nullopt;
    if (!c.u16(&len) || !c.bytes(len, &pkt.parity2)) return std::nullopt;
  }
  if (c.pos != data.size()) return std::nullopt;  // trailing bytes
  return pkt;
}

inline std::vector<std::uint8_t> serialize(const FeedbackPacket& pkt)
{
  using namespace wire_detail;
  std::vector<std::uint8_t> out;
  out.reserve(kFeedbackSize);
  out.push_back(kMagic);
  out.push_back(kVersion);
  out.push_back(kFeedbackType);
  put_u32(out, pkt.ack_seq);
  out.push_back(pkt.burst_estimate);
  out.push_back(pkt.isolated_estimate);
  return out;
}

inline std::optional<FeedbackPacket> parse_feedback_packet(std::span<const std::uint8_t> data)
{
  using namespace wire_detail;
  if (data.size() != kFeedbackSize) return std::nullopt;
  Cursor c{data};
  std::uint8_t magic, version, type;
  FeedbackPacket pkt;
  if (!c.u8(&magic) || magic != kMagic) return std::nullopt;
  if (!c.u8(&version) || version != kVersion) return std::nullopt;
  if (!c.u8(&type) || type != kFeedbackType) return std::nullopt;
  if (!c.u32(&pkt.ack_seq)) return std::nullopt;
  if (!c.u8(&pkt.burst_estimate) || !c.u8(&pkt.isolated_estimate)) return std::nullopt;
  return pkt;
}

// ---- bridges between codec structures and the wire

inline ChannelPacket make_channel_packet(std::uint32_t seq,
                                         const std::vector<std::uint8_t>& payload,
                                         const PacketFields& fields)
{
  ChannelPacket pkt;
  pkt.seq = seq;
  pkt.delay = static_cast<std::uint8_t>(fields.primary.params.delay);
  pkt.burst = static_cast<std::uint8_t>(fields.primary.params.max_burst);
  pkt.isolated = static_cast<std::uint8_t>(fields.primary.params.max_isolated);
  pkt.payload = payload;
  pkt.parity = fields.primary.bytes;
  if (fields.secondary) {
    pkt.flags |= kFlagDualParity;
    pkt.burst2 = static_cast<std::uint8_t>(fields.secondary->params.max_burst);
    pkt.isolated2 = static_cast<std::uint8_t>(fields.secondary->params.max_isolated);
    pkt.parity2 = fields.secondary->bytes;
  }
  return pkt;
}

inline ReceivedPacket to_received(const ChannelPacket& pkt)
{
  ReceivedPacket out;
  out.seq = pkt.seq;
  out.payload = pkt.payload;
  const CodeParams primary{pkt.delay, pkt.burst, pkt.isolated};
  if (!primary.is_uncoded()) out.fields.push_back({primary, pkt.parity});
  if (pkt.dual()) {
    const CodeParams secondary{pkt.delay, pkt.burst2, pkt.isolated2};
    if (!secondary.is_uncoded()) out.fields.push_back({secondary, pkt.parity2});
  }
  return out;
}

}  // namespace streamfec
