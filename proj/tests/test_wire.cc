#include "streamfec/wire.hpp"

#include "gtest/gtest.h"
#include "streamfec/rng.hpp"

using namespace streamfec;

TEST(wire, example_layout_bytes)
{
  ChannelPacket pkt;
  pkt.seq = 7;
  pkt.delay = 10;
  pkt.burst = 5;
  pkt.isolated = 2;
  pkt.payload = {'a', 'b', 'c', 'd'};
  const auto bytes = serialize(pkt);
  const std::vector<std::uint8_t> expect{0xC5, 0x01, 0x00, 0x00, 0x00, 0x00, 0x07,
                                         0x0A, 0x05, 0x02, 0x00, 0x04, 0x61, 0x62,
                                         0x63, 0x64, 0x00, 0x00};
  EXPECT_EQ(bytes, expect);
}

TEST(wire, round_trip_random_packets)
{
  SplitMix64 rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    ChannelPacket pkt;
    pkt.seq = static_cast<std::uint32_t>(rng.next());
    pkt.delay = static_cast<std::uint8_t>(rng.next_below(12));
    pkt.burst = static_cast<std::uint8_t>(rng.next_below(12));
    pkt.isolated = static_cast<std::uint8_t>(rng.next_below(12));
    pkt.payload.resize(rng.next_below(400));
    for (auto& b : pkt.payload) b = static_cast<std::uint8_t>(rng.next_below(256));
    pkt.parity.resize(rng.next_below(300));
    for (auto& b : pkt.parity) b = static_cast<std::uint8_t>(rng.next_below(256));
    if (rng.next_below(2)) {
      pkt.flags |= kFlagDualParity;
      pkt.burst2 = static_cast<std::uint8_t>(rng.next_below(12));
      pkt.isolated2 = static_cast<std::uint8_t>(rng.next_below(12));
      pkt.parity2.resize(rng.next_below(200));
      for (auto& b : pkt.parity2) b = static_cast<std::uint8_t>(rng.next_below(256));
    }

    const auto bytes = serialize(pkt);
    ASSERT_LE(bytes.size(), kMaxDatagram);
    const auto back = parse_channel_packet(bytes);
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(serialize(*back), bytes);
    EXPECT_EQ(back->seq, pkt.seq);
    EXPECT_EQ(back->payload, pkt.payload);
    EXPECT_EQ(back->parity, pkt.parity);
    EXPECT_EQ(back->parity2, pkt.parity2);
  }
}

TEST(wire, paper_scale_packet_fits_single_datagram)
{
  // 300-byte frame at the widest parity the delay-11 family can produce
  ChannelPacket pkt;
  pkt.seq = 1;
  pkt.delay = 11;
  pkt.burst = 11;
  pkt.isolated = 1;
  pkt.payload.assign(300, 0xAB);
  // (11,11,1): k=11, n=22: ceil(300/11)=28 bytes per symbol, 11 parity symbols
  pkt.parity.assign(28 * 11, 0xCD);
  pkt.flags |= kFlagDualParity;
  pkt.burst2 = 11;
  pkt.isolated2 = 11;
  // (11,11,11): k=1, n=12: 300 bytes * 11 parity symbols would not fit; the
  // realistic heaviest second field is another mid-rate code
  pkt.parity2.assign(28 * 11, 0xEF);
  const auto bytes = serialize(pkt);
  EXPECT_LE(bytes.size(), kMaxDatagram);
}

TEST(wire, rejects_malformed)
{
  ChannelPacket pkt;
  pkt.seq = 9;
  pkt.payload = {1, 2, 3};
  auto bytes = serialize(pkt);

  auto bad_magic = bytes;
  bad_magic[0] = 0x00;
  EXPECT_FALSE(parse_channel_packet(bad_magic).has_value());

  auto bad_version = bytes;
  bad_version[1] = 0x02;
  EXPECT_FALSE(parse_channel_packet(bad_version).has_value());

  auto truncated = bytes;
  truncated.resize(truncated.size() - 2);
  EXPECT_FALSE(parse_channel_packet(truncated).has_value());

  auto oversize_len = bytes;
  oversize_len[10] = 0xFF;  // payload_len high byte beyond datagram
  EXPECT_FALSE(parse_channel_packet(oversize_len).has_value());

  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_FALSE(parse_channel_packet(trailing).has_value());
}

TEST(wire, feedback_round_trip_and_size)
{
  FeedbackPacket fb{123456, 5, 2};
  const auto bytes = serialize(fb);
  ASSERT_EQ(bytes.size(), kFeedbackSize);
  EXPECT_EQ(bytes[0], kMagic);
  EXPECT_EQ(bytes[2], kFeedbackType);
  const auto back = parse_feedback_packet(bytes);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(back->ack_seq, 123456u);
  EXPECT_EQ(back->burst_estimate, 5);
  EXPECT_EQ(back->isolated_estimate, 2);

  auto short_pkt = bytes;
  short_pkt.pop_back();
  EXPECT_FALSE(parse_feedback_packet(short_pkt).has_value());
}

TEST(wire, codec_bridge_preserves_fields)
{
  PacketFields fields;
  fields.primary = {{10, 5, 2}, {1, 2, 3}};
  fields.secondary = ParityField{{10, 2, 1}, {9, 9}};
  const auto pkt = make_channel_packet(42, {7, 7}, fields);
  EXPECT_TRUE(pkt.dual());
  const auto back = to_received(pkt);
  ASSERT_EQ(back.fields.size(), 2u);
  EXPECT_EQ(back.fields[0].params, (CodeParams{10, 5, 2}));
  EXPECT_EQ(back.fields[1].params, (CodeParams{10, 2, 1}));
  EXPECT_EQ(back.payload, (std::vector<std::uint8_t>{7, 7}));

  PacketFields uncoded;
  uncoded.primary.params = {10, 0, 0};
  const auto plain = to_received(make_channel_packet(1, {5}, uncoded));
  EXPECT_TRUE(plain.fields.empty());
}
