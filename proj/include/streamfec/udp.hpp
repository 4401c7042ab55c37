#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "streamfec/channel.hpp"
#include "streamfec/estimator.hpp"
#include "streamfec/harness.hpp"
#include "streamfec/stream_codec.hpp"
#include "streamfec/wire.hpp"

namespace streamfec {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

class UdpSocket {
public:
  UdpSocket()
  {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw std::runtime_error("socket() failed");
    const int buf = 1 << 20;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &buf, sizeof buf);
  }

  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;
  UdpSocket(UdpSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

  ~UdpSocket()
  {
    if (fd_ >= 0) ::close(fd_);
  }

  void bind(const Endpoint& local)
  {
    const sockaddr_in addr = resolve(local);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
      throw std::runtime_error("bind() failed on " + local.host + ":" +
                               std::to_string(local.port));
  }

  std::uint16_t local_port() const
  {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0)
      throw std::runtime_error("getsockname() failed");
    return ntohs(addr.sin_port);
  }

  void set_receive_timeout(int millis)
  {
    timeval tv{};
    tv.tv_sec = millis / 1000;
    tv.tv_usec = (millis % 1000) * 1000;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  }

  bool send_to(const std::vector<std::uint8_t>& bytes, const sockaddr_in& peer)
  {
    return ::sendto(fd_, bytes.data(), bytes.size(), 0,
                    reinterpret_cast<const sockaddr*>(&peer), sizeof peer) ==
           static_cast<ssize_t>(bytes.size());
  }

  // Returns received byte count, or -1 on timeout / nothing queued.
  int receive(std::vector<std::uint8_t>& buffer, sockaddr_in* from = nullptr,
              bool nonblocking = false)
  {
    buffer.resize(2048);
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    const ssize_t got = ::recvfrom(fd_, buffer.data(), buffer.size(),
                                   nonblocking ? MSG_DONTWAIT : 0,
                                   reinterpret_cast<sockaddr*>(&addr), &len);
    if (got < 0) return -1;
    buffer.resize(static_cast<std::size_t>(got));
    if (from) *from = addr;
    return static_cast<int>(got);
  }

  static sockaddr_in resolve(const Endpoint& ep)
  {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1)
      throw std::runtime_error("bad IPv4 address: " + ep.host);
    return addr;
  }

private:
  int fd_ = -1;
};

// ---- source loop

struct SourceConfig {
  Endpoint peer;
  Endpoint bind;  // port 0: ephemeral
  int delay = 10;
  int tick_ms = 10;           // 0 = fast mode: lock-step on per-packet feedback
  bool mds_strategy = false;  // quantize feedback to an MDS pair
  int feedback_wait_ms = 5;   // fast-mode wait for the feedback of the packet just sent
};

struct SourceStats {
  std::uint32_t sent = 0;
  std::uint32_t feedback_applied = 0;
  std::uint32_t send_errors = 0;
};

// Pulls frames until the supplier returns false, one packet per tick.
// Feedback packets steer the encoder: the newest ack wins, stale ones are
// ignored. In fast mode the loop instead waits briefly after each send so
// the feedback for packet i can take effect at packet i+1, matching the
// simulator's instantaneous-feedback convention.
using FrameSupplier = std::function<bool(std::uint32_t seq, std::vector<std::uint8_t>& payload)>;

inline SourceStats source_loop(const SourceConfig& config, const FrameSupplier& next_frame)
{
  UdpSocket socket;
  socket.bind(config.bind);
  const sockaddr_in peer = UdpSocket::resolve(config.peer);

  StreamEncoder encoder(config.delay);
  SourceStats stats;
  std::optional<FeedbackPacket> newest;

  // Drain anything queued; optionally block up to wait_ms hoping for the
  // ack of `want_ack` (fast-mode lock-step).
  const auto drain_feedback = [&](int wait_ms, std::uint32_t want_ack) {
    std::vector<std::uint8_t> buffer;
    bool may_block = wait_ms > 0;
    if (may_block) socket.set_receive_timeout(wait_ms);
    while (true) {
      const int got = socket.receive(buffer, nullptr, !may_block);
      if (got < 0) {
        if (!may_block) return;
        may_block = false;  // one timed wait, then just drain the queue
        continue;
      }
      const auto fb = parse_feedback_packet(buffer);
      if (!fb) continue;
      if (!newest || fb->ack_seq >= newest->ack_seq) newest = *fb;
      if (may_block && newest && newest->ack_seq >= want_ack) may_block = false;
    }
  };

  const auto started = std::chrono::steady_clock::now();
  std::uint32_t seq = 0;
  std::vector<std::uint8_t> payload;
  while (true) {
    payload.clear();
    if (!next_frame(seq, payload)) break;

    drain_feedback(0, 0);  // anything queued since the last tick
    if (newest) {
      const Estimate est{newest->burst_estimate, newest->isolated_estimate};
      CodeParams target{config.delay, est.burst, est.isolated};
      if (config.mds_strategy) {
        const int n = mds_quantize(config.delay, est);
        target = {config.delay, n, n};
      }
      if (target.valid()) {
        target = wire_feasible_params(config.delay, target, payload.size());
        if (target != encoder.target()) {
          encoder.begin_transition(target, seq);
          ++stats.feedback_applied;
        }
      }
    }

    const auto fields = encoder.encode_step({seq, payload});
    const auto bytes = serialize(make_channel_packet(seq, payload, fields));
    if (!socket.send_to(bytes, peer)) ++stats.send_errors;
    ++stats.sent;

    if (config.tick_ms > 0) {
      std::this_thread::sleep_until(started + (seq + 1) * std::chrono::milliseconds(config.tick_ms));
    } else if (config.feedback_wait_ms > 0) {
      drain_feedback(config.feedback_wait_ms, seq);
    }
    ++seq;
  }
  return stats;
}

// ---- destination loop

struct DestinationConfig {
  Endpoint bind;
  int delay = 10;
  int session_length = 1000;  // interleaved estimator phase
  std::optional<LossTrace> drop_oracle;  // drop arriving seqs marked erased
  std::optional<std::uint32_t> expected_total;  // finalize through this many seqs at the end
  int idle_timeout_ms = 2000;
  std::function<void(const DecodedFrame&)> frame_sink;
};

struct DestinationStats {
  std::uint32_t accepted = 0;
  std::uint32_t dropped_by_oracle = 0;
  std::uint32_t malformed = 0;
  std::uint32_t stale = 0;  // out-of-order arrivals, already counted erased
};

// Binds in the constructor so callers can learn the ephemeral port before
// starting a sender.
class DestinationLoop {
public:
  explicit DestinationLoop(DestinationConfig config) : config_(std::move(config))
  {
    socket_.bind(config_.bind);
  }

  std::uint16_t port() const { return socket_.local_port(); }

  DestinationStats run()
  {
    StreamDecoder decoder(config_.delay);
    InterleavedEstimator estimator(config_.delay, config_.session_length);
    DestinationStats stats;

    std::vector<std::uint8_t> received_flags;  // per seq, grows as the stream advances
    std::int64_t next_expected = 0;
    const auto erased_at = [&](std::int64_t x) {
      return x >= 0 && x < static_cast<std::int64_t>(received_flags.size()) &&
             received_flags[static_cast<std::size_t>(x)] == 0;
    };

    const auto emit = [&](const std::vector<DecodedFrame>& frames) {
      if (!config_.frame_sink) return;
      for (const auto& f : frames) config_.frame_sink(f);
    };

    socket_.set_receive_timeout(50);
    const auto idle_limit = std::chrono::milliseconds(config_.idle_timeout_ms);
    auto last_datagram = std::chrono::steady_clock::now();

    std::vector<std::uint8_t> buffer;
    sockaddr_in from{};
    while (true) {
      if (config_.expected_total && next_expected >= *config_.expected_total) break;
      if (socket_.receive(buffer, &from) < 0) {
        if (std::chrono::steady_clock::now() - last_datagram > idle_limit) break;
        continue;
      }
      last_datagram = std::chrono::steady_clock::now();

      const auto pkt = parse_channel_packet(buffer);
      if (!pkt) {
        ++stats.malformed;  // no trustworthy seq, drop silently
        continue;
      }
      if (config_.drop_oracle && pkt->seq < config_.drop_oracle->size() &&
          config_.drop_oracle->erased(pkt->seq)) {
        ++stats.dropped_by_oracle;
        continue;
      }
      if (pkt->seq < next_expected) {
        ++stats.stale;  // late arrival: its seq was already marked erased
        continue;
      }

      // gaps first, then the packet itself
      if (static_cast<std::size_t>(pkt->seq) >= received_flags.size())
        received_flags.resize(pkt->seq + 1, 0);
      received_flags[pkt->seq] = 1;
      while (next_expected < pkt->seq)
        emit(decoder.on_erasure(static_cast<std::uint32_t>(next_expected++)));

      const Estimate est = estimator.on_receipt(pkt->seq, erased_at);
      const FeedbackPacket fb{pkt->seq, static_cast<std::uint8_t>(est.burst),
                              static_cast<std::uint8_t>(est.isolated)};
      socket_.send_to(serialize(fb), from);

      emit(decoder.on_packet(to_received(*pkt)));
      ++next_expected;
      ++stats.accepted;
    }

    if (config_.expected_total) {
      while (next_expected < *config_.expected_total)
        emit(decoder.on_erasure(static_cast<std::uint32_t>(next_expected++)));
    }
    emit(decoder.flush());
    return stats;
  }

private:
  DestinationConfig config_;
  UdpSocket socket_;
};

// ---- frame record file: seq[4] status[1] len[2] payload, all big-endian

inline void write_frame_record(std::ostream& os, const DecodedFrame& frame)
{
  std::uint8_t head[7];
  head[0] = static_cast<std::uint8_t>(frame.seq >> 24);
  head[1] = static_cast<std::uint8_t>(frame.seq >> 16);
  head[2] = static_cast<std::uint8_t>(frame.seq >> 8);
  head[3] = static_cast<std::uint8_t>(frame.seq);
  head[4] = frame.recovered ? 1 : 0;
  const std::uint16_t len = frame.recovered ? static_cast<std::uint16_t>(frame.payload.size()) : 0;
  head[5] = static_cast<std::uint8_t>(len >> 8);
  head[6] = static_cast<std::uint8_t>(len);
  os.write(reinterpret_cast<const char*>(head), sizeof head);
  if (frame.recovered)
    os.write(reinterpret_cast<const char*>(frame.payload.data()),
             static_cast<std::streamsize>(frame.payload.size()));
}

}  // namespace streamfec
