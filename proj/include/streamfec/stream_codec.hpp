#pragma once

#include <cassert>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "streamfec/block_code.hpp"
#include "streamfec/code_params.hpp"

namespace streamfec {

// Diagonal interleaving. For a code with geometry (n, k):
//
//   lane j of frame t  =  message symbol j of the codeword starting at t - j
//   parity field at t  =  parity symbols pos in [k, n-1] of the codewords
//                         starting at t - pos, concatenated in ascending pos
//
// Codeword d therefore occupies one symbol in each of packets d .. d+n-1,
// drawing its message symbols from frames d .. d+k-1. A symbol is
// ceil(L / k) bytes wide: byte r of lane j is payload byte j + r*k, zero
// padded past the end. Block-level recovery of symbol j from positions
// <= j + T is exactly frame-level recovery by seq + T, which is how the
// per-symbol guarantee certified by verify_block_code becomes the
// streaming delay bound.

struct SourceFrame {
  std::uint32_t seq = 0;
  std::vector<std::uint8_t> payload;
};

struct ParityField {
  CodeParams params;
  std::vector<std::uint8_t> bytes;
};

// Parity content of one outgoing packet. `secondary` is present only inside
// a dual-parity transition window.
struct PacketFields {
  ParityField primary;
  std::optional<ParityField> secondary;
};

struct DecodedFrame {
  std::uint32_t seq = 0;
  bool recovered = false;  // false means LOST
  std::vector<std::uint8_t> payload;
};

// Decoder-side view of one arrived packet (transport framing removed).
struct ReceivedPacket {
  std::uint32_t seq = 0;
  std::vector<std::uint8_t> payload;
  std::vector<ParityField> fields;
};

namespace codec_detail {

inline std::size_t symbol_width(std::size_t payload_len, int k)
{
  return (payload_len + static_cast<std::size_t>(k) - 1) / static_cast<std::size_t>(k);
}

}  // namespace codec_detail

// Sliding-window encoder. Single-owner state machine: one call stream,
// frames presented with consecutive seqs.
class StreamEncoder {
public:
  explicit StreamEncoder(int delay, std::uint64_t code_seed = kDefaultCodeSeed)
      : delay_(delay), code_seed_(code_seed), active_{delay, 0, 0}
  {
    if (delay < 1) throw std::invalid_argument("StreamEncoder: delay must be positive");
  }

  CodeParams active() const { return active_; }
  CodeParams target() const { return pending_ ? pending_->target : active_; }
  std::uint32_t next_seq() const { return next_seq_; }

  // Switch toward `target`: packets [at_seq, at_seq + delay] carry parity
  // from both the active and the target code, the target takes over at
  // at_seq + delay + 1. A request while a transition is pending replaces
  // the pending target (latest estimate wins); requesting the active code
  // cancels the pending transition.
  void begin_transition(CodeParams target, std::uint32_t at_seq)
  {
    if (at_seq != next_seq_)
      throw std::invalid_argument("begin_transition: transitions start at the next seq");
    if (target.delay != delay_ || !target.valid())
      throw std::invalid_argument("begin_transition: bad target " + target.str());
    if (target == this->target()) return;
    if (target == active_) {
      pending_.reset();
      return;
    }
    pending_ = Pending{target, at_seq};
  }

  PacketFields encode_step(const SourceFrame& frame)
  {
    if (frame.seq != next_seq_)
      throw std::invalid_argument("encode_step: frames must arrive in seq order");
    if (!payload_len_set_) {
      payload_len_ = frame.payload.size();
      payload_len_set_ = true;
    } else if (frame.payload.size() != payload_len_) {
      throw std::invalid_argument("encode_step: payload length must stay constant");
    }

    if (pending_ && frame.seq > pending_->start + static_cast<std::uint32_t>(delay_)) {
      active_ = pending_->target;
      pending_.reset();
    }

    PacketFields out;
    out.primary.params = active_;
    if (!active_.is_uncoded())
      out.primary.bytes = parity_for(CodeCache::instance().get(active_, code_seed_), frame.seq);

    if (pending_) {
      ParityField fresh;
      fresh.params = pending_->target;
      if (!fresh.params.is_uncoded())
        fresh.bytes =
            parity_for(CodeCache::instance().get(fresh.params, code_seed_), frame.seq);
      if (active_.is_uncoded()) {
        out.primary = std::move(fresh);  // nothing old to carry
      } else if (!fresh.params.is_uncoded()) {
        out.secondary = std::move(fresh);
      }
      // coded -> uncoded transitions carry just the old parity
    }

    history_.push_back(frame.payload);
    ++next_seq_;
    const std::size_t depth = 2 * static_cast<std::size_t>(delay_) + 2;
    while (history_.size() > depth) {
      history_.pop_front();
      ++hist_base_;
    }
    return out;
  }

private:
  struct Pending {
    CodeParams target;
    std::uint32_t start;
  };

  // Parity field for packet t: symbols pos in [k, n-1] of codewords t - pos.
  std::vector<std::uint8_t> parity_for(const BlockCode& code, std::int64_t t) const
  {
    const int k = code.k;
    const int n = code.n;
    const std::size_t m = codec_detail::symbol_width(payload_len_, k);
    std::vector<std::uint8_t> out(m * static_cast<std::size_t>(n - k), 0);
    for (int pos = k; pos < n; ++pos) {
      const std::int64_t d = t - pos;
      std::uint8_t* sym = out.data() + static_cast<std::size_t>(pos - k) * m;
      for (int i = 0; i < k; ++i) {
        const std::int64_t f = d + i;
        if (f < 0) continue;  // before stream start: zeros
        const std::uint8_t g = code.generator.at(i, pos);
        if (g == 0) continue;
        const auto& payload = history_[static_cast<std::size_t>(f - hist_base_)];
        for (std::size_t r = 0; r < m; ++r) {
          const std::size_t idx = static_cast<std::size_t>(i) + r * static_cast<std::size_t>(k);
          if (idx >= payload.size()) break;
          sym[r] ^= gf::mul(g, payload[idx]);
        }
      }
    }
    return out;
  }

  int delay_;
  std::uint64_t code_seed_;
  std::uint32_t next_seq_ = 0;
  std::size_t payload_len_ = 0;
  bool payload_len_set_ = false;
  CodeParams active_;
  std::optional<Pending> pending_;
  std::deque<std::vector<std::uint8_t>> history_;
  std::int64_t hist_base_ = 0;
};

// Sliding-window decoder. Consumes exactly one event per seq, in order
// (the transport turns gaps, reorders and malformed packets into erasure
// events). Emits each frame exactly once, in seq order, no later than the
// event for seq + delay; recovery is attempted as soon as the symbols
// determine, not just at the deadline.
class StreamDecoder {
public:
  explicit StreamDecoder(int delay, std::uint64_t code_seed = kDefaultCodeSeed)
      : delay_(delay), code_seed_(code_seed)
  {
    if (delay < 1) throw std::invalid_argument("StreamDecoder: delay must be positive");
  }

  std::int64_t next_expected() const { return next_expected_; }

  std::vector<DecodedFrame> on_packet(ReceivedPacket pkt)
  {
    if (pkt.seq != next_expected_)
      throw std::invalid_argument("decoder: events must cover every seq in order");
    if (!payload_len_set_) {
      payload_len_ = pkt.payload.size();
      payload_len_set_ = true;
    } else if (pkt.payload.size() != payload_len_) {
      throw std::invalid_argument("decoder: payload length must stay constant");
    }
    for (const auto& field : pkt.fields) {
      if (field.params.delay != delay_)
        throw std::invalid_argument("decoder: packet delay differs from stream delay");
    }
    FrameRec rec;
    rec.state = FrameRec::St::received;
    rec.payload = std::move(pkt.payload);
    rec.fields = std::move(pkt.fields);
    frames_[pkt.seq] = std::move(rec);
    highest_ = next_expected_++;
    return advance(false);
  }

  std::vector<DecodedFrame> on_erasure(std::uint32_t seq)
  {
    if (seq != next_expected_)
      throw std::invalid_argument("decoder: events must cover every seq in order");
    frames_[seq];  // default-constructed: erased
    highest_ = next_expected_++;
    return advance(false);
  }

  // Finalizes every pending frame with the information on hand. Stream
  // end only; no further events may follow.
  std::vector<DecodedFrame> flush() { return advance(true); }

private:
  struct FrameRec {
    enum class St { erased, received, recovered } state = St::erased;
    std::vector<std::uint8_t> payload;
    std::vector<ParityField> fields;
  };

  std::vector<DecodedFrame> advance(bool flushing)
  {
    // Recovery to fixpoint: pulling one frame back can complete another
    // code's diagonal for an earlier one.
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::int64_t f = next_emit_; f <= highest_; ++f) {
        auto it = frames_.find(f);
        if (it != frames_.end() && it->second.state == FrameRec::St::erased)
          if (try_recover(f)) changed = true;
      }
    }

    std::vector<DecodedFrame> out;
    while (next_emit_ <= highest_) {
      auto& rec = frames_[next_emit_];
      if (rec.state != FrameRec::St::erased) {
        out.push_back({static_cast<std::uint32_t>(next_emit_),
                       true,
                       rec.payload});
        ++next_emit_;
        continue;
      }
      if (next_emit_ + delay_ <= highest_) {
        assert(next_emit_ + delay_ == highest_ && "LOST emitted exactly at its deadline event");
        out.push_back({static_cast<std::uint32_t>(next_emit_), false, {}});
        ++next_emit_;
        continue;
      }
      if (flushing) {
        out.push_back({static_cast<std::uint32_t>(next_emit_), false, {}});
        ++next_emit_;
        continue;
      }
      break;
    }

    const std::int64_t keep_from = next_emit_ - 2 * delay_ - 2;
    while (!frames_.empty() && frames_.begin()->first < keep_from)
      frames_.erase(frames_.begin());
    return out;
  }

  // A frame comes back when, under some code seen in the packets behind
  // it, every lane symbol is determined from that diagonal's surviving
  // parity no later than position j + delay.
  bool try_recover(std::int64_t f)
  {
    std::vector<CodeParams> candidates;
    const std::int64_t last = std::min<std::int64_t>(highest_, f + delay_);
    for (std::int64_t t = f + 1; t <= last; ++t) {
      const auto it = frames_.find(t);
      if (it == frames_.end() || it->second.state != FrameRec::St::received) continue;
      for (const auto& field : it->second.fields) {
        if (field.params.is_uncoded()) continue;
        bool seen = false;
        for (const auto& c : candidates) seen = seen || c == field.params;
        if (!seen) candidates.push_back(field.params);
      }
    }

    for (const auto& params : candidates) {
      std::vector<std::uint8_t> payload;
      if (recover_via(params, f, payload)) {
        auto& rec = frames_[f];
        rec.state = FrameRec::St::recovered;
        rec.payload = std::move(payload);
        return true;
      }
    }
    return false;
  }

  bool recover_via(CodeParams params, std::int64_t f, std::vector<std::uint8_t>& payload_out)
  {
    const BlockCode& code = CodeCache::instance().get(params, code_seed_);
    const int k = code.k;
    const int n = code.n;
    const std::size_t m = codec_detail::symbol_width(payload_len_, k);

    std::vector<std::vector<std::uint8_t>> lanes(k);
    for (int j = 0; j < k; ++j) {
      const std::int64_t d = f - j;

      std::vector<std::int64_t> unknowns;  // frame indices d + i that are not known
      for (int i = 0; i < k; ++i) {
        const std::int64_t fi = d + i;
        if (fi < 0) continue;  // pre-start zeros
        const auto it = frames_.find(fi);
        if (fi > highest_ || it == frames_.end() || it->second.state == FrameRec::St::erased)
          unknowns.push_back(fi);
      }

      gf::Matrix sys(0, unknowns.size());
      std::vector<std::uint8_t> rhs;
      const int last_pos = std::min(n - 1, j + delay_);
      for (int pos = k; pos <= last_pos; ++pos) {
        const std::int64_t t = d + pos;
        if (t > highest_) break;
        const auto it = frames_.find(t);
        if (it == frames_.end() || it->second.state != FrameRec::St::received) continue;
        const ParityField* field = nullptr;
        for (const auto& cand : it->second.fields)
          if (cand.params == params) field = &cand;
        if (!field || field->bytes.size() != m * static_cast<std::size_t>(n - k)) continue;

        for (const std::int64_t fi : unknowns)
          sys.entries.push_back(code.generator.at(static_cast<int>(fi - d), pos));
        ++sys.rows;

        const std::uint8_t* sym = field->bytes.data() + static_cast<std::size_t>(pos - k) * m;
        std::vector<std::uint8_t> value(sym, sym + m);
        for (int i = 0; i < k; ++i) {
          const std::int64_t fi = d + i;
          if (fi < 0) continue;
          const auto kit = frames_.find(fi);
          if (fi > highest_ || kit == frames_.end() ||
              kit->second.state == FrameRec::St::erased)
            continue;  // unknown, stays on the left side
          const std::uint8_t g = code.generator.at(i, pos);
          if (g == 0) continue;
          const auto& known = kit->second.payload;
          for (std::size_t r = 0; r < m; ++r) {
            const std::size_t idx =
                static_cast<std::size_t>(i) + r * static_cast<std::size_t>(k);
            if (idx >= known.size()) break;
            value[r] ^= gf::mul(g, known[idx]);
          }
        }
        rhs.insert(rhs.end(), value.begin(), value.end());
      }

      std::size_t target = 0;
      while (target < unknowns.size() && unknowns[target] != f) ++target;
      assert(target < unknowns.size());
      const auto res = gf::solve_wide(std::move(sys), std::move(rhs), m);
      if (!res.consistent || !res.determined[target]) return false;
      lanes[j].assign(res.solution.begin() + static_cast<std::ptrdiff_t>(target * m),
                      res.solution.begin() + static_cast<std::ptrdiff_t>((target + 1) * m));
    }

    payload_out.assign(payload_len_, 0);
    for (std::size_t x = 0; x < payload_len_; ++x)
      payload_out[x] = lanes[x % static_cast<std::size_t>(k)][x / static_cast<std::size_t>(k)];
    return true;
  }

  int delay_;
  std::uint64_t code_seed_;
  std::size_t payload_len_ = 0;
  bool payload_len_set_ = false;
  std::int64_t next_expected_ = 0;
  std::int64_t next_emit_ = 0;
  std::int64_t highest_ = -1;
  std::map<std::int64_t, FrameRec> frames_;
};

}  // namespace streamfec
