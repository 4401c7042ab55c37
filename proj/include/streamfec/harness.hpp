#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamfec/channel.hpp"
#include "streamfec/code_params.hpp"
#include "streamfec/estimator.hpp"
#include "streamfec/rational.hpp"
#include "streamfec/rng.hpp"
#include "streamfec/stream_codec.hpp"
#include "streamfec/wire.hpp"

namespace streamfec {

enum class Strategy { uncoded, fixed, mds_adaptive, adaptive };

inline const char* strategy_name(Strategy s)
{
  switch (s) {
    case Strategy::uncoded: return "uncoded";
    case Strategy::fixed: return "fixed";
    case Strategy::mds_adaptive: return "mds";
    case Strategy::adaptive: return "adaptive";
  }
  return "?";
}

struct ExperimentConfig {
  int delay = 10;             // T
  int session_length = 1000;  // L
  int sessions = 360;         // M
  int frame_bytes = 300;
  Strategy strategy = Strategy::adaptive;
  CodeParams fixed_params{};  // Strategy::fixed only
  std::uint64_t payload_seed = 0x50a7;
  bool single_instance_estimator = false;  // one estimator for the whole run, no interleaving
  bool record_packet_params = false;
  std::function<void(const DecodedFrame&)> frame_sink;  // optional tap on every emission
};

struct SessionMetrics {
  int index = 0;
  double flr = 0;
  double mean_rate = 1;
  bool low_fidelity = false;  // flr > 0.1
  double non_mds_fraction = 0;
};

struct ExperimentResult {
  std::vector<SessionMetrics> sessions;
  double avg_flr = 0;
  double low_fidelity_fraction = 0;
  double avg_rate = 1;
  double non_mds_fraction = 0;
  std::vector<std::uint8_t> recovered;      // per frame
  std::vector<CodeParams> packet_params;    // newest carried params, when recorded
};

// Deterministic pseudo-frame content: byte-exactness checks regenerate it
// on the receiving side.
inline std::vector<std::uint8_t> frame_payload(std::uint64_t payload_seed, std::uint32_t seq,
                                               std::size_t len)
{
  SplitMix64 rng(payload_seed ^
                 (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(seq) + 0x1234567ULL)));
  std::vector<std::uint8_t> out(len);
  std::size_t i = 0;
  while (i < len) {
    std::uint64_t word = rng.next();
    for (int b = 0; b < 8 && i < len; ++b, word >>= 8)
      out[i++] = static_cast<std::uint8_t>(word);
  }
  return out;
}

// Largest-rate MDS parameter not exceeding the estimated pair's capacity:
// the smallest N with C(T,N,N) <= C(T,B,N). Returns 0 for the uncoded
// estimate.
inline int mds_quantize(int delay, Estimate est)
{
  if (est == Estimate{0, 0}) return 0;
  const Rational target = capacity({delay, est.burst, est.isolated});
  for (int n = 1; n <= delay; ++n)
    if (capacity({delay, n, n}) <= target) return n;
  return delay;
}

inline std::size_t parity_bytes_for(CodeParams p, std::size_t frame_bytes)
{
  if (p.is_uncoded()) return 0;
  const int k = p.dimension();
  return codec_detail::symbol_width(frame_bytes, k) *
         static_cast<std::size_t>(p.block_length() - k);
}

// Per-code parity budget keeping any two coexisting parity fields plus the
// payload inside a single datagram during a dual-parity transition window.
inline std::size_t dual_parity_budget(std::size_t frame_bytes)
{
  constexpr std::size_t overhead = 20;  // full header with the dual extension
  if (kMaxDatagram <= overhead + frame_bytes) return 0;
  return (kMaxDatagram - overhead - frame_bytes) / 2;
}

// Lowest-rate code dominated by the estimate that still fits on the wire.
// The deepest codes cannot ride a single datagram at 300-byte frames (a
// (10,10,10) parity field alone is 3000 bytes), so the source degrades such
// requests to the strongest affordable pair; the simulator applies the same
// rule so loopback runs stay equivalent.
inline CodeParams wire_feasible_params(int delay, CodeParams target, std::size_t frame_bytes)
{
  if (target.is_uncoded() || parity_bytes_for(target, frame_bytes) <= dual_parity_budget(frame_bytes))
    return target;
  const std::size_t budget = dual_parity_budget(frame_bytes);
  CodeParams best{delay, 0, 0};
  Rational best_rate{2, 1};
  for (int b = 1; b <= target.max_burst; ++b)
    for (int n = 1; n <= std::min(b, target.max_isolated); ++n) {
      const CodeParams cand{delay, b, n};
      if (parity_bytes_for(cand, frame_bytes) > budget) continue;
      const Rational rate = capacity(cand);
      if (best.is_uncoded() || rate < best_rate) {
        best = cand;
        best_rate = rate;
      }
    }
  return best;
}

// One full source -> channel -> destination run over a recorded or
// generated trace. Feedback is lossless and instantaneous: the estimate
// emitted at the receipt of packet i steers the encoder from packet i+1.
// A frame counts as recovered only byte-exact and within the deadline.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const LossTrace& trace)
{
  const std::size_t total =
      static_cast<std::size_t>(config.session_length) * static_cast<std::size_t>(config.sessions);
  if (trace.size() < total)
    throw std::invalid_argument("run_experiment: trace shorter than experiment (" +
                                std::to_string(trace.size()) + " < " + std::to_string(total) +
                                ")");
  if (config.strategy == Strategy::fixed &&
      (!config.fixed_params.valid() || config.fixed_params.delay != config.delay))
    throw std::invalid_argument("run_experiment: bad fixed parameters");

  StreamEncoder encoder(config.delay);
  StreamDecoder decoder(config.delay);
  if (config.strategy == Strategy::fixed && !config.fixed_params.is_uncoded())
    encoder.begin_transition(config.fixed_params, 0);

  InterleavedEstimator interleaved(config.delay, config.session_length);
  ParamEstimator single(config.delay);
  const bool adaptive =
      config.strategy == Strategy::adaptive || config.strategy == Strategy::mds_adaptive;

  ExperimentResult result;
  result.recovered.assign(total, 0);
  if (config.record_packet_params) result.packet_params.resize(total);

  std::vector<double> rate_sum(config.sessions, 0);
  std::vector<std::size_t> non_mds_count(config.sessions, 0);

  std::optional<Estimate> feedback;
  const auto erased_at = [&](std::int64_t x) { return trace.erased(static_cast<std::size_t>(x)); };

  const auto account = [&](const DecodedFrame& frame) {
    if (config.frame_sink) config.frame_sink(frame);
    if (!frame.recovered) return;
    const auto expect = frame_payload(config.payload_seed, frame.seq,
                                      static_cast<std::size_t>(config.frame_bytes));
    if (frame.payload == expect) result.recovered[frame.seq] = 1;
  };

  for (std::uint32_t seq = 0; seq < total; ++seq) {
    // source side: act on the latest feedback
    if (adaptive && feedback) {
      CodeParams target{config.delay, 0, 0};
      if (config.strategy == Strategy::adaptive) {
        target = {config.delay, feedback->burst, feedback->isolated};
      } else {
        const int n = mds_quantize(config.delay, *feedback);
        target = {config.delay, n, n};
      }
      target = wire_feasible_params(config.delay, target,
                                    static_cast<std::size_t>(config.frame_bytes));
      if (target != encoder.target()) encoder.begin_transition(target, seq);
    }

    SourceFrame frame{seq, frame_payload(config.payload_seed, seq,
                                         static_cast<std::size_t>(config.frame_bytes))};
    const auto fields = encoder.encode_step(frame);

    const std::size_t parity_bytes =
        fields.primary.bytes.size() + (fields.secondary ? fields.secondary->bytes.size() : 0);
    const int session = static_cast<int>(seq / config.session_length);
    rate_sum[session] += static_cast<double>(config.frame_bytes) /
                         static_cast<double>(config.frame_bytes + parity_bytes);
    const CodeParams governing =
        fields.secondary ? fields.secondary->params : fields.primary.params;
    if (governing.max_burst > governing.max_isolated && governing.max_isolated >= 1)
      ++non_mds_count[session];
    if (config.record_packet_params) result.packet_params[seq] = governing;

    if (trace.erased(seq)) {
      for (const auto& f : decoder.on_erasure(seq)) account(f);
      continue;
    }

    // destination: estimate, feed back, then decode
    if (adaptive) {
      feedback = config.single_instance_estimator
                     ? single.on_receipt(seq, erased_at).back()
                     : interleaved.on_receipt(seq, erased_at);
    }
    ReceivedPacket pkt;
    pkt.seq = seq;
    pkt.payload = frame.payload;
    if (!fields.primary.params.is_uncoded()) pkt.fields.push_back(fields.primary);
    if (fields.secondary) pkt.fields.push_back(*fields.secondary);
    for (const auto& f : decoder.on_packet(std::move(pkt))) account(f);
  }
  for (const auto& f : decoder.flush()) account(f);

  result.sessions.resize(config.sessions);
  double flr_sum = 0, low_fi = 0, rate_total = 0, non_mds_total = 0;
  for (int s = 0; s < config.sessions; ++s) {
    std::size_t ok = 0;
    for (int i = 0; i < config.session_length; ++i)
      ok += result.recovered[static_cast<std::size_t>(s) * config.session_length + i];
    SessionMetrics& m = result.sessions[s];
    m.index = s;
    m.flr = 1.0 - static_cast<double>(ok) / config.session_length;
    m.mean_rate = rate_sum[s] / config.session_length;
    m.low_fidelity = m.flr > 0.1;
    m.non_mds_fraction = static_cast<double>(non_mds_count[s]) / config.session_length;
    flr_sum += m.flr;
    low_fi += m.low_fidelity ? 1 : 0;
    rate_total += m.mean_rate;
    non_mds_total += m.non_mds_fraction;
  }
  result.avg_flr = flr_sum / config.sessions;
  result.low_fidelity_fraction = low_fi / config.sessions;
  result.avg_rate = rate_total / config.sessions;
  result.non_mds_fraction = non_mds_total / config.sessions;
  return result;
}

// ---- best fixed-rate code search

enum class FixedSearchPolicy {
  all_below_budget,  // every (B, N) whose capacity fits under the budget
  rate_matched,      // only the (B, N) at the largest capacity under it
};

struct FixedSearchResult {
  CodeParams params;
  double avg_flr = 0;
  std::size_t candidates = 0;
};

// Exhaustive scan over fixed (B, N) pairs within the rate budget,
// minimizing average FLR on the trace; ties prefer the higher rate, then
// the smaller burst bound. FLR of a fixed code depends only on the erasure
// pattern, so candidates run with one-byte frames.
inline FixedSearchResult best_fixed_search(const LossTrace& trace, int delay,
                                           int session_length, int sessions,
                                           Rational rate_budget,
                                           FixedSearchPolicy policy = FixedSearchPolicy::all_below_budget)
{
  if (rate_budget <= Rational(0, 1) || rate_budget > Rational(1, 1))
    throw std::invalid_argument("best_fixed_search: budget must be in (0, 1]");

  std::vector<CodeParams> candidates;
  for (int b = 1; b <= delay; ++b)
    for (int n = 1; n <= b; ++n)
      if (capacity({delay, b, n}) <= rate_budget) candidates.push_back({delay, b, n});
  if (candidates.empty())
    throw std::invalid_argument("best_fixed_search: no code fits under budget " +
                                rate_budget.str());

  if (policy == FixedSearchPolicy::rate_matched) {
    Rational best{0, 1};
    for (const auto& p : candidates) best = std::max(best, capacity(p));
    std::vector<CodeParams> matched;
    for (const auto& p : candidates)
      if (capacity(p) == best) matched.push_back(p);
    candidates = std::move(matched);
  }

  std::optional<FixedSearchResult> best;
  for (const auto& params : candidates) {
    ExperimentConfig config;
    config.delay = delay;
    config.session_length = session_length;
    config.sessions = sessions;
    config.frame_bytes = 1;
    config.strategy = Strategy::fixed;
    config.fixed_params = params;
    const auto run = run_experiment(config, trace);

    bool better = false;
    if (!best) {
      better = true;
    } else if (run.avg_flr != best->avg_flr) {
      better = run.avg_flr < best->avg_flr;
    } else if (capacity(params) != capacity(best->params)) {
      better = capacity(params) > capacity(best->params);
    } else {
      better = params.max_burst < best->params.max_burst;
    }
    if (better) best = FixedSearchResult{params, run.avg_flr, 0};
  }
  best->candidates = candidates.size();
  return *best;
}

// ---- results CSV

inline void write_results_csv(std::ostream& os, const ExperimentResult& result)
{
  char line[160];
  os << "session,flr,rate,low_fidelity,non_mds_fraction\n";
  for (const auto& m : result.sessions) {
    std::snprintf(line, sizeof line, "%d,%.6f,%.6f,%d,%.6f", m.index, m.flr, m.mean_rate,
                  m.low_fidelity ? 1 : 0, m.non_mds_fraction);
    os << line << '\n';
  }
  std::snprintf(line, sizeof line, "#agg,%.6f,%.6f,%.6f", result.avg_flr,
                result.low_fidelity_fraction, result.avg_rate);
  os << line << '\n';
}

}  // namespace streamfec
