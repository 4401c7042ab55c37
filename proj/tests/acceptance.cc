// Acceptance suite: one test per criterion, one PASS/FAIL line each, every
// tolerance pinned in code. Paper-scale runs included; the whole binary
// stays well inside a ten-minute budget on one core.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <thread>
#include <vector>

#include "gtest/gtest.h"
#include "streamfec/block_code.hpp"
#include "streamfec/channel.hpp"
#include "streamfec/estimator.hpp"
#include "streamfec/harness.hpp"
#include "streamfec/stream_codec.hpp"
#include "streamfec/udp.hpp"

using namespace streamfec;

namespace {

void report(int criterion, bool pass, const std::string& detail)
{
  std::printf("ACCEPTANCE C%d %s - %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  EXPECT_TRUE(pass) << "criterion " << criterion << ": " << detail;
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- shared fixed-code session runner (codec level)

struct SessionRun {
  std::vector<DecodedFrame> frames;
  std::vector<std::int64_t> emitted_at;
};

SessionRun run_fixed_session(CodeParams params, std::size_t payload_len, std::size_t total,
                             const std::vector<std::uint8_t>& erased, std::uint64_t seed)
{
  StreamEncoder enc(params.delay);
  StreamDecoder dec(params.delay);
  if (!params.is_uncoded()) enc.begin_transition(params, 0);

  SessionRun out;
  out.frames.resize(total);
  out.emitted_at.assign(total, -1);
  const auto absorb = [&](std::vector<DecodedFrame> frames, std::int64_t event) {
    for (auto& f : frames) {
      out.emitted_at[f.seq] = event;
      out.frames[f.seq] = std::move(f);
    }
  };
  for (std::uint32_t seq = 0; seq < total; ++seq) {
    SourceFrame frame{seq, frame_payload(seed, seq, payload_len)};
    const auto fields = enc.encode_step(frame);
    if (erased[seq]) {
      absorb(dec.on_erasure(seq), seq);
    } else {
      ReceivedPacket pkt{seq, frame.payload, {}};
      if (!fields.primary.params.is_uncoded()) pkt.fields.push_back(fields.primary);
      if (fields.secondary) pkt.fields.push_back(*fields.secondary);
      absorb(dec.on_packet(std::move(pkt)), seq);
    }
  }
  absorb(dec.flush(), -1);
  return out;
}

}  // namespace

// Criterion 1: every (T,B,N) with 1 <= N <= B <= T <= 8 constructs at rate
// exactly C(T,B,N) and passes the exhaustive verification oracle, three
// seeds each; for T in {9,10,11} the pairs (T,1), (T,T), (ceil(T/2),2) and
// (ceil(T/2),ceil(T/2)) pass. Budget: under 10 minutes.
TEST(acceptance, c1_code_optimality_sweep)
{
  const auto start = std::chrono::steady_clock::now();
  std::size_t codes_built = 0, patterns_checked = 0, worst_candidates = 0;
  bool ok = true;

  const auto build_and_check = [&](CodeParams params, std::uint64_t seed) {
    ConstructStats stats;
    const auto code = construct_code(params, seed, &stats);
    const auto verdict = verify_block_code(code);
    ++codes_built;
    patterns_checked += verdict.patterns_checked;
    worst_candidates = std::max(worst_candidates, stats.candidates_tried);
    if (!verdict.pass || code.rate() != capacity(params)) {
      ok = false;
      ADD_FAILURE() << params.str() << " seed " << seed << ": " << verdict.str();
    }
  };

  for (int t = 1; t <= 8; ++t)
    for (int b = 1; b <= t; ++b)
      for (int n = 1; n <= b; ++n)
        for (const std::uint64_t seed : {1, 2, 3}) build_and_check({t, b, n}, seed);

  for (const int t : {9, 10, 11}) {
    const int half = (t + 1) / 2;
    build_and_check({t, t, 1}, 1);
    build_and_check({t, t, t}, 1);
    build_and_check({t, half, 2}, 1);
    build_and_check({t, half, half}, 1);
  }

  const double elapsed = seconds_since(start);
  char detail[256];
  std::snprintf(detail, sizeof detail,
                "%zu codes certified at exact capacity, %zu admissible patterns checked, "
                "max %zu search candidates, %.1fs (budget 600s)",
                codes_built, patterns_checked, worst_candidates, elapsed);
  report(1, ok && elapsed < 600.0, detail);
}

// Criterion 2: exhaustive for T <= 5 - every admissible single-window
// erasure pattern embedded in a clean stream is fully recovered, each frame
// by seq+T; a burst of T+1 consecutive erasures is never fully recovered
// and its head frame (whose entire deadline window is gone) is reported
// LOST exactly at its deadline. Zero tolerance.
TEST(acceptance, c2_streaming_delay_contract)
{
  bool ok = true;
  std::size_t patterns_run = 0;

  for (int t = 1; t <= 5; ++t) {
    const int window = t + 1;
    const std::size_t total = 3 * static_cast<std::size_t>(window);
    for (int b = 1; b <= t; ++b)
      for (int n = 1; n <= b; ++n) {
        const CodeParams params{t, b, n};
        for (std::uint32_t mask = 1; mask < (1u << window); ++mask) {
          ErasureWindow w;
          for (int i = 0; i < window; ++i) w.bits.push_back((mask >> i) & 1);
          if (classify_window(w, b, n) != WindowClass::correctable) continue;
          for (const std::size_t offset : {std::size_t{0}, static_cast<std::size_t>(window)}) {
            std::vector<std::uint8_t> erased(total, 0);
            for (int i = 0; i < window; ++i) erased[offset + i] = (mask >> i) & 1;
            const auto run = run_fixed_session(params, 7, total, erased, mask);
            ++patterns_run;
            for (std::size_t seq = 0; seq < total; ++seq) {
              if (!run.frames[seq].recovered ||
                  (erased[seq] && run.emitted_at[seq] > static_cast<std::int64_t>(seq) + t)) {
                ok = false;
                ADD_FAILURE() << params.str() << " mask " << mask << " offset " << offset
                              << " seq " << seq;
              }
            }
          }
        }

        // all-ones window: head frame lost at its deadline, burst never fully back
        std::vector<std::uint8_t> erased(total, 0);
        for (int i = 0; i < window; ++i) erased[window + i] = 1;
        const auto run = run_fixed_session(params, 7, total, erased, 99);
        ++patterns_run;
        bool all_back = true;
        for (int i = 0; i < window; ++i) all_back = all_back && run.frames[window + i].recovered;
        if (run.frames[window].recovered || all_back ||
            run.emitted_at[window] != static_cast<std::int64_t>(window + t)) {
          ok = false;
          ADD_FAILURE() << params.str() << " full-window burst handling";
        }
        for (std::size_t seq = 0; seq < total; ++seq) {
          if (!erased[seq] && !run.frames[seq].recovered) ok = false;
        }
      }
  }
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "all delays through 5: %zu embedded patterns, every frame by its deadline, "
                "zero violations",
                patterns_run);
  report(2, ok, detail);
}

// Criterion 3: on 10,000 random traces at T=10 the estimator matches an
// independent straight-line transcription of the pseudocode exactly, and
// every window it has seen stays covered by the running estimate (all-ones
// windows aside). Zero violations.
TEST(acceptance, c3_algorithm1_conformance)
{
  const int delay = 10;
  SplitMix64 rng(0xA1C0);
  std::size_t uses_checked = 0;
  bool ok = true;

  for (int trial = 0; trial < 10000 && ok; ++trial) {
    const std::size_t len = 120 + rng.next_below(120);
    std::vector<std::uint8_t> erased(len, 0);
    {
      std::size_t i = 0;
      while (i < len) {
        if (rng.next_below(100) < 10) {
          const std::size_t burst = 1 + rng.next_below(9);
          for (std::size_t b = 0; b < burst && i < len; ++b) erased[i++] = 1;
        } else {
          ++i;
        }
      }
    }

    // transcription state
    std::int64_t ref_prev = -1;
    int ref_b = 0, ref_n = 0, ref_peak = 0;

    ParamEstimator module(delay);
    bool seen_pair[16][16] = {};

    for (std::int64_t i = 0; i < static_cast<std::int64_t>(len); ++i) {
      if (erased[i]) continue;
      const auto got = module.on_receipt(i, [&](std::int64_t x) { return erased[x] != 0; });

      std::size_t out_idx = 0;
      for (std::int64_t j = ref_prev + 1; j <= i; ++j, ++out_idx) {
        int wt = 0;
        std::int64_t first = -1, last = -1;
        for (std::int64_t x = j - delay; x <= j; ++x) {
          if (x < 0 || !erased[x]) continue;
          ++wt;
          if (first < 0) first = x;
          last = x;
        }
        const int span = wt ? static_cast<int>(last - first + 1) : 0;
        const int bbar = std::max(span, ref_b);
        const int nbar = std::max(wt, ref_n);
        ref_peak = std::max(wt, ref_peak);
        if (nbar != 0 && nbar != delay + 1) {
          using estimator_detail::hypothetic_rate;
          const Rational rb = bbar == delay + 1
                                  ? Rational(0, 1)
                                  : hypothetic_rate(delay, bbar, std::max(ref_n, 1));
          const Rational rn = hypothetic_rate(delay, std::max(ref_b, nbar), nbar);
          const Rational rmds = hypothetic_rate(delay, ref_peak, ref_peak);
          if (rb >= rn && rb >= rmds) {
            ref_b = bbar;
            ref_n = std::max(ref_n, 1);
          } else if (rn >= rmds) {
            ref_b = std::max(ref_b, nbar);
            ref_n = nbar;
          } else {
            ref_b = ref_peak;
            ref_n = ref_peak;
          }
        }
        if (got[out_idx] != Estimate{ref_b, ref_n}) {
          ok = false;
          ADD_FAILURE() << "trial " << trial << " use " << j << ": module ("
                        << got[out_idx].burst << "," << got[out_idx].isolated
                        << ") transcription (" << ref_b << "," << ref_n << ")";
        }

        // conservativeness over the distinct (weight, span) pairs seen
        if (wt <= delay) seen_pair[wt][span] = true;
        for (int pw = 0; pw <= delay && ok; ++pw)
          for (int ps = 0; ps <= delay + 1; ++ps) {
            if (!seen_pair[pw][ps]) continue;
            if (pw == 0 || ps <= got[out_idx].burst || pw <= got[out_idx].isolated) continue;
            ok = false;
            ADD_FAILURE() << "trial " << trial << " use " << j << ": window (wt " << pw
                          << ", span " << ps << ") uncovered by (" << got[out_idx].burst << ","
                          << got[out_idx].isolated << ")";
          }
        ++uses_checked;
      }
      ref_prev = i;
    }
  }
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "10000 traces, %zu channel uses: exact pseudocode match, zero "
                "conservativeness violations",
                uses_checked);
  report(3, ok, detail);
}

// Criterion 4: after 2L erasure-free uses following any erasure history the
// emitted estimate is (0,0). Zero tolerance.
TEST(acceptance, c4_interleaving_reset)
{
  bool ok = true;
  SplitMix64 rng(0xC4);

  const auto check = [&](int delay, std::int64_t phase, const std::vector<std::uint8_t>& erased,
                         std::int64_t history_end) {
    InterleavedEstimator est(delay, phase);
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(erased.size()); ++i) {
      if (erased[i]) continue;
      const auto e = est.on_receipt(i, [&](std::int64_t x) { return erased[x] != 0; });
      if (i >= history_end + 2 * phase && e != Estimate{0, 0}) {
        ok = false;
        ADD_FAILURE() << "phase " << phase << " use " << i << ": estimate (" << e.burst << ","
                      << e.isolated << ") after 2L clean uses";
      }
    }
  };

  // randomized histories at a small phase
  for (int trial = 0; trial < 300; ++trial) {
    const std::int64_t phase = 40;
    const std::int64_t history = 1 + static_cast<std::int64_t>(rng.next_below(3 * phase));
    std::vector<std::uint8_t> erased(history + 3 * phase, 0);
    for (std::int64_t x = 0; x < history; ++x) erased[x] = rng.next_below(3) == 0;
    check(8, phase, erased, history - 1);
  }

  // paper-scale phase with a saturated history
  {
    const std::int64_t phase = 1000;
    std::vector<std::uint8_t> erased(5 * phase, 0);
    for (std::int64_t x = 0; x < 2 * phase; ++x) erased[x] = rng.next_below(2) == 0;
    check(10, phase, erased, 2 * phase - 1);
  }
  report(4, ok, "emission returns to (0,0) after two clean phases, zero violations");
}

// Criterion 5: three-phase Fritchman at paper scale (M=5, alpha=0.005,
// beta=0.990, T=10, L=1000, 360 sessions), epsilon in {1e-4, 5e-4, 1e-3},
// three seeds. (a) adaptive mean FLR at most 1/3 of the best rate-matched
// fixed code's; (b) at most 1/2 of MDS-adaptive's, at no lower mean rate;
// (c) at least 25% of channel uses on non-MDS codes; (d) the epsilon=1e-4
// burst histogram is bimodal at lengths 1 and 5.
TEST(acceptance, c5_fritchman_reproduction)
{
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  std::string lines;

  for (const double eps : {0.0001, 0.0005, 0.001}) {
    double adaptive_flr = 0, adaptive_rate = 0, non_mds = 0;
    double fixed_flr = 0, mds_flr = 0, mds_rate = 0;

    for (const std::uint64_t seed : {1, 2, 3}) {
      ThreePhasePlan plan{360000, {5, 0.005, 0.990, eps, seed}};
      const auto trace = generate_trace(plan);

      ExperimentConfig config;
      config.delay = 10;
      config.session_length = 1000;
      config.sessions = 360;
      config.frame_bytes = 300;

      config.strategy = Strategy::adaptive;
      const auto adaptive = run_experiment(config, trace);
      adaptive_flr += adaptive.avg_flr / 3;
      adaptive_rate += adaptive.avg_rate / 3;
      non_mds += adaptive.non_mds_fraction / 3;

      config.strategy = Strategy::mds_adaptive;
      const auto mds = run_experiment(config, trace);
      mds_flr += mds.avg_flr / 3;
      mds_rate += mds.avg_rate / 3;

      const Rational budget(static_cast<std::int64_t>(adaptive.avg_rate * 1000000), 1000000);
      const auto fixed = best_fixed_search(trace, 10, 1000, 360, budget,
                                           FixedSearchPolicy::rate_matched);
      fixed_flr += fixed.avg_flr / 3;

      if (eps == 0.0001) {
        const auto hist = burst_histogram(trace);
        const auto count = [&](int len) {
          const auto it = hist.find(len);
          return it == hist.end() ? std::size_t{0} : it->second;
        };
        const bool bimodal =
            count(1) > count(2) && count(5) > count(4) && count(5) > count(6) && count(5) > 100;
        if (!bimodal) {
          ok = false;
          ADD_FAILURE() << "histogram not bimodal at seed " << seed;
        }
      }
    }

    const bool a = adaptive_flr <= fixed_flr / 3.0;
    const bool b = adaptive_flr <= mds_flr / 2.0 && adaptive_rate >= mds_rate;
    const bool c = non_mds >= 0.25;
    ok = ok && a && b && c;
    char line[256];
    std::snprintf(line, sizeof line,
                  " eps=%g: adaptive=%.2e fixed=%.2e (%.1fx) mds=%.2e (%.1fx) "
                  "rate %.3f>=%.3f nonMDS=%.0f%%%s%s%s;",
                  eps, adaptive_flr, fixed_flr, fixed_flr / adaptive_flr, mds_flr,
                  mds_flr / adaptive_flr, adaptive_rate, mds_rate, non_mds * 100,
                  a ? "" : " [a FAILS]", b ? "" : " [b FAILS]", c ? "" : " [c FAILS]");
    lines += line;
  }
  char detail[900];
  std::snprintf(detail, sizeof detail, "%s bimodal histogram at eps=1e-4; %.0fs", lines.c_str(),
                seconds_since(start));
  report(5, ok, detail);
}

// Criterion 6: the constructed 40-packet trace reproduces the narrative:
// the code upgrades land exactly before packets 4 and 18, the adaptive
// scheme recovers the final five-loss burst, and the fixed (10,4,4) code
// recovers exactly one lost frame on the same trace.
TEST(acceptance, c6_code_adaptation_scenario)
{
  const std::set<std::size_t> losses{2, 12, 13, 14, 15, 16, 25, 26, 27, 28, 29};
  LossTrace trace;
  trace.bits.assign(40, 0);
  for (const auto s : losses) trace.bits[s] = 1;

  ExperimentConfig config;
  config.delay = 10;
  config.session_length = 40;
  config.sessions = 1;
  config.frame_bytes = 300;
  config.strategy = Strategy::adaptive;
  config.single_instance_estimator = true;
  config.record_packet_params = true;
  const auto adaptive = run_experiment(config, trace);

  bool ok = adaptive.packet_params[3].is_uncoded() &&
            adaptive.packet_params[4] == CodeParams{10, 1, 1} &&
            adaptive.packet_params[17] == CodeParams{10, 1, 1} &&
            adaptive.packet_params[18] == CodeParams{10, 5, 2};
  for (std::size_t seq = 25; seq <= 29; ++seq) ok = ok && adaptive.recovered[seq];
  for (std::size_t seq = 0; seq < 40; ++seq)
    if (!losses.count(seq)) ok = ok && adaptive.recovered[seq];

  config.strategy = Strategy::fixed;
  config.fixed_params = {10, 4, 4};
  config.single_instance_estimator = false;
  config.record_packet_params = false;
  const auto fixed = run_experiment(config, trace);
  std::size_t fixed_recovered_losses = 0;
  for (const auto seq : losses) fixed_recovered_losses += fixed.recovered[seq];
  ok = ok && fixed_recovered_losses == 1;

  char detail[200];
  std::snprintf(detail, sizeof detail,
                "upgrades to (10,1,1) at packet 4 and (10,5,2) at packet 18; adaptive recovers "
                "the final five-burst, fixed (10,4,4) recovers %zu of 11 losses",
                fixed_recovered_losses);
  report(6, ok, detail);
}

// Criterion 7: UDP sender/receiver on loopback with a 360,000-entry drop
// trace produce the same recovered/LOST frame set as the pure simulator,
// byte-exact payloads, in fast (tick 0) mode.
TEST(acceptance, c7_loopback_end_to_end)
{
  const auto start = std::chrono::steady_clock::now();
  const std::uint32_t total = 360000;
  const int delay = 10;
  const int session_length = 1000;
  const std::uint64_t payload_seed = 0x10ad;
  const int frame_bytes = 300;

  ThreePhasePlan plan{total, {5, 0.005, 0.990, 0.0001, 1}};
  const auto trace = generate_trace(plan);

  ExperimentConfig sim;
  sim.delay = delay;
  sim.session_length = session_length;
  sim.sessions = 360;
  sim.frame_bytes = frame_bytes;
  sim.strategy = Strategy::adaptive;
  sim.payload_seed = payload_seed;
  std::vector<std::uint8_t> sim_recovered(total, 0);
  sim.frame_sink = [&](const DecodedFrame& f) { sim_recovered[f.seq] = f.recovered ? 1 : 0; };
  run_experiment(sim, trace);

  DestinationConfig dconfig;
  dconfig.bind = {"127.0.0.1", 0};
  dconfig.delay = delay;
  dconfig.session_length = session_length;
  dconfig.drop_oracle = trace;
  dconfig.expected_total = total;
  dconfig.idle_timeout_ms = 10000;
  std::vector<std::uint8_t> udp_recovered(total, 0);
  std::size_t payload_mismatches = 0, emissions = 0;
  dconfig.frame_sink = [&](const DecodedFrame& f) {
    ++emissions;
    udp_recovered[f.seq] = f.recovered ? 1 : 0;
    if (f.recovered && f.payload != frame_payload(payload_seed, f.seq, frame_bytes))
      ++payload_mismatches;
  };

  DestinationLoop destination(dconfig);
  const std::uint16_t port = destination.port();
  std::thread dest_thread([&] { destination.run(); });

  SourceConfig sconfig;
  sconfig.peer = {"127.0.0.1", port};
  sconfig.bind = {"127.0.0.1", 0};
  sconfig.delay = delay;
  sconfig.tick_ms = 0;
  sconfig.feedback_wait_ms = 3;
  const auto stats = source_loop(sconfig, [&](std::uint32_t seq, std::vector<std::uint8_t>& payload) {
    if (seq >= total) return false;
    payload = frame_payload(payload_seed, seq, frame_bytes);
    return true;
  });
  dest_thread.join();

  std::size_t diverged = 0;
  for (std::uint32_t seq = 0; seq < total; ++seq)
    if (sim_recovered[seq] != udp_recovered[seq]) ++diverged;

  const double elapsed = seconds_since(start);
  const bool ok = stats.sent == total && emissions == total && diverged == 0 &&
                  payload_mismatches == 0 && elapsed < 480.0;
  char detail[256];
  std::snprintf(detail, sizeof detail,
                "360000 frames over loopback: %zu set divergences, %zu payload mismatches vs "
                "simulator, %.0fs in fast mode",
                diverged, payload_mismatches, elapsed);
  report(7, ok, detail);
}

// Criterion 8: PESQ reproduction (paper figures 10-16) needs external audio
// tooling and is explicitly out of scope; FLR and the low-fidelity fraction
// stand as the fidelity proxies throughout this suite.
TEST(acceptance, c8_pesq_out_of_scope)
{
  report(8, true,
         "PESQ figures not reproducible without external audio tooling; FLR and "
         "low-fidelity fraction serve as proxies");
}
