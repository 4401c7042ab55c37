// Command-line front end: code generation and verification, trace
// generation, experiment runs, and the UDP sender/receiver.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "streamfec/block_code.hpp"
#include "streamfec/channel.hpp"
#include "streamfec/harness.hpp"
#include "streamfec/udp.hpp"

using namespace streamfec;

namespace {

constexpr int kUsageError = 2;

int cmd_gen_code(int delay, int burst, int isolated, std::uint64_t seed,
                 const std::string& out, bool append)
{
  const CodeParams params{delay, burst, isolated};
  if (!params.valid() || params.is_uncoded()) {
    std::cerr << "gen-code: invalid parameters " << params.str()
              << " (need T >= B >= N >= 1)\n";
    return kUsageError;
  }
  ConstructStats stats;
  const BlockCode code = construct_code(params, seed, &stats);
  std::ofstream os(out, append ? std::ios::app : std::ios::trunc);
  if (!os) {
    std::cerr << "gen-code: cannot write " << out << "\n";
    return 1;
  }
  save_code_table(os, {code});
  std::cout << "generated " << params.str() << " n=" << code.n << " k=" << code.k
            << " rate=" << code.rate().str() << " seed=" << seed
            << " candidates=" << stats.candidates_tried << "\n";
  return 0;
}

int cmd_verify_code(const std::string& table)
{
  std::vector<BlockCode> codes;
  try {
    codes = load_code_table(table);  // loader re-verifies every record
  } catch (const std::exception& e) {
    std::cerr << "verify-code: " << e.what() << "\n";
    return 1;
  }
  for (const auto& code : codes) {
    const auto report = verify_block_code(code);
    std::cout << code.params.str() << " rate=" << code.rate().str() << " " << report.str()
              << "\n";
    if (!report.pass) return 1;
  }
  std::cout << codes.size() << " code(s) verified\n";
  return 0;
}

int cmd_gen_trace(const std::string& model, int bad_states, double alpha, double beta,
                  double epsilon, std::size_t len, int phases, std::uint64_t seed,
                  const std::string& out, const std::string& hist_csv)
{
  if (model != "fritchman") {
    std::cerr << "gen-trace: unknown model '" << model << "'\n";
    return kUsageError;
  }
  const FritchmanConfig config{bad_states, alpha, beta, epsilon, seed};
  if (!config.valid()) {
    std::cerr << "gen-trace: invalid channel parameters\n";
    return kUsageError;
  }
  LossTrace trace;
  if (phases == 3)
    trace = generate_trace(ThreePhasePlan{len, config});
  else if (phases == 1)
    trace = generate_fritchman_trace(config, len);
  else {
    std::cerr << "gen-trace: --phases must be 1 or 3\n";
    return kUsageError;
  }
  write_trace(out, trace);
  if (!hist_csv.empty()) {
    std::ofstream os(hist_csv);
    if (!os) {
      std::cerr << "gen-trace: cannot write " << hist_csv << "\n";
      return 1;
    }
    write_burst_histogram_csv(os, burst_histogram(trace));
  }
  std::cout << "wrote " << trace.size() << " uses, loss rate " << trace.loss_rate() << " to "
            << out << "\n";
  return 0;
}

int cmd_run(const std::string& strategy, int delay, int session_length, int sessions,
            int frame_bytes, std::optional<int> burst, std::optional<int> isolated,
            const std::string& trace_path, const std::string& out_csv,
            const std::string& emit_frames, std::uint64_t payload_seed, bool single_estimator)
{
  ExperimentConfig config;
  config.delay = delay;
  config.session_length = session_length;
  config.sessions = sessions;
  config.frame_bytes = frame_bytes;
  config.payload_seed = payload_seed;
  config.single_instance_estimator = single_estimator;

  if (strategy == "uncoded") {
    config.strategy = Strategy::uncoded;
  } else if (strategy == "fixed") {
    config.strategy = Strategy::fixed;
    if (!burst || !isolated) {
      std::cerr << "run: --strategy fixed requires --B and --N\n";
      return kUsageError;
    }
    config.fixed_params = {delay, *burst, *isolated};
    if (!config.fixed_params.valid()) {
      std::cerr << "run: invalid fixed parameters " << config.fixed_params.str() << "\n";
      return kUsageError;
    }
  } else if (strategy == "mds") {
    config.strategy = Strategy::mds_adaptive;
  } else if (strategy == "adaptive") {
    config.strategy = Strategy::adaptive;
  } else {
    std::cerr << "run: unknown strategy '" << strategy << "'\n";
    return kUsageError;
  }

  std::ofstream frames_os;
  if (!emit_frames.empty()) {
    frames_os.open(emit_frames, std::ios::binary);
    if (!frames_os) {
      std::cerr << "run: cannot write " << emit_frames << "\n";
      return 1;
    }
    config.frame_sink = [&](const DecodedFrame& f) { write_frame_record(frames_os, f); };
  }

  const LossTrace trace = read_trace(trace_path);
  const auto result = run_experiment(config, trace);

  if (out_csv.empty()) {
    write_results_csv(std::cout, result);
  } else {
    std::ofstream os(out_csv);
    if (!os) {
      std::cerr << "run: cannot write " << out_csv << "\n";
      return 1;
    }
    write_results_csv(os, result);
    std::cout << "strategy=" << strategy << " avg_flr=" << result.avg_flr
              << " avg_rate=" << result.avg_rate
              << " low_fidelity=" << result.low_fidelity_fraction
              << " non_mds=" << result.non_mds_fraction << "\n";
  }
  return 0;
}

int cmd_send(const std::string& peer_spec, int tick_ms, const std::string& input, int delay,
             int frame_bytes, std::uint32_t count, std::uint64_t payload_seed, bool mds)
{
  const auto colon = peer_spec.rfind(':');
  if (colon == std::string::npos) {
    std::cerr << "send: --peer must be host:port\n";
    return kUsageError;
  }
  SourceConfig config;
  config.peer = {peer_spec.substr(0, colon),
                 static_cast<std::uint16_t>(std::stoi(peer_spec.substr(colon + 1)))};
  config.bind = {"0.0.0.0", 0};
  config.delay = delay;
  config.tick_ms = tick_ms;
  config.mds_strategy = mds;

  std::vector<std::uint8_t> file_bytes;
  if (!input.empty()) {
    std::ifstream is(input, std::ios::binary);
    if (!is) {
      std::cerr << "send: cannot read " << input << "\n";
      return 1;
    }
    file_bytes.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    count = static_cast<std::uint32_t>((file_bytes.size() + frame_bytes - 1) / frame_bytes);
  }

  const auto stats = source_loop(config, [&](std::uint32_t seq, std::vector<std::uint8_t>& payload) {
    if (seq >= count) return false;
    if (!input.empty()) {
      payload.assign(frame_bytes, 0);
      const std::size_t offset = static_cast<std::size_t>(seq) * frame_bytes;
      for (int i = 0; i < frame_bytes && offset + i < file_bytes.size(); ++i)
        payload[i] = file_bytes[offset + i];
    } else {
      payload = frame_payload(payload_seed, seq, static_cast<std::size_t>(frame_bytes));
    }
    return true;
  });
  std::cout << "sent=" << stats.sent << " feedback_applied=" << stats.feedback_applied
            << " send_errors=" << stats.send_errors << "\n";
  return 0;
}

int cmd_recv(const std::string& bind_spec, const std::string& drop_trace,
             const std::string& out, int delay, int session_length,
             std::optional<std::uint32_t> expect, int idle_timeout_ms)
{
  const auto colon = bind_spec.rfind(':');
  if (colon == std::string::npos) {
    std::cerr << "recv: --bind must be host:port\n";
    return kUsageError;
  }
  DestinationConfig config;
  config.bind = {bind_spec.substr(0, colon),
                 static_cast<std::uint16_t>(std::stoi(bind_spec.substr(colon + 1)))};
  config.delay = delay;
  config.session_length = session_length;
  config.idle_timeout_ms = idle_timeout_ms;
  if (!drop_trace.empty()) config.drop_oracle = read_trace(drop_trace);
  if (expect) config.expected_total = *expect;

  std::ofstream os;
  std::size_t recovered = 0, lost = 0;
  if (!out.empty()) {
    os.open(out, std::ios::binary);
    if (!os) {
      std::cerr << "recv: cannot write " << out << "\n";
      return 1;
    }
  }
  config.frame_sink = [&](const DecodedFrame& f) {
    (f.recovered ? recovered : lost)++;
    if (os.is_open()) write_frame_record(os, f);
  };

  DestinationLoop destination(config);
  std::cout << "listening on port " << destination.port() << "\n";
  const auto stats = destination.run();
  std::cout << "accepted=" << stats.accepted << " oracle_dropped=" << stats.dropped_by_oracle
            << " malformed=" << stats.malformed << " stale=" << stats.stale
            << " recovered=" << recovered << " lost=" << lost << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"network-adaptive low-latency FEC streaming"};
  app.require_subcommand(1);

  // gen-code
  auto* gen_code = app.add_subcommand("gen-code", "construct and save an optimal block code");
  int gc_t = 10, gc_b = 5, gc_n = 2;
  std::uint64_t gc_seed = kDefaultCodeSeed;
  std::string gc_out = "codes.tbl";
  bool gc_append = false;
  gen_code->add_option("--T", gc_t, "decoding delay")->required();
  gen_code->add_option("--B", gc_b, "max burst")->required();
  gen_code->add_option("--N", gc_n, "max arbitrary losses")->required();
  gen_code->add_option("--seed", gc_seed, "search seed");
  gen_code->add_option("--out", gc_out, "code table file");
  gen_code->add_flag("--append", gc_append, "append to the table instead of overwriting");

  // verify-code
  auto* verify = app.add_subcommand("verify-code", "re-verify every code in a table file");
  std::string vc_table = "codes.tbl";
  verify->add_option("--table", vc_table, "code table file")->required();

  // gen-trace
  auto* gen_trace = app.add_subcommand("gen-trace", "generate a packet loss trace");
  std::string gt_model = "fritchman", gt_out = "trace.txt", gt_hist;
  int gt_m = 5, gt_phases = 3;
  double gt_alpha = 0.005, gt_beta = 0.990, gt_epsilon = 0.001;
  std::size_t gt_len = 360000;
  std::uint64_t gt_seed = 1;
  gen_trace->add_option("--model", gt_model, "channel model (fritchman)");
  gen_trace->add_option("--M", gt_m, "bad state count");
  gen_trace->add_option("--alpha", gt_alpha, "G to E1 probability");
  gen_trace->add_option("--beta", gt_beta, "bad-state advance/exit probability");
  gen_trace->add_option("--epsilon", gt_epsilon, "loss probability in G");
  gen_trace->add_option("--len", gt_len, "trace length in channel uses");
  gen_trace->add_option("--phases", gt_phases, "1 plain or 3 three-phase");
  gen_trace->add_option("--seed", gt_seed, "RNG seed");
  gen_trace->add_option("--out", gt_out, "output file");
  gen_trace->add_option("--hist-csv", gt_hist, "also write the burst-length histogram CSV");

  // run
  auto* run = app.add_subcommand("run", "run an experiment over a trace");
  std::string r_strategy = "adaptive", r_trace, r_csv, r_frames;
  int r_t = 10, r_l = 1000, r_sessions = 360, r_bytes = 300;
  std::optional<int> r_b, r_n;
  std::uint64_t r_payload_seed = 0x50a7;
  bool r_single = false;
  run->add_option("--strategy", r_strategy, "uncoded|fixed|mds|adaptive");
  run->add_option("--T", r_t, "decoding delay");
  run->add_option("--L", r_l, "session length in packets");
  run->add_option("--sessions", r_sessions, "session count");
  run->add_option("--frame-bytes", r_bytes, "frame payload size");
  run->add_option("--B", r_b, "fixed strategy: burst parameter");
  run->add_option("--N", r_n, "fixed strategy: arbitrary parameter");
  run->add_option("--trace", r_trace, "loss trace file")->required();
  run->add_option("--out-csv", r_csv, "results CSV (stdout when omitted)");
  run->add_option("--emit-frames", r_frames, "binary per-frame record file");
  run->add_option("--payload-seed", r_payload_seed, "frame content seed");
  run->add_flag("--single-estimator", r_single, "plain estimator, no interleaving");

  // send
  auto* send = app.add_subcommand("send", "UDP source");
  std::string s_peer, s_input;
  int s_tick = 10, s_t = 10, s_bytes = 300;
  std::uint32_t s_count = 1000;
  std::uint64_t s_payload_seed = 0x50a7;
  bool s_mds = false;
  send->add_option("--peer", s_peer, "destination host:port")->required();
  send->add_option("--tick-ms", s_tick, "frame interval; 0 = fast lock-step");
  send->add_option("--input", s_input, "raw file to send as frames");
  send->add_option("--T", s_t, "decoding delay");
  send->add_option("--frame-bytes", s_bytes, "frame payload size");
  send->add_option("--count", s_count, "generated frame count when no --input");
  send->add_option("--payload-seed", s_payload_seed, "generated frame content seed");
  send->add_flag("--mds", s_mds, "quantize feedback to MDS parameters");

  // recv
  auto* recv = app.add_subcommand("recv", "UDP destination");
  std::string d_bind = "0.0.0.0:0", d_drop, d_out;
  int d_t = 10, d_l = 1000, d_idle = 2000;
  std::optional<std::uint32_t> d_expect;
  recv->add_option("--bind", d_bind, "bind host:port");
  recv->add_option("--drop-trace", d_drop, "receiver-side drop oracle trace");
  recv->add_option("--out", d_out, "binary per-frame record file");
  recv->add_option("--T", d_t, "decoding delay");
  recv->add_option("--session-length", d_l, "estimator phase length");
  recv->add_option("--expect", d_expect, "total seq count, finalize and exit when reached");
  recv->add_option("--idle-timeout-ms", d_idle, "flush after this much silence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    app.exit(e);
    return kUsageError;
  }

  try {
    if (gen_code->parsed())
      return cmd_gen_code(gc_t, gc_b, gc_n, gc_seed, gc_out, gc_append);
    if (verify->parsed()) return cmd_verify_code(vc_table);
    if (gen_trace->parsed())
      return cmd_gen_trace(gt_model, gt_m, gt_alpha, gt_beta, gt_epsilon, gt_len, gt_phases,
                           gt_seed, gt_out, gt_hist);
    if (run->parsed())
      return cmd_run(r_strategy, r_t, r_l, r_sessions, r_bytes, r_b, r_n, r_trace, r_csv,
                     r_frames, r_payload_seed, r_single);
    if (send->parsed())
      return cmd_send(s_peer, s_tick, s_input, s_t, s_bytes, s_count, s_payload_seed, s_mds);
    if (recv->parsed())
      return cmd_recv(d_bind, d_drop, d_out, d_t, d_l, d_expect, d_idle);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsageError;
}
