#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamfec/rng.hpp"

namespace streamfec {

// Fritchman erasure model: one good state G and bad_states chained bad
// states. In G a packet is lost with probability epsilon; in any bad state
// it is lost outright, and the chain advances (or exits back to G from the
// last bad state) with probability beta.
struct FritchmanConfig {
  int bad_states = 5;     // M
  double alpha = 0.005;   // G -> E1
  double beta = 0.990;    // advance / exit
  double epsilon = 0.0;   // loss inside G
  std::uint64_t seed = 1;

  bool valid() const
  {
    return bad_states >= 1 && alpha >= 0 && alpha <= 1 && beta >= 0 && beta <= 1 &&
           epsilon >= 0 && epsilon < 1;
  }
};

class FritchmanChannel {
public:
  explicit FritchmanChannel(const FritchmanConfig& config)
      : config_(config), rng_(config.seed)
  {
    if (!config.valid()) throw std::invalid_argument("FritchmanChannel: bad config");
  }

  // 0 = good state, l in [1, bad_states] = E_l. The chain starts good.
  int state() const { return state_; }

  // One channel use: sample the erasure from the current state, then the
  // transition.
  bool step()
  {
    bool erased;
    if (state_ == 0) {
      erased = rng_.next_double() < config_.epsilon;
      if (rng_.next_double() < config_.alpha) state_ = 1;
    } else {
      erased = true;
      if (rng_.next_double() < config_.beta)
        state_ = state_ == config_.bad_states ? 0 : state_ + 1;
    }
    return erased;
  }

  // One use with the chain pinned to the good state (middle-phase rule):
  // Bernoulli(epsilon) losses only, no transition draw.
  bool step_pinned_good()
  {
    state_ = 0;
    return rng_.next_double() < config_.epsilon;
  }

private:
  FritchmanConfig config_;
  SplitMix64 rng_;
  int state_ = 0;
};

// 1 = packet erased, index = seq.
struct LossTrace {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  bool erased(std::size_t seq) const { return bits[seq] != 0; }
  double loss_rate() const
  {
    std::size_t lost = 0;
    for (const auto b : bits) lost += b;
    return bits.empty() ? 0.0 : static_cast<double>(lost) / static_cast<double>(bits.size());
  }
};

// Fritchman dynamics in the first and last quarter, good-state-pinned in
// the middle half.
struct ThreePhasePlan {
  std::size_t total = 0;
  FritchmanConfig config;
};

inline LossTrace generate_trace(const ThreePhasePlan& plan)
{
  FritchmanChannel channel(plan.config);
  LossTrace trace;
  trace.bits.resize(plan.total);
  const std::size_t first_boundary = plan.total / 4;
  const std::size_t second_boundary = 3 * plan.total / 4;
  for (std::size_t i = 0; i < plan.total; ++i) {
    const bool middle = i >= first_boundary && i < second_boundary;
    trace.bits[i] = middle ? channel.step_pinned_good() : channel.step();
  }
  return trace;
}

// Plain single-phase run, for tests and custom experiments.
inline LossTrace generate_fritchman_trace(const FritchmanConfig& config, std::size_t total)
{
  FritchmanChannel channel(config);
  LossTrace trace;
  trace.bits.resize(total);
  for (std::size_t i = 0; i < total; ++i) trace.bits[i] = channel.step();
  return trace;
}

// ---- trace files: ASCII '0'/'1', any whitespace ignored

inline void write_trace(std::ostream& os, const LossTrace& trace)
{
  for (std::size_t i = 0; i < trace.bits.size(); ++i) {
    os.put(trace.bits[i] ? '1' : '0');
    if ((i + 1) % 100 == 0) os.put('\n');
  }
  if (trace.bits.size() % 100 != 0) os.put('\n');
}

inline void write_trace(const std::string& path, const LossTrace& trace)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write trace: " + path);
  write_trace(os, trace);
}

inline LossTrace read_trace(std::istream& is)
{
  LossTrace trace;
  std::size_t offset = 0;
  char c;
  while (is.get(c)) {
    if (c == '0')
      trace.bits.push_back(0);
    else if (c == '1')
      trace.bits.push_back(1);
    else if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '\v' && c != '\f')
      throw std::runtime_error("trace parse error at offset " + std::to_string(offset) +
                               ": unexpected character '" + std::string(1, c) + "'");
    ++offset;
  }
  return trace;
}

inline LossTrace read_trace(const std::string& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read trace: " + path);
  return read_trace(is);
}

// Burst length -> count, by run-length scan.
inline std::map<int, std::size_t> burst_histogram(const LossTrace& trace)
{
  std::map<int, std::size_t> hist;
  int run = 0;
  for (const auto b : trace.bits) {
    if (b) {
      ++run;
    } else if (run > 0) {
      ++hist[run];
      run = 0;
    }
  }
  if (run > 0) ++hist[run];
  return hist;
}

// "length,count" rows.
inline void write_burst_histogram_csv(std::ostream& os, const std::map<int, std::size_t>& hist)
{
  os << "length,count\n";
  for (const auto& [length, count] : hist) os << length << ',' << count << '\n';
}

}  // namespace streamfec
