#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "streamfec/code_params.hpp"
#include "streamfec/rational.hpp"

namespace streamfec {

struct Estimate {
  int burst = 0;     // conservative B
  int isolated = 0;  // conservative N

  friend bool operator==(const Estimate&, const Estimate&) = default;
};

namespace estimator_detail {

// Hypothetic achievable rate, tolerant of the pegged T+1 arguments that
// arise after an uncorrectable window (where it correctly evaluates to 0).
inline Rational hypothetic_rate(int delay, int burst, int isolated)
{
  return {std::max(0, delay - isolated + 1), delay - isolated + burst + 1};
}

}  // namespace estimator_detail

// Conservative (B, N) estimation from observed erasures. Runs once per
// received packet and catches up one estimate per channel use since the
// previous receipt; for each use it folds the enclosing window's weight
// and span into the running estimates, then adopts whichever of the three
// candidate updates (grow the burst bound, grow the arbitrary bound, or
// jump to the MDS pair at the peak weight) costs the least rate, ties
// resolved in that order. Estimates never loosen: every correctable window
// seen so far stays covered.
class ParamEstimator {
public:
  explicit ParamEstimator(int delay) : delay_(delay)
  {
    if (delay < 1) throw std::invalid_argument("ParamEstimator: delay must be positive");
  }

  int delay() const { return delay_; }
  std::int64_t previous_seq() const { return previous_seq_; }
  Estimate current() const { return {best_burst_, best_isolated_}; }
  int peak_weight() const { return peak_weight_; }

  // Packet i was received; erased(x) says whether channel use x lost its
  // packet, for any x <= i. Returns one estimate per caught-up use, the
  // last being the estimate at i.
  template <class ErasedFn>
  std::vector<Estimate> on_receipt(std::int64_t i, ErasedFn&& erased)
  {
    if (i <= previous_seq_)
      throw std::invalid_argument("ParamEstimator: receipts must move forward");

    std::vector<Estimate> out;
    out.reserve(static_cast<std::size_t>(i - previous_seq_));
    for (std::int64_t j = previous_seq_ + 1; j <= i; ++j) {
      int weight = 0;
      std::int64_t first = -1, last = -1;
      for (std::int64_t x = std::max<std::int64_t>(0, j - delay_); x <= j; ++x) {
        if (!erased(x)) continue;
        ++weight;
        if (first < 0) first = x;
        last = x;
      }
      const int span = weight == 0 ? 0 : static_cast<int>(last - first + 1);

      const int burst_bar = std::max(span, best_burst_);
      const int isolated_bar = std::max(weight, best_isolated_);
      peak_weight_ = std::max(weight, peak_weight_);

      if (isolated_bar != 0 && isolated_bar != delay_ + 1) {
        using estimator_detail::hypothetic_rate;
        const Rational rate_burst =
            burst_bar == delay_ + 1
                ? Rational(0, 1)
                : hypothetic_rate(delay_, burst_bar, std::max(best_isolated_, 1));
        const Rational rate_isolated =
            hypothetic_rate(delay_, std::max(best_burst_, isolated_bar), isolated_bar);
        const Rational rate_mds = hypothetic_rate(delay_, peak_weight_, peak_weight_);

        if (rate_burst >= rate_isolated && rate_burst >= rate_mds) {
          best_burst_ = burst_bar;
          best_isolated_ = std::max(best_isolated_, 1);
        } else if (rate_isolated >= rate_mds) {
          best_burst_ = std::max(best_burst_, isolated_bar);
          best_isolated_ = isolated_bar;
        } else {
          best_burst_ = peak_weight_;
          best_isolated_ = peak_weight_;
        }
      }
      // isolated_bar == 0: still loss-free, keep (0, 0).
      // isolated_bar == delay + 1: window beyond any code, keep previous.

      out.push_back({best_burst_, best_isolated_});
    }
    previous_seq_ = i;
    return out;
  }

private:
  int delay_;
  std::int64_t previous_seq_ = -1;
  int best_burst_ = 0;
  int best_isolated_ = 0;
  int peak_weight_ = 0;
};

// Network-adaptive wrapper: a fresh ParamEstimator starts at every multiple
// of phase_length and lives for two phases, ignoring nothing it sees but
// only speaking during its second phase. Stale loss history thus ages out
// after at most two phases, so the emitted rate sequence is not monotone:
// two clean phases in a row reset the emission to (0, 0).
class InterleavedEstimator {
public:
  InterleavedEstimator(int delay, std::int64_t phase_length)
      : delay_(delay), phase_(phase_length)
  {
    if (phase_length < 1)
      throw std::invalid_argument("InterleavedEstimator: phase must be positive");
  }

  int delay() const { return delay_; }
  std::int64_t phase_length() const { return phase_; }

  // Receipt of packet seq (global channel-use index); erased(x) covers any
  // x <= seq. Returns the estimate emitted at seq.
  template <class ErasedFn>
  Estimate on_receipt(std::int64_t seq, ErasedFn&& erased)
  {
    const std::int64_t newest_start = (seq / phase_) * phase_;
    for (const std::int64_t start : {newest_start - phase_, newest_start}) {
      if (start < 0 || start + 2 * phase_ <= seq) continue;
      auto it = instances_.find(start);
      if (it == instances_.end())
        it = instances_.emplace(start, ParamEstimator(delay_)).first;
      it->second.on_receipt(seq - start, [&](std::int64_t local) {
        return erased(local + start);  // pre-instance history is forgotten
      });
    }
    for (auto it = instances_.begin(); it != instances_.end();)
      it = (it->first + 2 * phase_ <= seq) ? instances_.erase(it) : std::next(it);
    return current(seq);
  }

  // Estimate in force at channel use seq: the instance in its speaking
  // phase, or (0, 0) during the very first phase of the stream.
  Estimate current(std::int64_t seq) const
  {
    const std::int64_t speaker = ((seq - phase_) / phase_) * phase_;
    if (seq < phase_ || speaker < 0) return {0, 0};
    const auto it = instances_.find(speaker);
    return it == instances_.end() ? Estimate{0, 0} : it->second.current();
  }

private:
  int delay_;
  std::int64_t phase_;
  std::map<std::int64_t, ParamEstimator> instances_;
};

}  // namespace streamfec
