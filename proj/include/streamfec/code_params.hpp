#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamfec/rational.hpp"

namespace streamfec {

// The (T, B, N) triple. delay is the decode deadline in packets, max_burst
// the longest correctable burst, max_isolated the most arbitrary losses
// correctable in any window of delay+1 packets. (delay, 0, 0) is the
// uncoded state.
struct CodeParams {
  int delay = 0;
  int max_burst = 0;
  int max_isolated = 0;

  bool is_uncoded() const { return max_burst == 0 && max_isolated == 0; }
  bool is_mds() const { return max_burst == max_isolated; }

  // Block geometry of the optimal code at these parameters.
  int block_length() const { return delay - max_isolated + max_burst + 1; }  // n
  int dimension() const { return delay - max_isolated + 1; }                 // k

  bool valid() const
  {
    if (delay < 0) return false;
    if (is_uncoded()) return true;
    return delay >= max_burst && max_burst >= max_isolated && max_isolated >= 1;
  }

  std::string str() const
  {
    return "(" + std::to_string(delay) + "," + std::to_string(max_burst) + "," +
           std::to_string(max_isolated) + ")";
  }

  friend bool operator==(const CodeParams&, const CodeParams&) = default;
};

// Maximum rate of any streaming code correcting all (B, N)-erasure
// sequences within the deadline: (T - N + 1) / (T - N + B + 1).
inline Rational capacity(const CodeParams& p)
{
  if (!p.valid())
    throw std::domain_error("capacity: invalid parameter ordering " + p.str());
  if (p.is_uncoded()) return {1, 1};
  return {p.delay - p.max_isolated + 1, p.delay - p.max_isolated + p.max_burst + 1};
}

// Length-(delay+1) loss pattern over one sliding window; bit = 1 is a lost
// packet.
struct ErasureWindow {
  std::vector<std::uint8_t> bits;
};

struct WeightSpan {
  int weight = 0;
  int span = 0;  // zero iff weight is zero, else last - first + 1
};

inline WeightSpan weight_span(const ErasureWindow& w)
{
  WeightSpan out;
  int first = -1, last = -1;
  for (int i = 0; i < static_cast<int>(w.bits.size()); ++i) {
    if (!w.bits[i]) continue;
    ++out.weight;
    if (first < 0) first = i;
    last = i;
  }
  if (out.weight > 0) out.span = last - first + 1;
  return out;
}

enum class WindowClass {
  correctable,  // span <= B or weight <= N
  all_ones,     // beyond any code at this deadline
  outside,      // exceeds (B, N) but not all-ones
};

inline WindowClass classify_window(const ErasureWindow& w, int max_burst, int max_isolated)
{
  const WeightSpan ws = weight_span(w);
  if (ws.weight == static_cast<int>(w.bits.size())) return WindowClass::all_ones;
  if (ws.span <= max_burst || ws.weight <= max_isolated) return WindowClass::correctable;
  return WindowClass::outside;
}

}  // namespace streamfec
