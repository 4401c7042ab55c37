#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "streamfec/code_params.hpp"
#include "streamfec/gf256.hpp"
#include "streamfec/rng.hpp"

namespace streamfec {

// Systematic (n, k) block code over GF(256) whose erased message symbols
// are each recoverable from codeword positions no later than their own
// deadline. Diagonal interleaving (stream_codec.hpp) turns that per-symbol
// guarantee into the streaming delay bound.
struct BlockCode {
  CodeParams params;
  int n = 0;  // block length, delay - max_isolated + max_burst + 1
  int k = 0;  // dimension, delay - max_isolated + 1
  gf::Matrix generator;  // k x n, left k x k identity
  std::uint64_t seed = 0;

  Rational rate() const { return {k, n}; }
};

// ---- erasure patterns over one block, as n-bit masks (bit i = position i)

inline int weight_of(std::uint32_t mask)
{
#if defined(__GNUC__) || defined(__clang__)
  return __builtin_popcount(mask);
#else
  int w = 0;
  while (mask) {
    w += mask & 1;
    mask >>= 1;
  }
  return w;
#endif
}

inline int span_of(std::uint32_t mask)
{
  if (mask == 0) return 0;
  int first = 0;
  while (!(mask & (1u << first))) ++first;
  int last = 31;
  while (!(mask & (1u << last))) --last;
  return last - first + 1;
}

inline bool pattern_admissible(std::uint32_t mask, int max_burst, int max_isolated)
{
  return span_of(mask) <= max_burst || weight_of(mask) <= max_isolated;
}

// Every admissible pattern (span <= B or weight <= N) over n positions, in
// ascending mask order. n <= 25.
inline std::vector<std::uint32_t> admissible_patterns(int n, int max_burst, int max_isolated)
{
  if (n <= 0 || n > 25) throw std::invalid_argument("admissible_patterns: bad block length");
  std::vector<std::uint32_t> out;
  const std::uint32_t end = 1u << n;
  for (std::uint32_t mask = 0; mask < end; ++mask)
    if (pattern_admissible(mask, max_burst, max_isolated)) out.push_back(mask);
  return out;
}

inline std::vector<std::uint32_t> admissible_patterns(const BlockCode& code)
{
  return admissible_patterns(code.n, code.params.max_burst, code.params.max_isolated);
}

namespace detail {

// Maximal admissible patterns under set inclusion: full-length bursts plus
// weight-N patterns too wide to sit inside one burst window. If a code
// recovers every erased message symbol of each maximal pattern by deadline,
// it recovers every admissible pattern (dropping erasures only removes
// unknowns and adds equations).
inline std::vector<std::uint32_t> maximal_patterns(int n, int max_burst, int max_isolated)
{
  std::vector<std::uint32_t> out;
  const std::uint32_t burst = (max_burst >= 32) ? ~0u : ((1u << max_burst) - 1);
  for (int s = 0; s + max_burst <= n; ++s) out.push_back(burst << s);
  if (max_isolated >= 1 && max_isolated < n) {
    // Gosper-style walk over all weight-N masks.
    std::uint32_t mask = (1u << max_isolated) - 1;
    const std::uint32_t end = 1u << n;
    while (mask < end) {
      if (span_of(mask) > max_burst) out.push_back(mask);
      const std::uint32_t c = mask & -mask;
      const std::uint32_t r = mask + c;
      mask = (((r ^ mask) >> 2) / c) | r;
    }
  }
  return out;
}

// True when message symbol j of the pattern is pinned to a unique value by
// the unerased parity positions arriving no later than position j + delay.
inline bool symbol_recoverable(const gf::Matrix& generator, int n, int k, int delay,
                               std::uint32_t mask, int j)
{
  std::vector<int> unknowns;
  for (int i = 0; i < k; ++i)
    if (mask & (1u << i)) unknowns.push_back(i);

  const int last = std::min(n - 1, j + delay);
  gf::Matrix sys(0, unknowns.size());
  sys.entries.reserve(static_cast<std::size_t>(n) * unknowns.size());
  for (int pos = k; pos <= last; ++pos) {
    if (mask & (1u << pos)) continue;
    for (int u : unknowns) sys.entries.push_back(generator.at(u, pos));
    ++sys.rows;
  }

  const int target = static_cast<int>(std::lower_bound(unknowns.begin(), unknowns.end(), j) -
                                      unknowns.begin());
  const std::size_t rows = sys.rows;
  const auto res = gf::solve_wide(std::move(sys), std::vector<std::uint8_t>(rows, 0), 1);
  return res.determined[target];
}

// Failing (pattern, symbol) pairs, capped so hill-climb rejections exit
// early. The first failure is reported so mutations can aim at it.
struct Failure {
  std::uint32_t mask = 0;
  int symbol = -1;
};

inline int count_failures(const gf::Matrix& generator, int n, int k, int delay,
                          const std::vector<std::uint32_t>& patterns, int cap,
                          Failure* first = nullptr)
{
  int fails = 0;
  for (std::uint32_t mask : patterns) {
    if ((mask & ((1u << k) - 1)) == 0) continue;  // no message symbol erased
    for (int j = 0; j < k; ++j) {
      if (!(mask & (1u << j))) continue;
      if (!symbol_recoverable(generator, n, k, delay, mask, j)) {
        if (first && fails == 0) *first = {mask, j};
        if (++fails >= cap) return fails;
      }
    }
  }
  return fails;
}

}  // namespace detail

// Certification result. `pass` means every admissible pattern leaves every
// erased message symbol recoverable by its deadline.
struct VerifyReport {
  bool pass = true;
  std::uint32_t failing_pattern = 0;
  int failing_symbol = -1;
  std::size_t patterns_checked = 0;

  std::string str() const
  {
    if (pass) return "pass (" + std::to_string(patterns_checked) + " patterns)";
    std::string bits;
    for (int i = 31; i >= 0; --i)
      if (failing_pattern >> i) {
        for (int b = i; b >= 0; --b) bits += (failing_pattern & (1u << b)) ? '1' : '0';
        break;
      }
    return "fail at pattern " + bits + " symbol " + std::to_string(failing_symbol);
  }
};

// Exhaustive check over every admissible pattern. This is the oracle that
// makes a searched-for code certified; nothing downstream trusts a
// generator that has not been through here.
inline VerifyReport verify_block_code(const BlockCode& code)
{
  VerifyReport report;
  if (code.generator.rows != static_cast<std::size_t>(code.k) ||
      code.generator.cols != static_cast<std::size_t>(code.n))
    throw std::invalid_argument("verify_block_code: generator shape mismatch");

  for (std::uint32_t mask : admissible_patterns(code)) {
    ++report.patterns_checked;
    if ((mask & ((1u << code.k) - 1)) == 0) continue;
    for (int j = 0; j < code.k; ++j) {
      if (!(mask & (1u << j))) continue;
      if (!detail::symbol_recoverable(code.generator, code.n, code.k, code.params.delay, mask,
                                      j)) {
        report.pass = false;
        report.failing_pattern = mask;
        report.failing_symbol = j;
        return report;
      }
    }
  }
  return report;
}

struct ConstructStats {
  std::size_t candidates_tried = 0;
  int init_variant = -1;
  int restarts = 0;
};

namespace detail {

inline gf::Matrix cauchy_parity(int k, int parities)
{
  gf::Matrix p(k, parities);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < parities; ++j)
      p.at(i, j) = gf::inv(static_cast<std::uint8_t>(i) ^ static_cast<std::uint8_t>(k + j));
  return p;
}

// Parity initializers tried in order. Cauchy alone settles every MDS case.
// The staircase shape starts the burst-heavy cases where the deadline
// analysis points: a burst covering column c leaves symbol s exactly the
// columns after it, so column c may only weight rows up to c - N + 1; the
// first N - 1 columns are never usable inside a full burst and stay dense;
// symbols past B - N have no column of their own and need dense coverage.
inline bool staircase_allows(int row, int col, int max_burst, int max_isolated)
{
  return col < max_isolated - 1 || row <= col - max_isolated + 1 ||
         row >= max_burst - max_isolated + 1;
}

inline gf::Matrix init_parity(int variant, int k, int parities, int max_burst, int max_isolated)
{
  gf::Matrix p = cauchy_parity(k, parities);
  switch (variant) {
    case 0:
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < parities; ++j)
          if (!staircase_allows(i, j, max_burst, max_isolated)) p.at(i, j) = 0;
      return p;
    case 1:
      return p;
    case 2:
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < parities; ++j)
          if (i > j && i < k - max_isolated) p.at(i, j) = 0;
      return p;
    case 3:
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < parities; ++j) {
          if (i == j)
            p.at(i, j) = 1;
          else if (i < k - max_isolated)
            p.at(i, j) = 0;
        }
      return p;
    case 4:
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < parities; ++j)
          if (i > j) p.at(i, j) = 0;
      return p;
    default:
      throw std::logic_error("init_parity: unknown variant");
  }
}

inline void mutate_parity(gf::Matrix& p, SplitMix64& rng, int k, int delay,
                          const Failure& focus)
{
  const std::uint64_t kind = rng.next_below(12);
  if (kind < 2) {
    // redraw a whole column
    const std::size_t j = rng.next_below(p.cols);
    for (std::size_t i = 0; i < p.rows; ++i)
      p.at(i, j) = static_cast<std::uint8_t>(rng.next_below(256));
    return;
  }
  if (kind < 4 && p.cols >= 2) {
    // Align a row segment of one column with another, scaled. Feasible
    // generators need proportional segments so that early-deadline
    // recovery certificates can cancel shared rows; plain entry noise
    // almost never lands on them.
    std::size_t a = rng.next_below(p.cols);
    std::size_t b = rng.next_below(p.cols - 1);
    if (b >= a) ++b;
    std::size_t lo = rng.next_below(p.rows);
    std::size_t hi = lo + rng.next_below(p.rows - lo);
    const auto scale = static_cast<std::uint8_t>(1 + rng.next_below(255));
    for (std::size_t i = lo; i <= hi; ++i) p.at(i, b) = gf::mul(scale, p.at(i, a));
    return;
  }

  // Aim half the remaining moves at the equations of the first failing
  // (pattern, symbol) pair: its erased message rows crossed with the parity
  // columns inside that symbol's deadline.
  std::vector<std::size_t> rows_in_play;
  std::size_t col_limit = p.cols;
  if (focus.symbol >= 0 && kind < 6) {
    for (int i = 0; i < k; ++i)
      if (focus.mask & (1u << i)) rows_in_play.push_back(i);
    col_limit = std::min<std::size_t>(p.cols, focus.symbol + delay - k + 1);
    if (col_limit == 0) col_limit = p.cols;
  }

  const int touches = 1 + static_cast<int>(rng.next_below(3));
  for (int t = 0; t < touches; ++t) {
    const std::size_t i = rows_in_play.empty()
                              ? rng.next_below(p.rows)
                              : rows_in_play[rng.next_below(rows_in_play.size())];
    const std::size_t j = rng.next_below(col_limit);
    // zero entries carry structure here, so bias toward them
    p.at(i, j) = rng.next_below(10) < 3 ? 0 : static_cast<std::uint8_t>(rng.next_below(256));
  }
}

inline gf::Matrix assemble_generator(int k, int n, const gf::Matrix& parity)
{
  gf::Matrix g(k, n);
  for (int i = 0; i < k; ++i) {
    g.at(i, i) = 1;
    for (int j = k; j < n; ++j) g.at(i, j) = parity.at(i, j - k);
  }
  return g;
}

// Column-sequential construction. A constraint (pattern, symbol j) only
// involves parity columns up to j + N - 1, so columns can be placed left to
// right, each sampled until the constraints closing at it hold, with
// backtracking when a column cannot be completed against earlier choices.
inline bool construct_by_columns(gf::Matrix& gen, int n, int k, CodeParams params,
                                 const std::vector<std::uint32_t>& targets, SplitMix64& rng,
                                 std::size_t* tried)
{
  const int parities = n - k;
  std::vector<std::vector<std::pair<std::uint32_t, int>>> closing(parities);
  for (std::uint32_t mask : targets) {
    for (int j = 0; j < k; ++j) {
      if (!(mask & (1u << j))) continue;
      const int d = std::min(j + params.max_isolated - 1, parities - 1);
      closing[d].push_back({mask, j});
    }
  }

  const auto fill_column = [&](int d, int mask_variant, bool cauchy_values) {
    for (int i = 0; i < k; ++i) {
      bool allowed = true;
      switch (mask_variant) {
        case 0:
          allowed = staircase_allows(i, d, params.max_burst, params.max_isolated);
          break;
        case 1:
          break;  // dense
        case 2:
          allowed = staircase_allows(i, d, params.max_burst, params.max_isolated) ||
                    i >= k - params.max_isolated;
          break;
        case 3:
          allowed = d < params.max_isolated - 1 || i <= d - params.max_isolated + 1;
          break;
      }
      if (!allowed) {
        gen.at(i, k + d) = 0;
      } else if (cauchy_values) {
        gen.at(i, k + d) = gf::inv(static_cast<std::uint8_t>(i) ^
                                   static_cast<std::uint8_t>(k + d));
      } else {
        gen.at(i, k + d) = static_cast<std::uint8_t>(1 + rng.next_below(255));
      }
    }
    // Occasionally tie a row segment to an earlier column, scaled; some
    // parameter points only admit generators with such aligned segments.
    if (!cauchy_values && d > 0 && rng.next_below(3) == 0) {
      const int src = static_cast<int>(rng.next_below(d));
      std::size_t lo = rng.next_below(k);
      std::size_t hi = lo + rng.next_below(k - lo);
      const auto scale = static_cast<std::uint8_t>(1 + rng.next_below(255));
      for (std::size_t i = lo; i <= hi; ++i)
        gen.at(i, k + d) = gf::mul(scale, gen.at(i, k + src));
    }
  };

  constexpr int kTriesPerMask = 150;
  constexpr int kMaxPlacements = 600;

  std::vector<int> failures_at(parities, 0);
  int placements = 0;
  int d = 0;
  while (d < parities) {
    bool placed = false;
    const bool fresh = failures_at[d] == 0;
    for (int mask_variant = 0; mask_variant < 4 && !placed; ++mask_variant) {
      for (int attempt = 0; attempt < kTriesPerMask && !placed; ++attempt) {
        // The deterministic Cauchy fill is only worth one look; replays
        // after a backtrack must explore, not repeat.
        fill_column(d, mask_variant, fresh && attempt == 0);
        ++*tried;
        placed = true;
        for (const auto& [mask, j] : closing[d]) {
          if (!symbol_recoverable(gen, n, k, params.delay, mask, j)) {
            placed = false;
            break;
          }
        }
      }
    }
    if (++placements > kMaxPlacements) return false;
    if (placed) {
      ++d;
    } else if (d > 0) {
      // Unwind deeper the more often this column has jammed; nearby
      // columns rarely hold the blocking choice.
      const int depth = std::min(d, 1 + failures_at[d]++ / 2);
      d -= depth;
    } else {
      return false;
    }
  }
  return true;
}

}  // namespace detail

// Builds an optimal (T, B, N) code: systematic generator, Cauchy-seeded
// parity, randomized perturbation search scored by the number of failing
// (pattern, symbol) pairs over the maximal admissible patterns, certified
// by the exhaustive oracle before returning. Deterministic given seed.
inline BlockCode construct_code(CodeParams params, std::uint64_t seed,
                                ConstructStats* stats = nullptr)
{
  if (!params.valid() || params.is_uncoded())
    throw std::domain_error("construct_code: invalid parameters " + params.str());
  if (params.delay > 11)
    throw std::domain_error("construct_code: delay above 11 unsupported " + params.str());

  const int k = params.dimension();
  const int n = params.block_length();
  const int parities = n - k;
  const auto targets =
      detail::maximal_patterns(n, params.max_burst, params.max_isolated);

  SplitMix64 rng(seed ^ (0x9d1c035fu + 257u * static_cast<std::uint64_t>(params.delay) +
                         17u * static_cast<std::uint64_t>(params.max_burst) +
                         static_cast<std::uint64_t>(params.max_isolated)));

  ConstructStats local;

  // Static initializers first: Cauchy settles every MDS case outright and
  // the staircase shape settles most burst-dominant ones.
  for (int variant = 0; variant < 5; ++variant) {
    gf::Matrix parity =
        detail::init_parity(variant, k, parities, params.max_burst, params.max_isolated);
    gf::Matrix gen = detail::assemble_generator(k, n, parity);
    ++local.candidates_tried;
    if (detail::count_failures(gen, n, k, params.delay, targets, 1) == 0) {
      BlockCode code{params, n, k, gen, seed};
      if (verify_block_code(code).pass) {
        local.init_variant = variant;
        if (stats) *stats = local;
        return code;
      }
      throw std::logic_error("construct_code: maximal-pattern reduction violated");
    }
  }

  // Column-by-column placement with backtracking.
  for (int restart = 0; restart < 6; ++restart) {
    gf::Matrix gen(k, n);
    for (int i = 0; i < k; ++i) gen.at(i, i) = 1;
    if (detail::construct_by_columns(gen, n, k, params, targets, rng,
                                     &local.candidates_tried)) {
      BlockCode code{params, n, k, gen, seed};
      if (verify_block_code(code).pass) {
        local.init_variant = 10 + restart;
        if (stats) *stats = local;
        return code;
      }
      throw std::logic_error("construct_code: maximal-pattern reduction violated");
    }
  }

  // Last resort: randomized perturbation hill-climb over whole parity
  // blocks, scored by failing (pattern, symbol) pairs.
  constexpr int kRestarts = 6;
  constexpr int kSteps = 2500;

  for (int restart = 0; restart < kRestarts; ++restart) {
    for (int variant = 0; variant < 5; ++variant) {
      gf::Matrix best = detail::init_parity(variant, k, parities, params.max_burst,
                                             params.max_isolated);
      if (restart > 0) {
        for (int shake = 0; shake < restart; ++shake)
          detail::mutate_parity(best, rng, k, params.delay, {});
      }
      gf::Matrix best_gen = detail::assemble_generator(k, n, best);
      detail::Failure best_fail;
      int best_fails =
          detail::count_failures(best_gen, n, k, params.delay, targets, 1 << 20, &best_fail);
      ++local.candidates_tried;

      for (int step = 0; step < kSteps && best_fails > 0; ++step) {
        gf::Matrix cand = best;
        detail::mutate_parity(cand, rng, k, params.delay, best_fail);
        gf::Matrix cand_gen = detail::assemble_generator(k, n, cand);
        detail::Failure fail;
        const int fails = detail::count_failures(cand_gen, n, k, params.delay, targets,
                                                 best_fails + 1, &fail);
        ++local.candidates_tried;
        if (fails < best_fails || (fails == best_fails && rng.next_below(4) == 0)) {
          best = std::move(cand);
          best_gen = std::move(cand_gen);
          best_fails = fails;
          best_fail = fail;
        }
      }

      if (best_fails == 0) {
        BlockCode code{params, n, k, best_gen, seed};
        if (verify_block_code(code).pass) {
          local.init_variant = variant;
          local.restarts = restart;
          if (stats) *stats = local;
          return code;
        }
        // A maximal-pattern pass implies an exhaustive pass; reaching here
        // means the subset reduction is broken, which the tests pin down.
        throw std::logic_error("construct_code: maximal-pattern reduction violated");
      }
    }
  }
  throw std::runtime_error("construct_code: search budget exhausted for " + params.str() +
                           " after " + std::to_string(local.candidates_tried) + " candidates");
}

// ---- code table persistence
//
// One record per code: header line "T B N n k seed", then k lines of n
// space-separated decimal bytes. Records re-verify on load.

inline void save_code_table(std::ostream& os, const std::vector<BlockCode>& codes)
{
  for (const auto& code : codes) {
    os << code.params.delay << ' ' << code.params.max_burst << ' ' << code.params.max_isolated
       << ' ' << code.n << ' ' << code.k << ' ' << code.seed << '\n';
    for (int i = 0; i < code.k; ++i) {
      for (int j = 0; j < code.n; ++j) {
        if (j) os << ' ';
        os << static_cast<int>(code.generator.at(i, j));
      }
      os << '\n';
    }
  }
}

inline void save_code_table(const std::string& path, const std::vector<BlockCode>& codes)
{
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write code table: " + path);
  save_code_table(os, codes);
}

inline std::vector<BlockCode> load_code_table(std::istream& is)
{
  std::vector<BlockCode> codes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream header(line);
    BlockCode code;
    if (!(header >> code.params.delay >> code.params.max_burst >> code.params.max_isolated >>
          code.n >> code.k >> code.seed))
      throw std::runtime_error("code table: bad header at line " + std::to_string(lineno));
    if (!code.params.valid() || code.n != code.params.block_length() ||
        code.k != code.params.dimension())
      throw std::runtime_error("code table: inconsistent geometry at line " +
                               std::to_string(lineno));
    code.generator = gf::Matrix(code.k, code.n);
    for (int i = 0; i < code.k; ++i) {
      if (!std::getline(is, line))
        throw std::runtime_error("code table: truncated record at line " +
                                 std::to_string(lineno));
      ++lineno;
      std::istringstream row(line);
      for (int j = 0; j < code.n; ++j) {
        int v;
        if (!(row >> v) || v < 0 || v > 255)
          throw std::runtime_error("code table: bad byte at line " + std::to_string(lineno));
        code.generator.at(i, j) = static_cast<std::uint8_t>(v);
      }
    }
    const auto report = verify_block_code(code);
    if (!report.pass)
      throw std::runtime_error("code table: record for " + code.params.str() +
                               " fails verification: " + report.str());
    codes.push_back(std::move(code));
  }
  return codes;
}

inline std::vector<BlockCode> load_code_table(const std::string& path)
{
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read code table: " + path);
  return load_code_table(is);
}

// Process-wide construction cache. Encoder and decoder must agree on the
// generator for a given (T, B, N), so both pull from here with the shared
// default seed. Entries are never dropped; returned references stay valid.
inline constexpr std::uint64_t kDefaultCodeSeed = 1;

class CodeCache {
public:
  static CodeCache& instance()
  {
    static CodeCache cache;
    return cache;
  }

  const BlockCode& get(CodeParams params, std::uint64_t seed = kDefaultCodeSeed)
  {
    const Key key{params.delay, params.max_burst, params.max_isolated, seed};
    std::lock_guard<std::mutex> lock(mu_);
    auto it = codes_.find(key);
    if (it == codes_.end()) {
      auto code = std::make_unique<BlockCode>(construct_code(params, seed));
      it = codes_.emplace(key, std::move(code)).first;
    }
    return *it->second;
  }

  void put(BlockCode code)
  {
    const Key key{code.params.delay, code.params.max_burst, code.params.max_isolated, code.seed};
    std::lock_guard<std::mutex> lock(mu_);
    codes_.emplace(key, std::make_unique<BlockCode>(std::move(code)));
  }

private:
  using Key = std::tuple<int, int, int, std::uint64_t>;
  std::mutex mu_;
  std::map<Key, std::unique_ptr<const BlockCode>> codes_;
};

}  // namespace streamfec
