#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace streamfec::gf {

// GF(256) under the reduction polynomial x^8 + x^4 + x^3 + x + 1 (0x11b).
// Addition is XOR. Multiplication runs through log/antilog tables built at
// startup; the antilog table is doubled so products skip the mod-255.

namespace detail {

struct Tables {
  std::uint8_t exp[510];
  std::uint8_t log[256];

  Tables()
  {
    // Antilog table walks powers of 0x03; 0x02 is not primitive mod 0x11b.
    std::uint16_t x = 1;
    for (int i = 0; i < 255; ++i) {
      exp[i] = static_cast<std::uint8_t>(x);
      log[x] = static_cast<std::uint8_t>(i);
      x = (x << 1) ^ x;
      if (x & 0x100) x ^= 0x11b;
    }
    for (int i = 255; i < 510; ++i) exp[i] = exp[i - 255];
    log[0] = 0;  // never consulted; zero operands are guarded explicitly
  }
};

inline const Tables tables{};

}  // namespace detail

inline std::uint8_t add(std::uint8_t a, std::uint8_t b) { return a ^ b; }

inline std::uint8_t mul(std::uint8_t a, std::uint8_t b)
{
  if (a == 0 || b == 0) return 0;
  return detail::tables.exp[detail::tables.log[a] + detail::tables.log[b]];
}

inline std::uint8_t inv(std::uint8_t a)
{
  if (a == 0) throw std::domain_error("gf256: zero has no inverse");
  return detail::tables.exp[255 - detail::tables.log[a]];
}

// Dense row-major matrix over GF(256).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> entries;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), entries(r * c, 0) {}

  std::uint8_t& at(std::size_t r, std::size_t c) { return entries[r * cols + c]; }
  std::uint8_t at(std::size_t r, std::size_t c) const { return entries[r * cols + c]; }
};

// Outcome of Gauss-Jordan elimination. An unknown is "determined" when it
// takes the same value in every solution of the system; the decoder leans
// on that to pull out deadline-critical symbols from under-determined
// systems. `solution` holds one valid solution (free unknowns as zero),
// laid out as cols x width bytes. Meaningless when !consistent.
struct SolveResult {
  bool consistent = true;
  std::size_t rank = 0;
  std::vector<bool> determined;
  std::vector<std::uint8_t> solution;
};

// Solves m * x = rhs where each unknown and each rhs entry is `width`
// bytes wide (the same elimination applied to all byte positions).
// rhs.size() must equal m.rows * width.
inline SolveResult solve_wide(Matrix m, std::vector<std::uint8_t> rhs, std::size_t width)
{
  if (rhs.size() != m.rows * width) throw std::invalid_argument("solve: rhs size mismatch");

  const std::size_t rows = m.rows;
  const std::size_t cols = m.cols;

  std::vector<std::size_t> pivot_col_of_row;
  std::vector<bool> is_pivot_col(cols, false);

  std::size_t row = 0;
  for (std::size_t col = 0; col < cols && row < rows; ++col) {
    std::size_t pivot = row;
    while (pivot < rows && m.at(pivot, col) == 0) ++pivot;
    if (pivot == rows) continue;

    if (pivot != row) {
      for (std::size_t c = col; c < cols; ++c) std::swap(m.at(row, c), m.at(pivot, c));
      for (std::size_t w = 0; w < width; ++w)
        std::swap(rhs[row * width + w], rhs[pivot * width + w]);
    }

    const std::uint8_t scale = inv(m.at(row, col));
    if (scale != 1) {
      for (std::size_t c = col; c < cols; ++c) m.at(row, c) = mul(m.at(row, c), scale);
      for (std::size_t w = 0; w < width; ++w)
        rhs[row * width + w] = mul(rhs[row * width + w], scale);
    }

    for (std::size_t r = 0; r < rows; ++r) {
      if (r == row) continue;
      const std::uint8_t factor = m.at(r, col);
      if (factor == 0) continue;
      for (std::size_t c = col; c < cols; ++c)
        m.at(r, c) ^= mul(factor, m.at(row, c));
      for (std::size_t w = 0; w < width; ++w)
        rhs[r * width + w] ^= mul(factor, rhs[row * width + w]);
    }

    pivot_col_of_row.push_back(col);
    is_pivot_col[col] = true;
    ++row;
  }

  SolveResult out;
  out.rank = pivot_col_of_row.size();
  out.determined.assign(cols, false);
  out.solution.assign(cols * width, 0);

  // A zeroed row with a surviving right-hand side has no solution.
  for (std::size_t r = out.rank; r < rows; ++r) {
    for (std::size_t w = 0; w < width; ++w) {
      if (rhs[r * width + w] != 0) {
        out.consistent = false;
        return out;
      }
    }
  }

  // A pivot unknown is determined exactly when its row places no weight on
  // any free column; free unknowns are never determined.
  for (std::size_t r = 0; r < out.rank; ++r) {
    const std::size_t p = pivot_col_of_row[r];
    bool pinned = true;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!is_pivot_col[c] && m.at(r, c) != 0) {
        pinned = false;
        break;
      }
    }
    out.determined[p] = pinned;
    for (std::size_t w = 0; w < width; ++w) out.solution[p * width + w] = rhs[r * width + w];
  }
  return out;
}

inline SolveResult solve(const Matrix& m, std::span<const std::uint8_t> rhs)
{
  return solve_wide(m, std::vector<std::uint8_t>(rhs.begin(), rhs.end()), 1);
}

// Matrix-vector product, one byte per unknown.
inline std::vector<std::uint8_t> apply(const Matrix& m, std::span<const std::uint8_t> x)
{
  if (x.size() != m.cols) throw std::invalid_argument("apply: size mismatch");
  std::vector<std::uint8_t> out(m.rows, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::uint8_t acc = 0;
    for (std::size_t c = 0; c < m.cols; ++c) acc ^= mul(m.at(r, c), x[c]);
    out[r] = acc;
  }
  return out;
}

}  // namespace streamfec::gf
