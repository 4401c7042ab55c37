#pragma once

#include <compare>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace streamfec {

// Exact nonnegative rational. Coding rates are compared for ties all over
// the estimator and the rate search, so they must never go through
// floating point. Terms stay tiny (single digits over tens), far from
// overflowing the cross-multiplied comparisons.
class Rational {
public:
  constexpr Rational() = default;

  Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den)
  {
    if (den_ == 0) throw std::invalid_argument("Rational: zero denominator");
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    const std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  std::string str() const { return std::to_string(num_) + "/" + std::to_string(den_); }

  friend bool operator==(const Rational& a, const Rational& b)
  {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }

  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b)
  {
    return a.num_ * b.den_ <=> b.num_ * a.den_;
  }

private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace streamfec
