#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace tonecost {

/// Exact base-10 fixed-point number: value = mantissa * 10^exponent.
/// Normalized so the mantissa carries no trailing zeros (and 0 has exponent 0).
/// Used for monetary arithmetic where binary floating point would drift.
/// Throws Error on overflow or on inexact division.
class Decimal {
 public:
  Decimal() = default;
  Decimal(std::int64_t integer);  // NOLINT(google-explicit-constructor)
  Decimal(std::int64_t mantissa, int exponent);

  /// Parses "[+-]digits[.digits]". Throws Error on anything else.
  static Decimal parse(std::string_view text);

  Decimal operator+(const Decimal& rhs) const;
  Decimal operator-(const Decimal& rhs) const;
  Decimal operator*(const Decimal& rhs) const;
  Decimal operator-() const;

  /// Exact division by a positive integer; throws Error if the quotient has
  /// no finite decimal expansion (divisor has prime factors other than 2, 5
  /// that do not divide the mantissa).
  Decimal divide_exact(std::int64_t divisor) const;

  bool operator==(const Decimal& rhs) const;
  bool operator!=(const Decimal& rhs) const { return !(*this == rhs); }
  bool operator<(const Decimal& rhs) const;

  bool is_zero() const { return mantissa_ == 0; }
  bool is_negative() const { return mantissa_ < 0; }
  std::int64_t mantissa() const { return mantissa_; }
  int exponent() const { return exponent_; }

  /// Plain decimal rendering, e.g. "0.000168", "369600", "-14".
  std::string to_string() const;

  /// Approximate double value (for display-only contexts).
  double to_double() const;

 private:
  void normalize();

  std::int64_t mantissa_ = 0;
  int exponent_ = 0;
};

}  // namespace tonecost
