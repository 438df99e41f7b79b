#include "tonecost/decimal.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "tonecost/error.hpp"

namespace tonecost {

namespace {

using int128 = __int128;

constexpr std::int64_t kInt64Max = std::numeric_limits<std::int64_t>::max();

std::int64_t narrow(int128 v, const char* op) {
  if (v > static_cast<int128>(kInt64Max) || v < -static_cast<int128>(kInt64Max)) {
    throw Error(std::string("decimal overflow in ") + op);
  }
  return static_cast<std::int64_t>(v);
}

}  // namespace

Decimal::Decimal(std::int64_t integer) : mantissa_(integer), exponent_(0) { normalize(); }

Decimal::Decimal(std::int64_t mantissa, int exponent) : mantissa_(mantissa), exponent_(exponent) {
  normalize();
}

void Decimal::normalize() {
  if (mantissa_ == 0) {
    exponent_ = 0;
    return;
  }
  while (mantissa_ % 10 == 0) {
    mantissa_ /= 10;
    ++exponent_;
  }
}

Decimal Decimal::parse(std::string_view text) {
  if (text.empty()) throw Error("decimal parse: empty string");
  std::size_t i = 0;
  bool negative = false;
  if (text[i] == '+' || text[i] == '-') {
    negative = text[i] == '-';
    ++i;
  }
  int128 mant = 0;
  int exp = 0;
  bool seen_digit = false;
  bool seen_point = false;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c == '.') {
      if (seen_point) throw Error("decimal parse: duplicate point in '" + std::string(text) + "'");
      seen_point = true;
      continue;
    }
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw Error("decimal parse: invalid character in '" + std::string(text) + "'");
    }
    seen_digit = true;
    mant = mant * 10 + (c - '0');
    if (seen_point) --exp;
    if (mant > static_cast<int128>(kInt64Max)) {
      throw Error("decimal parse: too many digits in '" + std::string(text) + "'");
    }
  }
  if (!seen_digit) throw Error("decimal parse: no digits in '" + std::string(text) + "'");
  if (negative) mant = -mant;
  return Decimal(static_cast<std::int64_t>(mant), exp);
}

Decimal Decimal::operator+(const Decimal& rhs) const {
  int exp = std::min(exponent_, rhs.exponent_);
  int128 a = mantissa_;
  for (int e = exponent_; e > exp; --e) a *= 10;
  int128 b = rhs.mantissa_;
  for (int e = rhs.exponent_; e > exp; --e) b *= 10;
  return Decimal(narrow(a + b, "addition"), exp);
}

Decimal Decimal::operator-(const Decimal& rhs) const { return *this + (-rhs); }

Decimal Decimal::operator-() const {
  Decimal out = *this;
  out.mantissa_ = -out.mantissa_;
  return out;
}

Decimal Decimal::operator*(const Decimal& rhs) const {
  int128 prod = static_cast<int128>(mantissa_) * rhs.mantissa_;
  int exp = exponent_ + rhs.exponent_;
  // strip trailing zeros while still wide, so e.g. 2*5 does not overflow later
  while (prod != 0 && prod % 10 == 0) {
    prod /= 10;
    ++exp;
  }
  return Decimal(narrow(prod, "multiplication"), exp);
}

Decimal Decimal::divide_exact(std::int64_t divisor) const {
  if (divisor <= 0) throw Error("decimal divide_exact: divisor must be positive");
  int128 mant = mantissa_;
  int exp = exponent_;
  int128 d = divisor;
  // pull out factors of 2 and 5 into the exponent
  int twos = 0;
  int fives = 0;
  while (d % 2 == 0) {
    d /= 2;
    ++twos;
  }
  while (d % 5 == 0) {
    d /= 5;
    ++fives;
  }
  if (d != 1) {
    // remaining factor must divide the mantissa exactly
    if (mant % d != 0) {
      throw Error("decimal divide_exact: quotient is not a finite decimal");
    }
    mant /= d;
  }
  // 1/2 = 5/10 and 1/5 = 2/10: multiply the mantissa by the complementary
  // factor and shift the exponent down once per extracted factor
  for (int i = 0; i < twos; ++i) mant *= 5;
  for (int i = 0; i < fives; ++i) mant *= 2;
  exp -= twos + fives;
  while (mant != 0 && mant % 10 == 0) {
    mant /= 10;
    ++exp;
  }
  return Decimal(narrow(mant, "division"), exp);
}

bool Decimal::operator==(const Decimal& rhs) const {
  return mantissa_ == rhs.mantissa_ && exponent_ == rhs.exponent_;
}

bool Decimal::operator<(const Decimal& rhs) const {
  Decimal diff = rhs - *this;
  return diff.mantissa_ > 0;
}

std::string Decimal::to_string() const {
  std::int64_t mant = mantissa_;
  std::string digits;
  bool negative = mant < 0;
  if (mant == 0) digits = "0";
  while (mant != 0) {
    digits.insert(digits.begin(), static_cast<char>('0' + std::abs(mant % 10)));
    mant /= 10;
  }
  std::string out = negative ? "-" : "";
  if (exponent_ >= 0) {
    out += digits;
    out.append(static_cast<std::size_t>(exponent_), '0');
  } else {
    int frac = -exponent_;
    if (static_cast<int>(digits.size()) <= frac) {
      out += "0.";
      out.append(static_cast<std::size_t>(frac - digits.size()), '0');
      out += digits;
    } else {
      out += digits.substr(0, digits.size() - frac);
      out += '.';
      out += digits.substr(digits.size() - frac);
    }
  }
  return out;
}

double Decimal::to_double() const {
  return static_cast<double>(mantissa_) * std::pow(10.0, exponent_);
}

}  // namespace tonecost
