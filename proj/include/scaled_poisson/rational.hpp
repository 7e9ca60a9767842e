#pragma once

#include <cerrno>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "scaled_poisson/errors.hpp"

namespace scaled_poisson {

// Exact fraction num/den over 64-bit integers, always kept in lowest terms with den > 0.
// Intermediate products are formed in 128 bits; a result that does not fit back into
// 64 bits throws std::overflow_error instead of wrapping.
class Rational {
 public:
  using int_type = std::int64_t;

  constexpr Rational() = default;
  constexpr Rational(int_type value) : num_(value), den_(1) {}  // NOLINT: implicit by design of arithmetic
  Rational(int_type num, int_type den) { assign(static_cast<__int128>(num), static_cast<__int128>(den)); }

  [[nodiscard]] constexpr int_type num() const { return num_; }
  [[nodiscard]] constexpr int_type den() const { return den_; }

  [[nodiscard]] double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  [[nodiscard]] bool is_integer() const { return den_ == 1; }
  [[nodiscard]] bool is_positive() const { return num_ > 0; }

  [[nodiscard]] int_type floor() const {
    int_type q = num_ / den_;
    if (num_ % den_ != 0 && num_ < 0) --q;
    return q;
  }
  [[nodiscard]] int_type ceil() const {
    int_type q = num_ / den_;
    if (num_ % den_ != 0 && num_ > 0) ++q;
    return q;
  }

  friend Rational operator+(const Rational& a, const Rational& b) {
    const __int128 n = static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_;
    const __int128 d = static_cast<__int128>(a.den_) * b.den_;
    return from_wide(n, d);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    const __int128 n = static_cast<__int128>(a.num_) * b.den_ - static_cast<__int128>(b.num_) * a.den_;
    const __int128 d = static_cast<__int128>(a.den_) * b.den_;
    return from_wide(n, d);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return from_wide(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::domain_error("Rational: division by zero");
    return from_wide(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
  }
  Rational operator-() const { return from_wide(-static_cast<__int128>(num_), den_); }

  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }

  friend bool operator==(const Rational& a, const Rational& b) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    const __int128 l = static_cast<__int128>(a.num_) * b.den_;
    const __int128 r = static_cast<__int128>(b.num_) * a.den_;
    return l <=> r;
  }

  [[nodiscard]] std::string str() const {
    return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
  }
  friend std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.str(); }

  // Accepts "7", "-3/4" and plain decimals such as "2.5" or "0.125" (converted exactly).
  static Rational parse(std::string_view text);

 private:
  static Rational from_wide(__int128 n, __int128 d) {
    Rational r;
    r.assign(n, d);
    return r;
  }

  void assign(__int128 n, __int128 d) {
    if (d == 0) throw std::domain_error("Rational: zero denominator");
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128 a = n < 0 ? -n : n;
    __int128 b = d;
    while (b != 0) {
      const __int128 t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      n /= a;
      d /= a;
    }
    constexpr __int128 lo = std::numeric_limits<int_type>::min();
    constexpr __int128 hi = std::numeric_limits<int_type>::max();
    if (n < lo || n > hi || d > hi) throw std::overflow_error("Rational: 64-bit overflow");
    num_ = static_cast<int_type>(n);
    den_ = static_cast<int_type>(d);
  }

  int_type num_ = 0;
  int_type den_ = 1;
};

inline Rational Rational::parse(std::string_view text) {
  auto to_int = [&](std::string_view s) -> int_type {
    if (s.empty()) throw ValidationError("cannot parse number from '" + std::string(text) + "'");
    std::string buf(s);
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(buf.c_str(), &end, 10);
    if (end != buf.c_str() + buf.size() || errno == ERANGE)
      throw ValidationError("cannot parse number from '" + std::string(text) + "'");
    return static_cast<int_type>(v);
  };
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    const int_type d = to_int(text.substr(slash + 1));
    if (d == 0) throw ValidationError("zero denominator in '" + std::string(text) + "'");
    return {to_int(text.substr(0, slash)), d};
  }
  if (const auto dot = text.find('.'); dot != std::string_view::npos) {
    const auto frac = text.substr(dot + 1);
    if (frac.size() > 17) throw ValidationError("too many decimal places in '" + std::string(text) + "'");
    int_type scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    const auto whole = text.substr(0, dot);
    const bool negative = !whole.empty() && whole.front() == '-';
    const int_type w = (whole.empty() || whole == "-" || whole == "+") ? 0 : to_int(whole);
    const int_type f = frac.empty() ? 0 : to_int(frac);
    const Rational magnitude = Rational(w < 0 ? -w : w) + Rational(f, scale);
    return negative ? -magnitude : magnitude;
  }
  return {to_int(text)};
}

}  // namespace scaled_poisson
