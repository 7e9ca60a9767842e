#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "scaled_poisson/errors.hpp"

namespace scaled_poisson {

// Natural log of a probability; value in (-inf, 0].
struct LogProbability {
  double value = -std::numeric_limits<double>::infinity();

  [[nodiscard]] double probability() const { return std::exp(value); }
  static LogProbability from_probability(double p) { return {std::log(p)}; }
};

// Both sides of a split at some threshold, each computed from its own small side.
// upper + lower == 1 up to rounding, but the smaller of the two carries full relative accuracy.
struct TailPair {
  double upper = 0.0;
  double lower = 0.0;
};

struct GammaPair {
  double p = 0.0;  // regularized lower incomplete gamma
  double q = 0.0;  // regularized upper incomplete gamma
};

namespace detail {

inline double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

inline void require_positive_rate(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw DomainError("Poisson rate must be positive and finite, got " + std::to_string(rate));
}

// Sums a positive, geometrically decaying sequence generated by term(i+1) = term(i) * ratio(i),
// starting from 1. Terms are collected first and added smallest first.
template <typename Ratio>
double sum_decaying_terms(Ratio&& ratio, std::int64_t max_terms) {
  std::vector<double> terms;
  terms.reserve(64);
  double t = 1.0;
  double running = 0.0;
  for (std::int64_t i = 0; i < max_terms; ++i) {
    terms.push_back(t);
    running += t;
    const double q = ratio(i);
    if (q <= 0.0) break;
    t *= q;
    if (q < 1.0 && t / (1.0 - q) < 1e-18 * running) break;
  }
  double s = 0.0;
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) s += *it;
  return s;
}

// P(A >= t) / P(A = t), valid (terms decreasing) when t + 1 > rate.
inline double upper_sum_over_pmf(double rate, std::int64_t t) {
  return sum_decaying_terms([&](std::int64_t i) { return rate / static_cast<double>(t + i + 1); },
                            std::numeric_limits<std::int64_t>::max());
}

// P(A <= k) / P(A = k), valid (terms decreasing) when k < rate.
inline double lower_sum_over_pmf(double rate, std::int64_t k) {
  return sum_decaying_terms([&](std::int64_t i) { return static_cast<double>(k - i) / rate; }, k + 1);
}

}  // namespace detail

inline LogProbability poisson_log_pmf(double rate, std::int64_t count) {
  detail::require_positive_rate(rate);
  if (count < 0) return {};
  const double c = static_cast<double>(count);
  return {-rate + c * std::log(rate) - detail::log_gamma(c + 1.0)};
}

inline double poisson_pmf(double rate, std::int64_t count) { return poisson_log_pmf(rate, count).probability(); }

// P(A_rate >= threshold) and P(A_rate < threshold). The side not containing the mode is
// summed directly; the other is its complement.
inline TailPair poisson_tail_pair(double rate, std::int64_t threshold) {
  detail::require_positive_rate(rate);
  if (threshold <= 0) return {1.0, 0.0};
  if (static_cast<double>(threshold) > rate) {
    const double log_upper =
        poisson_log_pmf(rate, threshold).value + std::log(detail::upper_sum_over_pmf(rate, threshold));
    const double upper = std::exp(log_upper);
    return {upper, 1.0 - upper};
  }
  const std::int64_t k = threshold - 1;
  const double lower = std::exp(poisson_log_pmf(rate, k).value + std::log(detail::lower_sum_over_pmf(rate, k)));
  return {1.0 - lower, lower};
}

inline double poisson_tail(double rate, std::int64_t threshold) { return poisson_tail_pair(rate, threshold).upper; }

// P(A_rate <= count).
inline double poisson_cdf(double rate, std::int64_t count) { return poisson_tail_pair(rate, count + 1).lower; }

// log P(A_rate >= threshold); stays finite far beyond the double underflow point.
inline LogProbability poisson_log_tail(double rate, std::int64_t threshold) {
  detail::require_positive_rate(rate);
  if (threshold <= 0) return {0.0};
  if (static_cast<double>(threshold) > rate)
    return {poisson_log_pmf(rate, threshold).value + std::log(detail::upper_sum_over_pmf(rate, threshold))};
  return {std::log1p(-poisson_tail_pair(rate, threshold).lower)};
}

// Smallest N with P(A_rate > N) < eps.
inline std::int64_t poisson_upper_quantile(double rate, double eps) {
  detail::require_positive_rate(rate);
  if (!(eps > 0.0) || eps >= 1.0) throw ValidationError("quantile level must lie in (0, 1)");
  const double log_eps = std::log(eps);
  auto n = static_cast<std::int64_t>(std::floor(rate));
  while (poisson_log_tail(rate, n + 1).value >= log_eps) ++n;
  return n;
}

// Regularized incomplete gamma pair at (shape, x). The power series is used for
// x < shape + 1; the continued fraction otherwise. Each branch computes the side
// it is accurate for and obtains the other by complement.
inline GammaPair incomplete_gamma(double shape, double x) {
  if (!(shape > 0.0) || !std::isfinite(shape)) throw DomainError("incomplete gamma: shape must be positive");
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("incomplete gamma: argument must be nonnegative");
  if (x == 0.0) return {0.0, 1.0};
  const double log_prefix = shape * std::log(x) - x - detail::log_gamma(shape);
  constexpr int max_iter = 100000;
  if (x < shape + 1.0) {
    double ap = shape;
    double del = 1.0 / shape;
    double sum = del;
    for (int i = 0; i < max_iter; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-17) break;
    }
    const double p = std::exp(std::log(sum) + log_prefix);
    return {p, 1.0 - p};
  }
  // Modified Lentz evaluation of the continued fraction for Gamma(shape, x).
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - shape;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= max_iter; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - shape);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(std::log(h) + log_prefix);
  return {1.0 - q, q};
}

inline double regularized_gamma_q(double shape, double rate_point) {
  if (!(rate_point > 0.0)) throw DomainError("regularized_gamma_q: rate point must be positive");
  return incomplete_gamma(shape, rate_point).q;
}

inline double regularized_gamma_p(double shape, double rate_point) {
  if (!(rate_point > 0.0)) throw DomainError("regularized_gamma_p: rate point must be positive");
  return incomplete_gamma(shape, rate_point).p;
}

// 1 - Phi((point - mean) / sigma).
inline double normal_tail(double mean, double variance, double point) {
  if (!(variance > 0.0)) throw DomainError("normal_tail: variance must be positive");
  const double z = (point - mean) / std::sqrt(variance);
  return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

}  // namespace scaled_poisson
