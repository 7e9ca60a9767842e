#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "scaled_poisson/errors.hpp"
#include "scaled_poisson/lattice_distribution.hpp"
#include "scaled_poisson/poisson_core.hpp"
#include "scaled_poisson/rational.hpp"

namespace scaled_poisson {

// S = sum_r b_r A(nu_r) with independent Poisson summands.
// Construction sorts the classes by weight and merges equal weights by adding rates.
class WeightedPoissonSum {
 public:
  WeightedPoissonSum(const std::vector<std::int64_t>& weights, const std::vector<Rational>& rates) {
    if (weights.empty()) throw ValidationError("model needs at least one class");
    if (weights.size() != rates.size())
      throw ValidationError("model: " + std::to_string(weights.size()) + " weights but " +
                            std::to_string(rates.size()) + " rates");
    std::map<std::int64_t, Rational> merged;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0) throw ValidationError("model: weight " + std::to_string(weights[i]) + " is not positive");
      if (!rates[i].is_positive()) throw ValidationError("model: rate " + rates[i].str() + " is not positive");
      merged[weights[i]] += rates[i];
    }
    for (const auto& [b, nu] : merged) {
      weights_.push_back(b);
      rates_.push_back(nu);
    }
  }

  [[nodiscard]] const std::vector<std::int64_t>& weights() const { return weights_; }
  [[nodiscard]] const std::vector<Rational>& rates() const { return rates_; }
  [[nodiscard]] std::size_t class_count() const { return weights_.size(); }

  // Same weights, every rate multiplied by factor.
  [[nodiscard]] WeightedPoissonSum scaled_rates(const Rational& factor) const {
    std::vector<Rational> r;
    for (const auto& nu : rates_) r.push_back(nu * factor);
    return {weights_, r};
  }

 private:
  std::vector<std::int64_t> weights_;
  std::vector<Rational> rates_;
};

inline WeightedPoissonSum reference_model() { return {{1, 10}, {Rational(100), Rational(30)}}; }

struct NormalizedModel {
  WeightedPoissonSum model;
  std::int64_t scale_B = 1;
};

// Integer-weight model for B*S, where B is the lcm of the weight denominators.
inline NormalizedModel normalize_weights(const std::vector<Rational>& raw_weights, const std::vector<Rational>& rates) {
  if (raw_weights.empty() || rates.empty()) throw ValidationError("normalize_weights: empty input");
  if (raw_weights.size() != rates.size()) throw ValidationError("normalize_weights: length mismatch");
  std::int64_t B = 1;
  for (const auto& w : raw_weights) {
    if (!w.is_positive()) throw ValidationError("normalize_weights: weight " + w.str() + " is not positive");
    B = std::lcm(B, w.den());
  }
  std::vector<std::int64_t> ints;
  for (const auto& w : raw_weights) ints.push_back((w * Rational(B)).num());
  return {WeightedPoissonSum(ints, rates), B};
}

struct SumMoments {
  Rational mu;
  Rational sigma_sq;
  std::int64_t k_num = 1;  // n
  std::int64_t k_den = 1;  // m
  Rational lambda;
  std::int64_t scale_B = 1;

  [[nodiscard]] Rational k() const { return {k_num, k_den}; }
  // Mean and variance of (1/k) A_{k mu}, computed symbolically.
  [[nodiscard]] Rational scaled_poisson_mean() const { return lambda / k(); }
  [[nodiscard]] Rational scaled_poisson_variance() const { return lambda / (k() * k()); }
};

inline SumMoments moments(const WeightedPoissonSum& model, std::int64_t scale_B = 1) {
  SumMoments s;
  for (std::size_t r = 0; r < model.class_count(); ++r) {
    const Rational b(model.weights()[r]);
    s.mu += b * model.rates()[r];
    s.sigma_sq += b * b * model.rates()[r];
  }
  const Rational k = s.mu / s.sigma_sq;
  s.k_num = k.num();
  s.k_den = k.den();
  s.lambda = k * s.mu;
  s.scale_B = scale_B;
  return s;
}

// Poisson(rate) pmf on {0..cap} placed on the lattice with the given stride.
inline LatticeDistribution truncated_poisson_law(double rate, std::int64_t cap) {
  std::vector<double> pmf(static_cast<std::size_t>(cap) + 1);
  for (std::int64_t j = 0; j <= cap; ++j) pmf[static_cast<std::size_t>(j)] = poisson_pmf(rate, j);
  return LatticeDistribution(std::move(pmf), poisson_tail(rate, cap + 1));
}

// Law of S with class r truncated at caps[r]; mass_deficit is the union bound of the
// discarded class tails.
inline LatticeDistribution exact_distribution_with_caps(const WeightedPoissonSum& model,
                                                        const std::vector<std::int64_t>& caps) {
  if (caps.size() != model.class_count()) throw ValidationError("exact_distribution: one cap per class required");
  LatticeDistribution law;
  for (std::size_t r = 0; r < model.class_count(); ++r) {
    if (caps[r] < 0) throw ValidationError("exact_distribution: negative cap");
    law = law.convolve(truncated_poisson_law(model.rates()[r].to_double(), caps[r]), model.weights()[r]);
  }
  return law;
}

inline std::vector<std::int64_t> truncation_caps(const WeightedPoissonSum& model, double epsilon) {
  if (!(epsilon > 0.0) || epsilon > 1e-3) throw ValidationError("exact_distribution: epsilon must lie in (0, 1e-3]");
  const double per_class = epsilon / static_cast<double>(model.class_count());
  std::vector<std::int64_t> caps;
  for (const auto& nu : model.rates()) caps.push_back(poisson_upper_quantile(nu.to_double(), per_class));
  return caps;
}

inline LatticeDistribution exact_distribution(const WeightedPoissonSum& model, double epsilon) {
  return exact_distribution_with_caps(model, truncation_caps(model, epsilon));
}

// P(S > y) (strict) or P(S >= y).
inline ProbabilityInterval exact_tail(const LatticeDistribution& law, std::int64_t y, bool strict) {
  if (y < 0) throw ValidationError("exact_tail: y must be nonnegative");
  return strict ? law.tail_gt(y) : law.tail_ge(y);
}

inline ProbabilityInterval exact_tail(const WeightedPoissonSum& model, std::int64_t y, bool strict,
                                      double epsilon = 1e-12) {
  return exact_tail(exact_distribution(model, epsilon), y, strict);
}

enum class ApproxMode { discrete, continuous };

// Both sides of the scaled Poisson approximation split at y: upper is P(A_lambda > ky)
// (strict), P(A_lambda >= ky) (non-strict), or 1 - Q(ky, lambda) (continuous).
inline TailPair scaled_poisson_tail_pair(const SumMoments& m, const Rational& y, ApproxMode mode, bool strict = true) {
  if (y < Rational(0)) throw DomainError("scaled_poisson_tail: y must be nonnegative");
  const Rational ky = m.k() * y;
  const double lambda = m.lambda.to_double();
  if (mode == ApproxMode::continuous) {
    if (!ky.is_positive()) throw DomainError("scaled_poisson_tail: continuous mode needs ky > 0");
    const auto g = incomplete_gamma(ky.to_double(), lambda);
    return {g.p, g.q};
  }
  return poisson_tail_pair(lambda, strict ? ky.floor() + 1 : ky.ceil());
}

inline double scaled_poisson_tail(const SumMoments& m, const Rational& y, ApproxMode mode, bool strict = true) {
  return scaled_poisson_tail_pair(m, y, mode, strict).upper;
}

// Normal N(mu, sigma^2) split at y. The continuity-corrected variant evaluates at y + 1/2.
inline TailPair normal_approx_tail_pair(const SumMoments& m, double y, bool continuity_correction = false) {
  const double point = continuity_correction ? y + 0.5 : y;
  const double mu = m.mu.to_double();
  const double var = m.sigma_sq.to_double();
  return {normal_tail(mu, var, point), normal_tail(-mu, var, -point)};
}

inline double normal_approx_tail(const SumMoments& m, double y, bool continuity_correction = false) {
  return normal_approx_tail_pair(m, y, continuity_correction).upper;
}

// |a - b| for two probabilities given with their complements, taken on whichever side
// keeps the numbers small so no digits are lost to cancellation.
inline double tail_distance(const TailPair& a, const TailPair& b) {
  if (a.upper > 0.5 && b.upper > 0.5) return std::abs(a.lower - b.lower);
  return std::abs(a.upper - b.upper);
}

}  // namespace scaled_poisson
