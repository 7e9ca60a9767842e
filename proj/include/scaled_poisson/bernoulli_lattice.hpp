#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scaled_poisson/errors.hpp"
#include "scaled_poisson/lattice_distribution.hpp"
#include "scaled_poisson/rational.hpp"
#include "scaled_poisson/weighted_sum.hpp"

namespace scaled_poisson {

// One flat index i of the Bernoulli array.
struct BernoulliIndex {
  Rational p;
  std::int64_t b = 1;
  std::size_t class_index = 0;  // r, zero based
  std::int64_t trial = 0;       // which underlying trial X_j^{(r)} this index copies
};

// Class r contributes M* independent trials, each appearing as b_r identical copies.
// Flat indices run row-major: class 1 first, then trial by trial, the b_r copies of a
// trial adjacent to each other.
struct BernoulliScheme {
  std::int64_t trials_per_class = 1;
  std::vector<Rational> class_probs;
  std::vector<std::int64_t> replication;
  std::int64_t total_vars = 0;

  [[nodiscard]] std::size_t class_count() const { return replication.size(); }

  [[nodiscard]] BernoulliIndex index(std::int64_t i) const {
    if (i < 0 || i >= total_vars) throw EvaluationError("BernoulliScheme: index out of range");
    for (std::size_t r = 0; r < replication.size(); ++r) {
      const std::int64_t block = replication[r] * trials_per_class;
      if (i < block) return {class_probs[r], replication[r], r, i / replication[r]};
      i -= block;
    }
    throw EvaluationError("BernoulliScheme: index out of range");
  }

  [[nodiscard]] std::vector<BernoulliIndex> per_index() const {
    std::vector<BernoulliIndex> out;
    out.reserve(static_cast<std::size_t>(total_vars));
    for (std::size_t r = 0; r < replication.size(); ++r)
      for (std::int64_t j = 0; j < trials_per_class; ++j)
        for (std::int64_t c = 0; c < replication[r]; ++c) out.push_back({class_probs[r], replication[r], r, j});
    return out;
  }
};

// Largest ceil(nu_r): the smallest M* that keeps every p_r <= 1.
inline std::int64_t min_trials(const WeightedPoissonSum& model) {
  std::int64_t t = 1;
  for (const auto& nu : model.rates()) t = std::max(t, nu.ceil());
  return t;
}

// M* measured in units of ceil(max nu_r), so that per_unit = 100 gives p <= 0.01.
inline std::int64_t per_unit_trials(const WeightedPoissonSum& model, std::int64_t per_unit) {
  if (per_unit < 1) throw ValidationError("per-unit trial count must be positive");
  return per_unit * min_trials(model);
}

inline BernoulliScheme build_scheme(const WeightedPoissonSum& model, std::int64_t trials) {
  if (trials < 1) throw ValidationError("build_scheme: M* must be positive");
  BernoulliScheme s;
  s.trials_per_class = trials;
  for (std::size_t r = 0; r < model.class_count(); ++r) {
    const Rational p = model.rates()[r] / Rational(trials);
    if (p > Rational(1))
      throw ValidationError("build_scheme: M*=" + std::to_string(trials) + " gives p=" + p.str() + " > 1 for class " +
                            std::to_string(r + 1) + " (rate " + model.rates()[r].str() + ")");
    s.class_probs.push_back(p);
    s.replication.push_back(model.weights()[r]);
    s.total_vars += model.weights()[r] * trials;
  }
  return s;
}

struct SchemeMoments {
  Rational sum_p;   // sum_i p_i
  Rational sum_bp;  // sum_i b_i p_i
};

inline SchemeMoments scheme_moments(const BernoulliScheme& s) {
  SchemeMoments out;
  const Rational M(s.trials_per_class);
  for (std::size_t r = 0; r < s.class_count(); ++r) {
    const Rational b(s.replication[r]);
    out.sum_p += b * M * s.class_probs[r];
    out.sum_bp += b * b * M * s.class_probs[r];
  }
  return out;
}

// sum_i b_i p_i^2.
inline Rational sum_b_p_squared(const BernoulliScheme& s) {
  Rational out;
  const Rational M(s.trials_per_class);
  for (std::size_t r = 0; r < s.class_count(); ++r) {
    const Rational b(s.replication[r]);
    out += b * b * M * s.class_probs[r] * s.class_probs[r];
  }
  return out;
}

// Binomial(trials, p) pmf. Entries beyond the last one representable in double are dropped.
// The table is rescaled to unit mass, which removes the rounding carried in by log-gamma
// at large trial counts.
inline LatticeDistribution binomial_law(std::int64_t trials, const Rational& p) {
  if (trials < 0) throw ValidationError("binomial_law: negative trial count");
  if (trials == 0 || p == Rational(0)) return LatticeDistribution::delta_zero();
  std::vector<double> pmf(static_cast<std::size_t>(trials) + 1, 0.0);
  if (p == Rational(1)) {
    pmf.back() = 1.0;
    return LatticeDistribution(std::move(pmf));
  }
  const double pd = p.to_double();
  const double lp = std::log(pd);
  const double lq = std::log1p(-pd);
  const double n = static_cast<double>(trials);
  const double lgn = detail::log_gamma(n + 1.0);
  std::size_t last = 0;
  for (std::int64_t j = 0; j <= trials; ++j) {
    const double x = static_cast<double>(j);
    const double v =
        std::exp(lgn - detail::log_gamma(x + 1.0) - detail::log_gamma(n - x + 1.0) + x * lp + (n - x) * lq);
    pmf[static_cast<std::size_t>(j)] = v;
    if (v > 0.0) last = static_cast<std::size_t>(j);
  }
  pmf.resize(last + 1);
  double total = 0.0, comp = 0.0;
  for (double v : pmf) {
    const double t = total + v;
    comp += std::abs(total) >= std::abs(v) ? (total - t) + v : (v - t) + total;
    total = t;
  }
  total += comp;
  for (double& v : pmf) v /= total;
  return LatticeDistribution(std::move(pmf));
}

// Law of W with class `skip_class` short of one trial (skip_class == npos: the full W).
inline LatticeDistribution w_distribution_excluding(const BernoulliScheme& s, std::size_t skip_class) {
  LatticeDistribution law;
  for (std::size_t r = 0; r < s.class_count(); ++r) {
    const std::int64_t t = s.trials_per_class - (r == skip_class ? 1 : 0);
    law = law.convolve(binomial_law(t, s.class_probs[r]), s.replication[r]);
  }
  return law;
}

// W = sum_r b_r Binomial(M*, p_r). epsilon > 0 caps each binomial where its upper tail
// falls below epsilon / R; epsilon == 0 keeps the full support.
inline LatticeDistribution w_distribution(const BernoulliScheme& s, double epsilon = 0.0) {
  if (!(epsilon >= 0.0)) throw ValidationError("w_distribution: epsilon must be nonnegative");
  if (epsilon == 0.0) return w_distribution_excluding(s, static_cast<std::size_t>(-1));
  const double per_class = epsilon / static_cast<double>(s.class_count());
  LatticeDistribution law;
  for (std::size_t r = 0; r < s.class_count(); ++r) {
    const auto full = binomial_law(s.trials_per_class, s.class_probs[r]);
    std::int64_t cap = full.support_max();
    while (cap > 0 && full.table_tail_ge(cap) < per_class) --cap;
    std::vector<double> kept(full.pmf().begin(), full.pmf().begin() + cap + 1);
    law = law.convolve(LatticeDistribution(std::move(kept), full.table_tail_ge(cap + 1)), s.replication[r]);
  }
  return law;
}

// Leave-one-trial-out laws L_r, one per class (indices within a class are exchangeable).
inline std::vector<LatticeDistribution> leave_one_out_laws(const BernoulliScheme& s) {
  std::vector<LatticeDistribution> out;
  for (std::size_t r = 0; r < s.class_count(); ++r) out.push_back(w_distribution_excluding(s, r));
  return out;
}

// P(W > y) / P(S > y), or nothing when P(S > y) is below 1e-250.
inline std::optional<double> tail_ratio(const LatticeDistribution& w_law, const LatticeDistribution& s_law,
                                        std::int64_t y) {
  const double denom = s_law.table_tail_ge(y + 1);
  if (!(denom >= 1e-250)) return std::nullopt;
  return w_law.table_tail_ge(y + 1) / denom;
}

inline std::optional<double> tail_ratio(const BernoulliScheme& scheme, const WeightedPoissonSum& model,
                                        std::int64_t y) {
  return tail_ratio(w_distribution(scheme), exact_distribution(model, 1e-30), y);
}

}  // namespace scaled_poisson
