#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "scaled_poisson/bernoulli_lattice.hpp"
#include "scaled_poisson/errors.hpp"
#include "scaled_poisson/lattice_distribution.hpp"
#include "scaled_poisson/rational.hpp"
#include "scaled_poisson/stein_lattice.hpp"
#include "scaled_poisson/weighted_sum.hpp"

namespace scaled_poisson {

// Law of Δ = nW + m − nW^s. Entry 0 is Δ = m; entry r (1-based class) is Δ = m − n b_r.
struct DeltaDistribution {
  std::vector<std::int64_t> support;
  std::vector<Rational> probs;
  std::vector<Rational> delta_bounds;  // δ_r = b_r ν_r / μ
};

inline void require_consistent(const BernoulliScheme& s, const SumMoments& mom) {
  if (scheme_moments(s).sum_p != mom.mu) throw ValidationError("scheme and moments describe different models");
}

inline DeltaDistribution delta_distribution(const BernoulliScheme& s, const SumMoments& mom) {
  require_consistent(s, mom);
  DeltaDistribution d;
  const Rational M(s.trials_per_class);
  Rational same;
  for (std::size_t r = 0; r < s.class_count(); ++r) {
    const Rational b(s.replication[r]);
    same += b * M * s.class_probs[r] * s.class_probs[r] / mom.mu;
  }
  d.support.push_back(mom.k_den);
  d.probs.push_back(same);
  for (std::size_t r = 0; r < s.class_count(); ++r) {
    const Rational b(s.replication[r]);
    const Rational p = s.class_probs[r];
    d.support.push_back(mom.k_den - mom.k_num * s.replication[r]);
    d.probs.push_back(b * M * p * (Rational(1) - p) / mom.mu);
    d.delta_bounds.push_back(b * M * p / mom.mu);
  }
  return d;
}

struct SizeBiasPair {
  double lhs = 0.0;  // λm E[f(nW^s)]
  double rhs = 0.0;  // E[nW f(nW)]
};

inline constexpr std::int64_t kMaxEnumeratedTrials = 20;

// Exhaustive check over all 2^{R M*} trial outcomes. W^s replaces the copy group of the
// chosen index by ones; index i is chosen with probability p_i/μ, so a whole copy group
// (b_r indices) is chosen with probability b_r p_r / μ.
inline SizeBiasPair size_bias_check_exact(const BernoulliScheme& s, const std::function<double(std::int64_t)>& f,
                                          const SumMoments& mom) {
  require_consistent(s, mom);
  const auto R = static_cast<std::int64_t>(s.class_count());
  const std::int64_t trials = R * s.trials_per_class;
  if (trials > kMaxEnumeratedTrials)
    throw ValidationError("size_bias_check_exact: " + std::to_string(trials) +
                          " underlying trials is too many to enumerate; use size_bias_sample");
  // extended precision keeps the 2^{R M*}-term sums well below 1e-12
  using ld = long double;
  auto to_ld = [](const Rational& q) { return static_cast<ld>(q.num()) / static_cast<ld>(q.den()); };
  const std::int64_t n = mom.k_num;
  const ld lm = to_ld(mom.lambda * Rational(mom.k_den));
  const ld mu = to_ld(mom.mu);
  std::vector<ld> p(static_cast<std::size_t>(trials));
  std::vector<std::int64_t> b(static_cast<std::size_t>(trials));
  for (std::int64_t t = 0; t < trials; ++t) {
    const auto r = static_cast<std::size_t>(t / s.trials_per_class);
    p[static_cast<std::size_t>(t)] = to_ld(s.class_probs[r]);
    b[static_cast<std::size_t>(t)] = s.replication[r];
  }
  ld lhs = 0.0L, rhs = 0.0L;
  const std::uint64_t outcomes = std::uint64_t{1} << trials;
  for (std::uint64_t mask = 0; mask < outcomes; ++mask) {
    ld prob = 1.0L;
    std::int64_t w = 0;
    for (std::int64_t t = 0; t < trials; ++t) {
      const auto i = static_cast<std::size_t>(t);
      if (mask >> t & 1U) {
        prob *= p[i];
        w += b[i];
      } else {
        prob *= 1.0L - p[i];
      }
    }
    if (prob == 0.0L) continue;
    rhs += prob * static_cast<ld>(n * w) * static_cast<ld>(f(n * w));
    ld biased = 0.0L;
    for (std::int64_t t = 0; t < trials; ++t) {
      const auto i = static_cast<std::size_t>(t);
      const std::int64_t ws = (mask >> t & 1U) ? w : w + b[i];
      biased += static_cast<ld>(b[i]) * p[i] / mu * static_cast<ld>(f(n * ws));
    }
    lhs += prob * biased;
  }
  return {static_cast<double>(lhs * lm), static_cast<double>(rhs)};
}

struct SizeBiasEstimate {
  double lhs = 0.0;
  double rhs = 0.0;
  double lhs_stderr = 0.0;
  double rhs_stderr = 0.0;

  [[nodiscard]] double combined_stderr() const { return std::hypot(lhs_stderr, rhs_stderr); }
};

inline constexpr std::int64_t kSampleChunks = 64;

// Monte Carlo version. The budget is cut into a fixed number of chunks, each with its own
// generator seeded from (seed, chunk), so the result depends only on (seed, samples).
inline SizeBiasEstimate size_bias_sample(const BernoulliScheme& s, const std::function<double(std::int64_t)>& f,
                                         const SumMoments& mom, std::int64_t samples, std::uint64_t seed) {
  require_consistent(s, mom);
  if (samples < 10000) throw ValidationError("size_bias_sample: need at least 10^4 samples");
  const std::int64_t n = mom.k_num;
  const double lm = (mom.lambda * Rational(mom.k_den)).to_double();
  const auto d = delta_distribution(s, mom);
  std::vector<double> class_pick;
  for (const auto& db : d.delta_bounds) class_pick.push_back(db.to_double());
  std::vector<double> probs;
  for (const auto& p : s.class_probs) probs.push_back(p.to_double());

  // running mean and sum of squared deviations (Welford), mergeable across chunks
  struct Stat {
    double count = 0, mean = 0, m2 = 0;
    void add(double x) {
      count += 1.0;
      const double d = x - mean;
      mean += d / count;
      m2 += d * (x - mean);
    }
    void merge(const Stat& o) {
      if (o.count == 0.0) return;
      const double total = count + o.count;
      const double d = o.mean - mean;
      mean += d * o.count / total;
      m2 += o.m2 + d * d * count * o.count / total;
      count = total;
    }
  };
  struct Moments {
    Stat l, r;
  };
  auto run_chunk = [&](std::int64_t chunk, std::int64_t count) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(chunk)};
    std::mt19937_64 gen(seq);
    std::discrete_distribution<std::size_t> pick(class_pick.begin(), class_pick.end());
    Moments acc;
    for (std::int64_t i = 0; i < count; ++i) {
      std::int64_t w = 0;
      for (std::size_t r = 0; r < probs.size(); ++r) {
        std::binomial_distribution<std::int64_t> bin(s.trials_per_class, probs[r]);
        w += s.replication[r] * bin(gen);
      }
      const std::size_t chosen = pick(gen);
      std::int64_t ws = s.replication[chosen];
      for (std::size_t r = 0; r < probs.size(); ++r) {
        std::binomial_distribution<std::int64_t> bin(s.trials_per_class - (r == chosen ? 1 : 0), probs[r]);
        ws += s.replication[r] * bin(gen);
      }
      const double l = lm * f(n * ws);
      const double rr = static_cast<double>(n * w) * f(n * w);
      acc.l.add(l);
      acc.r.add(rr);
    }
    return acc;
  };

  const std::int64_t base = samples / kSampleChunks;
  const std::int64_t extra = samples % kSampleChunks;
  std::vector<Moments> per_chunk(static_cast<std::size_t>(kSampleChunks));
  const auto workers = static_cast<std::int64_t>(std::clamp(std::thread::hardware_concurrency(), 1U, 16U));
  std::vector<std::future<void>> jobs;
  for (std::int64_t wk = 0; wk < workers; ++wk)
    jobs.push_back(std::async(std::launch::async, [&, wk] {
      for (std::int64_t c = wk; c < kSampleChunks; c += workers)
        per_chunk[static_cast<std::size_t>(c)] = run_chunk(c, base + (c < extra ? 1 : 0));
    }));
  for (auto& j : jobs) j.get();
  // merged in chunk order, independent of which worker finished first
  Moments total;
  for (const auto& a : per_chunk) {
    total.l.merge(a.l);
    total.r.merge(a.r);
  }
  const auto N = static_cast<double>(samples);
  SizeBiasEstimate e;
  e.lhs = total.l.mean;
  e.rhs = total.r.mean;
  e.lhs_stderr = std::sqrt(total.l.m2 / (N - 1.0) / N);
  e.rhs_stderr = std::sqrt(total.r.m2 / (N - 1.0) / N);
  return e;
}

// W's law together with the leave-one-trial-out laws, shared by the exact joint-law computations.
struct CouplingLaws {
  LatticeDistribution w_law;
  std::vector<LatticeDistribution> leave_one_out;
};

inline CouplingLaws coupling_laws(const BernoulliScheme& s) { return {w_distribution(s), leave_one_out_laws(s)}; }

// P(W = w, Δ = m − n b_r) = b_r M* (p_r/μ)(1 − p_r) L_r(w).
inline double joint_delta_class(const BernoulliScheme& s, const SumMoments& mom, const CouplingLaws& laws,
                                std::size_t r, std::int64_t w) {
  const double p = s.class_probs[r].to_double();
  const double coef = static_cast<double>(s.replication[r] * s.trials_per_class) * p / mom.mu.to_double() * (1.0 - p);
  return coef * laws.leave_one_out[r].pmf(w);
}

// P(W = w, Δ = m) = Σ_r b_r M* (p_r/μ) p_r L_r(w − b_r).
inline double joint_delta_same(const BernoulliScheme& s, const SumMoments& mom, const CouplingLaws& laws,
                               std::int64_t w) {
  double out = 0.0;
  for (std::size_t r = 0; r < s.class_count(); ++r) {
    const double p = s.class_probs[r].to_double();
    const double coef = static_cast<double>(s.replication[r] * s.trials_per_class) * p / mom.mu.to_double() * p;
    out += coef * laws.leave_one_out[r].pmf(w - s.replication[r]);
  }
  return out;
}

struct ConditionalDelta {
  double conditional = 0.0;  // P(Δ = m − n b_r | W = w)
  double bound = 0.0;        // δ_r
};

inline std::vector<ConditionalDelta> conditional_delta_bound(const BernoulliScheme& s, const SumMoments& mom,
                                                             const CouplingLaws& laws, std::int64_t w) {
  require_consistent(s, mom);
  const double pw = laws.w_law.pmf(w);
  if (!(pw > 0.0)) throw DomainError("conditional_delta_bound: P(W=" + std::to_string(w) + ") is zero");
  const auto d = delta_distribution(s, mom);
  std::vector<ConditionalDelta> out;
  for (std::size_t r = 0; r < s.class_count(); ++r)
    out.push_back({joint_delta_class(s, mom, laws, r, w) / pw, d.delta_bounds[r].to_double()});
  return out;
}

inline std::vector<ConditionalDelta> conditional_delta_bound(const BernoulliScheme& s, const SumMoments& mom,
                                                             std::int64_t w) {
  return conditional_delta_bound(s, mom, coupling_laws(s), w);
}

struct HDecomposition {
  std::vector<double> H;  // H_0, H_1, ..., H_R
  double tail_diff = 0.0;  // P(nW >= my) − P(Â_λ >= my)
  double closure_error = 0.0;

  [[nodiscard]] double sum() const {
    double s = 0.0;
    for (double h : H) s += h;
    return s;
  }
};

inline void require_matching_context(const SumMoments& mom, const SteinContext& ctx) {
  if (ctx.lattice_step() != mom.k_den || ctx.scale_num() != mom.k_num || ctx.lambda() != mom.lambda)
    throw ValidationError("Stein context does not match the model moments");
}

// H_0 = λm Σ_w [f(nw+m) − f(nw)] P(W=w, Δ=m),
// H_r = λm Σ_w [f(nw+m) − f(nw+n b_r)] P(W=w, Δ=m−n b_r).
inline HDecomposition h_decomposition(const BernoulliScheme& s, const SumMoments& mom, const SteinContext& ctx,
                                      const SteinSolutionTable& table, const CouplingLaws& laws) {
  require_consistent(s, mom);
  require_matching_context(mom, ctx);
  const std::int64_t n = mom.k_num;
  const std::int64_t m = mom.k_den;
  const std::int64_t top = laws.w_law.support_max();
  const std::int64_t needed = n * top + std::max(m, n * s.replication.back());
  if (!table.has_off_lattice() || table.range_max() < needed)
    throw ValidationError("h_decomposition: f_h table must cover every integer up to " + std::to_string(needed));

  const double lm = ctx.lambda_m();
  HDecomposition out;
  out.H.assign(s.class_count() + 1, 0.0);
  for (std::int64_t w = top; w >= 0; --w) {
    const double base = table.at(n * w + m);
    out.H[0] += (base - table.at(n * w)) * joint_delta_same(s, mom, laws, w);
    for (std::size_t r = 0; r < s.class_count(); ++r)
      out.H[r + 1] += (base - table.at(n * w + n * s.replication[r])) * joint_delta_class(s, mom, laws, r, w);
  }
  for (double& h : out.H) h *= lm;
  // P(nW >= my) = P(W >= ceil(my/n))
  const std::int64_t my = m * ctx.threshold_y();
  const double w_tail = laws.w_law.table_tail_ge((my + n - 1) / n);
  out.tail_diff = w_tail - ctx.p_hat();
  out.closure_error = std::abs(out.sum() - out.tail_diff);
  return out;
}

inline HDecomposition h_decomposition(const BernoulliScheme& s, const SumMoments& mom, const SteinContext& ctx,
                                      const SteinSolutionTable& table) {
  return h_decomposition(s, mom, ctx, table, coupling_laws(s));
}

// Smallest w_max for solve_stein that lets h_decomposition run on this scheme.
inline std::int64_t h_decomposition_table_size(const BernoulliScheme& s, const SumMoments& mom,
                                                const CouplingLaws& laws, std::int64_t y) {
  const std::int64_t need =
      mom.k_num * laws.w_law.support_max() + std::max(mom.k_den, mom.k_num * s.replication.back());
  return std::max(need, mom.k_den * (y + 10));
}

struct GlExpectation {
  double w_side = 0.0;        // E[g_l(nW ∧ my)]
  double poisson_side = 0.0;  // E[g_l(Â_λ ∧ my)]
  double ratio = 0.0;
};

// Diagnostic for the bound E[g_l(nW ∧ my)] <= C (η + 1) E[g_l(Â_λ ∧ my)]; only the ratio is reported.
inline GlExpectation g_l_expectation_ratio(const LatticeDistribution& w_law, const SumMoments& mom,
                                           const SteinContext& ctx, const SteinSolutionTable& table, std::int64_t l) {
  require_matching_context(mom, ctx);
  const std::int64_t n = mom.k_num;
  const std::int64_t m = mom.k_den;
  const std::int64_t my = m * ctx.threshold_y();
  GlExpectation e;
  for (std::int64_t w = 0; w <= w_law.support_max(); ++w) {
    const double pw = w_law.pmf(w);
    if (pw == 0.0) continue;
    e.w_side += pw * g_l(ctx, table, std::min(n * w, my), l);
  }
  const double lam = ctx.lambda_value();
  for (std::int64_t j = 0; j < ctx.threshold_y(); ++j) e.poisson_side += poisson_pmf(lam, j) * g_l(ctx, table, m * j, l);
  e.poisson_side += ctx.p_hat() * g_l(ctx, table, my, l);
  e.ratio = e.w_side / e.poisson_side;
  return e;
}

}  // namespace scaled_poisson
