#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "scaled_poisson/errors.hpp"
#include "scaled_poisson/poisson_core.hpp"
#include "scaled_poisson/rational.hpp"
#include "scaled_poisson/weighted_sum.hpp"

namespace scaled_poisson {

// Target Â_lambda = m A_lambda on the lattice m Z+, test function h(w) = 1{w >= m y}.
class SteinContext {
 public:
  SteinContext(Rational lambda, std::int64_t lattice_step, std::int64_t scale_num, std::int64_t threshold_y,
               double series_tol = 1e-10)
      : lambda_(lambda), m_(lattice_step), n_(scale_num), y_(threshold_y), tol_(series_tol) {
    if (!lambda_.is_positive()) throw ValidationError("SteinContext: lambda must be positive");
    if (m_ < 1 || n_ < 1) throw ValidationError("SteinContext: m and n must be positive");
    if (std::gcd(m_, n_) != 1) throw ValidationError("SteinContext: gcd(n, m) must be 1");
    if (y_ < 1) throw ValidationError("SteinContext: threshold y must be at least 1");
    if (!(tol_ > 0.0) || tol_ > 1e-6) throw ValidationError("SteinContext: series_tol must lie in (0, 1e-6]");
    lambda_d_ = lambda_.to_double();
    lambda_m_ = (lambda_ * Rational(m_)).to_double();
    const auto tp = poisson_tail_pair(lambda_d_, y_);
    p_hat_ = tp.upper;
    q_hat_ = tp.lower;
  }

  static SteinContext from_moments(const SumMoments& mom, std::int64_t threshold_y, double series_tol = 1e-10) {
    return {mom.lambda, mom.k_den, mom.k_num, threshold_y, series_tol};
  }

  [[nodiscard]] const Rational& lambda() const { return lambda_; }
  [[nodiscard]] double lambda_value() const { return lambda_d_; }
  [[nodiscard]] std::int64_t lattice_step() const { return m_; }
  [[nodiscard]] std::int64_t scale_num() const { return n_; }
  [[nodiscard]] std::int64_t threshold_y() const { return y_; }
  [[nodiscard]] double series_tol() const { return tol_; }
  [[nodiscard]] double lambda_m() const { return lambda_m_; }
  // P(Â_lambda >= m y) = P(A_lambda >= y) and its complement.
  [[nodiscard]] double p_hat() const { return p_hat_; }
  [[nodiscard]] double q_hat() const { return q_hat_; }
  [[nodiscard]] double h(std::int64_t w) const { return w >= m_ * y_ ? 1.0 : 0.0; }

 private:
  Rational lambda_;
  std::int64_t m_;
  std::int64_t n_;
  std::int64_t y_;
  double tol_;
  double lambda_d_ = 0.0;
  double lambda_m_ = 0.0;
  double p_hat_ = 0.0;
  double q_hat_ = 0.0;
};

// λm f(w+m) − w f(w).
template <typename F>
double stein_apply(const SteinContext& ctx, F&& f, std::int64_t w) {
  return ctx.lambda_m() * f(w + ctx.lattice_step()) - static_cast<double>(w) * f(w);
}

struct ZeroMeanResult {
  double value = 0.0;    // sum_j (A f)(m j) P(A_lambda = j)
  double max_abs = 0.0;  // max_j |(A f)(m j)| over the summed range
};

// Index beyond which the Poisson(lambda) tail is below 1e-17.
inline std::int64_t default_zero_mean_trunc(const SteinContext& ctx) {
  return poisson_upper_quantile(ctx.lambda_value(), 1e-17) + 1;
}

template <typename F>
ZeroMeanResult operator_zero_mean(const SteinContext& ctx, F&& f, std::int64_t trunc) {
  ZeroMeanResult r;
  double comp = 0.0;
  for (std::int64_t j = 0; j <= trunc; ++j) {
    const double a = stein_apply(ctx, f, ctx.lattice_step() * j);
    r.max_abs = std::max(r.max_abs, std::abs(a));
    // Neumaier summation
    const double term = a * poisson_pmf(ctx.lambda_value(), j);
    const double t = r.value + term;
    comp += std::abs(r.value) >= std::abs(term) ? (r.value - t) + term : (term - t) + r.value;
    r.value = t;
  }
  r.value += comp;
  return r;
}

// One evaluation of f_h with its truncation diagnostics.
struct SteinPoint {
  double value = 0.0;
  std::int64_t terms = 0;     // series terms summed; 0 when the incomplete-gamma form was used
  double tail_bound = 0.0;    // certified bound on the discarded series tail
};

namespace detail {

// P_gamma(a2, lambda) - P_gamma(a1, lambda), taken on whichever side is small.
inline double lower_gamma_difference(double a2, double a1, double lambda) {
  const auto g2 = incomplete_gamma(a2, lambda);
  const auto g1 = incomplete_gamma(a1, lambda);
  if (g1.p < 0.5 && g2.p < 0.5) return g2.p - g1.p;
  return g1.q - g2.q;
}

}  // namespace detail

// f_h(w) for integer w >= 0 (f_h(0) := 0).
//
// For w >= λm the defining series is summed directly; its terms shrink with ratio
// q = λm/(w+mj) < 1 and the rest after term J is bounded by t_{J+1}/(1-q).
// For w < λm the same series equals, with x = w/m and j0 = max(0, ceil(y - x)),
//   f_h(w) = -[P_gamma(x+j0, λ) - P̂ P_gamma(x, λ)] / (m λ π(x-1)),  π(x-1) = e^{-λ} λ^{x-1} / Γ(x),
// which avoids summing the huge alternating partial sums of that region.
inline SteinPoint stein_solution_point(const SteinContext& ctx, std::int64_t w) {
  if (w < 0) throw EvaluationError("f_h is defined for w >= 0 only");
  if (w == 0) return {};
  const std::int64_t m = ctx.lattice_step();
  const std::int64_t y = ctx.threshold_y();
  const double lam = ctx.lambda_value();
  const double lm = ctx.lambda_m();
  const double p_hat = ctx.p_hat();
  const double wd = static_cast<double>(w);

  if (wd < lm) {
    const double md = static_cast<double>(m);
    const double log_prefactor = lam + detail::log_gamma(wd / md) - (wd / md) * std::log(lam) - std::log(md);
    double bracket = 0.0;
    if (w % m == 0) {
      const std::int64_t x = w / m;
      if (x < y) {
        bracket = p_hat * poisson_cdf(lam, x - 1);
      } else {
        bracket = poisson_tail(lam, x) * ctx.q_hat();
      }
      // The prefactor's Γ(x)/λ^x e^λ combines with the cdf into a ratio of pmfs.
      const double pmf_prev = poisson_log_pmf(lam, x - 1).value;
      return {-bracket * std::exp(-pmf_prev - std::log(md * lam)), 0, 0.0};
    }
    const double x = wd / md;
    const std::int64_t j0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(static_cast<double>(y) - x)));
    if (j0 == 0) {
      bracket = incomplete_gamma(x, lam).p * ctx.q_hat();
    } else {
      bracket = detail::lower_gamma_difference(x + static_cast<double>(j0), static_cast<double>(y), lam) +
                p_hat * incomplete_gamma(x, lam).q;
    }
    return {-bracket * std::exp(log_prefactor), 0, 0.0};
  }

  const std::int64_t first_on = w >= m * y ? 0 : (m * y - w + m - 1) / m;
  const double tol = ctx.series_tol();
  std::vector<double> terms;
  double t = 1.0 / wd;
  double abs_sum = 0.0;
  SteinPoint out;
  for (std::int64_t j = 0;; ++j) {
    const double c = (j >= first_on ? 1.0 : 0.0) - p_hat;
    terms.push_back(t * c);
    abs_sum += t * std::abs(c);
    const double q = lm / (wd + static_cast<double>(m * (j + 1)));
    t *= q;
    // every remaining coefficient has magnitude at most 1
    const double bound = t / (1.0 - q);
    if (bound <= std::min(tol, 1e-17 * abs_sum) || t == 0.0) {
      out.terms = j + 1;
      out.tail_bound = bound;
      break;
    }
  }
  double s = 0.0;
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) s += *it;
  out.value = -s;
  return out;
}

inline double stein_solution_value(const SteinContext& ctx, std::int64_t w) {
  return stein_solution_point(ctx, w).value;
}

class SteinSolutionTable {
 public:
  SteinSolutionTable(std::int64_t m, std::int64_t w_max, bool off_lattice)
      : m_(m), w_max_(w_max), off_lattice_(off_lattice) {}

  [[nodiscard]] std::int64_t lattice_step() const { return m_; }
  [[nodiscard]] std::int64_t w_max() const { return w_max_; }
  // Largest w with a stored value.
  [[nodiscard]] std::int64_t range_max() const { return static_cast<std::int64_t>(points_.size()) - 1; }
  [[nodiscard]] bool has_off_lattice() const { return off_lattice_; }

  [[nodiscard]] bool covers(std::int64_t w) const {
    return w >= 0 && w <= range_max() && (off_lattice_ || w % m_ == 0);
  }
  [[nodiscard]] const SteinPoint& point(std::int64_t w) const {
    if (!covers(w)) throw EvaluationError("f_h table has no value at w=" + std::to_string(w));
    return points_[static_cast<std::size_t>(w)];
  }
  [[nodiscard]] double at(std::int64_t w) const { return point(w).value; }
  double operator()(std::int64_t w) const { return at(w); }

  double residual_max = 0.0;  // max Stein-equation residual over lattice points w <= w_max
  std::int64_t max_terms = 0;
  double max_tail_bound = 0.0;

 private:
  friend SteinSolutionTable solve_stein(const SteinContext&, std::int64_t, bool);
  std::int64_t m_;
  std::int64_t w_max_;
  bool off_lattice_;
  std::vector<SteinPoint> points_;
};

inline double stein_residual(const SteinContext& ctx, const SteinSolutionTable& table, std::int64_t w) {
  return stein_apply(ctx, table, w) - (ctx.h(w) - ctx.p_hat());
}

// Values on [0, w_max + m] (every integer, or multiples of m only).
inline SteinSolutionTable solve_stein(const SteinContext& ctx, std::int64_t w_max, bool include_off_lattice) {
  const std::int64_t m = ctx.lattice_step();
  if (w_max < m * (ctx.threshold_y() + 10))
    throw ValidationError("solve_stein: w_max=" + std::to_string(w_max) + " is below m(y+10)=" +
                          std::to_string(m * (ctx.threshold_y() + 10)));
  SteinSolutionTable table(m, w_max, include_off_lattice);
  const std::int64_t top = w_max + m;
  table.points_.assign(static_cast<std::size_t>(top) + 1, SteinPoint{});
  for (std::int64_t w = 0; w <= top; ++w) {
    if (!include_off_lattice && w % m != 0) continue;
    const auto p = stein_solution_point(ctx, w);
    table.points_[static_cast<std::size_t>(w)] = p;
    table.max_terms = std::max(table.max_terms, p.terms);
    table.max_tail_bound = std::max(table.max_tail_bound, p.tail_bound);
  }
  for (std::int64_t w = 0; w <= w_max; w += m)
    table.residual_max = std::max(table.residual_max, std::abs(stein_residual(ctx, table, w)));
  return table;
}

// g_l(w) = (f_h(w) − f_h(w+l)) / P̂; zero for w < m.
inline double g_l(const SteinContext& ctx, const SteinSolutionTable& table, std::int64_t w, std::int64_t l) {
  if (l < 1 || l > ctx.lattice_step()) throw EvaluationError("g_l: l must lie in 1..m");
  if (w < ctx.lattice_step()) return 0.0;
  return (table.at(w) - table.at(w + l)) / ctx.p_hat();
}

// g_m from the Stein equation alone: f_h(w+m) − f_h(w) = f_h(w)(w/λm − 1) + (h(w) − P̂)/λm.
inline double g_m_recurrence(const SteinContext& ctx, const SteinSolutionTable& table, std::int64_t w) {
  const double f = table.at(w);
  const double lm = ctx.lambda_m();
  const double step = f * (static_cast<double>(w) / lm - 1.0) + (ctx.h(w) - ctx.p_hat()) / lm;
  return -step / ctx.p_hat();
}

// log of e^λ ⌊w/m − 1⌋! / (m λ^{⌊w/m⌋}), for w >= m.
inline double log_off_lattice_bound(const SteinContext& ctx, std::int64_t w) {
  const auto a = static_cast<double>(w / ctx.lattice_step());
  const double lam = ctx.lambda_value();
  return lam + detail::log_gamma(a) - std::log(static_cast<double>(ctx.lattice_step())) - a * std::log(lam);
}

inline double off_lattice_bound(const SteinContext& ctx, std::int64_t w) { return std::exp(log_off_lattice_bound(ctx, w)); }

// 1/(λm) + B(w) |w − λm| / (λm).
inline double g_m_upper_bound(const SteinContext& ctx, std::int64_t w) {
  const double lm = ctx.lambda_m();
  const double dist = std::abs(static_cast<double>(w) - lm);
  if (dist == 0.0) return 1.0 / lm;
  return 1.0 / lm + std::exp(log_off_lattice_bound(ctx, w) + std::log(dist / lm));
}

struct PropertyCheck {
  std::string name;
  bool passed = true;
  double worst_margin = std::numeric_limits<double>::infinity();  // smallest slack seen; negative on failure
  std::int64_t worst_w = -1;
  std::int64_t checked = 0;

  void record(double margin, std::int64_t w) {
    ++checked;
    if (margin < worst_margin) {
      worst_margin = margin;
      worst_w = w;
    }
  }
};

struct FPropertyReport {
  PropertyCheck monotone{"monotone_above_my"};
  PropertyCheck increment_bound{"increment_bound_above_my"};
  PropertyCheck g_m_bound{"g_m_bound_below_my"};
  PropertyCheck g_l_bound{"g_l_bound_below_my"};
  PropertyCheck g_l_increment{"g_l_lattice_increment"};
  double fitted_C = 0.0;  // sup over the grid of w (f_h(w+l) − f_h(w)), w >= my

  [[nodiscard]] bool all_passed() const {
    return monotone.passed && increment_bound.passed && g_m_bound.passed && g_l_bound.passed &&
           g_l_increment.passed;
  }
  [[nodiscard]] std::vector<const PropertyCheck*> checks() const {
    return {&monotone, &increment_bound, &g_m_bound, &g_l_bound, &g_l_increment};
  }
};

// Relative slack allowed when a bound is attained with equality (w = λm in the g_m bound).
inline constexpr double kBoundRelativeSlack = 1e-9;

// Checks, on the grid points that fall in each property's range:
//   monotone         f_h(w+1) > f_h(w) for w >= my
//   increment_bound  0 < f_h(w+l) − f_h(w), l = 1..m, w >= my (C fitted as the sup of w times the gap)
//   g_m_bound        g_m(w) <= 1/(λm) + B(w)|w − λm|/(λm) for m <= w < my
//   g_l_bound        |g_l(w)| <= B(w) for m <= w < my, l = 1..m−1
//   g_l_increment    g_l(mj) − g_l(mj − m) >= −1e−10 for lattice w = mj with 2 <= j <= y − 1
inline FPropertyReport verify_f_properties(const SteinContext& ctx, const SteinSolutionTable& table,
                                           const std::vector<std::int64_t>& grid) {
  if (!table.has_off_lattice()) throw ValidationError("verify_f_properties: table needs off-lattice values");
  const std::int64_t m = ctx.lattice_step();
  const std::int64_t my = m * ctx.threshold_y();
  FPropertyReport rep;
  auto finish = [](PropertyCheck& c, double tol) { c.passed = c.checked == 0 || c.worst_margin >= -tol; };

  for (const std::int64_t w : grid) {
    if (w < m) continue;
    if (w >= my) {
      if (table.covers(w + 1)) rep.monotone.record(table.at(w + 1) - table.at(w), w);
      for (std::int64_t l = 1; l <= m; ++l) {
        if (!table.covers(w + l)) break;
        const double gap = table.at(w + l) - table.at(w);
        rep.increment_bound.record(gap, w);
        rep.fitted_C = std::max(rep.fitted_C, gap * static_cast<double>(w));
      }
      continue;
    }
    if (table.covers(w + m)) {
      const double g = g_l(ctx, table, w, m);
      const double bound = g_m_upper_bound(ctx, w);
      rep.g_m_bound.record((bound - g) / std::max(std::abs(bound), std::abs(g)), w);
    }
    const double log_b = log_off_lattice_bound(ctx, w);
    for (std::int64_t l = 1; l < m && table.covers(w + l); ++l) {
      const double g = std::abs(g_l(ctx, table, w, l));
      // relative margin 1 − |g|/B, formed in log space since B can exceed the double range
      const double margin = g == 0.0 ? 1.0 : -std::expm1(std::log(g) - log_b);
      rep.g_l_bound.record(margin, w);
    }
    if (w % m == 0) {
      const std::int64_t j = w / m;
      if (j >= 2 && j <= ctx.threshold_y() - 1) {
        for (std::int64_t l = 1; l <= m && table.covers(w + l); ++l) {
          const double a = g_l(ctx, table, w, l);
          const double b = g_l(ctx, table, w - m, l);
          // rounding allowance proportional to the operands, on top of the absolute 1e-10
          rep.g_l_increment.record((a - b) + 1e-10 + 1e-12 * (std::abs(a) + std::abs(b)), w);
        }
      }
    }
  }
  finish(rep.monotone, 0.0);
  rep.monotone.passed = rep.monotone.passed && (rep.monotone.checked == 0 || rep.monotone.worst_margin > 0.0);
  rep.increment_bound.passed = rep.increment_bound.checked == 0 || rep.increment_bound.worst_margin > 0.0;
  finish(rep.g_m_bound, kBoundRelativeSlack);
  finish(rep.g_l_bound, kBoundRelativeSlack);
  finish(rep.g_l_increment, 0.0);
  return rep;
}

// Termwise form of m^{j+1} Π(ℓ+⌊w/m⌋) <= Π(w+mℓ) <= m^{j+1} Π(ℓ+⌊w/m⌋+1), ℓ = 0..j.
// Each factor satisfies the sandwich, so the products do as well.
inline bool factorial_sandwich_holds(std::int64_t m, std::int64_t w, std::int64_t j) {
  if (m < 1 || w < 0 || j < 0) throw ValidationError("factorial_sandwich_holds: bad arguments");
  const std::int64_t a = w / m;
  for (std::int64_t l = 0; l <= j; ++l) {
    const std::int64_t mid = w + m * l;
    if (m * (l + a) > mid || mid > m * (l + a + 1)) return false;
  }
  return true;
}

// For m <= w < my, j' is defined by w + m j' < my <= w + m(j'+1); checks ⌊w/m⌋ + j' < y <= ⌊w/m⌋ + j' + 2.
inline bool j_prime_bracket_holds(std::int64_t m, std::int64_t y, std::int64_t w) {
  const std::int64_t my = m * y;
  if (w < m || w >= my) throw ValidationError("j_prime_bracket_holds: need m <= w < my");
  const std::int64_t jp = (my - w - 1) / m;  // largest j' with w + m j' < my
  const std::int64_t a = w / m;
  return a + jp < y && y <= a + jp + 2;
}

}  // namespace scaled_poisson
