#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "scaled_poisson/bernoulli_lattice.hpp"
#include "scaled_poisson/errors.hpp"
#include "scaled_poisson/lattice_distribution.hpp"
#include "scaled_poisson/poisson_core.hpp"
#include "scaled_poisson/rational.hpp"
#include "scaled_poisson/weighted_sum.hpp"

namespace scaled_poisson {

struct BoundParams {
  std::vector<Rational> deltas;
  std::vector<std::int64_t> K;  // K_r = ceil(n b_r / m)
  std::int64_t r_star = 0;      // largest r (1-based) with n b_r <= m; 0 if none
  Rational lambda;

  // 1 + Σ_{r > r*} (K_r − 2) δ_r
  [[nodiscard]] Rational multiplier() const {
    Rational s(1);
    for (std::size_t r = static_cast<std::size_t>(r_star); r < K.size(); ++r) s += Rational(K[r] - 2) * deltas[r];
    return s;
  }

  // (1 + (y−λ)²/(2λ)) (1 + Σ_{r>r*} (K_r−2) δ_r) + λ (1 + ln y)
  [[nodiscard]] double bracket(double y) const {
    const double lam = lambda.to_double();
    const double d = y - lam;
    return (1.0 + d * d / (2.0 * lam)) * multiplier().to_double() + lam * (1.0 + std::log(y));
  }
};

inline BoundParams bound_params(const WeightedPoissonSum& model, const SumMoments& mom) {
  BoundParams bp;
  bp.lambda = mom.lambda;
  for (std::size_t r = 0; r < model.class_count(); ++r) {
    const std::int64_t b = model.weights()[r];
    bp.deltas.push_back(Rational(b) * model.rates()[r] / mom.mu);
    bp.K.push_back(Rational(mom.k_num * b, mom.k_den).ceil());
    if (mom.k_num * b <= mom.k_den) bp.r_star = static_cast<std::int64_t>(r) + 1;
  }
  return bp;
}

inline double moderate_deviation_bound(const BoundParams& params, std::int64_t y) {
  if (y < 1 || Rational(y) < params.lambda)
    throw DomainError("moderate_deviation_bound: need an integer y >= max(1, lambda) but got y=" + std::to_string(y) +
                      ", lambda=" + params.lambda.str());
  return params.bracket(static_cast<double>(y));
}

// sup over integers r in [ceil(λ), y] of P(nW >= m r) / P(Â_λ >= m r).
inline double eta(const LatticeDistribution& w_law, const SumMoments& mom, std::int64_t y) {
  const std::int64_t lo = mom.lambda.ceil();
  if (y < lo) throw DomainError("eta: empty range, y=" + std::to_string(y) + " is below lambda=" + mom.lambda.str());
  const double lam = mom.lambda.to_double();
  double best = 0.0;
  for (std::int64_t r = lo; r <= y; ++r) {
    // nW >= m r  <=>  W >= ceil(m r / n)
    const std::int64_t t = Rational(mom.k_den * r, mom.k_num).ceil();
    best = std::max(best, w_law.table_tail_ge(t) / poisson_tail(lam, r));
  }
  return best;
}

struct ExperimentRow {
  std::int64_t y = 0;
  double exact_tail = 0.0;
  double scaled_tail = 0.0;
  double normal_tail = 0.0;
  double rel_error = 0.0;
  double abs_error_poisson = 0.0;
  double abs_error_normal = 0.0;
  double bound_bracket = 0.0;  // bracket evaluated at ky; NaN when ky < λ
  std::int64_t plateau_id = 0;  // Poisson threshold floor(ky) + 1 used by the strict scaled tail
  std::int64_t scale_N = 1;
  bool underflow = false;
};

struct SweepOptions {
  double epsilon = 1e-30;
};

inline double bracket_at_ky(const BoundParams& bp, const SumMoments& mom, std::int64_t y) {
  const Rational ky = mom.k() * Rational(y);
  if (ky < mom.lambda) return std::numeric_limits<double>::quiet_NaN();
  return bp.bracket(ky.to_double());
}

// One row for P(S > y) against P(A_λ > ky) and the normal baseline.
inline ExperimentRow make_row(const LatticeDistribution& s_law, const SumMoments& mom, const BoundParams& bp,
                              std::int64_t y) {
  ExperimentRow row;
  row.y = y;
  const double below = s_law.table_cdf(y);
  // the larger side is taken as the complement of the smaller one
  const TailPair ex{below < 0.5 ? 1.0 - below : s_law.table_tail_ge(y + 1), below};
  const TailPair sc = scaled_poisson_tail_pair(mom, Rational(y), ApproxMode::discrete, true);
  const TailPair nm = normal_approx_tail_pair(mom, static_cast<double>(y));
  row.exact_tail = ex.upper;
  row.scaled_tail = sc.upper;
  row.normal_tail = nm.upper;
  row.abs_error_poisson = tail_distance(ex, sc);
  row.abs_error_normal = tail_distance(ex, nm);
  row.underflow = !(ex.upper > std::numeric_limits<double>::min());
  row.rel_error = row.underflow ? std::numeric_limits<double>::quiet_NaN() : row.abs_error_poisson / ex.upper;
  row.bound_bracket = bracket_at_ky(bp, mom, y);
  row.plateau_id = (mom.k() * Rational(y)).floor() + 1;
  return row;
}

inline std::vector<ExperimentRow> relative_error_sweep(const WeightedPoissonSum& model, std::int64_t y_from,
                                                       std::int64_t y_to, const SweepOptions& opt = {}) {
  if (y_from < 0 || y_to < y_from) throw ValidationError("sweep: need 0 <= y_from <= y_to");
  const auto mom = moments(model);
  const auto bp = bound_params(model, mom);
  const auto law = exact_distribution(model, opt.epsilon);
  if (y_to >= law.support_max())
    throw ValidationError("sweep: y_to=" + std::to_string(y_to) + " is beyond the truncated support");
  std::vector<ExperimentRow> rows;
  for (std::int64_t y = y_from; y <= y_to; ++y) rows.push_back(make_row(law, mom, bp, y));
  return rows;
}

struct PlateauRun {
  std::int64_t id = 0;
  std::int64_t first_y = 0;
  std::int64_t last_y = 0;
  bool interior = true;  // false when the run touches either end of the sweep and may be clipped

  [[nodiscard]] std::int64_t length() const { return last_y - first_y + 1; }
};

// Maximal runs of consecutive rows sharing a plateau id.
inline std::vector<PlateauRun> plateau_runs(const std::vector<ExperimentRow>& rows) {
  std::vector<PlateauRun> runs;
  for (const auto& r : rows) {
    if (!runs.empty() && runs.back().id == r.plateau_id) {
      runs.back().last_y = r.y;
    } else {
      runs.push_back({r.plateau_id, r.y, r.y, true});
    }
  }
  if (!runs.empty()) {
    runs.front().interior = false;
    runs.back().interior = false;
  }
  return runs;
}

// Means of rel_error over consecutive non-overlapping windows; a partial last window is dropped.
inline std::vector<double> window_means(const std::vector<ExperimentRow>& rows, std::size_t width) {
  if (width == 0) throw ValidationError("window_means: width must be positive");
  std::vector<double> out;
  for (std::size_t start = 0; start + width <= rows.size(); start += width) {
    double s = 0.0;
    for (std::size_t i = start; i < start + width; ++i) s += rows[i].rel_error;
    out.push_back(s / static_cast<double>(width));
  }
  return out;
}

// Least-squares slope of log(rel_error) against log(y − μ) over rows with y > μ.
inline std::optional<double> fitted_growth_exponent(const std::vector<ExperimentRow>& rows, double mu) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (const auto& r : rows) {
    if (static_cast<double>(r.y) <= mu || !(r.rel_error > 0.0)) continue;
    const double x = std::log(static_cast<double>(r.y) - mu);
    const double v = std::log(r.rel_error);
    sx += x;
    sy += v;
    sxx += x * x;
    sxy += x * v;
    ++cnt;
  }
  if (cnt < 2) return std::nullopt;
  const double den = cnt * sxx - sx * sx;
  if (den == 0.0) return std::nullopt;
  return (cnt * sxy - sx * sy) / den;
}

struct ScalingSweep {
  std::vector<ExperimentRow> rows;
  std::vector<std::string> excluded;
};

// Rates multiplied by N (k, δ, K, r* unchanged; λ' = Nλ). N with Nλ > y is left out.
inline ScalingSweep scaling_sweep(const WeightedPoissonSum& model, std::int64_t y,
                                  const std::vector<std::int64_t>& N_values, const SweepOptions& opt = {}) {
  ScalingSweep out;
  for (const std::int64_t N : N_values) {
    if (N < 1) throw ValidationError("scaling_sweep: N must be positive");
    const auto scaled = model.scaled_rates(Rational(N));
    const auto mom = moments(scaled);
    if (mom.lambda > Rational(y)) {
      out.excluded.push_back("N=" + std::to_string(N) + ": lambda'=" + mom.lambda.str() + " exceeds y=" +
                             std::to_string(y));
      continue;
    }
    const auto law = exact_distribution(scaled, opt.epsilon);
    auto row = make_row(law, mom, bound_params(scaled, mom), y);
    row.scale_N = N;
    out.rows.push_back(row);
  }
  return out;
}

struct NormalComparison {
  std::vector<ExperimentRow> rows;
  std::int64_t poisson_wins = 0;

  [[nodiscard]] bool poisson_always_better() const {
    return poisson_wins == static_cast<std::int64_t>(rows.size());
  }
};

inline NormalComparison compare_normal(const WeightedPoissonSum& model, std::int64_t y_from, std::int64_t y_to,
                                       const SweepOptions& opt = {}) {
  NormalComparison out;
  out.rows = relative_error_sweep(model, y_from, y_to, opt);
  for (const auto& r : out.rows)
    if (r.abs_error_poisson < r.abs_error_normal) ++out.poisson_wins;
  return out;
}

struct ConstantPoint {
  std::int64_t y = 0;
  double deviation = 0.0;  // |P(nW >= my)/P(Â_λ >= my) − 1|
  double bracket = 0.0;
};

struct EmpiricalConstant {
  double C_hat = 0.0;
  std::int64_t argmax_y = 0;
  std::vector<ConstantPoint> points;  // the bracket values show where the side condition would bind
};

// Ĉ = max_y deviation(y) / bracket(y) over integer y in [y_from, y_to], with W built on `trials` trials per class.
inline EmpiricalConstant empirical_constant(const WeightedPoissonSum& model, std::int64_t y_from, std::int64_t y_to,
                                            std::int64_t trials) {
  const auto mom = moments(model);
  const auto bp = bound_params(model, mom);
  const auto w_law = w_distribution(build_scheme(model, trials));
  const double lam = mom.lambda.to_double();
  EmpiricalConstant out;
  for (std::int64_t y = y_from; y <= y_to; ++y) {
    const double bracket = moderate_deviation_bound(bp, y);
    const std::int64_t t = Rational(mom.k_den * y, mom.k_num).ceil();
    const TailPair w{w_law.table_tail_ge(t), w_law.table_cdf(t - 1)};
    const TailPair a = poisson_tail_pair(lam, y);
    const double dev = tail_distance(w, a) / a.upper;
    out.points.push_back({y, dev, bracket});
    if (dev / bracket > out.C_hat) {
      out.C_hat = dev / bracket;
      out.argmax_y = y;
    }
  }
  return out;
}

// CSV with 17 significant digits so that parsing recovers every double exactly.
inline const char* experiment_csv_header() {
  return "y,exact,scaled,normal,rel_error,abs_err_pois,abs_err_norm,bracket,plateau_id,scale_n,underflow";
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_rows_csv(std::ostream& os, const std::vector<ExperimentRow>& rows) {
  os << experiment_csv_header() << '\n';
  for (const auto& r : rows) {
    os << r.y << ',' << format_double(r.exact_tail) << ',' << format_double(r.scaled_tail) << ','
       << format_double(r.normal_tail) << ',' << format_double(r.rel_error) << ','
       << format_double(r.abs_error_poisson) << ',' << format_double(r.abs_error_normal) << ','
       << format_double(r.bound_bracket) << ',' << r.plateau_id << ',' << r.scale_N << ',' << (r.underflow ? 1 : 0)
       << '\n';
  }
}

inline std::vector<ExperimentRow> parse_rows_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != experiment_csv_header())
    throw ValidationError("parse_rows_csv: missing or unexpected header");
  std::vector<ExperimentRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 11) throw ValidationError("parse_rows_csv: expected 11 fields in '" + line + "'");
    auto num = [&](const std::string& s) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (end != s.c_str() + s.size()) throw ValidationError("parse_rows_csv: bad number '" + s + "'");
      return v;
    };
    auto integer = [&](const std::string& s) {
      char* end = nullptr;
      const long long v = std::strtoll(s.c_str(), &end, 10);
      if (end != s.c_str() + s.size() || s.empty()) throw ValidationError("parse_rows_csv: bad integer '" + s + "'");
      return static_cast<std::int64_t>(v);
    };
    ExperimentRow r;
    r.y = integer(f[0]);
    r.exact_tail = num(f[1]);
    r.scaled_tail = num(f[2]);
    r.normal_tail = num(f[3]);
    r.rel_error = num(f[4]);
    r.abs_error_poisson = num(f[5]);
    r.abs_error_normal = num(f[6]);
    r.bound_bracket = num(f[7]);
    r.plateau_id = integer(f[8]);
    r.scale_N = integer(f[9]);
    r.underflow = integer(f[10]) != 0;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace scaled_poisson
