// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: acceptance [--xfail ID]...
// Exit status is 0 when every criterion passes, or when the only failures are the ones
// listed with --xfail. A listed criterion that passes counts as unexpected.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "scaled_poisson/scaled_poisson.hpp"

namespace sp = scaled_poisson;
using sp::Rational;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string title;
  std::function<Outcome()> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = sp::reference_model();
  const auto mom = sp::moments(model);
  const auto bp = sp::bound_params(model, mom);
  const double dt = seconds_since(t0);
  const bool ok = mom.mu == Rational(400) && mom.sigma_sq == Rational(3100) && mom.k() == Rational(4, 31) &&
                  mom.lambda == Rational(1600, 31) &&
                  bp.deltas == std::vector<Rational>{Rational(1, 4), Rational(3, 4)} &&
                  bp.K == std::vector<std::int64_t>{1, 2} && bp.r_star == 1;
  std::ostringstream os;
  os << "mu=" << mom.mu << " sigma2=" << mom.sigma_sq << " k=" << mom.k() << " lambda=" << mom.lambda
     << " delta=(" << bp.deltas[0] << "," << bp.deltas[1] << ") K=(" << bp.K[0] << "," << bp.K[1]
     << ") r*=" << bp.r_star << " time=" << fmt("%.2g", dt) << "s";
  return {ok && dt < 1e-3, os.str()};
}

Outcome ac2() {
  std::mt19937_64 gen(20261016);
  std::uniform_int_distribution<int> classes(1, 4), weight(1, 20), den(1, 9);
  int bad = 0;
  for (int i = 0; i < 50; ++i) {
    const int R = classes(gen);
    std::vector<std::int64_t> b;
    std::vector<Rational> nu;
    for (int r = 0; r < R; ++r) {
      const std::int64_t d = den(gen);
      std::uniform_int_distribution<std::int64_t> num(1, 50 * d);
      b.push_back(weight(gen));
      nu.emplace_back(num(gen), d);
    }
    const auto mom = sp::moments(sp::WeightedPoissonSum(b, nu));
    if (mom.scaled_poisson_mean() != mom.mu || mom.scaled_poisson_variance() != mom.sigma_sq) ++bad;
  }
  return {bad == 0, "50 random models, mismatches=" + std::to_string(bad)};
}

Outcome ac3() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(31);
  double worst = 0.0;  // largest |E| / (1 + max|Af|)
  int cases = 0;
  const std::vector<Rational> lambdas{Rational(1, 2), Rational(9, 5), Rational(1600, 31)};
  const std::vector<std::pair<std::int64_t, std::int64_t>> steps{{1, 1}, {5, 3}, {31, 4}};  // (m, n)
  for (const auto& lam : lambdas) {
    for (const auto& [m, n] : steps) {
      const sp::SteinContext ctx(lam, m, n, 1);
      const std::int64_t trunc = sp::default_zero_mean_trunc(ctx);
      auto check = [&](const std::function<double(std::int64_t)>& f) {
        const auto r = sp::operator_zero_mean(ctx, f, trunc);
        worst = std::max(worst, std::abs(r.value) / (1.0 + r.max_abs));
        ++cases;
      };
      for (double c : {1.0, -2.5, 1e3}) check([c](std::int64_t) { return c; });
      for (auto [a, c] : {std::pair{1.0, 0.0}, std::pair{-0.5, 3.0}, std::pair{1e-2, -7.0}})
        check([a, c](std::int64_t w) { return a * static_cast<double>(w) + c; });
      std::bernoulli_distribution coin(0.5);
      for (int k = 0; k < 20; ++k) {
        std::vector<bool> in(static_cast<std::size_t>(trunc) + 2);
        for (std::size_t j = 0; j < in.size(); ++j) in[j] = coin(gen);
        check([&in, m](std::int64_t w) {
          const auto j = static_cast<std::size_t>(w / m);
          return w % m == 0 && j < in.size() && in[j] ? 1.0 : 0.0;
        });
      }
    }
  }
  const double dt = seconds_since(t0);
  return {worst <= 1e-10 && dt < 1.0, std::to_string(cases) + " functions, worst scaled mean=" + fmt("%.3g", worst) +
                                          " time=" + fmt("%.3g", dt) + "s"};
}

Outcome ac4() {
  std::vector<sp::SteinContext> ctxs;
  for (std::int64_t y : {3, 10}) ctxs.emplace_back(Rational(9, 5), 5, 3, y);
  for (std::int64_t y : {60, 90}) ctxs.emplace_back(Rational(1600, 31), 31, 4, y);
  double worst = 0.0;
  for (const auto& ctx : ctxs) {
    const auto table = sp::solve_stein(ctx, ctx.lattice_step() * (ctx.threshold_y() + 50), false);
    worst = std::max(worst, table.residual_max);
  }
  return {worst <= 1e-9, "max residual over 4 contexts=" + fmt("%.3g", worst)};
}

Outcome ac5() {
  struct Case {
    sp::WeightedPoissonSum model;
    std::int64_t trials;
  };
  std::vector<Case> matrix;
  const sp::WeightedPoissonSum small({1, 2}, {Rational(1), Rational(1)});
  for (std::int64_t M = 1; M <= 8; ++M) matrix.push_back({small, M});
  const sp::WeightedPoissonSum single({1}, {Rational(3, 2)});
  for (std::int64_t M : {2, 5, 16}) matrix.push_back({single, M});
  const sp::WeightedPoissonSum three({1, 3, 4}, {Rational(1, 2), Rational(1), Rational(2, 3)});
  for (std::int64_t M : {1, 3, 5}) matrix.push_back({three, M});
  const sp::WeightedPoissonSum four({1, 2, 5, 7}, {Rational(1, 3), Rational(1, 4), Rational(1), Rational(1, 2)});
  for (std::int64_t M : {1, 2, 4}) matrix.push_back({four, M});

  std::vector<std::function<double(std::int64_t)>> fs{
      [](std::int64_t x) { return static_cast<double>(x); },
      [](std::int64_t x) { return std::exp(-0.1 * static_cast<double>(x)); },
      [](std::int64_t x) { return x >= 6 ? 1.0 : 0.0; },
      [](std::int64_t x) { return std::sin(static_cast<double>(x)); },
  };
  // tolerance 1e-12 in units of max(1, |rhs|): one ulp of a value above ~4500 already exceeds 1e-12
  double worst = 0.0, worst_abs = 0.0;
  int checks = 0;
  for (const auto& c : matrix) {
    const auto s = sp::build_scheme(c.model, c.trials);
    const auto mom = sp::moments(c.model);
    for (const auto& f : fs) {
      const auto r = sp::size_bias_check_exact(s, f, mom);
      worst = std::max(worst, std::abs(r.lhs - r.rhs) / std::max(1.0, std::abs(r.rhs)));
      worst_abs = std::max(worst_abs, std::abs(r.lhs - r.rhs));
      ++checks;
    }
  }

  // sampled: the small model and the large model, 10^6 draws each
  double worst_z = 0.0;
  {
    const auto s = sp::build_scheme(small, 100);
    auto f = [](std::int64_t x) { return std::min<double>(static_cast<double>(x), 10.0); };
    const auto e = sp::size_bias_sample(s, f, sp::moments(small), 1000000, 7);
    worst_z = std::max(worst_z, std::abs(e.lhs - e.rhs) / e.combined_stderr());
  }
  {
    const auto model = sp::reference_model();
    const auto s = sp::build_scheme(model, sp::per_unit_trials(model, 1));
    auto f = [](std::int64_t x) { return x >= 31 * 60 ? 1.0 : 0.0; };
    const auto e = sp::size_bias_sample(s, f, sp::moments(model), 1000000, 11);
    worst_z = std::max(worst_z, std::abs(e.lhs - e.rhs) / e.combined_stderr());
  }
  return {worst <= 1e-12 && worst_z <= 4.0, std::to_string(checks) + " exhaustive checks, worst scaled |lhs-rhs|=" +
                                                fmt("%.3g", worst) + " (absolute " + fmt("%.3g", worst_abs) + ")" + "; sampled worst z=" + fmt("%.3g", worst_z)};
}

struct HCase {
  sp::HDecomposition h;
  bool h2_holds = false;
};

HCase h_case(const sp::WeightedPoissonSum& model, std::int64_t trials, std::int64_t y) {
  const auto mom = sp::moments(model);
  const auto bp = sp::bound_params(model, mom);
  const auto s = sp::build_scheme(model, trials);
  const auto laws = sp::coupling_laws(s);
  const auto ctx = sp::SteinContext::from_moments(mom, y);
  const auto table = sp::solve_stein(ctx, sp::h_decomposition_table_size(s, mom, laws, y), true);
  HCase out{sp::h_decomposition(s, mom, ctx, table, laws), false};
  const double d1 = bp.deltas[0].to_double();
  const double d2 = bp.deltas[1].to_double();
  const double K2 = static_cast<double>(bp.K[1]);
  const auto& H = out.h.H;
  out.h2_holds = std::abs(H[2]) <= d2 * (K2 - 2.0) * std::abs(H[0]) + d2 / d1 * std::abs(H[1]);
  return out;
}

Outcome ac6() {
  const auto a = h_case(sp::WeightedPoissonSum({1, 2}, {Rational(1), Rational(1)}), 50, 5);
  const auto model = sp::reference_model();
  const auto b = h_case(model, sp::per_unit_trials(model, 50), 60);
  const double worst = std::max(a.h.closure_error, b.h.closure_error);
  return {worst <= 1e-8 && a.h2_holds && b.h2_holds,
          "closure errors " + fmt("%.3g", a.h.closure_error) + ", " + fmt("%.3g", b.h.closure_error) +
              "; H2 bound " + (a.h2_holds ? "holds" : "fails") + ", " + (b.h2_holds ? "holds" : "fails")};
}

Outcome ac7() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::int64_t> grid;
  for (std::int64_t w = 31; w <= 31 * 90; ++w) grid.push_back(w);
  const sp::SteinContext ctx(Rational(1600, 31), 31, 4, 60);
  const auto table = sp::solve_stein(ctx, 31 * 100, true);
  const auto rep = sp::verify_f_properties(ctx, table, grid);
  std::string detail = "y=60 C_hat=" + fmt("%.4g", rep.fitted_C);
  for (const auto* c : rep.checks())
    detail += " " + c->name + (c->passed ? " ok" : " FAILS at w=" + std::to_string(c->worst_w));
  const double dt = seconds_since(t0);
  return {rep.all_passed() && dt < 30.0, detail + "; time=" + fmt("%.3g", dt) + "s"};
}

Outcome ac8() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = sp::relative_error_sweep(sp::reference_model(), 401, 700);
  const auto means = sp::window_means(rows, 31);
  bool increasing = true;
  for (std::size_t i = 1; i < means.size(); ++i) increasing = increasing && means[i] > means[i - 1];
  int bad = 0, interior = 0;
  for (const auto& run : sp::plateau_runs(rows)) {
    if (!run.interior) continue;
    ++interior;
    if (run.length() != 7 && run.length() != 8) ++bad;
  }
  const double dt = seconds_since(t0);
  return {increasing && bad == 0 && dt < 120.0,
          std::to_string(means.size()) + " window means " + fmt("%.4g", means.front()) + " .. " +
              fmt("%.4g", means.back()) + (increasing ? " increasing" : " NOT increasing") + "; " +
              std::to_string(bad) + " of " + std::to_string(interior) + " interior plateaus off length 7/8"};
}

Outcome ac9() {
  const auto sweep = sp::scaling_sweep(sp::reference_model(), 400, {1, 2, 3, 4, 5, 6, 7});
  bool ok = sweep.rows.size() == 7;
  std::string detail = "rel errors";
  for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
    detail += " " + fmt("%.3g", sweep.rows[i].rel_error);
    if (i > 0) ok = ok && sweep.rows[i].rel_error <= 1.1 * sweep.rows[i - 1].rel_error;
  }
  return {ok, detail};
}

Outcome ac10() {
  const auto c = sp::compare_normal(sp::reference_model(), 420, 650);
  return {c.poisson_always_better(),
          "scaled Poisson closer on " + std::to_string(c.poisson_wins) + " of " + std::to_string(c.rows.size()) + " rows"};
}

Outcome ac11() {
  const auto model = sp::reference_model();
  const auto s_law = sp::exact_distribution(model, 1e-30);
  std::vector<double> dev;
  std::string detail = "|ratio-1|";
  for (std::int64_t M : {25, 50, 100, 200}) {
    const auto w_law = sp::w_distribution(sp::build_scheme(model, sp::per_unit_trials(model, M)));
    const auto r = sp::tail_ratio(w_law, s_law, 450);
    if (!r) return {false, "tail ratio undefined"};
    dev.push_back(std::abs(*r - 1.0));
    detail += " " + fmt("%.4g", dev.back());
  }
  bool ok = true;
  for (std::size_t i = 1; i < dev.size(); ++i) ok = ok && dev[i] <= 1.05 * dev[i - 1];
  return {ok, detail};
}

Outcome ac12() {
  double worst_s = 0.0;
  for (const auto& model : {sp::WeightedPoissonSum({1, 2}, {Rational(1), Rational(1)}), sp::reference_model(),
                            sp::WeightedPoissonSum({3, 7}, {Rational(5, 2), Rational(4)})}) {
    for (std::int64_t c1 : {0, 7, 30})
      for (std::int64_t c2 : {3, 19, 30}) {
        const auto law = sp::exact_distribution_with_caps(model, {c1, c2});
        const double nu1 = model.rates()[0].to_double(), nu2 = model.rates()[1].to_double();
        const std::int64_t b1 = model.weights()[0], b2 = model.weights()[1];
        std::vector<double> direct(static_cast<std::size_t>(b1 * c1 + b2 * c2) + 1, 0.0);
        for (std::int64_t i = 0; i <= c1; ++i)
          for (std::int64_t j = 0; j <= c2; ++j)
            direct[static_cast<std::size_t>(b1 * i + b2 * j)] += sp::poisson_pmf(nu1, i) * sp::poisson_pmf(nu2, j);
        for (std::size_t x = 0; x < direct.size(); ++x)
          worst_s = std::max(worst_s, std::abs(law.pmf(static_cast<std::int64_t>(x)) - direct[x]));
        if (law.support_max() >= static_cast<std::int64_t>(direct.size())) worst_s = 1.0;
      }
  }

  double worst_w = 0.0;
  int schemes = 0;
  const std::vector<std::pair<sp::WeightedPoissonSum, std::int64_t>> cases{
      {sp::WeightedPoissonSum({1, 2}, {Rational(1), Rational(1)}), 8},
      {sp::WeightedPoissonSum({1, 10}, {Rational(3), Rational(1, 2)}), 5},
      {sp::WeightedPoissonSum({2, 3, 5}, {Rational(1, 2), Rational(1), Rational(3, 2)}), 5},
      {sp::WeightedPoissonSum({1, 2, 3, 4}, {Rational(1, 4), Rational(1, 2), Rational(1, 3), Rational(1)}), 4},
      {sp::WeightedPoissonSum({7}, {Rational(5)}), 16},
  };
  for (const auto& [model, M] : cases) {
    const auto s = sp::build_scheme(model, M);
    const auto law = sp::w_distribution(s);
    const auto idx = s.per_index();
    // enumerate the R*M underlying trials; each index copy group moves together
    std::vector<double> p;
    std::vector<std::int64_t> b;
    for (std::size_t i = 0; i < idx.size(); i += static_cast<std::size_t>(idx[i].b)) {
      p.push_back(idx[i].p.to_double());
      b.push_back(idx[i].b);
    }
    std::int64_t top = 0;
    for (auto v : b) top += v;
    std::vector<double> direct(static_cast<std::size_t>(top) + 1, 0.0);
    const std::uint64_t outcomes = std::uint64_t{1} << p.size();
    for (std::uint64_t mask = 0; mask < outcomes; ++mask) {
      double prob = 1.0;
      std::int64_t w = 0;
      for (std::size_t t = 0; t < p.size(); ++t) {
        if (mask >> t & 1U) {
          prob *= p[t];
          w += b[t];
        } else {
          prob *= 1.0 - p[t];
        }
      }
      direct[static_cast<std::size_t>(w)] += prob;
    }
    for (std::size_t x = 0; x < direct.size(); ++x)
      worst_w = std::max(worst_w, std::abs(law.pmf(static_cast<std::int64_t>(x)) - direct[x]));
    ++schemes;
  }
  return {worst_s <= 1e-13 && worst_w <= 1e-13, "S double loop max diff=" + fmt("%.3g", worst_s) + "; W " +
                                                    std::to_string(schemes) + " schemes max diff=" + fmt("%.3g", worst_w)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> xfail;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--xfail" && i + 1 < argc) {
      xfail.insert(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--xfail ID]...\n", argv[0]);
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {"AC1", "reference model parameters", ac1},
      {"AC2", "moment matching on random models", ac2},
      {"AC3", "Stein operator has mean zero", ac3},
      {"AC4", "Stein equation residual", ac4},
      {"AC5", "size-bias identity", ac5},
      {"AC6", "H decomposition closure", ac6},
      {"AC7", "solution property suite", ac7},
      {"AC8", "relative error growth and plateaus", ac8},
      {"AC9", "rate scaling reduces relative error", ac9},
      {"AC10", "scaled Poisson beats the normal", ac10},
      {"AC11", "Bernoulli lattice tail ratio", ac11},
      {"AC12", "oracle equivalence", ac12},
  };

  int unexpected = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool expected_fail = xfail.count(c.id) > 0;
    const char* tag = o.pass ? (expected_fail ? "PASS (unexpected)" : "PASS") : (expected_fail ? "FAIL (expected)" : "FAIL");
    std::printf("%-4s %-17s %s | %s\n", c.id.c_str(), tag, c.title.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (o.pass == expected_fail) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
