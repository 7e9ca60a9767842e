// Command line front end. Every subcommand writes CSV (header first) to stdout or --out.
// Exit status: 0 ok, 2 bad input or out-of-domain request, 3 numerical range failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scaled_poisson/scaled_poisson.hpp"

namespace sp = scaled_poisson;
using sp::Rational;

namespace {

struct ModelArgs {
  std::vector<std::string> weights;
  std::vector<std::string> rates;
};

void add_model_options(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("--weights", a.weights, "class weights b_r (default 1,10)")->delimiter(',');
  cmd->add_option("--rates", a.rates, "class rates nu_r, integers, fractions or decimals (default 100,30)")
      ->delimiter(',');
}

sp::NormalizedModel parse_model(const ModelArgs& a) {
  if (a.weights.empty() && a.rates.empty()) return {sp::reference_model(), 1};
  if (a.weights.empty() || a.rates.empty()) throw sp::ValidationError("--weights and --rates go together");
  std::vector<Rational> w, r;
  for (const auto& s : a.weights) w.push_back(Rational::parse(s));
  for (const auto& s : a.rates) r.push_back(Rational::parse(s));
  return sp::normalize_weights(w, r);
}

sp::WeightedPoissonSum integer_model(const ModelArgs& a) {
  auto nm = parse_model(a);
  if (nm.scale_B != 1)
    throw sp::ValidationError("this command needs integer weights; multiply them by " + std::to_string(nm.scale_B));
  return nm.model;
}

std::string num(double v) { return sp::format_double(v); }
std::string num(const Rational& v) { return sp::format_double(v.to_double()); }

// M* from either a literal trial count or a count in units of ceil(max nu).
std::int64_t resolve_trials(const sp::WeightedPoissonSum& model, std::optional<std::int64_t> mstar,
                            std::optional<std::int64_t> units) {
  if (mstar && units) throw sp::ValidationError("give --mstar or --mstar-units, not both");
  if (mstar) return *mstar;
  return sp::per_unit_trials(model, units.value_or(100));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scaled Poisson approximation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_path;
  app.add_option("--out", out_path, "write CSV here instead of stdout");

  std::ostream* out = &std::cout;
  std::unique_ptr<std::ofstream> file;
  auto open_out = [&]() -> std::ostream& {
    if (!out_path.empty() && !file) {
      file = std::make_unique<std::ofstream>(out_path);
      if (!*file) throw sp::ValidationError("cannot open " + out_path + " for writing");
      out = file.get();
    }
    return *out;
  };
  std::function<void()> action;

  // moments
  ModelArgs mom_args;
  auto* c_mom = app.add_subcommand("moments", "mu, sigma^2, k = n/m and lambda");
  add_model_options(c_mom, mom_args);
  c_mom->callback([&] {
    action = [&] {
      const auto nm = parse_model(mom_args);
      const auto m = sp::moments(nm.model, nm.scale_B);
      auto& os = open_out();
      os << "mu,sigma_sq,k_num,k_den,lambda,scale_b\n";
      os << num(m.mu) << ',' << num(m.sigma_sq) << ',' << m.k_num << ',' << m.k_den << ',' << num(m.lambda) << ','
         << m.scale_B << '\n';
    };
  });

  // exact-tail
  ModelArgs ex_args;
  std::int64_t ex_y = 0;
  bool ex_strict = false;
  double ex_eps = 1e-12;
  auto* c_ex = app.add_subcommand("exact-tail", "P(S > y) or P(S >= y) from the truncated convolution");
  add_model_options(c_ex, ex_args);
  c_ex->add_option("--y", ex_y)->required();
  c_ex->add_flag("--strict", ex_strict, "P(S > y) instead of P(S >= y)");
  c_ex->add_option("--eps", ex_eps, "total truncation mass");
  c_ex->callback([&] {
    action = [&] {
      const auto t = sp::exact_tail(integer_model(ex_args), ex_y, ex_strict, ex_eps);
      auto& os = open_out();
      os << "y,strict,eps,lower,upper\n";
      os << ex_y << ',' << (ex_strict ? 1 : 0) << ',' << num(ex_eps) << ',' << num(t.lower) << ',' << num(t.upper)
         << '\n';
    };
  });

  // approx-tail
  ModelArgs ap_args;
  std::string ap_y = "0";
  std::string ap_mode = "discrete";
  bool ap_strict = false;
  bool ap_cc = false;
  auto* c_ap = app.add_subcommand("approx-tail", "scaled Poisson and normal approximations at y");
  add_model_options(c_ap, ap_args);
  c_ap->add_option("--y", ap_y)->required();
  c_ap->add_option("--mode", ap_mode)->check(CLI::IsMember({"discrete", "continuous"}));
  c_ap->add_flag("--strict", ap_strict);
  c_ap->add_flag("--continuity-correction", ap_cc, "evaluate the normal at y + 1/2");
  c_ap->callback([&] {
    action = [&] {
      const auto model = integer_model(ap_args);
      const auto m = sp::moments(model);
      const Rational y = Rational::parse(ap_y);
      const auto mode = ap_mode == "continuous" ? sp::ApproxMode::continuous : sp::ApproxMode::discrete;
      const auto sc = sp::scaled_poisson_tail_pair(m, y, mode, ap_strict);
      const auto nm = sp::normal_approx_tail_pair(m, y.to_double(), ap_cc);
      auto& os = open_out();
      os << "y,mode,strict,scaled,scaled_complement,normal,normal_complement\n";
      os << num(y) << ',' << ap_mode << ',' << (ap_strict ? 1 : 0) << ',' << num(sc.upper) << ',' << num(sc.lower)
         << ',' << num(nm.upper) << ',' << num(nm.lower) << '\n';
    };
  });

  // sweep-relerr
  ModelArgs sw_args;
  std::int64_t sw_from = 401, sw_to = 700;
  double sw_eps = 1e-30;
  auto* c_sw = app.add_subcommand("sweep-relerr", "relative error of the scaled Poisson tail over a range of y");
  add_model_options(c_sw, sw_args);
  c_sw->add_option("--y-from", sw_from);
  c_sw->add_option("--y-to", sw_to);
  c_sw->add_option("--eps", sw_eps, "truncation mass of the exact law");
  c_sw->callback([&] {
    action = [&] {
      const auto rows = sp::relative_error_sweep(integer_model(sw_args), sw_from, sw_to, {sw_eps});
      sp::write_rows_csv(open_out(), rows);
    };
  });

  // sweep-scaling
  ModelArgs sc_args;
  std::int64_t sc_y = 400;
  std::vector<std::int64_t> sc_n{1, 2, 3, 4, 5, 6, 7};
  auto* c_sc = app.add_subcommand("sweep-scaling", "relative error at fixed y as all rates grow by N");
  add_model_options(c_sc, sc_args);
  c_sc->add_option("--y", sc_y);
  c_sc->add_option("--n-values", sc_n)->delimiter(',');
  c_sc->callback([&] {
    action = [&] {
      const auto s = sp::scaling_sweep(integer_model(sc_args), sc_y, sc_n);
      for (const auto& note : s.excluded) std::cerr << "skipped " << note << '\n';
      sp::write_rows_csv(open_out(), s.rows);
    };
  });

  // compare-normal
  ModelArgs cn_args;
  std::int64_t cn_from = 420, cn_to = 650;
  auto* c_cn = app.add_subcommand("compare-normal", "absolute errors of the scaled Poisson and normal tails");
  add_model_options(c_cn, cn_args);
  c_cn->add_option("--y-from", cn_from);
  c_cn->add_option("--y-to", cn_to);
  c_cn->callback([&] {
    action = [&] {
      const auto c = sp::compare_normal(integer_model(cn_args), cn_from, cn_to);
      sp::write_rows_csv(open_out(), c.rows);
      std::cerr << "scaled Poisson closer on " << c.poisson_wins << " of " << c.rows.size() << " rows\n";
    };
  });

  // stein-check
  std::int64_t st_lnum = 1600, st_lden = 31, st_m = 31, st_n = 4, st_y = 60, st_wmax = 5000;
  double st_tol = 1e-10;
  auto* c_st = app.add_subcommand("stein-check", "solve the lattice Stein equation and check its properties");
  c_st->add_option("--lambda-num", st_lnum);
  c_st->add_option("--lambda-den", st_lden);
  c_st->add_option("--m", st_m);
  c_st->add_option("--n", st_n);
  c_st->add_option("--y", st_y);
  c_st->add_option("--wmax", st_wmax);
  c_st->add_option("--tol", st_tol);
  c_st->callback([&] {
    action = [&] {
      if (st_lden == 0) throw sp::ValidationError("--lambda-den must be nonzero");
      const sp::SteinContext ctx(Rational(st_lnum, st_lden), st_m, st_n, st_y, st_tol);
      const auto table = sp::solve_stein(ctx, st_wmax, true);
      std::vector<std::int64_t> grid;
      for (std::int64_t w = st_m; w <= st_wmax; ++w) grid.push_back(w);
      const auto rep = sp::verify_f_properties(ctx, table, grid);
      auto& os = open_out();
      os << "check,passed,worst_margin,worst_w,checked\n";
      for (const auto* c : rep.checks())
        os << c->name << ',' << (c->passed ? 1 : 0) << ',' << num(c->worst_margin) << ',' << c->worst_w << ','
           << c->checked << '\n';
      os << "residual_max," << (table.residual_max <= 1e-9 ? 1 : 0) << ',' << num(table.residual_max) << ",-1,"
         << (st_wmax / st_m + 1) << '\n';
      os << "fitted_C,1," << num(rep.fitted_C) << ",-1," << rep.increment_bound.checked << '\n';
    };
  });

  // coupling-check
  ModelArgs cp_args;
  std::optional<std::int64_t> cp_mstar, cp_units;
  std::int64_t cp_y = 60;
  bool cp_exhaustive = false;
  std::int64_t cp_samples = 1000000;
  std::uint64_t cp_seed = 7;
  auto* c_cp = app.add_subcommand("coupling-check", "size-bias identity and H decomposition for a Bernoulli scheme");
  add_model_options(c_cp, cp_args);
  c_cp->add_option("--mstar", cp_mstar, "trials per class");
  c_cp->add_option("--mstar-units", cp_units, "trials per class in units of ceil(max rate) (default 100)");
  c_cp->add_option("--y", cp_y);
  auto* ex_flag = c_cp->add_flag("--exhaustive", cp_exhaustive, "enumerate every trial outcome");
  c_cp->add_option("--samples", cp_samples)->excludes(ex_flag);
  c_cp->add_option("--seed", cp_seed)->excludes(ex_flag);
  c_cp->callback([&] {
    action = [&] {
      const auto model = integer_model(cp_args);
      const auto mom = sp::moments(model);
      const auto s = sp::build_scheme(model, resolve_trials(model, cp_mstar, cp_units));
      const auto d = sp::delta_distribution(s, mom);
      const std::int64_t my = mom.k_den * cp_y;
      const auto f = [my](std::int64_t x) { return x >= my ? 1.0 : 0.0; };

      auto& os = open_out();
      os << "quantity,value\n";
      os << "trials_per_class," << s.trials_per_class << '\n';
      for (std::size_t i = 0; i < d.support.size(); ++i)
        os << "P(delta=" << d.support[i] << ")," << num(d.probs[i]) << '\n';
      if (cp_exhaustive) {
        const auto r = sp::size_bias_check_exact(s, f, mom);
        os << "size_bias_lhs," << num(r.lhs) << "\nsize_bias_rhs," << num(r.rhs) << '\n';
      } else {
        const auto e = sp::size_bias_sample(s, f, mom, cp_samples, cp_seed);
        os << "size_bias_lhs," << num(e.lhs) << "\nsize_bias_rhs," << num(e.rhs) << "\nsize_bias_stderr,"
           << num(e.combined_stderr()) << '\n';
      }
      const auto laws = sp::coupling_laws(s);
      const auto ctx = sp::SteinContext::from_moments(mom, cp_y);
      const auto table = sp::solve_stein(ctx, sp::h_decomposition_table_size(s, mom, laws, cp_y), true);
      const auto h = sp::h_decomposition(s, mom, ctx, table, laws);
      for (std::size_t r = 0; r < h.H.size(); ++r) os << 'H' << r << ',' << num(h.H[r]) << '\n';
      os << "tail_diff," << num(h.tail_diff) << "\nclosure_error," << num(h.closure_error) << '\n';
    };
  });

  // bound
  ModelArgs bd_args;
  std::int64_t bd_y = 60;
  std::optional<std::int64_t> bd_mstar, bd_units;
  auto* c_bd = app.add_subcommand("bound", "moderate deviation bracket and its parameters");
  add_model_options(c_bd, bd_args);
  c_bd->add_option("--y", bd_y);
  c_bd->add_option("--mstar", bd_mstar, "trials per class for eta");
  c_bd->add_option("--mstar-units", bd_units, "trials per class for eta in units of ceil(max rate) (default 100)");
  c_bd->callback([&] {
    action = [&] {
      const auto model = integer_model(bd_args);
      const auto mom = sp::moments(model);
      const auto bp = sp::bound_params(model, mom);
      const double bracket = sp::moderate_deviation_bound(bp, bd_y);
      const auto w_law = sp::w_distribution(sp::build_scheme(model, resolve_trials(model, bd_mstar, bd_units)));
      auto& os = open_out();
      os << "quantity,value\n";
      os << "y," << bd_y << "\nmu," << num(mom.mu) << "\nsigma_sq," << num(mom.sigma_sq) << "\nk_num," << mom.k_num
         << "\nk_den," << mom.k_den << "\nlambda," << num(mom.lambda) << '\n';
      for (std::size_t r = 0; r < bp.deltas.size(); ++r)
        os << "delta_" << r + 1 << ',' << num(bp.deltas[r]) << "\nK_" << r + 1 << ',' << bp.K[r] << '\n';
      os << "r_star," << bp.r_star << "\nmultiplier," << num(bp.multiplier()) << "\nbracket," << num(bracket)
         << "\neta," << num(sp::eta(w_law, mom, bd_y)) << '\n';
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (action) action();
    if (file) file->flush();
    return 0;
  } catch (const sp::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const sp::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const sp::NumericalRangeError& e) {
    std::cerr << "numerical range error: " << e.what() << '\n';
    return 3;
  } catch (const sp::EvaluationError& e) {
    std::cerr << "evaluation error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
