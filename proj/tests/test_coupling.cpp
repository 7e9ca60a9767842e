#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "scaled_poisson/coupling.hpp"

namespace sp = scaled_poisson;
using sp::Rational;

namespace {

sp::WeightedPoissonSum small_model() { return {{1, 2}, {Rational(1), Rational(1)}}; }

}  // namespace

TEST(DeltaDistribution, SmallModel) {
  const auto model = small_model();
  const auto mom = sp::moments(model);
  const auto d = sp::delta_distribution(sp::build_scheme(model, 100), mom);
  EXPECT_EQ(d.support, (std::vector<std::int64_t>{5, 2, -1}));
  EXPECT_EQ(d.probs, (std::vector<Rational>{Rational(1, 100), Rational(33, 100), Rational(66, 100)}));
  EXPECT_EQ(d.probs[0] + d.probs[1] + d.probs[2], Rational(1));
  EXPECT_EQ(d.delta_bounds[0] + d.delta_bounds[1], Rational(1));
}

TEST(DeltaDistribution, SingleClass) {
  const sp::WeightedPoissonSum model({1}, {Rational(3)});
  const auto d = sp::delta_distribution(sp::build_scheme(model, 10), sp::moments(model));
  EXPECT_EQ(d.support, (std::vector<std::int64_t>{1, 0}));
  EXPECT_EQ(d.probs, (std::vector<Rational>{Rational(3, 10), Rational(7, 10)}));
}

TEST(DeltaDistribution, SupportSignsFollowRStar) {
  for (const auto& model : {small_model(), sp::reference_model(),
                            sp::WeightedPoissonSum({1, 2, 7}, {Rational(3), Rational(2), Rational(1, 2)})}) {
    const auto mom = sp::moments(model);
    const auto d = sp::delta_distribution(sp::build_scheme(model, sp::per_unit_trials(model, 10)), mom);
    Rational total;
    for (const auto& p : d.probs) total += p;
    EXPECT_EQ(total, Rational(1));
    for (std::size_t r = 0; r < model.class_count(); ++r) {
      const std::int64_t v = d.support[r + 1];
      EXPECT_LT(v, mom.k_den);
      EXPECT_EQ(v < 0, mom.k_num * model.weights()[r] > mom.k_den);
    }
  }
}

TEST(SizeBiasExact, SingleVariable) {
  const sp::WeightedPoissonSum model({1}, {Rational(2, 5)});
  const auto s = sp::build_scheme(model, 1);
  auto f = [](std::int64_t x) { return x == 1 ? 3.0 : 0.5; };
  const auto r = sp::size_bias_check_exact(s, f, sp::moments(model));
  EXPECT_NEAR(r.lhs, 0.4 * 3.0, 1e-15);
  EXPECT_NEAR(r.rhs, 0.4 * 3.0, 1e-15);
}

TEST(SizeBiasExact, IdentityAcrossFunctionsAndModels) {
  const std::vector<std::pair<sp::WeightedPoissonSum, std::int64_t>> cases{
      {small_model(), 2},
      {small_model(), 8},
      {sp::WeightedPoissonSum({1, 3}, {Rational(1, 2), Rational(2)}), 5},
      {sp::WeightedPoissonSum({2, 3, 7}, {Rational(1), Rational(3, 2), Rational(1, 3)}), 5},
      {sp::WeightedPoissonSum({1}, {Rational(3)}), 16},
  };
  const std::vector<std::function<double(std::int64_t)>> fs{
      [](std::int64_t x) { return static_cast<double>(x); },
      [](std::int64_t x) { return x >= 5 ? 1.0 : 0.0; },
      [](std::int64_t x) { return x >= 12 ? 1.0 : 0.0; },
      [](std::int64_t x) { return std::min<double>(static_cast<double>(x), 10.0); },
  };
  for (const auto& [model, M] : cases) {
    const auto s = sp::build_scheme(model, M);
    const auto mom = sp::moments(model);
    for (const auto& f : fs) {
      const auto r = sp::size_bias_check_exact(s, f, mom);
      EXPECT_NEAR(r.lhs, r.rhs, 1e-12 * std::max(1.0, std::abs(r.rhs)));
    }
  }
}

TEST(SizeBiasExact, RefusesLargeInstances) {
  const auto model = small_model();
  EXPECT_THROW(sp::size_bias_check_exact(sp::build_scheme(model, 11), [](std::int64_t) { return 1.0; },
                                         sp::moments(model)),
               sp::ValidationError);
}

TEST(SizeBiasSample, DegenerateScheme) {
  const sp::WeightedPoissonSum model({1, 2}, {Rational(3), Rational(3)});
  const auto s = sp::build_scheme(model, 3);  // p = 1 everywhere
  auto f = [](std::int64_t x) { return std::sqrt(static_cast<double>(x)); };
  const auto e = sp::size_bias_sample(s, f, sp::moments(model), 10000, 1);
  EXPECT_EQ(e.lhs, e.rhs);
  EXPECT_LT(e.combined_stderr(), 1e-9);
}

TEST(SizeBiasSample, DeterministicGivenSeed) {
  const auto model = small_model();
  const auto s = sp::build_scheme(model, 100);
  auto f = [](std::int64_t x) { return std::min<double>(static_cast<double>(x), 10.0); };
  const auto a = sp::size_bias_sample(s, f, sp::moments(model), 20000, 7);
  const auto b = sp::size_bias_sample(s, f, sp::moments(model), 20000, 7);
  const auto c = sp::size_bias_sample(s, f, sp::moments(model), 20000, 8);
  EXPECT_EQ(a.lhs, b.lhs);
  EXPECT_EQ(a.rhs, b.rhs);
  EXPECT_NE(a.lhs, c.lhs);
  EXPECT_THROW(sp::size_bias_sample(s, f, sp::moments(model), 999, 7), sp::ValidationError);
}

TEST(SizeBiasSample, AgreesWithExactRhs) {
  const auto model = small_model();
  const auto s = sp::build_scheme(model, 100);
  const auto mom = sp::moments(model);
  auto f = [](std::int64_t x) { return std::min<double>(static_cast<double>(x), 10.0); };
  const auto e = sp::size_bias_sample(s, f, mom, 1000000, 7);
  EXPECT_LE(std::abs(e.lhs - e.rhs), 4 * e.combined_stderr());
  // rhs from the exact law of W
  const auto law = sp::w_distribution(s);
  double exact = 0.0;
  for (std::int64_t w = 0; w <= law.support_max(); ++w) exact += law.pmf(w) * 3.0 * w * f(3 * w);
  EXPECT_LE(std::abs(e.rhs - exact), 4 * e.rhs_stderr);
  EXPECT_LE(std::abs(e.lhs - exact), 4 * e.lhs_stderr);
}

TEST(ConditionalDelta, TightAtZero) {
  const auto model = small_model();
  const auto s = sp::build_scheme(model, 4);
  const auto mom = sp::moments(model);
  const auto c = sp::conditional_delta_bound(s, mom, 0);
  ASSERT_EQ(c.size(), 2U);
  for (const auto& e : c) EXPECT_NEAR(e.conditional, e.bound, 1e-15);
  EXPECT_NEAR(c[0].bound, 1.0 / 3.0, 1e-15);
}

TEST(ConditionalDelta, BoundedEverywhere) {
  const auto model = small_model();
  const auto s = sp::build_scheme(model, 4);
  const auto mom = sp::moments(model);
  const auto laws = sp::coupling_laws(s);
  for (std::int64_t w = 0; w <= laws.w_law.support_max(); ++w)
    for (const auto& e : sp::conditional_delta_bound(s, mom, laws, w)) EXPECT_LE(e.conditional, e.bound + 1e-15);
  EXPECT_THROW(sp::conditional_delta_bound(s, mom, laws, 100), sp::DomainError);
}

TEST(ConditionalDelta, ReferenceModel) {
  const auto model = sp::reference_model();
  const auto s = sp::build_scheme(model, sp::per_unit_trials(model, 50));
  const auto c = sp::conditional_delta_bound(s, sp::moments(model), 400);
  EXPECT_DOUBLE_EQ(c[0].bound, 0.25);
  EXPECT_DOUBLE_EQ(c[1].bound, 0.75);
  for (const auto& e : c) EXPECT_LE(e.conditional, e.bound);
}

TEST(HDecomposition, SingleClass) {
  const sp::WeightedPoissonSum model({1}, {Rational(3)});
  const auto mom = sp::moments(model);
  const auto s = sp::build_scheme(model, 30);
  const auto laws = sp::coupling_laws(s);
  const sp::SteinContext ctx = sp::SteinContext::from_moments(mom, 5);
  const auto table = sp::solve_stein(ctx, sp::h_decomposition_table_size(s, mom, laws, 5), true);
  const auto h = sp::h_decomposition(s, mom, ctx, table, laws);
  ASSERT_EQ(h.H.size(), 2U);
  EXPECT_EQ(h.H[1], 0.0);  // Δ = m − n b_1 = 0 contributes f(nw+1) − f(nw+1)
  EXPECT_LE(h.closure_error, 1e-10);
}

TEST(HDecomposition, SmallModel) {
  const auto model = small_model();
  const auto mom = sp::moments(model);
  const auto s = sp::build_scheme(model, 50);
  const auto laws = sp::coupling_laws(s);
  const sp::SteinContext ctx = sp::SteinContext::from_moments(mom, 5);
  const auto table = sp::solve_stein(ctx, sp::h_decomposition_table_size(s, mom, laws, 5), true);
  const auto h = sp::h_decomposition(s, mom, ctx, table, laws);
  // tail difference from the two exact sides: P(3W >= 25) − P(5 A_{9/5} >= 25)
  const double expected = laws.w_law.table_tail_ge(9) - sp::poisson_tail(1.8, 5);
  EXPECT_NEAR(h.tail_diff, expected, 1e-15);
  EXPECT_NEAR(h.tail_diff, -0.01856952024, 1e-10);
  EXPECT_LE(h.closure_error, 1e-8);
}

TEST(HDecomposition, RequiresCoverage) {
  const auto model = small_model();
  const auto mom = sp::moments(model);
  const auto s = sp::build_scheme(model, 50);
  const sp::SteinContext ctx = sp::SteinContext::from_moments(mom, 5);
  EXPECT_THROW(sp::h_decomposition(s, mom, ctx, sp::solve_stein(ctx, 75, true)), sp::ValidationError);
  const sp::SteinContext wrong(Rational(2), 5, 3, 5);
  EXPECT_THROW(sp::h_decomposition(s, mom, wrong, sp::solve_stein(wrong, 400, true)), sp::ValidationError);
}

TEST(GlExpectation, FiniteRatio) {
  const auto model = small_model();
  const auto mom = sp::moments(model);
  const auto s = sp::build_scheme(model, 50);
  const auto laws = sp::coupling_laws(s);
  const sp::SteinContext ctx = sp::SteinContext::from_moments(mom, 5);
  const auto table = sp::solve_stein(ctx, sp::h_decomposition_table_size(s, mom, laws, 5), true);
  for (std::int64_t l = 1; l <= 5; ++l) {
    const auto g = sp::g_l_expectation_ratio(laws.w_law, mom, ctx, table, l);
    EXPECT_TRUE(std::isfinite(g.ratio)) << l;
  }
}
