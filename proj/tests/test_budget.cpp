#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "impatient/budget.hpp"
#include "impatient/error.hpp"

using namespace impatient;

namespace {

constexpr SchemeKind kAllNamed[] = {SchemeKind::std_, SchemeKind::eq,   SchemeKind::lin,
                                    SchemeKind::poly, SchemeKind::ilin, SchemeKind::ipoly,
                                    SchemeKind::norm};

std::vector<double> weights(SchemeKind kind, std::size_t k) {
  return scheme_weights(WeightScheme::named(kind, k));
}

void expect_vector_near(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

}  // namespace

TEST(SchemeWeights, ClosedFormExamples) {
  expect_vector_near(weights(SchemeKind::eq, 5), {0.2, 0.2, 0.2, 0.2, 0.2}, 1e-15);
  expect_vector_near(weights(SchemeKind::lin, 4), {0.1, 0.2, 0.3, 0.4}, 1e-15);
  expect_vector_near(weights(SchemeKind::ilin, 4), {0.4, 0.3, 0.2, 0.1}, 1e-15);
  expect_vector_near(weights(SchemeKind::std_, 3), {0.0, 0.0, 1.0}, 0.0);
  // k^2 / 30 for K = 4
  expect_vector_near(weights(SchemeKind::poly, 4), {1.0 / 30, 4.0 / 30, 9.0 / 30, 16.0 / 30}, 1e-15);
  expect_vector_near(weights(SchemeKind::ipoly, 4), {16.0 / 30, 9.0 / 30, 4.0 / 30, 1.0 / 30}, 1e-15);
}

TEST(SchemeWeights, NormWithDefaultBeta) {
  const double a = std::exp(-1.36), b = std::exp(-0.34);
  const double z = 2 * a + 2 * b + 1;
  expect_vector_near(weights(SchemeKind::norm, 5), {a / z, b / z, 1 / z, b / z, a / z}, 1e-15);
}

TEST(SchemeWeights, CustomGamma) {
  WeightScheme s = WeightScheme::named(SchemeKind::poly, 3);
  s.gamma = 3.0;
  expect_vector_near(scheme_weights(s), {1.0 / 36, 8.0 / 36, 27.0 / 36}, 1e-15);
}

TEST(SchemeWeights, InvariantsForAllHeadCounts) {
  for (std::size_t k = 1; k <= 16; ++k) {
    for (SchemeKind kind : kAllNamed) {
      const auto w = weights(kind, k);
      ASSERT_EQ(w.size(), k);
      EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12) << to_string(kind) << " K=" << k;
      for (double v : w) EXPECT_GE(v, 0.0);
    }
    auto lin = weights(SchemeKind::lin, k), poly = weights(SchemeKind::poly, k);
    std::reverse(lin.begin(), lin.end());
    std::reverse(poly.begin(), poly.end());
    EXPECT_EQ(weights(SchemeKind::ilin, k), lin);
    EXPECT_EQ(weights(SchemeKind::ipoly, k), poly);
    const auto norm = weights(SchemeKind::norm, k);
    for (std::size_t i = 0; i < k; ++i) EXPECT_NEAR(norm[i], norm[k - 1 - i], 1e-12);
    const auto p = weights(SchemeKind::poly, k);
    for (std::size_t i = 1; i < k; ++i) EXPECT_GT(p[i], p[i - 1]);
  }
}

TEST(SchemeWeights, InvalidParameters) {
  WeightScheme s = WeightScheme::named(SchemeKind::poly, 3);
  s.gamma = 1.0;
  EXPECT_THROW(scheme_weights(s), ConfigError);
  s.kind = SchemeKind::ipoly;
  EXPECT_THROW(scheme_weights(s), ConfigError);
  WeightScheme n = WeightScheme::named(SchemeKind::norm, 3);
  n.beta = 0.0;
  EXPECT_THROW(scheme_weights(n), ConfigError);
  EXPECT_THROW(scheme_weights(WeightScheme::named(SchemeKind::eq, 0)), ConfigError);
  EXPECT_THROW(scheme_kind_from_string("fancy"), ConfigError);
}

TEST(SchemeNames, RoundTrip) {
  for (SchemeKind kind : kAllNamed) EXPECT_EQ(scheme_kind_from_string(to_string(kind)), kind);
  EXPECT_EQ(scheme_kind_from_string("IPOLY"), SchemeKind::ipoly);
  EXPECT_EQ(scheme_kind_from_string("density"), SchemeKind::from_density);
}

TEST(WeightsFromDensity, UniformQuarterExits) {
  // Intervals [0,.25), [.25,.5), [.5,.75) and [.75,inf) each hold 1/4.
  const auto w = weights_from_density(BudgetDensity::uniform(0.0, 1.0), ExitSchedule({0.0, 0.25, 0.5, 0.75}));
  expect_vector_near(w, {0.25, 0.25, 0.25, 0.25}, 1e-15);
}

TEST(WeightsFromDensity, PointMassAfterLastExit) {
  const auto w = weights_from_density(BudgetDensity::point_mass(5.0), ExitSchedule({1.0, 2.0, 3.0}));
  expect_vector_near(w, {0.0, 0.0, 1.0}, 0.0);
}

TEST(WeightsFromDensity, PointMassOnExitBelongsToThatExit) {
  const auto w = weights_from_density(BudgetDensity::point_mass(2.0), ExitSchedule({1.0, 2.0, 3.0}));
  expect_vector_near(w, {0.0, 1.0, 0.0}, 0.0);
}

TEST(WeightsFromDensity, SingleIntervalHoldsAllMass) {
  const auto w = weights_from_density(BudgetDensity::uniform(0.0, 1.0), ExitSchedule({0.0, 1.0}));
  expect_vector_near(w, {1.0, 0.0}, 1e-15);
}

TEST(WeightsFromDensity, UniformWithEqualSpacingIsEq) {
  for (std::size_t k = 1; k <= 16; ++k) {
    std::vector<double> exits(k);
    for (std::size_t i = 0; i < k; ++i) exits[i] = 2.0 + 3.0 * static_cast<double>(i);
    const auto w = weights_from_density(BudgetDensity::uniform(2.0, 2.0 + 3.0 * k), ExitSchedule(exits));
    expect_vector_near(w, weights(SchemeKind::eq, k), 1e-9);
  }
}

TEST(WeightsFromDensity, DropsMassBeforeFirstExitAndRenormalizes) {
  // Half the mass lies before t_1 = 0.5.
  const auto w = weights_from_density(BudgetDensity::uniform(0.0, 1.0), ExitSchedule({0.5, 0.75}));
  expect_vector_near(w, {0.5, 0.5}, 1e-15);
}

TEST(WeightsFromDensity, Exponential) {
  const double r = 0.5;
  const auto w = weights_from_density(BudgetDensity::exponential(r), ExitSchedule({0.0, 1.0, 2.0}));
  expect_vector_near(w, {1 - std::exp(-r), std::exp(-r) - std::exp(-2 * r), std::exp(-2 * r)}, 1e-15);
}

TEST(WeightsFromDensity, PiecewiseIsExact) {
  // density 0.5 on [0,1), 0.25 on [1,3)
  const auto d = BudgetDensity::piecewise({0.0, 1.0, 3.0}, {0.5, 0.25});
  EXPECT_NEAR(d.cdf(2.0), 0.75, 1e-15);
  EXPECT_NEAR(d.mass(0.5, 1.5), 0.375, 1e-15);
  const auto w = weights_from_density(d, ExitSchedule({0.0, 0.5, 2.0}));
  expect_vector_near(w, {0.25, 0.5, 0.25}, 1e-15);
}

TEST(WeightsFromDensity, AllMassBeforeFirstExitIsError) {
  EXPECT_THROW(weights_from_density(BudgetDensity::uniform(0.0, 1.0), ExitSchedule({1.0, 2.0})), ConfigError);
  EXPECT_THROW(weights_from_density(BudgetDensity::point_mass(0.5), ExitSchedule({1.0})), ConfigError);
}

TEST(BudgetDensity, Validation) {
  EXPECT_THROW(BudgetDensity::piecewise({0.0, 1.0}, {0.5}), ConfigError);
  EXPECT_THROW(BudgetDensity::piecewise({0.0, 1.0, 0.5}, {1.0, 1.0}), ConfigError);
  EXPECT_THROW(BudgetDensity::piecewise({0.0, 1.0}, {-1.0}), ConfigError);
  EXPECT_THROW(BudgetDensity::uniform(1.0, 1.0), ConfigError);
  EXPECT_THROW(BudgetDensity::exponential(0.0), ConfigError);
  EXPECT_NO_THROW(BudgetDensity::piecewise({0.0, 1.0}, {1.0 + 5e-7}));
}

TEST(ExitSchedule, Validation) {
  EXPECT_THROW(ExitSchedule({}), ConfigError);
  EXPECT_THROW(ExitSchedule({1.0, 1.0}), ConfigError);
  EXPECT_THROW(ExitSchedule({2.0, 1.0}), ConfigError);
}

TEST(BudgetDensity, JsonRoundTrip) {
  for (const auto& d : {BudgetDensity::piecewise({0.0, 1.0, 3.0}, {0.5, 0.25}), BudgetDensity::exponential(2.0, 1.0),
                        BudgetDensity::point_mass(4.0)}) {
    const auto back = BudgetDensity::from_json(d.to_json());
    for (double t : {-1.0, 0.5, 1.0, 1.5, 2.5, 4.0, 10.0}) EXPECT_EQ(back.cdf(t), d.cdf(t));
  }
  const auto u = BudgetDensity::from_json(nlohmann::json::parse(R"({"type":"uniform","low":1,"high":3})"));
  EXPECT_DOUBLE_EQ(u.cdf(2.0), 0.5);
  EXPECT_THROW(BudgetDensity::from_json(nlohmann::json::parse(R"({"type":"gamma"})")), ConfigError);
  EXPECT_THROW(BudgetDensity::from_json(nlohmann::json::parse(R"({"type":"uniform"})")), ConfigError);
}

TEST(BudgetSpec, NamedSchemeResolves) {
  const auto spec = BudgetSpec::from_json(nlohmann::json::parse(R"({"scheme":"poly","gamma":3})"));
  const auto s = spec.resolve(3);
  EXPECT_EQ(s.kind, SchemeKind::poly);
  EXPECT_EQ(s.gamma, 3.0);
  EXPECT_EQ(BudgetSpec::from_json(spec.to_json()).gamma, 3.0);
}

TEST(BudgetSpec, DensityWithCostExits) {
  const auto spec = BudgetSpec::from_json(nlohmann::json::parse(
      R"({"scheme":"density","density":{"type":"uniform","low":0,"high":400},"exits":"t_a"})"));
  const std::vector<double> t_a{100, 200, 300, 400}, t_b{100, 150, 250, 350};
  const auto w = scheme_weights(spec.resolve(4, &t_a, &t_b));
  expect_vector_near(w, {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0}, 1e-15);
  EXPECT_THROW(spec.resolve(4), ConfigError);
  EXPECT_THROW(spec.resolve(3, &t_a, &t_b), ConfigError);
  const auto again = BudgetSpec::from_json(spec.to_json());
  EXPECT_EQ(again.exits_from, "t_a");
}

TEST(BudgetSpec, DensityWithExplicitExits) {
  const auto spec = BudgetSpec::from_json(nlohmann::json::parse(
      R"({"scheme":"density","density":{"type":"point","at":2.5},"exits":[1,2,3]})"));
  expect_vector_near(scheme_weights(spec.resolve(3)), {0.0, 1.0, 0.0}, 0.0);
  EXPECT_THROW(BudgetSpec::from_json(nlohmann::json::parse(R"({"scheme":"density","exits":[1]})")), ConfigError);
  EXPECT_THROW(BudgetSpec::from_json(nlohmann::json::parse(
                   R"({"scheme":"density","density":{"type":"point","at":1},"exits":"t_c"})")),
               ConfigError);
}
