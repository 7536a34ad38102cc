#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "amod/analytics.hpp"
#include "amod/equilibrium.hpp"
#include "oracles.hpp"

using amod::Grid;
using amod::MarketParams;
using amod::NetworkKind;

namespace {

const MarketParams kUnit{0.6, 1.0};

amod::NetworkSpec pair_spec() {
  return amod::synth_network(NetworkKind::kSymmetricPair, 2, 1);
}

double max_move(const Grid<double>& a, const Grid<double>& b) {
  double m = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    for (int j = 0; j < a.size(); ++j) {
      if (i != j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
    }
  }
  return m;
}

TEST(Foc, NamedValues) {
  const double d0 = amod::duo_price(kUnit, 0.0);
  EXPECT_NEAR(amod::foc_residual(kUnit, 0.31623, 0.31623, 0.0).value, 0.0,
              1e-5);
  EXPECT_NEAR(amod::foc_residual(kUnit, d0, d0, 0.0).value, 0.0, 1e-9);
  const double d1 = amod::duo_price(kUnit, 0.1);
  EXPECT_NEAR(amod::foc_residual(kUnit, d1, d1, 0.1).value, 0.0, 1e-9);
  EXPECT_LT(amod::foc_residual(kUnit, d0 + 0.05, d0, 0.0).value, 0.0);
}

TEST(Foc, MatchesFiniteDifferenceDefinition) {
  const double h = 1e-6;
  for (auto [own, other, cost] : {std::tuple{0.45, 0.5, 0.1},
                                  std::tuple{0.2, 0.3, 0.0},
                                  std::tuple{0.62, 0.25, 0.12}}) {
    const double slope = (amod::demand_duo(kUnit, own + h, other) -
                          amod::demand_duo(kUnit, own - h, other)) /
                         (2 * h);
    EXPECT_NEAR(amod::foc_residual(kUnit, own, other, cost).value,
                slope * (own - cost) + amod::demand_duo(kUnit, own, other),
                1e-6);
  }
}

TEST(Dynamics, PairFromMonopoly) {
  const auto spec = pair_spec();
  const auto mono = amod::solve_monopoly_static(spec);
  const auto tr = amod::best_response_dynamics(spec, mono.prices);
  ASSERT_TRUE(tr.converged);
  EXPECT_LE(tr.rounds, 20);
  const double target = amod::duo_price(spec.params, 0.8);
  for (const auto* firm : {&tr.firm1, &tr.firm2}) {
    EXPECT_NEAR(firm->prices(0, 1), target, 1e-4 * 50);
    EXPECT_NEAR(firm->prices(1, 0), target, 1e-4 * 50);
  }
  EXPECT_LE(tr.final_gap, 1e-5 * 50);
  EXPECT_LE(tr.max_foc_residual, 1e-6);
}

TEST(Dynamics, FixedPointAndZeroStart) {
  const auto spec = pair_spec();
  const auto duo = amod::solve_duopoly_symmetric(spec);
  const auto still = amod::best_response_dynamics(spec, duo.prices);
  ASSERT_TRUE(still.converged);
  EXPECT_EQ(still.rounds, 1);
  for (const auto& st : still.steps) EXPECT_LE(st.change, 1e-5 * 50);

  const auto zero = amod::best_response_dynamics(spec, Grid<double>(2, 0.0));
  ASSERT_TRUE(zero.converged);
  EXPECT_LE(max_move(zero.firm1.prices, duo.prices), 1e-4 * 50);
  EXPECT_LE(max_move(zero.firm2.prices, duo.prices), 1e-4 * 50);
}

TEST(Dynamics, OrderDoesNotMoveTheLimit) {
  const auto spec = amod::synth_network(NetworkKind::kRing, 3, 4);
  const auto mono = amod::solve_monopoly_static(spec);
  amod::BrOptions simultaneous;
  simultaneous.simultaneous = true;
  const auto a = amod::best_response_dynamics(spec, mono.prices);
  const auto b = amod::best_response_dynamics(spec, mono.prices, simultaneous);
  ASSERT_TRUE(a.converged);
  ASSERT_TRUE(b.converged);
  EXPECT_LE(max_move(a.firm1.prices, b.firm1.prices), 1e-4 * 50);
}

TEST(Dynamics, GeneratorSandwich) {
  for (const auto& inst : oracle::generator_suite()) {
    if (inst.spec.n > 3) continue;
    SCOPED_TRACE(inst.family);
    const auto mono = amod::solve_monopoly_static(inst.spec);
    const auto tr = amod::best_response_dynamics(inst.spec, mono.prices);
    ASSERT_TRUE(tr.converged);
    EXPECT_LE(tr.rounds, 50);
    const auto bounds = amod::bound_suite(inst.spec.params);
    for (int i = 0; i < inst.spec.n; ++i) {
      for (int j = 0; j < inst.spec.n; ++j) {
        if (i == j) continue;
        EXPECT_TRUE(bounds.price_duo.contains(tr.firm1.prices(i, j), 1e-6));
        EXPECT_LE(tr.firm1.prices(i, j), mono.prices(i, j) + 1e-6);
      }
    }
  }
}

TEST(Probe, NoCorridorRoots) {
  const MarketParams p{0.6, 50.0};
  const auto rep = amod::asymmetry_probe(p, {0.0}, {5.0});
  EXPECT_EQ(rep.corridor_roots, 0);
  EXPECT_GT(rep.min_joint_residual, 0.01);
}

TEST(Probe, GapAtLeastPriceDifference) {
  const MarketParams p{0.6, 50.0};
  std::vector<double> costs;
  for (int k = 0; k <= 15; ++k) costs.push_back(0.5 * k);
  const auto rep = amod::asymmetry_probe(p, costs, {0.05, 0.5, 1.0});
  EXPECT_GT(rep.points_checked, 0);
  EXPECT_EQ(rep.lower_bound_violations, 0);
  EXPECT_GE(rep.min_gap_ratio, 1.0);
  EXPECT_EQ(rep.corridor_roots, 0);
}

TEST(Probe, RejectsBadInput) {
  const MarketParams p{0.6, 50.0};
  EXPECT_THROW(amod::asymmetry_probe(p, {0.0}, {0.0}), std::invalid_argument);
  EXPECT_THROW(amod::asymmetry_probe(MarketParams{1.0, 50.0}, {0.0}, {1.0}),
               std::invalid_argument);
}

TEST(Trace, CsvShape) {
  const auto spec = pair_spec();
  const auto tr =
      amod::best_response_dynamics(spec, amod::solve_monopoly_static(spec).prices);
  const std::string csv = amod::trace_csv(tr);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,firm,origin,destination,price,objective");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, static_cast<int>(tr.steps.size()) * 2);
}

}  // namespace
