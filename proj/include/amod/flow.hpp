#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amod/network.hpp"
#include "amod/qp.hpp"

namespace amod {

// Steady-state vehicle flows, in vehicles departing per period.
class FleetFlow {
 public:
  FleetFlow() = default;
  FleetFlow(int n, int e_max);

  int n() const { return n_; }
  int e_max() const { return e_max_; }

  // Vehicles leaving i for j with energy e on departure.
  double& route(int i, int j, int e) { return route_[route_index(i, j, e)]; }
  double route(int i, int j, int e) const {
    return route_[route_index(i, j, e)];
  }
  // Vehicles charging at i from energy e to e + 1.
  double& charge(int i, int e) { return charge_[charge_index(i, e)]; }
  double charge(int i, int e) const { return charge_[charge_index(i, e)]; }

  double route_total(int i, int j) const;
  // Vehicles needed to sustain the flow: trips in progress plus chargers.
  double fleet_size(const NetworkSpec& spec) const;
  // Largest out-minus-in imbalance over (node, energy).
  double balance_residual(const NetworkSpec& spec) const;
  bool is_integral() const;

  bool operator==(const FleetFlow&) const = default;

 private:
  std::size_t route_index(int i, int j, int e) const {
    return (static_cast<std::size_t>(i) * n_ + j) * (e_max_ + 1) + e;
  }
  std::size_t charge_index(int i, int e) const {
    return static_cast<std::size_t>(i) * (e_max_ + 1) + e;
  }
  int n_ = 0;
  int e_max_ = 0;
  std::vector<double> route_;
  std::vector<double> charge_;
};

struct StaticSolution {
  Grid<double> prices;
  FleetFlow flow;
  Grid<double> lambda;  // marginal cost of one more ride on (i, j)
  std::vector<std::vector<double>> mu;  // balance duals, [node][energy]
  Grid<double> served;  // riders per period
  double objective = 0.0;  // revenue - op_cost - charge_cost
  double revenue = 0.0;
  double op_cost = 0.0;
  double charge_cost = 0.0;
  // Of the last convex subproblem.
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  int iterations = 0;
  bool converged = true;
  std::vector<std::string> warnings;
};

struct FlowOptions {
  QpOptions qp{1e-9, 200};
  int max_iterations = 100;
  double step_tolerance = 1e-12;  // on the purchase fraction
};

StaticSolution solve_monopoly_static(const NetworkSpec& spec,
                                     const FlowOptions& options = {});

// One firm's half of the symmetric duopoly equilibrium.
StaticSolution solve_duopoly_symmetric(const NetworkSpec& spec,
                                       const FlowOptions& options = {});

// Entries equal to kAbsent mean the rival does not serve that pair.
StaticSolution solve_best_response(const NetworkSpec& spec,
                                   const Grid<double>& rival_prices,
                                   const FlowOptions& options = {});

// Minimum-cost flows serving fixed demand fractions (served = theta * u).
StaticSolution solve_fixed_demand(const NetworkSpec& spec,
                                  const Grid<double>& fraction,
                                  const FlowOptions& options = {});

// Splits the balanced flow into cycles of the (node, energy) state graph and
// rounds each cycle's weight up with probability equal to its fractional
// part. Every entry is unbiased and the result balances exactly. Throws
// std::invalid_argument for an unbalanced or malformed flow.
FleetFlow round_flows(const NetworkSpec& spec, const FleetFlow& flow,
                      std::uint64_t seed);

}  // namespace amod
