#pragma once

#include <string>
#include <vector>

#include "amod/flow.hpp"

namespace amod {

struct BrStep {
  int firm = 0;  // 0 or 1
  Grid<double> prices;
  double objective = 0.0;
  double change = 0.0;  // max-norm move of this firm's prices
};

struct BrTrace {
  std::vector<BrStep> steps;
  int rounds = 0;  // one round = each firm has moved once
  bool converged = false;
  double final_gap = 0.0;       // max over OD of |price_1 - price_2|
  double max_foc_residual = 0.0;  // both firms, final prices and duals
  StaticSolution firm1, firm2;
};

struct BrOptions {
  int max_rounds = 50;
  double tolerance = 0.0;  // currency; 0 means 1e-5 * ell_max
  double foc_tolerance = 1e-6;  // both firms against the final prices
  bool simultaneous = false;  // default: firm 1 moves, then firm 2 replies
  FlowOptions flow;
};

BrTrace best_response_dynamics(const NetworkSpec& spec,
                               const Grid<double>& init_prices,
                               const BrOptions& options = {});

struct FocResidual {
  double value = 0.0;  // dD/d(own) * (own - cost) + D
  bool at_kink = false;
};

FocResidual foc_residual(const MarketParams& params, double own, double other,
                         double cost);

// Probes the first-order conditions of two firms whose prices differ by
// delta. For cost pairs with |c1 - c2| < delta no common root should exist;
// at every pair of prices that satisfies both conditions the dual gap should
// obey |delta| <= |c1 - c2| and the per-branch upper bounds.
struct AsymmetryReport {
  double min_joint_residual = 0.0;  // over pairs with |c1 - c2| < delta
  int corridor_roots = 0;           // joint roots found in that set
  int points_checked = 0;
  double min_gap_ratio = 0.0;  // |c1 - c2| / delta over joint roots
  double max_gap_ratio = 0.0;
  int lower_bound_violations = 0;
  int upper_bound_violations = 0;
};

AsymmetryReport asymmetry_probe(const MarketParams& params,
                                const std::vector<double>& cost_grid,
                                const std::vector<double>& delta_grid,
                                double resolution = 1e-3);

// One row per (step, OD pair): step,firm,origin,destination,price,objective.
std::string trace_csv(const BrTrace& trace);

}  // namespace amod
