#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "amod/simulator.hpp"

namespace amod {

enum class PriceMode { kDynamic, kStatic };
enum class Integrality { kRelaxRound, kExact };

struct MpcConfig {
  int horizon = 10;
  double penalty = 4.0;  // per waiting rider per period
  // Optional [t](i, j) weights for t = 0 .. horizon - 1; overrides penalty.
  std::vector<Grid<double>> penalty_by_period;
  PriceMode price_mode = PriceMode::kDynamic;
  Grid<double> static_prices;  // used in kStatic mode
  Integrality integrality = Integrality::kRelaxRound;
  // Vehicle costs in period t are scaled by 1 + early_bias * t. Breaks the
  // tie between charging now and later in favour of now, which keeps the
  // battery reserve the truncated horizon otherwise spends. 0 disables.
  double early_bias = 1e-3;
  QpOptions qp{1e-8, 200};
  int max_sqp_iterations = 30;
  int max_nodes = 20000;  // branch and bound

  void validate(const NetworkSpec& spec) const;
  double weight(int t, int i, int j) const;
};

// Plan over relative periods t = 0 .. horizon - 1; only t = 0 is executed.
struct MpcPlan {
  int start = 0;  // absolute clock of t = 0
  int horizon = 0;
  std::vector<Grid<double>> prices;  // own price per period
  std::vector<Grid<double>> demand;  // purchase fraction per period
  std::vector<Grid<double>> queues;  // riders waiting after dispatch
  std::vector<FleetFlow> moves;      // dispatch and charging per period
  std::vector<std::vector<std::vector<double>>> idle;  // [t][node][energy]
  double objective = 0.0;  // revenue - costs - penalty over the horizon
  int sqp_iterations = 0;
  int nodes = 0;  // branch-and-bound nodes, 0 for relax-and-round
  bool integral = false;
};

MpcPlan plan_monopoly(const Observation& obs, const NetworkSpec& spec,
                      const MpcConfig& config);

// Firms alternate: firm 0 reprices at even clocks, firm 1 at odd ones, and a
// price holds for the following period. The current period uses the
// observed rival prices; later periods assume the rival posts
// `equilibrium_prices`. Delegates to plan_monopoly when no rival serves any
// pair.
MpcPlan plan_duopoly(const Observation& obs, const NetworkSpec& spec,
                     const MpcConfig& config,
                     const Grid<double>& equilibrium_prices);

bool reprices_now(const Observation& obs);

// The t = 0 slice as integer actions. Relaxed counts are rounded per
// (node, energy) bucket by largest remainder, which keeps every bucket's
// total equal to its idle inventory.
Actions first_period_actions(const MpcPlan& plan, const Observation& obs,
                             const NetworkSpec& spec);

// With equilibrium prices the controller plans as a duopolist.
std::unique_ptr<Controller> mpc_controller(
    MpcConfig config, std::optional<Grid<double>> equilibrium_prices = {});

// Human-readable per-period summary.
std::string plan_summary(const MpcPlan& plan);

}  // namespace amod
