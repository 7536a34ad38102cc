#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "amod/flow.hpp"

namespace amod {

struct Vehicle {
  int node = 0;        // location, or destination while en route
  int energy = 0;      // already net of the current trip
  int busy_until = 0;  // first period in which the vehicle is available

  bool operator==(const Vehicle&) const = default;
};

struct Rider {
  int arrival = 0;     // period of purchase
  double price = 0.0;  // price paid

  bool operator==(const Rider&) const = default;
};

struct FirmState {
  std::vector<Vehicle> vehicles;
  Grid<std::deque<Rider>> queues;  // first come, first served
  Grid<double> prices;           // posted in the last period

  bool operator==(const FirmState&) const = default;
};

struct SimState {
  int clock = 0;
  std::vector<FirmState> firms;  // one firm, or two for a duopoly
  std::mt19937_64 rng;

  bool operator==(const SimState&) const = default;
};

// Integer decisions of one firm for the current period. Dispatch counts
// cover every departing vehicle; the environment decides which of them carry
// riders. Vehicles not dispatched or charging stay idle.
struct Actions {
  Grid<double> prices;
  FleetFlow moves;  // integral route and charge counts
};

struct PeriodMetrics {
  int period = 0;
  int firm = 0;
  double revenue = 0.0;
  double op_cost = 0.0;
  double charge_cost = 0.0;
  double profit = 0.0;         // revenue - op_cost - charge_cost
  double queue_penalty = 0.0;  // penalty * outstanding
  double outstanding = 0.0;    // riders still waiting after dispatch
  double induced = 0.0;        // expected purchases this period
  double normalized_queue = 0.0;
  double avg_wait_minutes = 0.0;
  long served = 0;
  long arrivals = 0;
  long rebalancing = 0;
};

struct SimOptions {
  double queue_penalty = 4.0;  // currency per waiting rider per period
  bool revenue_at_service = false;
};

// What a controller may see of its own firm.
struct Observation {
  int clock = 0;
  int firm = 0;
  int firms = 1;
  std::vector<std::vector<int>> idle;  // [node][energy], available now
  // arriving[k][node][energy]: vehicles that become available at clock + k,
  // for k = 1 .. max travel time.
  std::vector<std::vector<std::vector<int>>> arriving;
  Grid<int> outstanding;
  Grid<double> own_prices;    // posted last period
  Grid<double> rival_prices;  // kAbsent without a rival
};

Observation observe(const SimState& state, const NetworkSpec& spec, int firm);

class Controller {
 public:
  virtual ~Controller() = default;
  virtual Actions act(const Observation& obs, const NetworkSpec& spec) = 0;
};

// Throws std::invalid_argument (state untouched) if any action is
// infeasible against the current inventory.
std::vector<PeriodMetrics> step(SimState& state, const NetworkSpec& spec,
                                const std::vector<Actions>& actions,
                                const SimOptions& options = {});

struct InitialFleet {
  int vehicles = 0;
  std::vector<int> per_node;
};

// Fleet sized to the static flow (rounded up), spread over nodes in
// proportion to static departures, batteries full. Prices start at the
// static prices.
InitialFleet initial_fleet(const NetworkSpec& spec, const FleetFlow& flow);
SimState initial_state(const NetworkSpec& spec, const FleetFlow& flow,
                       const Grid<double>& prices, int firms,
                       std::uint64_t seed);

struct RunSummary {
  int firm = 0;
  int periods = 0;
  double mean_profit_minus_penalty = 0.0;
  double var_profit_minus_penalty = 0.0;
  double mean_profit = 0.0;
  double mean_wait_minutes = 0.0;
  double var_wait_minutes = 0.0;
  double mean_normalized_queue = 0.0;
  double final_outstanding = 0.0;
  int fleet = 0;
};

struct RunResult {
  std::vector<PeriodMetrics> trajectory;  // period-major, firm-minor
  std::vector<RunSummary> summary;        // one per firm
};

// One controller per firm. A controller exception is rethrown as
// std::runtime_error naming the period.
RunResult run(const NetworkSpec& spec, SimState state,
              const std::vector<Controller*>& controllers, int horizon,
              const SimOptions& options = {});

// Posts the static prices and sends each available vehicle on a random
// outflow of its (node, energy) state, drawn in proportion to the static
// flows.
std::unique_ptr<Controller> static_randomized_controller(
    const StaticSolution& solution, std::uint64_t seed);

// One row per period per firm.
std::string trajectory_csv(const RunResult& result);

}  // namespace amod
