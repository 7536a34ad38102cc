#include "amod/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace amod {

namespace {

int max_travel(const NetworkSpec& spec) {
  int t = 1;
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      if (i != j) t = std::max(t, spec.tau(i, j));
    }
  }
  return t;
}

double demand_for(const MarketParams& params, const Grid<double>& own,
                  const Grid<double>* rival, int i, int j) {
  if (!rival) return demand_mono(params, own(i, j));
  return demand_duo(params, own(i, j), (*rival)(i, j));
}

void check_actions(const NetworkSpec& spec, const Observation& obs,
                   const Actions& act) {
  const int n = spec.n;
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("firm " + std::to_string(obs.firm + 1) +
                                " action rejected at period " +
                                std::to_string(obs.clock) + ": " + what);
  };
  if (act.prices.size() != n) fail("prices have the wrong size");
  if (act.moves.n() != n || act.moves.e_max() != spec.e_max) {
    fail("moves have the wrong shape");
  }
  if (!act.moves.is_integral()) fail("moves must be integers");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && !(act.prices(i, j) >= 0)) fail("prices must be >= 0");
    }
    for (int e = 0; e <= spec.e_max; ++e) {
      double used = act.moves.charge(i, e);
      if (used < 0) fail("negative charge count");
      if (e == spec.e_max && used > 0) fail("full batteries cannot charge");
      for (int j = 0; j < n; ++j) {
        const double d = act.moves.route(i, j, e);
        if (d == 0.0) continue;
        if (d < 0) fail("negative dispatch count");
        if (i == j) fail("dispatch from a node to itself");
        if (e < spec.energy(i, j)) fail("not enough energy for the trip");
        used += d;
      }
      if (used > obs.idle[i][e]) {
        fail("node " + std::to_string(i) + " energy " + std::to_string(e) +
             " has " + std::to_string(obs.idle[i][e]) +
             " idle vehicles, actions use " + std::to_string(used));
      }
    }
  }
}

}  // namespace

Observation observe(const SimState& state, const NetworkSpec& spec, int firm) {
  const FirmState& fs = state.firms.at(firm);
  const int n = spec.n, m = spec.e_max + 1;
  Observation obs;
  obs.clock = state.clock;
  obs.firm = firm;
  obs.firms = static_cast<int>(state.firms.size());
  obs.idle.assign(n, std::vector<int>(m, 0));
  const int horizon = max_travel(spec);
  obs.arriving.assign(horizon + 1, std::vector<std::vector<int>>(
                                       n, std::vector<int>(m, 0)));
  for (const Vehicle& v : fs.vehicles) {
    const int k = v.busy_until - state.clock;
    if (k <= 0) {
      ++obs.idle[v.node][v.energy];
    } else {
      ++obs.arriving[k][v.node][v.energy];
    }
  }
  obs.outstanding = Grid<int>(n, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      obs.outstanding(i, j) = static_cast<int>(fs.queues(i, j).size());
    }
  }
  obs.own_prices = fs.prices;
  obs.rival_prices = state.firms.size() > 1
                         ? state.firms[1 - firm].prices
                         : Grid<double>(n, kAbsent);
  return obs;
}

std::vector<PeriodMetrics> step(SimState& state, const NetworkSpec& spec,
                                const std::vector<Actions>& actions,
                                const SimOptions& options) {
  const int firms = static_cast<int>(state.firms.size());
  if (static_cast<int>(actions.size()) != firms) {
    throw std::invalid_argument("need one action set per firm");
  }
  for (int f = 0; f < firms; ++f) {
    check_actions(spec, observe(state, spec, f), actions[f]);
  }

  const int n = spec.n;
  const int t = state.clock;
  std::vector<PeriodMetrics> out(firms);
  for (int f = 0; f < firms; ++f) {
    FirmState& fs = state.firms[f];
    const Actions& act = actions[f];
    PeriodMetrics& pm = out[f];
    pm.period = t;
    pm.firm = f;

    // Dispatch and charging, vehicles taken in index order per bucket.
    std::vector<std::vector<std::vector<int>>> bucket(
        n, std::vector<std::vector<int>>(spec.e_max + 1));
    for (int k = 0; k < static_cast<int>(fs.vehicles.size()); ++k) {
      const Vehicle& v = fs.vehicles[k];
      if (v.busy_until <= t) bucket[v.node][v.energy].push_back(k);
    }
    for (int i = 0; i < n; ++i) {
      for (int e = 0; e <= spec.e_max; ++e) {
        std::size_t next = 0;
        for (int j = 0; j < n; ++j) {
          const int count = static_cast<int>(act.moves.route(i, j, e));
          for (int c = 0; c < count; ++c) {
            Vehicle& v = fs.vehicles[bucket[i][e][next++]];
            v.node = j;
            v.energy -= spec.energy(i, j);
            v.busy_until = t + spec.tau(i, j);
            pm.op_cost += spec.beta_t * spec.tau(i, j);
          }
        }
        const int charging = static_cast<int>(act.moves.charge(i, e));
        for (int c = 0; c < charging; ++c) {
          Vehicle& v = fs.vehicles[bucket[i][e][next++]];
          v.energy += 1;
          v.busy_until = t + 1;
          pm.charge_cost += spec.beta_c + spec.elec_price[i];
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const long sent = std::lround(act.moves.route_total(i, j));
        auto& q = fs.queues(i, j);
        const long carried = std::min<long>(sent, static_cast<long>(q.size()));
        for (long c = 0; c < carried; ++c) {
          if (options.revenue_at_service) pm.revenue += q.front().price;
          q.pop_front();
        }
        pm.served += carried;
        pm.rebalancing += sent - carried;
        pm.outstanding += static_cast<double>(q.size());
      }
    }
  }

  // Purchases, split per firm through the demand model.
  for (int f = 0; f < firms; ++f) {
    FirmState& fs = state.firms[f];
    PeriodMetrics& pm = out[f];
    const Grid<double>* rival = firms > 1 ? &actions[1 - f].prices : nullptr;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j || spec.theta(i, j) <= 0) continue;
        const double rate =
            spec.theta(i, j) *
            demand_for(spec.params, actions[f].prices, rival, i, j);
        pm.induced += rate;
        if (rate <= 0) continue;
        std::poisson_distribution<long> draw(rate);
        const long a = draw(state.rng);
        pm.arrivals += a;
        const double paid = actions[f].prices(i, j);
        for (long c = 0; c < a; ++c) fs.queues(i, j).push_back({t, paid});
        if (!options.revenue_at_service) {
          pm.revenue += static_cast<double>(a) * actions[f].prices(i, j);
        }
      }
    }
  }
  for (int f = 0; f < firms; ++f) {
    state.firms[f].prices = actions[f].prices;
    PeriodMetrics& pm = out[f];
    pm.profit = pm.revenue - (pm.op_cost + pm.charge_cost);
    pm.queue_penalty = options.queue_penalty * pm.outstanding;
    pm.normalized_queue = pm.induced > 0 ? pm.outstanding / pm.induced : 0.0;
    pm.avg_wait_minutes = pm.normalized_queue * spec.delta_t_minutes;
  }
  ++state.clock;
  return out;
}

InitialFleet initial_fleet(const NetworkSpec& spec, const FleetFlow& flow) {
  InitialFleet fleet;
  fleet.vehicles = static_cast<int>(std::ceil(flow.fleet_size(spec) - 1e-9));
  const int n = spec.n;
  std::vector<double> departures(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int e = 0; e <= spec.e_max; ++e) {
      departures[i] += flow.charge(i, e);
      for (int j = 0; j < n; ++j) departures[i] += flow.route(i, j, e);
    }
  }
  double total = std::accumulate(departures.begin(), departures.end(), 0.0);
  if (total <= 0) {
    departures.assign(n, 1.0);
    total = n;
  }
  // Largest remainder apportionment; ties go to the lower node index.
  fleet.per_node.assign(n, 0);
  std::vector<std::pair<double, int>> rem;
  int placed = 0;
  for (int i = 0; i < n; ++i) {
    const double share = fleet.vehicles * departures[i] / total;
    fleet.per_node[i] = static_cast<int>(std::floor(share));
    placed += fleet.per_node[i];
    rem.emplace_back(-(share - fleet.per_node[i]), i);
  }
  std::sort(rem.begin(), rem.end());
  for (int k = 0; placed < fleet.vehicles; ++k, ++placed) {
    ++fleet.per_node[rem[k % n].second];
  }
  return fleet;
}

SimState initial_state(const NetworkSpec& spec, const FleetFlow& flow,
                       const Grid<double>& prices, int firms,
                       std::uint64_t seed) {
  spec.validate();
  if (firms != 1 && firms != 2) throw std::invalid_argument("firms must be 1 or 2");
  const InitialFleet fleet = initial_fleet(spec, flow);
  SimState state;
  state.rng.seed(seed);
  FirmState fs;
  for (int i = 0; i < spec.n; ++i) {
    for (int k = 0; k < fleet.per_node[i]; ++k) {
      fs.vehicles.push_back({i, spec.e_max, 0});
    }
  }
  fs.queues = Grid<std::deque<Rider>>(spec.n, {});
  fs.prices = prices;
  state.firms.assign(firms, fs);
  return state;
}

RunResult run(const NetworkSpec& spec, SimState state,
              const std::vector<Controller*>& controllers, int horizon,
              const SimOptions& options) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const int firms = static_cast<int>(state.firms.size());
  if (static_cast<int>(controllers.size()) != firms) {
    throw std::invalid_argument("need one controller per firm");
  }
  RunResult result;
  for (int k = 0; k < horizon; ++k) {
    std::vector<Actions> actions;
    for (int f = 0; f < firms; ++f) {
      try {
        actions.push_back(controllers[f]->act(observe(state, spec, f), spec));
      } catch (const std::exception& e) {
        throw std::runtime_error("controller of firm " + std::to_string(f + 1) +
                                 " failed at period " +
                                 std::to_string(state.clock) + ": " + e.what());
      }
    }
    for (const PeriodMetrics& pm : step(state, spec, actions, options)) {
      result.trajectory.push_back(pm);
    }
  }
  for (int f = 0; f < firms; ++f) {
    RunSummary s;
    s.firm = f;
    s.periods = horizon;
    s.fleet = static_cast<int>(state.firms[f].vehicles.size());
    std::vector<double> pmp, wait;
    for (const PeriodMetrics& pm : result.trajectory) {
      if (pm.firm != f) continue;
      pmp.push_back(pm.profit - pm.queue_penalty);
      wait.push_back(pm.avg_wait_minutes);
      s.mean_profit += pm.profit / horizon;
      s.mean_normalized_queue += pm.normalized_queue / horizon;
      s.final_outstanding = pm.outstanding;
    }
    auto mean_var = [](const std::vector<double>& v, double& mean, double& var) {
      mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
      var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      var = v.size() > 1 ? var / (v.size() - 1) : 0.0;
    };
    mean_var(pmp, s.mean_profit_minus_penalty, s.var_profit_minus_penalty);
    mean_var(wait, s.mean_wait_minutes, s.var_wait_minutes);
    result.summary.push_back(s);
  }
  return result;
}

namespace {

class StaticRandomized final : public Controller {
 public:
  StaticRandomized(const StaticSolution& sol, std::uint64_t seed)
      : prices_(sol.prices), flow_(sol.flow), rng_(seed) {}

  Actions act(const Observation& obs, const NetworkSpec& spec) override {
    const int n = spec.n;
    Actions a{prices_, FleetFlow(n, spec.e_max)};
    for (int i = 0; i < n; ++i) {
      for (int e = 0; e <= spec.e_max; ++e) {
        const int count = obs.idle[i][e];
        if (count == 0) continue;
        std::vector<double> w = weights(spec, i, e, false);
        if (std::all_of(w.begin(), w.end(), [](double x) { return x <= 0; })) {
          w = weights(spec, i, e, true);
        }
        if (std::all_of(w.begin(), w.end(), [](double x) { return x <= 0; })) {
          continue;
        }
        std::discrete_distribution<int> pick(w.begin(), w.end());
        for (int c = 0; c < count; ++c) {
          const int k = pick(rng_);
          if (k == n) {
            a.moves.charge(i, e) += 1;
          } else {
            a.moves.route(i, k, e) += 1;
          }
        }
      }
    }
    return a;
  }

 private:
  // Outflow weights of (i, e): routes to each node, then charging. The
  // fallback uses node i's flows over all energies, restricted to what this
  // energy level can do.
  std::vector<double> weights(const NetworkSpec& spec, int i, int e,
                              bool whole_node) const {
    const int n = spec.n;
    std::vector<double> w(n + 1, 0.0);
    for (int j = 0; j < n; ++j) {
      if (j == i || e < spec.energy(i, j)) continue;
      if (!whole_node) {
        w[j] = flow_.route(i, j, e);
      } else {
        for (int g = 0; g <= spec.e_max; ++g) w[j] += flow_.route(i, j, g);
      }
    }
    if (e < spec.e_max) {
      if (!whole_node) {
        w[n] = flow_.charge(i, e);
      } else {
        for (int g = 0; g < spec.e_max; ++g) w[n] += flow_.charge(i, g);
      }
    }
    for (double& x : w) x = x > 1e-9 ? x : 0.0;
    return w;
  }

  Grid<double> prices_;
  FleetFlow flow_;
  std::mt19937_64 rng_;
};

}  // namespace

std::unique_ptr<Controller> static_randomized_controller(
    const StaticSolution& solution, std::uint64_t seed) {
  return std::make_unique<StaticRandomized>(solution, seed);
}

std::string trajectory_csv(const RunResult& result) {
  std::ostringstream out;
  out.precision(17);
  out << "period,firm,revenue,op_cost,charge_cost,profit,queue_penalty,"
         "outstanding,induced,normalized_queue,avg_wait_minutes,served,"
         "arrivals,rebalancing\n";
  for (const PeriodMetrics& m : result.trajectory) {
    out << m.period << ',' << m.firm + 1 << ',' << m.revenue << ','
        << m.op_cost << ',' << m.charge_cost << ',' << m.profit << ','
        << m.queue_penalty << ',' << m.outstanding << ',' << m.induced << ','
        << m.normalized_queue << ',' << m.avg_wait_minutes << ',' << m.served
        << ',' << m.arrivals << ',' << m.rebalancing << '\n';
  }
  return out.str();
}

}  // namespace amod
