#include "amod/flow.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>

#include "amod/curves.hpp"

namespace amod {

FleetFlow::FleetFlow(int n, int e_max)
    : n_(n),
      e_max_(e_max),
      route_(static_cast<std::size_t>(n) * n * (e_max + 1), 0.0),
      charge_(static_cast<std::size_t>(n) * (e_max + 1), 0.0) {}

double FleetFlow::route_total(int i, int j) const {
  double total = 0.0;
  for (int e = 0; e <= e_max_; ++e) total += route(i, j, e);
  return total;
}

double FleetFlow::fleet_size(const NetworkSpec& spec) const {
  double vehicles = 0.0;
  for (int i = 0; i < n_; ++i) {
    for (int e = 0; e <= e_max_; ++e) {
      vehicles += charge(i, e);
      for (int j = 0; j < n_; ++j) {
        if (j != i) vehicles += route(i, j, e) * spec.tau(i, j);
      }
    }
  }
  return vehicles;
}

double FleetFlow::balance_residual(const NetworkSpec& spec) const {
  std::vector<double> net(route_.size() / n_, 0.0);
  auto at = [&](int i, int e) -> double& { return net[i * (e_max_ + 1) + e]; };
  for (int i = 0; i < n_; ++i) {
    for (int e = 0; e <= e_max_; ++e) {
      at(i, e) += charge(i, e);
      if (e < e_max_) at(i, e + 1) -= charge(i, e);
      for (int j = 0; j < n_; ++j) {
        if (j == i || route(i, j, e) == 0.0) continue;
        at(i, e) += route(i, j, e);
        at(j, e - spec.energy(i, j)) -= route(i, j, e);
      }
    }
  }
  double worst = 0.0;
  for (double v : net) worst = std::max(worst, std::abs(v));
  return worst;
}

bool FleetFlow::is_integral() const {
  auto whole = [](double v) { return v == std::floor(v); };
  return std::all_of(route_.begin(), route_.end(), whole) &&
         std::all_of(charge_.begin(), charge_.end(), whole);
}

namespace {

using CurvePtr = std::shared_ptr<const DemandCurve>;

double route_cost(const NetworkSpec& spec, int i, int j) {
  return spec.beta_t * spec.tau(i, j);
}

double charge_cost(const NetworkSpec& spec, int i) {
  return spec.beta_c + spec.elec_price[i];
}

// Steady-state fleet problem over (node, energy) states with one demand
// fraction variable per OD pair.
struct FleetModel {
  const NetworkSpec& spec;
  QpProblem qp;
  std::vector<int> route_var;   // FleetFlow route layout, -1 if absent
  std::vector<int> charge_var;  // [i * (e_max + 1) + e]
  Grid<int> u_var, slack_var;
  std::vector<int> balance_row;  // [i * (e_max + 1) + e], -1 if dropped

  explicit FleetModel(const NetworkSpec& s) : spec(s) {
    const int n = s.n, m = s.e_max + 1;
    route_var.assign(static_cast<std::size_t>(n) * n * m, -1);
    charge_var.assign(static_cast<std::size_t>(n) * m, -1);
    balance_row.assign(static_cast<std::size_t>(n) * m, -1);
    u_var = Grid<int>(n, -1);
    slack_var = Grid<int>(n, -1);
    // The balance rows sum to zero; the first one is redundant.
    for (int k = 1; k < n * m; ++k) balance_row[k] = qp.add_row(0.0);

    auto flow_arc = [&](int var, int from, int to) {
      if (balance_row[from] >= 0) qp.add_coef(balance_row[from], var, 1.0);
      if (balance_row[to] >= 0) qp.add_coef(balance_row[to], var, -1.0);
    };
    for (int i = 0; i < n; ++i) {
      for (int e = 0; e < s.e_max; ++e) {
        const int v = qp.add_var(0.0, kInf, charge_cost(s, i));
        charge_var[i * m + e] = v;
        flow_arc(v, i * m + e, i * m + e + 1);
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const int row = qp.add_row(0.0);
        u_var(i, j) = qp.add_var(0.0, 0.0, 0.0);
        qp.add_coef(row, u_var(i, j), s.theta(i, j));
        slack_var(i, j) = qp.add_var(0.0, kInf, 0.0);
        qp.add_coef(row, slack_var(i, j), 1.0);
        for (int e = s.energy(i, j); e <= s.e_max; ++e) {
          const int v = qp.add_var(0.0, kInf, route_cost(s, i, j));
          route_var[(static_cast<std::size_t>(i) * n + j) * m + e] = v;
          qp.add_coef(row, v, -1.0);
          flow_arc(v, i * m + e, j * m + e - s.energy(i, j));
        }
      }
    }
  }

  QpSolution solve(const QpOptions& opt) const {
    QpSolution sol = solve_qp(qp, opt);
    if (sol.status != QpStatus::kOptimal) {
      throw std::runtime_error("fleet subproblem solve failed: " +
                               to_string(sol.status));
    }
    return sol;
  }

  double flow_cost(const std::vector<double>& x) const {
    double c = 0.0;
    for (int v : route_var) {
      if (v >= 0) c += qp.cost()[v] * x[v];
    }
    for (int v : charge_var) {
      if (v >= 0) c += qp.cost()[v] * x[v];
    }
    return c;
  }
};

// Demand fraction whose marginal value equals `cost`.
double fraction_at_cost(const DemandCurve& curve, double cost) {
  double lo = curve.lo(), hi = curve.hi();
  if (curve.marginal(lo) <= cost) return lo;
  if (curve.marginal(hi) >= cost) return hi;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    (curve.marginal(mid) > cost ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

StaticSolution assemble(const FleetModel& model, const QpSolution& sol,
                        const Grid<CurvePtr>& curves) {
  const NetworkSpec& s = model.spec;
  const int n = s.n, m = s.e_max + 1;
  StaticSolution out;
  out.prices = Grid<double>(n, 0.0);
  out.lambda = Grid<double>(n, 0.0);
  out.served = Grid<double>(n, 0.0);
  out.flow = FleetFlow(n, s.e_max);
  out.mu.assign(n, std::vector<double>(m, 0.0));
  out.primal_objective = sol.primal_objective;
  out.dual_objective = sol.dual_objective;

  for (int i = 0; i < n; ++i) {
    for (int e = 0; e < m; ++e) {
      const int row = model.balance_row[i * m + e];
      if (row >= 0) out.mu[i][e] = sol.row_dual[row];
      const int cv = model.charge_var[i * m + e];
      if (cv >= 0) {
        out.flow.charge(i, e) = sol.x[cv];
        out.charge_cost += sol.x[cv] * charge_cost(s, i);
      }
      for (int j = 0; j < n; ++j) {
        const int rv =
            model.route_var[(static_cast<std::size_t>(i) * n + j) * m + e];
        if (rv < 0) continue;
        out.flow.route(i, j, e) = sol.x[rv];
        out.op_cost += sol.x[rv] * route_cost(s, i, j);
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double lam = sol.lower_dual[model.slack_var(i, j)];
      out.lambda(i, j) = lam;
      if (!curves(i, j)) continue;  // fixed demand: no price model
      const DemandCurve& curve = *curves(i, j);
      if (s.theta(i, j) > 0) {
        const double u = std::clamp(sol.x[model.u_var(i, j)], curve.lo(),
                                    curve.hi());
        out.served(i, j) = s.theta(i, j) * u;
        out.prices(i, j) = curve.price(u);
        out.revenue += out.served(i, j) * out.prices(i, j);
      } else {
        out.prices(i, j) = curve.price(fraction_at_cost(curve, lam));
      }
    }
  }
  out.objective = out.revenue - out.op_cost - out.charge_cost;
  return out;
}

// Maximizes sum theta * R(u) - flow cost, where R' is each curve's marginal.
// Sequential quadratic models with an exact line search along the segment.
StaticSolution solve_concave(const NetworkSpec& spec,
                             const Grid<CurvePtr>& curves,
                             const FlowOptions& opt) {
  spec.validate();
  FleetModel model(spec);
  const int n = spec.n;
  Grid<double> u(n, 0.0);
  std::vector<std::pair<int, int>> active;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || spec.theta(i, j) <= 0) continue;
      const DemandCurve& c = *curves(i, j);
      model.qp.set_bounds(model.u_var(i, j), c.lo(), c.hi());
      u(i, j) = c.hi();
      active.emplace_back(i, j);
    }
  }

  auto build = [&] {
    for (auto [i, j] : active) {
      const DemandCurve& c = *curves(i, j);
      const double th = spec.theta(i, j);
      const double r1 = c.marginal(u(i, j));
      const double r2 = c.curvature(u(i, j));
      model.qp.set_cost(model.u_var(i, j), -th * (r1 - r2 * u(i, j)));
      model.qp.set_quad(model.u_var(i, j), -th * r2);
    }
    return model.solve(opt.qp);
  };

  QpSolution sol = build();
  std::vector<double> x = sol.x;
  for (auto [i, j] : active) u(i, j) = x[model.u_var(i, j)];

  int it = 1;
  bool converged = std::all_of(active.begin(), active.end(), [&](auto od) {
    return curves(od.first, od.second)->quadratic();
  });
  for (; it < opt.max_iterations && !converged; ++it) {
    sol = build();
    const double cost_step = model.flow_cost(sol.x) - model.flow_cost(x);
    auto slope = [&](double alpha) {
      double g = -cost_step;
      for (auto [i, j] : active) {
        const int v = model.u_var(i, j);
        const double d = sol.x[v] - u(i, j);
        g += spec.theta(i, j) * curves(i, j)->marginal(u(i, j) + alpha * d) * d;
      }
      return g;
    };
    double alpha = 1.0;
    if (slope(1.0) < 0) {
      double lo = 0.0, hi = 1.0;
      for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) > 0 ? lo : hi) = mid;
      }
      alpha = 0.5 * (lo + hi);
    }
    double moved = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += alpha * (sol.x[k] - x[k]);
    for (auto [i, j] : active) {
      const double next = x[model.u_var(i, j)];
      moved = std::max(moved, std::abs(next - u(i, j)));
      u(i, j) = next;
    }
    converged = moved <= opt.step_tolerance;
  }
  // Duals consistent with the final fractions.
  sol = build();
  StaticSolution out = assemble(model, sol, curves);
  out.iterations = it;
  out.converged = converged;
  if (!converged) out.warnings.push_back("price iteration did not converge");
  if (!validate_assumptions(spec).assumption2 || !spec.params.assumption1()) {
    out.warnings.push_back(
        "network violates the modelling assumptions; closed-form guarantees "
        "do not apply");
  }
  return out;
}

}  // namespace

StaticSolution solve_monopoly_static(const NetworkSpec& spec,
                                     const FlowOptions& options) {
  Grid<CurvePtr> curves(spec.n, nullptr);
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      if (i != j) curves(i, j) = std::make_shared<MonopolyCurve>(spec.params);
    }
  }
  return solve_concave(spec, curves, options);
}

StaticSolution solve_duopoly_symmetric(const NetworkSpec& spec,
                                       const FlowOptions& options) {
  Grid<CurvePtr> curves(spec.n, nullptr);
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      if (i != j) curves(i, j) = std::make_shared<SymmetricCurve>(spec.params);
    }
  }
  return solve_concave(spec, curves, options);
}

StaticSolution solve_best_response(const NetworkSpec& spec,
                                   const Grid<double>& rival_prices,
                                   const FlowOptions& options) {
  if (rival_prices.size() != spec.n) {
    throw std::invalid_argument("rival prices do not match the network size");
  }
  Grid<CurvePtr> curves(spec.n, nullptr);
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      if (i == j) continue;
      const double rival = rival_prices(i, j);
      if (rival == kAbsent) {
        curves(i, j) = std::make_shared<MonopolyCurve>(spec.params);
      } else {
        curves(i, j) = std::make_shared<BestResponseCurve>(spec.params, rival);
      }
    }
  }
  return solve_concave(spec, curves, options);
}

StaticSolution solve_fixed_demand(const NetworkSpec& spec,
                                  const Grid<double>& fraction,
                                  const FlowOptions& options) {
  spec.validate();
  if (fraction.size() != spec.n) {
    throw std::invalid_argument("demand fractions do not match network size");
  }
  FleetModel model(spec);
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      if (i == j) continue;
      const double f = fraction(i, j);
      if (!(f >= 0 && f <= 1)) {
        throw std::invalid_argument("demand fraction outside [0, 1]");
      }
      model.qp.set_bounds(model.u_var(i, j), f, f);
    }
  }
  const QpSolution sol = model.solve(options.qp);
  StaticSolution out = assemble(model, sol, Grid<CurvePtr>(spec.n, nullptr));
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      if (i != j) out.served(i, j) = spec.theta(i, j) * fraction(i, j);
    }
  }
  return out;
}

FleetFlow round_flows(const NetworkSpec& spec, const FleetFlow& flow,
                      std::uint64_t seed) {
  const int n = spec.n, m = spec.e_max + 1;
  if (flow.n() != n || flow.e_max() != spec.e_max) {
    throw std::invalid_argument("flow does not match the network");
  }
  // Arcs of the (node, energy) state graph carrying flow.
  struct Arc {
    int from, to;
    int i, j, e;  // j < 0 marks a charging arc
    double left;
  };
  std::vector<Arc> arcs;
  for (int i = 0; i < n; ++i) {
    for (int e = 0; e < m; ++e) {
      const double c = flow.charge(i, e);
      if (!std::isfinite(c) || c < 0) {
        throw std::invalid_argument("flows must be finite and nonnegative");
      }
      if (e == spec.e_max && c != 0.0) {
        throw std::invalid_argument("full batteries cannot charge");
      }
      if (c > 0) arcs.push_back({i * m + e, i * m + e + 1, i, -1, e, c});
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double r = flow.route(i, j, e);
        if (!std::isfinite(r) || r < 0) {
          throw std::invalid_argument("flows must be finite and nonnegative");
        }
        if (e < spec.energy(i, j) && r != 0.0) {
          throw std::invalid_argument("route departs with too little energy");
        }
        if (r > 0) {
          arcs.push_back(
              {i * m + e, j * m + e - spec.energy(i, j), i, j, e, r});
        }
      }
    }
  }
  const double scale = 1.0 + std::accumulate(arcs.begin(), arcs.end(), 0.0,
                                             [](double a, const Arc& b) {
                                               return std::max(a, b.left);
                                             });
  const double eps = 1e-9 * scale;
  if (flow.balance_residual(spec) > 1e-6 * scale) {
    throw std::invalid_argument("round_flows needs a balanced flow");
  }
  std::vector<std::vector<int>> out_arcs(static_cast<std::size_t>(n) * m);
  for (std::size_t k = 0; k < arcs.size(); ++k) {
    out_arcs[arcs[k].from].push_back(static_cast<int>(k));
  }

  // Split the circulation into weighted cycles and round each weight.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  FleetFlow out(n, spec.e_max);
  auto heaviest = [&](int state) {
    int best = -1;
    for (int k : out_arcs[state]) {
      if (arcs[k].left > eps && (best < 0 || arcs[k].left > arcs[best].left)) {
        best = k;
      }
    }
    return best;
  };
  for (std::size_t first = 0; first < arcs.size(); ++first) {
    while (arcs[first].left > eps) {
      std::vector<int> path{static_cast<int>(first)};
      std::vector<int> seen(static_cast<std::size_t>(n) * m, -1);
      seen[arcs[first].from] = 0;
      int cycle_start = -1;
      while (cycle_start < 0) {
        const int at = arcs[path.back()].to;
        if (seen[at] >= 0) {
          cycle_start = seen[at];
          break;
        }
        seen[at] = static_cast<int>(path.size());
        const int next = heaviest(at);
        if (next < 0) break;  // rounding residue: no flow leaves
        path.push_back(next);
      }
      if (cycle_start < 0) {
        arcs[path.back()].left = 0.0;
        continue;
      }
      double weight = kInf;
      for (std::size_t k = cycle_start; k < path.size(); ++k) {
        weight = std::min(weight, arcs[path[k]].left);
      }
      const double base = std::floor(weight + 1e-12);
      const double units =
          base + (unit(rng) < weight - base - 1e-12 ? 1.0 : 0.0);
      for (std::size_t k = cycle_start; k < path.size(); ++k) {
        Arc& a = arcs[path[k]];
        a.left -= weight;
        if (a.j < 0) {
          out.charge(a.i, a.e) += units;
        } else {
          out.route(a.i, a.j, a.e) += units;
        }
      }
    }
  }
  return out;
}

}  // namespace amod
