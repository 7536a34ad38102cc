#include "amod/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "amod/curves.hpp"

namespace amod {

void MpcConfig::validate(const NetworkSpec& spec) const {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(penalty >= 0.0)) throw std::invalid_argument("penalty must be >= 0");
  if (!penalty_by_period.empty()) {
    if (static_cast<int>(penalty_by_period.size()) != horizon) {
      throw std::invalid_argument("penalty_by_period needs one grid per period");
    }
    for (const auto& g : penalty_by_period) {
      if (g.size() != spec.n) {
        throw std::invalid_argument("penalty grid has the wrong size");
      }
      for (double w : g.values()) {
        if (!(w >= 0.0)) throw std::invalid_argument("penalties must be >= 0");
      }
    }
  }
  if (price_mode == PriceMode::kStatic) {
    if (static_prices.size() != spec.n) {
      throw std::invalid_argument("static mode needs an n x n price grid");
    }
    for (int i = 0; i < spec.n; ++i) {
      for (int j = 0; j < spec.n; ++j) {
        if (i != j && !(static_prices(i, j) >= 0.0)) {
          throw std::invalid_argument("static prices must be >= 0");
        }
      }
    }
  }
  if (!(early_bias >= 0.0)) throw std::invalid_argument("early_bias must be >= 0");
  if (max_sqp_iterations < 1 || max_nodes < 1) {
    throw std::invalid_argument("iteration limits must be >= 1");
  }
}

double MpcConfig::weight(int t, int i, int j) const {
  return penalty_by_period.empty() ? penalty : penalty_by_period[t](i, j);
}

namespace {

using CurvePtr = std::shared_ptr<const DemandCurve>;

CurvePtr curve_against(const MarketParams& params, double rival) {
  if (rival == kAbsent) return std::make_shared<MonopolyCurve>(params);
  return std::make_shared<BestResponseCurve>(params, rival);
}

// One purchase-fraction decision. It may cover several periods that share
// the own price and the rival price (one revenue curve each), and it may
// drive a follower period whose rival price differs.
struct Decision {
  int i = 0, j = 0;
  std::vector<CurvePtr> curves;
  double lo = 0.0, hi = 1.0;  // domain of u
  double start = 0.0;         // initial model point
  // Follower: u = D(lead->price(v), follower_rival).
  bool has_follower = false;
  CurvePtr lead;
  double follower_rival = kAbsent;
};

struct Slot {
  enum class Kind { kFixed, kDecision, kFollower };
  Kind kind = Kind::kFixed;
  double fixed_u = 0.0;
  double fixed_price = 0.0;
  int decision = -1;
};

struct Problem {
  const NetworkSpec* spec = nullptr;
  const MpcConfig* config = nullptr;
  const Observation* obs = nullptr;
  int T = 0;
  std::vector<Grid<Slot>> slots;  // [t]
  std::vector<Decision> decisions;
};

double follower_demand(const MarketParams& p, const Decision& d, double v) {
  return demand_duo(p, d.lead->price(v), d.follower_rival);
}

double follower_revenue(const MarketParams& p, const Decision& d, double v) {
  const double ell = d.lead->price(v);
  return ell * demand_duo(p, ell, d.follower_rival);
}

// d follower_demand / dv by central differences inside the lead domain.
double follower_slope(const MarketParams& p, const Decision& d, double v) {
  const double h = 1e-6 * (d.lead->hi() - d.lead->lo());
  const double a = std::max(d.lead->lo(), v - h);
  const double b = std::min(d.lead->hi(), v + h);
  if (b <= a) return 0.0;
  return (follower_demand(p, d, b) - follower_demand(p, d, a)) / (b - a);
}

struct Revenue {
  double value = 0.0, slope = 0.0, curvature = 0.0;
};

Revenue decision_revenue(const Problem& pb, const Decision& d, double v) {
  const MarketParams& p = pb.spec->params;
  const double theta = pb.spec->theta(d.i, d.j);
  Revenue r;
  for (const auto& c : d.curves) {
    r.value += theta * c->revenue(v);
    r.slope += theta * c->marginal(v);
    r.curvature += theta * c->curvature(v);
  }
  if (d.has_follower) {
    const double lo = d.lo, hi = d.hi;
    const double h = 1e-5 * (hi - lo);
    auto f = [&](double x) { return theta * follower_revenue(p, d, x); };
    const double a = std::max(lo, v - h), b = std::min(hi, v + h);
    const double fa = f(a), fv = f(v), fb = f(b);
    r.value += fv;
    r.slope += (fb - fa) / (b - a);
    if (a < v && v < b) {
      r.curvature += (fb - 2.0 * fv + fa) / ((b - v) * (v - a));
    }
  }
  return r;
}

struct Layout {
  int T = 0, n = 0, m = 0;
  std::vector<int> route;   // [t][i][j][e] -> var or -1
  std::vector<int> charge;  // [t][i][e]
  std::vector<int> idle;    // [t][i][e]
  std::vector<int> queue;   // [t][i][j]
  std::vector<int> decision_var;  // per decision
  std::vector<int> follower_var;  // per decision, -1 without follower
  std::vector<int> link_row;
  std::vector<int> integer_vars;

  int r(int t, int i, int j, int e) const {
    return route[((static_cast<std::size_t>(t) * n + i) * n + j) * m + e];
  }
  int c(int t, int i, int e) const {
    return charge[(static_cast<std::size_t>(t) * n + i) * m + e];
  }
  int y(int t, int i, int e) const {
    return idle[(static_cast<std::size_t>(t) * n + i) * m + e];
  }
  int q(int t, int i, int j) const {
    return queue[(static_cast<std::size_t>(t) * n + i) * n + j];
  }
};

using BoundMap = std::map<int, std::pair<double, double>>;

QpProblem build_qp(const Problem& pb, const std::vector<double>& point,
                   const BoundMap& bounds, Layout& lay) {
  const NetworkSpec& spec = *pb.spec;
  const Observation& obs = *pb.obs;
  const int T = pb.T, n = spec.n, m = spec.e_max + 1;
  lay = Layout{};
  lay.T = T;
  lay.n = n;
  lay.m = m;
  lay.route.assign(static_cast<std::size_t>(T) * n * n * m, -1);
  lay.charge.assign(static_cast<std::size_t>(T) * n * m, -1);
  lay.idle.assign(static_cast<std::size_t>(T) * n * m, -1);
  lay.queue.assign(static_cast<std::size_t>(T) * n * n, -1);

  QpProblem qp;
  auto bounded = [&](int var) {
    auto it = bounds.find(var);
    if (it != bounds.end()) {
      qp.set_bounds(var, it->second.first, it->second.second);
    }
  };
  for (int t = 0; t < T; ++t) {
    const double bias = 1.0 + pb.config->early_bias * t;
    for (int i = 0; i < n; ++i) {
      for (int e = 0; e < m; ++e) {
        for (int j = 0; j < n; ++j) {
          if (i == j || e < spec.energy(i, j)) continue;
          const int v =
              qp.add_var(0.0, kInf, bias * spec.beta_t * spec.tau(i, j));
          lay.route[((static_cast<std::size_t>(t) * n + i) * n + j) * m + e] = v;
          lay.integer_vars.push_back(v);
          bounded(v);
        }
        if (e < spec.e_max) {
          const int v =
              qp.add_var(0.0, kInf, bias * (spec.beta_c + spec.elec_price[i]));
          lay.charge[(static_cast<std::size_t>(t) * n + i) * m + e] = v;
          lay.integer_vars.push_back(v);
          bounded(v);
        }
        const int v = qp.add_var(0.0, kInf, 0.0);
        lay.idle[(static_cast<std::size_t>(t) * n + i) * m + e] = v;
        lay.integer_vars.push_back(v);
        bounded(v);
      }
    }
  }

  // Vehicle balance per (t, node, energy): outflow - inflow = new supply.
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < n; ++i) {
      for (int e = 0; e < m; ++e) {
        double supply = 0.0;
        if (t == 0) {
          supply = obs.idle[i][e];
        } else if (t < static_cast<int>(obs.arriving.size())) {
          supply = obs.arriving[t][i][e];
        }
        const int row = qp.add_row(supply);
        for (int j = 0; j < n; ++j) {
          if (lay.r(t, i, j, e) >= 0) qp.add_coef(row, lay.r(t, i, j, e), 1.0);
        }
        if (lay.c(t, i, e) >= 0) qp.add_coef(row, lay.c(t, i, e), 1.0);
        qp.add_coef(row, lay.y(t, i, e), 1.0);
        for (int k = 0; k < n; ++k) {
          if (k == i) continue;
          const int src = t - spec.tau(k, i);
          const int e_src = e + spec.energy(k, i);
          if (src < 0 || e_src >= m) continue;
          if (lay.r(src, k, i, e_src) >= 0) {
            qp.add_coef(row, lay.r(src, k, i, e_src), -1.0);
          }
        }
        if (t > 0) {
          if (e > 0 && lay.c(t - 1, i, e - 1) >= 0) {
            qp.add_coef(row, lay.c(t - 1, i, e - 1), -1.0);
          }
          qp.add_coef(row, lay.y(t - 1, i, e), -1.0);
        }
      }
    }
  }

  // Purchase-fraction decisions with local quadratic revenue models.
  const MarketParams& params = spec.params;
  lay.decision_var.assign(pb.decisions.size(), -1);
  lay.follower_var.assign(pb.decisions.size(), -1);
  lay.link_row.assign(pb.decisions.size(), -1);
  for (std::size_t k = 0; k < pb.decisions.size(); ++k) {
    const Decision& d = pb.decisions[k];
    const double lo = d.lo, hi = d.hi;
    const double uk = std::clamp(point[k], lo, hi);
    const Revenue rev = decision_revenue(pb, d, uk);
    const double quad = std::min(rev.curvature,
                                 -1e-9 * params.ell_max * (1.0 + spec.theta(d.i, d.j)));
    lay.decision_var[k] =
        qp.add_var(lo, hi, -(rev.slope - quad * uk), -quad);
    if (d.has_follower) {
      const double g = follower_demand(params, d, uk);
      const double slope = follower_slope(params, d, uk);
      lay.follower_var[k] = qp.add_var(0.0, 1.0, 0.0);
      lay.link_row[k] = qp.add_row(g - slope * uk);
      qp.add_coef(lay.link_row[k], lay.follower_var[k], 1.0);
      qp.add_coef(lay.link_row[k], lay.decision_var[k], -slope);
    }
  }

  // Queues: q_0 >= Q - served_0 and q_t >= q_{t-1} + theta u_{t-1} - served_t.
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const int q = qp.add_var(0.0, kInf, pb.config->weight(t, i, j));
        lay.queue[(static_cast<std::size_t>(t) * n + i) * n + j] = q;
        const int surplus = qp.add_var(0.0, kInf, 0.0);
        const int row = qp.add_row(t == 0 ? obs.outstanding(i, j) : 0.0);
        qp.add_coef(row, q, 1.0);
        qp.add_coef(row, surplus, -1.0);
        for (int e = 0; e < m; ++e) {
          if (lay.r(t, i, j, e) >= 0) qp.add_coef(row, lay.r(t, i, j, e), 1.0);
        }
        if (t == 0) continue;
        qp.add_coef(row, lay.q(t - 1, i, j), -1.0);
        const double theta = spec.theta(i, j);
        const Slot& s = pb.slots[t - 1](i, j);
        switch (s.kind) {
          case Slot::Kind::kFixed:
            qp.set_rhs(row, theta * s.fixed_u);
            break;
          case Slot::Kind::kDecision:
            qp.add_coef(row, lay.decision_var[s.decision], -theta);
            break;
          case Slot::Kind::kFollower:
            qp.add_coef(row, lay.follower_var[s.decision], -theta);
            break;
        }
      }
    }
  }
  return qp;
}

double slot_demand(const Problem& pb, const Slot& s,
                   const std::vector<double>& point) {
  switch (s.kind) {
    case Slot::Kind::kFixed:
      return s.fixed_u;
    case Slot::Kind::kDecision:
      return point[s.decision];
    case Slot::Kind::kFollower:
      return follower_demand(pb.spec->params, pb.decisions[s.decision],
                             point[s.decision]);
  }
  return 0.0;
}

double slot_price(const Problem& pb, const Slot& s,
                  const std::vector<double>& point) {
  if (s.kind == Slot::Kind::kFixed) return s.fixed_price;
  const Decision& d = pb.decisions[s.decision];
  if (s.kind == Slot::Kind::kFollower) return d.lead->price(point[s.decision]);
  // Periods covered by one decision share its first curve's price.
  return d.curves.front()->price(point[s.decision]);
}

// Exact planned objective: queues follow the max recursion.
double merit(const Problem& pb, const Layout& lay, const std::vector<double>& x,
             const std::vector<double>& point) {
  const NetworkSpec& spec = *pb.spec;
  const int T = pb.T, n = spec.n, m = spec.e_max + 1;
  double value = 0.0;
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < n; ++i) {
      for (int e = 0; e < m; ++e) {
        for (int j = 0; j < n; ++j) {
          if (lay.r(t, i, j, e) >= 0) {
            value -= spec.beta_t * spec.tau(i, j) * x[lay.r(t, i, j, e)];
          }
        }
        if (lay.c(t, i, e) >= 0) {
          value -= (spec.beta_c + spec.elec_price[i]) * x[lay.c(t, i, e)];
        }
      }
    }
  }
  for (std::size_t k = 0; k < pb.decisions.size(); ++k) {
    value += decision_revenue(pb, pb.decisions[k], point[k]).value;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double theta = spec.theta(i, j);
      double q = pb.obs->outstanding(i, j);
      for (int t = 0; t < T; ++t) {
        const Slot& s = pb.slots[t](i, j);
        if (s.kind == Slot::Kind::kFixed) {
          value += theta * s.fixed_u * s.fixed_price;
        }
        double served = 0.0;
        for (int e = 0; e < m; ++e) {
          if (lay.r(t, i, j, e) >= 0) served += x[lay.r(t, i, j, e)];
        }
        if (t > 0) q += theta * slot_demand(pb, pb.slots[t - 1](i, j), point);
        q = std::max(0.0, q - served);
        value -= pb.config->weight(t, i, j) * q;
      }
    }
  }
  return value;
}

struct Relaxation {
  bool ok = false;
  std::vector<double> x;
  std::vector<double> point;
  Layout layout;
  double value = 0.0;
  int iterations = 0;
};

std::vector<double> extract_point(const Layout& lay, const std::vector<double>& x) {
  std::vector<double> p(lay.decision_var.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = x[lay.decision_var[k]];
  return p;
}

bool exact_model(const Problem& pb) {
  for (const Decision& d : pb.decisions) {
    if (d.has_follower) return false;
    for (const auto& c : d.curves) {
      if (!c->quadratic()) return false;
    }
  }
  return true;
}

Relaxation relax(const Problem& pb, const BoundMap& bounds) {
  std::vector<double> point(pb.decisions.size());
  for (std::size_t k = 0; k < point.size(); ++k) point[k] = pb.decisions[k].start;

  Relaxation out;
  auto solve_at = [&](const std::vector<double>& at, Layout& lay,
                      std::vector<double>& x) {
    const QpProblem qp = build_qp(pb, at, bounds, lay);
    QpSolution sol = solve_qp(qp, pb.config->qp);
    if (sol.status == QpStatus::kInfeasible) return false;
    if (sol.status != QpStatus::kOptimal &&
        !(sol.primal_residual < 1e-6 && sol.dual_residual < 1e-6)) {
      return false;
    }
    x = std::move(sol.x);
    return true;
  };

  Layout lay;
  std::vector<double> x;
  if (!solve_at(point, lay, x)) return out;
  point = extract_point(lay, x);
  double value = merit(pb, lay, x, point);
  int it = 1;
  if (!exact_model(pb)) {
    for (; it < pb.config->max_sqp_iterations; ++it) {
      Layout cand_lay;
      std::vector<double> cand;
      if (!solve_at(point, cand_lay, cand)) break;
      const std::vector<double> target = extract_point(cand_lay, cand);
      double step = 1.0, best = value;
      std::vector<double> trial_x, trial_p;
      bool accepted = false;
      for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
        trial_x.resize(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) {
          trial_x[k] = x[k] + step * (cand[k] - x[k]);
        }
        trial_p = extract_point(cand_lay, trial_x);
        const double v = merit(pb, cand_lay, trial_x, trial_p);
        if (v >= best - 1e-12 * (1.0 + std::abs(best))) {
          best = v;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      double move = 0.0;
      for (std::size_t k = 0; k < point.size(); ++k) {
        move = std::max(move, std::abs(trial_p[k] - point[k]));
      }
      const double gain = best - value;
      x = std::move(trial_x);
      point = std::move(trial_p);
      lay = cand_lay;
      value = best;
      if (move < 1e-10 || gain < 1e-12 * (1.0 + std::abs(value))) break;
    }
    // Report a point that satisfies the model exactly.
    Layout final_lay;
    std::vector<double> final_x;
    if (solve_at(point, final_lay, final_x)) {
      const std::vector<double> p = extract_point(final_lay, final_x);
      const double v = merit(pb, final_lay, final_x, p);
      if (v >= value - 1e-9 * (1.0 + std::abs(value))) {
        x = std::move(final_x);
        point = p;
        lay = final_lay;
        value = v;
      }
    }
  }
  out.ok = true;
  out.x = std::move(x);
  out.point = std::move(point);
  out.layout = std::move(lay);
  out.value = value;
  out.iterations = it;
  return out;
}

constexpr double kIntegerTol = 1e-6;

Relaxation branch_and_bound(const Problem& pb, int& nodes) {
  Relaxation best;
  double incumbent = -kInf;
  std::vector<BoundMap> stack{BoundMap{}};
  nodes = 0;
  while (!stack.empty()) {
    if (++nodes > pb.config->max_nodes) {
      throw std::runtime_error("branch and bound exceeded the node limit");
    }
    BoundMap bounds = std::move(stack.back());
    stack.pop_back();
    Relaxation r = relax(pb, bounds);
    if (!r.ok || r.value <= incumbent + 1e-9) continue;
    int branch = -1;
    double worst = kIntegerTol;
    for (int v : r.layout.integer_vars) {
      const double frac = std::abs(r.x[v] - std::round(r.x[v]));
      if (frac > worst) {
        worst = frac;
        branch = v;
      }
    }
    if (branch < 0) {
      for (int v : r.layout.integer_vars) r.x[v] = std::round(r.x[v]);
      r.value = merit(pb, r.layout, r.x, r.point);
      if (r.value > incumbent) {
        incumbent = r.value;
        best = std::move(r);
      }
      continue;
    }
    const double value = r.x[branch];
    BoundMap down = bounds, up = bounds;
    const double old_lo = bounds.count(branch) ? bounds.at(branch).first : 0.0;
    const double old_hi = bounds.count(branch) ? bounds.at(branch).second : kInf;
    down[branch] = {old_lo, std::floor(value)};
    up[branch] = {std::ceil(value), old_hi};
    // Explore the nearer side first.
    if (value - std::floor(value) < 0.5) {
      stack.push_back(std::move(up));
      stack.push_back(std::move(down));
    } else {
      stack.push_back(std::move(down));
      stack.push_back(std::move(up));
    }
  }
  if (!best.ok) throw std::runtime_error("no integral plan found");
  return best;
}

MpcPlan finish(const Problem& pb) {
  const NetworkSpec& spec = *pb.spec;
  const int T = pb.T, n = spec.n, m = spec.e_max + 1;
  MpcPlan plan;
  plan.start = pb.obs->clock;
  plan.horizon = T;
  Relaxation r;
  if (pb.config->integrality == Integrality::kExact) {
    r = branch_and_bound(pb, plan.nodes);
    plan.integral = true;
  } else {
    r = relax(pb, {});
    if (!r.ok) throw std::runtime_error("MPC relaxation failed to solve");
  }
  plan.sqp_iterations = r.iterations;
  plan.objective = r.value;
  const Layout& lay = r.layout;
  for (int t = 0; t < T; ++t) {
    Grid<double> prices(n, 0.0), demand(n, 0.0), queues(n, 0.0);
    FleetFlow moves(n, spec.e_max);
    std::vector<std::vector<double>> idle(n, std::vector<double>(m, 0.0));
    for (int i = 0; i < n; ++i) {
      for (int e = 0; e < m; ++e) {
        for (int j = 0; j < n; ++j) {
          if (lay.r(t, i, j, e) >= 0) {
            moves.route(i, j, e) = std::max(0.0, r.x[lay.r(t, i, j, e)]);
          }
        }
        if (lay.c(t, i, e) >= 0) {
          moves.charge(i, e) = std::max(0.0, r.x[lay.c(t, i, e)]);
        }
        idle[i][e] = std::max(0.0, r.x[lay.y(t, i, e)]);
      }
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const Slot& s = pb.slots[t](i, j);
        prices(i, j) = slot_price(pb, s, r.point);
        demand(i, j) = slot_demand(pb, s, r.point);
        queues(i, j) = std::max(0.0, r.x[lay.q(t, i, j)]);
      }
    }
    plan.prices.push_back(std::move(prices));
    plan.demand.push_back(std::move(demand));
    plan.queues.push_back(std::move(queues));
    plan.moves.push_back(std::move(moves));
    plan.idle.push_back(std::move(idle));
  }
  return plan;
}

void check_observation(const Observation& obs, const NetworkSpec& spec) {
  const int n = spec.n, m = spec.e_max + 1;
  if (static_cast<int>(obs.idle.size()) != n ||
      obs.outstanding.size() != n || obs.own_prices.size() != n) {
    throw std::invalid_argument("observation does not match the network");
  }
  for (const auto& row : obs.idle) {
    if (static_cast<int>(row.size()) != m) {
      throw std::invalid_argument("observation energy levels do not match");
    }
  }
}

Problem base_problem(const Observation& obs, const NetworkSpec& spec,
                     const MpcConfig& config) {
  spec.validate();
  config.validate(spec);
  check_observation(obs, spec);
  Problem pb;
  pb.spec = &spec;
  pb.config = &config;
  pb.obs = &obs;
  pb.T = config.horizon;
  pb.slots.assign(pb.T, Grid<Slot>(spec.n, Slot{}));
  return pb;
}

Slot fixed_slot(double u, double price) {
  Slot s;
  s.kind = Slot::Kind::kFixed;
  s.fixed_u = u;
  s.fixed_price = price;
  return s;
}

Slot decision_slot(int index, Slot::Kind kind = Slot::Kind::kDecision) {
  Slot s;
  s.kind = kind;
  s.decision = index;
  return s;
}

// Decision over `curve`'s domain starting from the demand at `u`.
Decision make_decision(int i, int j, const CurvePtr& curve, double u) {
  Decision d;
  d.i = i;
  d.j = j;
  d.lo = curve->lo();
  d.hi = curve->hi();
  d.start = std::clamp(u, d.lo, d.hi);
  return d;
}

}  // namespace

MpcPlan plan_monopoly(const Observation& obs, const NetworkSpec& spec,
                      const MpcConfig& config) {
  Problem pb = base_problem(obs, spec, config);
  const MarketParams& params = spec.params;
  const auto curve = std::make_shared<MonopolyCurve>(params);
  // Prices stay on the linear demand branch.
  const double slope = std::max(params.sigma, 1.0 - params.sigma);
  const double linear_hi =
      std::min(curve->hi(), demand_mono(params, (1.0 - slope) * params.ell_max));
  for (int t = 0; t < pb.T; ++t) {
    for (int i = 0; i < spec.n; ++i) {
      for (int j = 0; j < spec.n; ++j) {
        if (i == j) continue;
        if (config.price_mode == PriceMode::kStatic) {
          const double price = config.static_prices(i, j);
          pb.slots[t](i, j) = fixed_slot(demand_mono(params, price), price);
        } else if (spec.theta(i, j) <= 0.0) {
          pb.slots[t](i, j) = fixed_slot(0.0, obs.own_prices(i, j));
        } else {
          Decision d;
          d.i = i;
          d.j = j;
          d.curves = {curve};
          d.lo = curve->lo();
          d.hi = linear_hi;
          d.start = 0.5 * (d.lo + d.hi);
          pb.slots[t](i, j) = decision_slot(static_cast<int>(pb.decisions.size()));
          pb.decisions.push_back(std::move(d));
        }
      }
    }
  }
  return finish(pb);
}

bool reprices_now(const Observation& obs) {
  return (obs.clock % 2 == 0) == (obs.firm == 0);
}

MpcPlan plan_duopoly(const Observation& obs, const NetworkSpec& spec,
                     const MpcConfig& config,
                     const Grid<double>& equilibrium_prices) {
  if (equilibrium_prices.size() != spec.n ||
      obs.rival_prices.size() != spec.n) {
    throw std::invalid_argument("rival price grids must be n x n");
  }
  bool any_rival = false;
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      if (i != j && (equilibrium_prices(i, j) != kAbsent ||
                     obs.rival_prices(i, j) != kAbsent)) {
        any_rival = true;
      }
    }
  }
  if (!any_rival) return plan_monopoly(obs, spec, config);

  Problem pb = base_problem(obs, spec, config);
  const MarketParams& params = spec.params;
  const bool now = reprices_now(obs);
  const int T = pb.T;
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      if (i == j) continue;
      const double eq = equilibrium_prices(i, j);
      const double seen = obs.rival_prices(i, j);
      const double own = obs.own_prices(i, j);
      if (config.price_mode == PriceMode::kStatic || spec.theta(i, j) <= 0.0) {
        const double price = config.price_mode == PriceMode::kStatic
                                 ? config.static_prices(i, j)
                                 : own;
        for (int t = 0; t < T; ++t) {
          const double rival = (t == 0 && now) ? seen : eq;
          pb.slots[t](i, j) =
              fixed_slot(demand_duo(params, price, rival), price);
        }
        continue;
      }
      const auto future = curve_against(params, eq);
      int t = 0;
      if (!now) {
        // Our price is frozen while the rival moves to its equilibrium price.
        pb.slots[0](i, j) = fixed_slot(demand_duo(params, own, eq), own);
        t = 1;
      } else if (seen != eq) {
        const auto current = curve_against(params, seen);
        const int index = static_cast<int>(pb.decisions.size());
        if (T == 1) {
          Decision d = make_decision(i, j, current, demand_duo(params, own, seen));
          d.curves = {current};
          pb.decisions.push_back(std::move(d));
          pb.slots[0](i, j) = decision_slot(index);
        } else {
          Decision d = make_decision(i, j, future, demand_duo(params, own, eq));
          d.curves = {future};
          d.has_follower = true;
          d.lead = future;
          d.follower_rival = seen;
          pb.decisions.push_back(std::move(d));
          pb.slots[0](i, j) = decision_slot(index, Slot::Kind::kFollower);
          pb.slots[1](i, j) = decision_slot(index);
        }
        t = 2;
      }
      for (; t < T; t += 2) {
        const int index = static_cast<int>(pb.decisions.size());
        Decision d = make_decision(i, j, future, demand_duo(params, own, eq));
        d.curves = {future};
        if (t + 1 < T) d.curves.push_back(future);
        pb.slots[t](i, j) = decision_slot(index);
        if (t + 1 < T) pb.slots[t + 1](i, j) = decision_slot(index);
        pb.decisions.push_back(std::move(d));
      }
    }
  }
  return finish(pb);
}

Actions first_period_actions(const MpcPlan& plan, const Observation& obs,
                             const NetworkSpec& spec) {
  if (plan.horizon < 1 || plan.moves.empty()) {
    throw std::invalid_argument("plan has no periods");
  }
  const int n = spec.n, m = spec.e_max + 1;
  Actions a;
  a.prices = plan.prices[0];
  a.moves = FleetFlow(n, spec.e_max);
  const FleetFlow& f = plan.moves[0];
  for (int i = 0; i < n; ++i) {
    for (int e = 0; e < m; ++e) {
      const int total = obs.idle[i][e];
      // Candidates: routes to each j, charging, idling (index n, n + 1).
      std::vector<double> want(n + 2, 0.0);
      for (int j = 0; j < n; ++j) {
        if (j != i && e >= spec.energy(i, j)) want[j] = f.route(i, j, e);
      }
      if (e < spec.e_max) want[n] = f.charge(i, e);
      want[n + 1] = plan.idle[0][i][e];
      std::vector<int> take(n + 2, 0);
      int assigned = 0;
      for (int k = 0; k < n + 2; ++k) {
        take[k] = static_cast<int>(std::floor(want[k] + 1e-9));
        assigned += take[k];
      }
      // Trim any excess from tolerance, then fill by largest remainder.
      for (int k = n + 1; k >= 0 && assigned > total; --k) {
        const int cut = std::min(take[k], assigned - total);
        take[k] -= cut;
        assigned -= cut;
      }
      std::vector<int> order(n + 2);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return want[x] - take[x] > want[y] - take[y];
      });
      for (int k = 0; assigned < total; k = (k + 1) % (n + 2)) {
        const int c = order[k];
        const bool allowed = c == n + 1 || (c == n ? e < spec.e_max
                                                   : c != i && e >= spec.energy(i, c));
        if (allowed) {
          ++take[c];
          ++assigned;
        }
      }
      for (int j = 0; j < n; ++j) {
        if (take[j] > 0) a.moves.route(i, j, e) = take[j];
      }
      if (e < spec.e_max) a.moves.charge(i, e) = take[n];
    }
  }
  return a;
}

namespace {

class MpcController final : public Controller {
 public:
  MpcController(MpcConfig config, std::optional<Grid<double>> eq)
      : config_(std::move(config)), eq_(std::move(eq)) {}

  Actions act(const Observation& obs, const NetworkSpec& spec) override {
    const MpcPlan plan = eq_ && obs.firms > 1
                             ? plan_duopoly(obs, spec, config_, *eq_)
                             : plan_monopoly(obs, spec, config_);
    return first_period_actions(plan, obs, spec);
  }

 private:
  MpcConfig config_;
  std::optional<Grid<double>> eq_;
};

}  // namespace

std::unique_ptr<Controller> mpc_controller(
    MpcConfig config, std::optional<Grid<double>> equilibrium_prices) {
  return std::make_unique<MpcController>(std::move(config),
                                         std::move(equilibrium_prices));
}

std::string plan_summary(const MpcPlan& plan) {
  std::ostringstream os;
  os << fmt::format("plan from t={} over {} periods, objective {:.6f}\n",
                    plan.start, plan.horizon, plan.objective);
  for (int t = 0; t < plan.horizon; ++t) {
    double dispatched = 0.0, charging = 0.0, waiting = 0.0, price = 0.0;
    const FleetFlow& f = plan.moves[t];
    int pairs = 0;
    for (int i = 0; i < f.n(); ++i) {
      for (int j = 0; j < f.n(); ++j) {
        if (i != j) {
          dispatched += f.route_total(i, j);
          waiting += plan.queues[t](i, j);
          price += plan.prices[t](i, j);
          ++pairs;
        }
      }
      for (int e = 0; e < f.e_max(); ++e) charging += f.charge(i, e);
    }
    os << fmt::format("t={} dispatched={:.3f} charging={:.3f} waiting={:.3f} "
                      "mean_price={:.4f}\n",
                      t, dispatched, charging, waiting,
                      pairs ? price / pairs : 0.0);
  }
  return os.str();
}

}  // namespace amod
