#include "amod/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "amod/analytics.hpp"
#include "amod/curves.hpp"

namespace amod {

namespace {

double max_move(const Grid<double>& a, const Grid<double>& b) {
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    for (int j = 0; j < a.size(); ++j) {
      if (i != j) worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
    }
  }
  return worst;
}

}  // namespace

FocResidual foc_residual(const MarketParams& params, double own, double other,
                         double cost) {
  const DemandSlope slope = demand_duo_partial(params, own, other);
  return {slope.value * (own - cost) + demand_duo(params, own, other),
          slope.at_kink};
}

// Both firms' conditions at the final prices, each against the rival's
// latest prices rather than the ones it answered.
static double joint_foc_residual(const NetworkSpec& spec, const BrTrace& trace) {
  const Grid<double>& p1 = trace.firm1.prices;
  const Grid<double>& p2 = trace.firm2.prices;
  double worst = 0.0;
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      if (i == j || spec.theta(i, j) <= 0) continue;
      const double r1 = foc_residual(spec.params, p1(i, j), p2(i, j),
                                     trace.firm1.lambda(i, j)).value;
      const double r2 = foc_residual(spec.params, p2(i, j), p1(i, j),
                                     trace.firm2.lambda(i, j)).value;
      worst = std::max({worst, std::abs(r1), std::abs(r2)});
    }
  }
  return worst;
}

BrTrace best_response_dynamics(const NetworkSpec& spec,
                               const Grid<double>& init_prices,
                               const BrOptions& opt) {
  if (init_prices.size() != spec.n) {
    throw std::invalid_argument("initial prices do not match the network");
  }
  for (double p : init_prices.values()) {
    if (!std::isfinite(p)) throw std::invalid_argument("initial prices must be finite");
  }
  const double tol =
      opt.tolerance > 0 ? opt.tolerance : 1e-5 * spec.params.ell_max;
  BrTrace trace;
  Grid<double> p1 = init_prices, p2 = init_prices;
  for (int round = 1; round <= opt.max_rounds; ++round) {
    trace.rounds = round;
    StaticSolution s1 = solve_best_response(spec, p2, opt.flow);
    StaticSolution s2 =
        solve_best_response(spec, opt.simultaneous ? p1 : s1.prices, opt.flow);
    const double move1 = max_move(s1.prices, p1);
    const double move2 = max_move(s2.prices, p2);
    trace.steps.push_back({0, s1.prices, s1.objective, move1});
    trace.steps.push_back({1, s2.prices, s2.objective, move2});
    p1 = s1.prices;
    p2 = s2.prices;
    trace.firm1 = std::move(s1);
    trace.firm2 = std::move(s2);
    trace.max_foc_residual = joint_foc_residual(spec, trace);
    if (move1 <= tol && move2 <= tol &&
        trace.max_foc_residual <= opt.foc_tolerance) {
      trace.converged = true;
      break;
    }
  }
  trace.final_gap = max_move(p1, p2);
  return trace;
}

AsymmetryReport asymmetry_probe(const MarketParams& params,
                                const std::vector<double>& cost_grid,
                                const std::vector<double>& delta_grid,
                                double resolution) {
  params.validate();
  if (params.sigma < 0.5 || params.sigma >= 1.0) {
    throw std::invalid_argument("asymmetry_probe needs 1/2 <= sigma < 1");
  }
  if (!(resolution > 0)) throw std::invalid_argument("resolution must be > 0");
  const double L = params.ell_max;
  const double s = params.sigma;
  const double cap = assumption2_cap(params);
  const double knee = (1 - s) * L;
  const double lam_bar = cap / L;
  const double upper_hi =
      2.0 / (1.0 - (2 * lam_bar - 2 * s) /
                       std::sqrt(48 * (1 - s) * (1 - s) +
                                 (2 * lam_bar - 2 * s) * (2 * lam_bar - 2 * s)));
  const double upper_lo = 2 - s * (3 * s - 2);

  AsymmetryReport rep;
  rep.min_joint_residual = kInf;
  rep.min_gap_ratio = kInf;
  for (double delta : delta_grid) {
    if (!(delta > 0 && delta < knee)) {
      throw std::invalid_argument("delta must lie in (0, (1 - sigma) ell_max)");
    }
    // Scan the lower price where both firms keep positive demand.
    std::vector<double> grid;
    for (double lo = resolution * L; lo + delta < L; lo += resolution * L) {
      if (demand_duo(params, lo + delta, lo) > 1e-12 &&
          demand_duo(params, lo, lo + delta) > 1e-12) {
        grid.push_back(lo);
      }
    }

    // Dual gaps implied at prices that satisfy both conditions.
    for (double lo : grid) {
      const double hi = lo + delta;
      if (demand_duo_partial(params, hi, lo).at_kink ||
          demand_duo_partial(params, lo, hi).at_kink) {
        continue;
      }
      const double c_hi = implied_cost(params, hi, lo);
      const double c_lo = implied_cost(params, lo, hi);
      if (c_hi < 0 || c_lo < 0 || c_hi > cap || c_lo > cap) continue;
      ++rep.points_checked;
      const double gap = std::abs(c_hi - c_lo);
      rep.min_gap_ratio = std::min(rep.min_gap_ratio, gap / delta);
      rep.max_gap_ratio = std::max(rep.max_gap_ratio, gap / delta);
      if (gap < delta * (1 - 1e-9)) ++rep.lower_bound_violations;
      if (hi <= knee && gap > upper_lo * delta * (1 + 1e-9)) {
        ++rep.upper_bound_violations;
      }
      if (lo >= knee && gap > upper_hi * delta * (1 + 1e-9)) {
        ++rep.upper_bound_violations;
      }
    }

    for (double c1 : cost_grid) {
      for (double c2 : cost_grid) {
        if (std::abs(c1 - c2) >= delta) continue;
        // Firm 1 posts lo + delta, firm 2 posts lo.
        auto f1 = [&](double lo) {
          return foc_residual(params, lo + delta, lo, c1).value;
        };
        auto f2 = [&](double lo) {
          return foc_residual(params, lo, lo + delta, c2).value;
        };
        double joint = kInf;
        auto refine = [&](auto f, auto g, double a, double b) {
          const bool neg = f(a) < 0;
          for (int k = 0; k < 60; ++k) {
            const double mid = 0.5 * (a + b);
            ((f(mid) < 0) == neg ? a : b) = mid;
          }
          joint = std::min(joint, std::abs(g(0.5 * (a + b))));
        };
        for (std::size_t k = 0; k < grid.size(); ++k) {
          joint = std::min(joint, std::max(std::abs(f1(grid[k])),
                                           std::abs(f2(grid[k]))));
          if (k == 0 || grid[k] - grid[k - 1] > 1.5 * resolution * L) continue;
          if ((f1(grid[k - 1]) < 0) != (f1(grid[k]) < 0)) {
            refine(f1, f2, grid[k - 1], grid[k]);
          }
          if ((f2(grid[k - 1]) < 0) != (f2(grid[k]) < 0)) {
            refine(f2, f1, grid[k - 1], grid[k]);
          }
        }
        if (grid.empty()) continue;
        rep.min_joint_residual = std::min(rep.min_joint_residual, joint);
        if (joint < 1e-9) ++rep.corridor_roots;
      }
    }
  }
  return rep;
}

std::string trace_csv(const BrTrace& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "step,firm,origin,destination,price,objective\n";
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const BrStep& st = trace.steps[k];
    const int n = st.prices.size();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        out << k << ',' << st.firm + 1 << ',' << i << ',' << j << ','
            << st.prices(i, j) << ',' << st.objective << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace amod
