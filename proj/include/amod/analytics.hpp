#pragma once

#include "amod/demand.hpp"

namespace amod {

// Largest per-ride cost for which the closed-form guarantees hold.
double assumption2_cap(const MarketParams& params);

// Profit-maximizing monopoly price for a ride whose marginal cost is lambda.
// Requires 0 <= lambda <= ell_max.
double mono_price(const MarketParams& params, double lambda);

// Symmetric duopoly equilibrium price for marginal cost lambda.
// Requires 0 <= lambda <= assumption2_cap(params).
double duo_price(const MarketParams& params, double lambda);

// A formula value together with whether its inputs lie where the formula is
// valid. Out-of-region values are still returned for limit checks.
struct Checked {
  double value = 0.0;
  bool valid = true;
};

// Per unit of potential-rider mass, at a price on the linear demand branch.
Checked mono_profit_per_theta(const MarketParams& params, double ell);
Checked mono_cs_per_theta(const MarketParams& params, double ell);

// One firm's profit at symmetric prices ell; invalid (loss-making) when
// ell < lambda.
Checked duo_profit_per_theta(const MarketParams& params, double ell,
                             double lambda);

// Surplus of all riders of both firms when both post ell.
double duo_cs_per_theta(const MarketParams& params, double ell);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v, double tol = 0.0) const {
    return v >= lo - tol && v <= hi + tol;
  }
};

// Universal bounds over every admissible network, for one sigma. Price,
// profit and surplus bounds are in currency per unit of potential-rider mass;
// demand bounds are fractions.
struct BoundReport {
  MarketParams params;
  Interval price_mono, price_duo;
  Interval demand_mono, demand_duo;
  Interval profit_mono, profit_duo;
  Interval cs_mono, cs_duo;
  // duopoly / monopoly. Demand and surplus compare both duopoly firms
  // together; price and profit compare one duopoly firm.
  Interval ratio_price, ratio_demand, ratio_profit, ratio_cs;
};

// Requires 3/5 <= sigma <= 1.
BoundReport bound_suite(const MarketParams& params);

struct PriceGapBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Bounds on mono_price - duo_price for an OD pair whose worst-case cost is
// lambda_bar. Requires 0 <= lambda_bar <= assumption2_cap(params).
PriceGapBounds price_gap_bounds(const MarketParams& params,
                                double lambda_bar);

}  // namespace amod
