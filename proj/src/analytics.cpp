#include "amod/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace amod {

namespace {

constexpr double kBranchTol = 1e-9;

// Evaluates two adjacent closed-form branches at their shared threshold and
// insists they agree, so continuity is checked on every boundary call.
template <class Lo, class Hi>
double at_threshold(Lo lo, Hi hi, const char* what) {
  const double a = lo();
  const double b = hi();
  if (std::abs(a - b) > kBranchTol) {
    throw std::logic_error(std::string(what) +
                           ": branches disagree at threshold");
  }
  return b;
}

void require_lambda(double lambda, double hi, const char* what) {
  if (!std::isfinite(lambda) || lambda < 0.0 || lambda > hi * (1 + 1e-12)) {
    throw std::out_of_range(std::string(what) + ": lambda " +
                            std::to_string(lambda) + " outside [0, " +
                            std::to_string(hi) + "]");
  }
}

double root_term(double s) { return std::sqrt(-15 * s * s + 18 * s + 1); }

// Scaled discriminants of the two duopoly price branches.
double delta1(double s, double lam) {
  return 4 + (2 * lam + 15 * s - 3) * (2 * lam + 1 - s);
}
double delta2(double s, double lam) {
  return 2 * (s - lam) * (s - lam) + 2 * (1 - lam) * (1 - lam) +
         11 * (s - 1) * (s - 1);
}

double duo_threshold(double s) { return 3 * (1 - s) * (1 - s) / (2 * (s + 1)); }

}  // namespace

double assumption2_cap(const MarketParams& params) {
  params.validate();
  const double s = params.sigma;
  return (3 * s - 1) * (3 - s) / (4 * (5 - 3 * s)) * params.ell_max;
}

double mono_price(const MarketParams& params, double lambda) {
  params.validate();
  require_lambda(lambda, params.ell_max, "mono_price");
  const double s = std::max(params.sigma, 1.0 - params.sigma);
  const double lam = std::min(lambda / params.ell_max, 1.0);
  auto concave = [&] {
    return (lam + std::sqrt(lam * lam + 6 * s * (1 - s))) / 3;
  };
  auto linear = [&] { return ((1 + s) + 2 * lam) / 4; };
  auto convex = [&] { return (2 * lam + 1) / 3; };
  const double t1 = (3 - 5 * s) / 2;
  const double t2 = (3 * s - 1) / 2;
  double p;
  if (lam == t1) {
    p = at_threshold(concave, linear, "mono_price");
  } else if (lam == t2) {
    p = at_threshold(linear, convex, "mono_price");
  } else if (lam < t1) {
    p = concave();
  } else if (lam < t2) {
    p = linear();
  } else {
    p = convex();
  }
  return p * params.ell_max;
}

double duo_price(const MarketParams& params, double lambda) {
  params.validate();
  if (params.sigma < 0.5) {
    throw std::out_of_range("duo_price requires sigma >= 1/2");
  }
  require_lambda(lambda, assumption2_cap(params), "duo_price");
  const double s = params.sigma;
  const double lam = lambda / params.ell_max;
  auto low = [&] { return ((3 - 5 * s) + 2 * lam + std::sqrt(delta1(s, lam))) / 8; };
  auto high = [&] { return ((5 - 3 * s) + 2 * lam - std::sqrt(delta2(s, lam))) / 4; };
  const double t = duo_threshold(s);
  double p;
  if (lam == t) {
    p = at_threshold(low, high, "duo_price");
  } else if (lam < t) {
    p = low();
  } else {
    p = high();
  }
  return p * params.ell_max;
}

Checked mono_profit_per_theta(const MarketParams& params, double ell) {
  params.validate();
  const double s = params.sigma;
  const double L = params.ell_max;
  const double gap = L * (1 + s) - 2 * ell;
  const bool valid = ell >= (1 - s) * L && ell <= s * L;
  return {gap * gap / (4 * s * L), valid};
}

Checked mono_cs_per_theta(const MarketParams& params, double ell) {
  params.validate();
  const double s = params.sigma;
  const double L = params.ell_max;
  const double v = (L * (s * s + s + 1) - 3 * ell * (1 + s - ell / L)) / (6 * s);
  const bool valid = ell >= (1 - s) * L && ell <= s * L;
  return {v, valid};
}

Checked duo_profit_per_theta(const MarketParams& params, double ell,
                             double lambda) {
  const double d = demand_duo(params, ell, ell);
  return {d * (ell - lambda), ell >= lambda};
}

double duo_cs_per_theta(const MarketParams& params, double ell) {
  return 2.0 * purchase_surplus(params, ell, ell);
}

BoundReport bound_suite(const MarketParams& params) {
  params.validate();
  const double s = params.sigma;
  if (s < 0.6 || s > 1.0) {
    throw std::out_of_range("bound_suite requires sigma in [3/5, 1]");
  }
  const double L = params.ell_max;
  BoundReport r;
  r.params = params;

  const double root = root_term(s);
  const double lmono_lo = (1 + s) / 4;
  const double lmono_hi = (7 + 14 * s - 9 * s * s) / (40 - 24 * s);
  const double lduo_lo = (3 - 5 * s + root) / 8;
  const double lduo_hi = (1 + s) / 4;
  r.price_mono = {lmono_lo * L, lmono_hi * L};
  r.price_duo = {lduo_lo * L, lduo_hi * L};

  const double dmono_lo = (13 - 3 * s * s - 6 * s) / (40 * s - 24 * s * s);
  const double dmono_hi = (1 + s) / (4 * s);
  const double dduo_lo = 1 / (4 * s);
  double dduo_hi = 0.5;
  if (s < 1.0) {
    const double k = -(1 + s) + root;
    dduo_hi = 0.5 - k * k / (128 * s * (1 - s));
  }
  r.demand_mono = {dmono_lo, dmono_hi};
  r.demand_duo = {dduo_lo, dduo_hi};

  const double five = 5 - 3 * s;
  const double q = 3 * s * s + 6 * s - 13;
  r.profit_mono = {q * q / (64 * s * five * five) * L,
                   (1 + s) * (1 + s) / (16 * s) * L};
  r.profit_duo = {(1 - s) / (2 * s * five) * L, lduo_lo * dduo_hi * L};

  const double s2 = s * s;
  const double s3 = s2 * s;
  const double s4 = s3 * s;
  r.cs_mono = {(171 * s4 - 660 * s3 + 1378 * s2 - 1748 * s + 907) /
                   (384 * s * five * five) * L,
               (7 * s2 - 2 * s + 7) / (96 * s) * L};
  double csduo_hi = 0.5;
  if (s < 1.0) {
    const double a = s + 1 - 2 * lduo_lo;
    csduo_hi = (8 * s3 - a * a * a -
                24 * s * (1 - lduo_lo) * (s - 1 + lduo_lo)) /
               (24 * s * (1 - s));
  }
  r.cs_duo = {(s2 - 2 * s + 13) / (96 * s) * L, csduo_hi * L};

  r.ratio_price = {r.price_duo.lo / r.price_mono.hi,
                   r.price_duo.hi / r.price_mono.lo};
  r.ratio_demand = {2 * r.demand_duo.lo / r.demand_mono.hi,
                    2 * r.demand_duo.hi / r.demand_mono.lo};
  r.ratio_profit = {r.profit_duo.lo / r.profit_mono.hi,
                    r.profit_duo.hi / r.profit_mono.lo};
  r.ratio_cs = {r.cs_duo.lo / r.cs_mono.hi, r.cs_duo.hi / r.cs_mono.lo};
  return r;
}

PriceGapBounds price_gap_bounds(const MarketParams& params,
                                double lambda_bar) {
  params.validate();
  require_lambda(lambda_bar, assumption2_cap(params), "price_gap_bounds");
  const double s = params.sigma;
  const double lam = lambda_bar / params.ell_max;
  double lower;
  if (lam <= duo_threshold(s)) {
    lower = ((7 * s - 1) - 2 * lam - std::sqrt(delta1(s, lam))) / 8;
  } else {
    lower = ((4 * s - 4) - 2 * lam + std::sqrt(delta2(s, lam))) / 4;
  }
  const double upper = ((7 * s - 1) + 4 * lam - root_term(s)) / 8;
  if (std::abs(lower) < 1e-12) lower = 0.0;
  return {lower * params.ell_max, upper * params.ell_max};
}

}  // namespace amod
