#include "amod/curves.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amod {

namespace {

// Root of an increasing function on [lo, hi]; f(lo) < 0 <= f(hi) assumed.
template <class F>
double bisect(F f, double lo, double hi) {
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void require_smooth(const MarketParams& params) {
  params.validate();
  if (params.sigma >= 1.0) {
    throw std::invalid_argument(
        "price competition needs sigma < 1 (demand jumps at sigma = 1)");
  }
}

}  // namespace

double DemandCurve::curvature(double u) const {
  const double h = 1e-6 * std::max(hi() - lo(), 1e-12);
  const double a = std::max(lo(), u - h);
  const double b = std::min(hi(), u + h);
  if (b <= a) return -1.0;
  const double slope = (marginal(b) - marginal(a)) / (b - a);
  return std::min(slope, -1e-9);
}

double implied_cost(const MarketParams& params, double own, double other) {
  const double d = demand_duo(params, own, other);
  const double slope = demand_duo_partial(params, own, other).value;
  if (d <= 0.0 || slope >= 0.0) return own;
  return own + d / slope;
}

MonopolyCurve::MonopolyCurve(const MarketParams& params)
    : params_(params), slope_(std::max(params.sigma, 1 - params.sigma)) {
  params_.validate();
  lo_ = demand_mono(params_, slope_ * params_.ell_max);
  hi_ = std::min(1.0, (1 + slope_ + 2 * kPastPeak) / (4 * slope_));
}

double MonopolyCurve::price(double u) const {
  return params_.ell_max * (1 + slope_ - 2 * slope_ * u) / 2;
}

double MonopolyCurve::marginal(double u) const {
  return params_.ell_max * (1 + slope_ - 4 * slope_ * u) / 2;
}

double MonopolyCurve::curvature(double) const {
  return -2 * slope_ * params_.ell_max;
}

BestResponseCurve::BestResponseCurve(const MarketParams& params,
                                     double rival_price)
    : params_(params), rival_(rival_price) {
  require_smooth(params_);
  if (!(rival_ >= 0)) throw std::invalid_argument("rival price must be >= 0");
  choke_ = std::min(params_.ell_max,
                    rival_ + (1 - params_.sigma) * params_.ell_max);
  floor_ = bisect(
      [&](double ell) {
        return marginal_at_price(ell) + kPastPeak * params_.ell_max;
      },
      0.0, choke_);
  hi_ = demand_duo(params_, floor_, rival_);
}

double BestResponseCurve::marginal_at_price(double ell) const {
  if (ell <= 0) return -2 * params_.ell_max;
  return implied_cost(params_, ell, rival_);
}

double BestResponseCurve::price(double u) const {
  if (u <= 0) return choke_;
  if (u >= hi_) return floor_;
  return bisect([&](double ell) { return u - demand_duo(params_, ell, rival_); },
                floor_, choke_);
}

double BestResponseCurve::marginal(double u) const {
  return marginal_at_price(price(u));
}

SymmetricCurve::SymmetricCurve(const MarketParams& params) : params_(params) {
  require_smooth(params_);
  floor_ = bisect(
      [&](double ell) {
        return marginal_at_price(ell) + kPastPeak * params_.ell_max;
      },
      0.0, params_.ell_max);
  hi_ = demand_duo(params_, floor_, floor_);
}

double SymmetricCurve::marginal_at_price(double ell) const {
  if (ell <= 0) return -2 * params_.ell_max;
  return implied_cost(params_, ell, ell);
}

double SymmetricCurve::price(double u) const {
  if (u <= 0) return params_.ell_max;
  if (u >= hi_) return floor_;
  return bisect([&](double ell) { return u - demand_duo(params_, ell, ell); },
                floor_, params_.ell_max);
}

double SymmetricCurve::marginal(double u) const {
  return marginal_at_price(price(u));
}

}  // namespace amod
