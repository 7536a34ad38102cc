#pragma once

#include <memory>

#include "amod/demand.hpp"

namespace amod {

// Marginal value at DemandCurve::hi(), in units of -ell_max.
inline constexpr double kPastPeak = 0.05;

// One OD pair's demand expressed in the purchase fraction u. The planners
// optimize over u; `marginal` is the price at which the firm is indifferent
// to serving one more rider (the dual price at an interior optimum).
class DemandCurve {
 public:
  virtual ~DemandCurve() = default;

  // Domain of u. Marginal is nonincreasing on it. hi() lies slightly past
  // the revenue peak, so a zero cost falls strictly inside the domain; the
  // monopoly price formula is extrapolated linearly there.
  virtual double lo() const = 0;
  virtual double hi() const = 0;

  virtual double price(double u) const = 0;
  virtual double marginal(double u) const = 0;
  // Slope of marginal in u; strictly negative.
  virtual double curvature(double u) const;
  // True when revenue is exactly quadratic in u.
  virtual bool quadratic() const { return false; }

  double revenue(double u) const { return u * price(u); }
};

// Single firm restricted to the linear demand branch.
class MonopolyCurve final : public DemandCurve {
 public:
  explicit MonopolyCurve(const MarketParams& params);
  double lo() const override { return lo_; }
  double hi() const override { return hi_; }
  double price(double u) const override;
  double marginal(double u) const override;
  double curvature(double u) const override;
  bool quadratic() const override { return true; }

 private:
  MarketParams params_;
  double slope_;  // max(sigma, 1 - sigma)
  double lo_, hi_;
};

// Own demand against a fixed rival price. Requires sigma < 1.
class BestResponseCurve final : public DemandCurve {
 public:
  BestResponseCurve(const MarketParams& params, double rival_price);
  double lo() const override { return 0.0; }
  double hi() const override { return hi_; }
  double price(double u) const override;
  double marginal(double u) const override;

 private:
  double marginal_at_price(double ell) const;
  MarketParams params_;
  double rival_;
  double choke_;  // lowest price with zero demand
  double floor_;  // price at hi()
  double hi_;
};

// Both firms post the same price. marginal(u) is the cost at which that
// common price solves each firm's first-order condition.
class SymmetricCurve final : public DemandCurve {
 public:
  explicit SymmetricCurve(const MarketParams& params);
  double lo() const override { return 0.0; }
  double hi() const override { return hi_; }
  double price(double u) const override;
  double marginal(double u) const override;

 private:
  double marginal_at_price(double ell) const;
  MarketParams params_;
  double floor_;
  double hi_;
};

// Cost implied by a price through the first-order condition
// dD/d(own) * (own - cost) + D = 0.
double implied_cost(const MarketParams& params, double own, double other);

}  // namespace amod
