#pragma once

#include <cstdint>
#include <limits>

namespace amod {

// Customer heterogeneity and the willingness-to-pay ceiling shared by every
// OD pair. sigma weighs the common value component of a valuation.
struct MarketParams {
  double sigma = 0.6;
  double ell_max = 50.0;

  // Throws std::invalid_argument unless 0 <= sigma <= 1 and ell_max > 0.
  void validate() const;
  bool assumption1() const { return sigma >= 0.6; }

  bool operator==(const MarketParams&) const = default;
};

// Price posted by an absent firm.
inline constexpr double kAbsent = std::numeric_limits<double>::infinity();

struct ValuationSample {
  double x = 0.0;
  double y = 0.0;
  double v1 = 0.0;
  double v2 = 0.0;
};

ValuationSample make_valuation(const MarketParams& params, double x, double y);

// Fraction of potential riders buying when a single firm posts `ell`.
double demand_mono(const MarketParams& params, double ell);

// Fraction of potential riders buying from the firm posting `own` when the
// rival posts `other` (kAbsent for no rival). Exact area of the purchase
// region; exact ties go to the firm whose idiosyncratic half holds the rider.
double demand_duo(const MarketParams& params, double own, double other);

struct DemandGradient {
  double own = 0.0;    // d demand / d own price, 1/currency
  double other = 0.0;  // d demand / d rival price, 1/currency
  bool at_kink = false;
};

DemandGradient demand_duo_gradient(const MarketParams& params, double own,
                                   double other);

struct DemandSlope {
  double value = 0.0;
  bool at_kink = false;  // one-sided value at a change of demand branch
};

DemandSlope demand_duo_partial(const MarketParams& params, double own,
                               double other);

// Expected payoff (valuation minus price) of the riders buying from the firm
// posting `own`, per unit of potential-rider mass. Currency.
double purchase_surplus(const MarketParams& params, double own, double other);

struct McEstimate {
  double value = 0.0;
  double half_width = 0.0;  // 99% normal-approximation half-width
};

// Monte-Carlo estimate of firm 1's demand under the raw purchase rule.
McEstimate mc_demand_oracle(const MarketParams& params, double ell_1,
                            double ell_2, std::int64_t n_samples,
                            std::uint64_t seed);

}  // namespace amod
