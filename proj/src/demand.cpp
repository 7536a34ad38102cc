#include "amod/demand.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace amod {

void MarketParams::validate() const {
  if (!std::isfinite(sigma) || sigma < 0.0 || sigma > 1.0) {
    throw std::invalid_argument("sigma must lie in [0, 1], got " +
                                std::to_string(sigma));
  }
  if (!std::isfinite(ell_max) || ell_max <= 0.0) {
    throw std::invalid_argument("ell_max must be positive and finite");
  }
}

ValuationSample make_valuation(const MarketParams& params, double x,
                               double y) {
  const double s = params.sigma;
  return {x, y, s * x + (1.0 - s) * y,
          s * x + (1.0 - s) * (params.ell_max - y)};
}

namespace {

struct Point {
  double x;
  double y;
};

// Half-plane a*x + b*y >= c in the unit square of scaled (x, y).
struct HalfPlane {
  double a;
  double b;
  double c;
  double value(const Point& p) const { return a * p.x + b * p.y - c; }
};

using Polygon = std::vector<Point>;

Polygon unit_square() { return {{0, 0}, {1, 0}, {1, 1}, {0, 1}}; }

Polygon clip(const Polygon& poly, const HalfPlane& h) {
  Polygon out;
  if (poly.empty()) return out;
  out.reserve(poly.size() + 2);
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point& p = poly[k];
    const Point& q = poly[(k + 1) % poly.size()];
    const double fp = h.value(p);
    const double fq = h.value(q);
    if (fp >= 0) out.push_back(p);
    if ((fp >= 0) != (fq >= 0)) {
      const double t = fp / (fp - fq);
      out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
    }
  }
  return out;
}

double area(const Polygon& poly) {
  double twice = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point& p = poly[k];
    const Point& q = poly[(k + 1) % poly.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * std::abs(twice);
}

// Integral of (a*x + b*y) over the polygon.
double linear_moment(const Polygon& poly, double a, double b) {
  double mx = 0.0;
  double my = 0.0;
  double twice = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point& p = poly[k];
    const Point& q = poly[(k + 1) % poly.size()];
    const double cross = p.x * q.y - q.x * p.y;
    twice += cross;
    mx += (p.x + q.x) * cross;
    my += (p.y + q.y) * cross;
  }
  if (twice == 0.0) return 0.0;
  // Centroid moments: integral x dA = mx / 6 with consistent orientation.
  const double sign = twice > 0 ? 1.0 : -1.0;
  return sign * (a * mx + b * my) / 6.0;
}

// Purchase region of the firm posting `own` (scaled prices). The rival's
// region is the mirror image y -> 1 - y, so one construction serves both.
struct Region {
  Polygon poly;
  std::vector<HalfPlane> lines;  // price-dependent boundaries, in order
  std::vector<double> shift;     // d(boundary offset)/d(own), d/d(other)
  std::vector<double> shift_other;
};

Region purchase_region(double s, double own, double other) {
  Region r;
  r.poly = unit_square();
  const HalfPlane positive{s, 1.0 - s, own};
  r.poly = clip(r.poly, positive);
  r.lines.push_back(positive);
  r.shift.push_back(1.0);
  r.shift_other.push_back(0.0);
  if (std::isfinite(other)) {
    const double gap = own - other;
    if (s < 1.0) {
      // (1 - s)(2y - 1) >= own - other
      const HalfPlane prefer{0.0, 2.0 * (1.0 - s), gap + (1.0 - s)};
      r.poly = clip(r.poly, prefer);
      r.lines.push_back(prefer);
      r.shift.push_back(1.0);
      r.shift_other.push_back(-1.0);
    } else if (gap > 0.0) {
      r.poly.clear();
    } else if (gap == 0.0) {
      // Identical valuations and prices: the idiosyncratic draw decides.
      r.poly = clip(r.poly, HalfPlane{0.0, 1.0, 0.5});
    }
  }
  return r;
}

bool on_line(const Point& p, const HalfPlane& h) {
  const double norm = std::hypot(h.a, h.b);
  return norm > 0 && std::abs(h.value(p)) <= 1e-12 * std::max(1.0, norm);
}

int square_edges_through(const Point& p) {
  int count = 0;
  for (double v : {p.x, p.y}) {
    if (std::abs(v) <= 1e-12 || std::abs(v - 1.0) <= 1e-12) ++count;
  }
  return count;
}

void check_price(double ell, const char* what) {
  if (std::isnan(ell) || ell < 0.0) {
    throw std::invalid_argument(std::string(what) +
                                " price must be nonnegative");
  }
}

}  // namespace

double demand_mono(const MarketParams& params, double ell) {
  params.validate();
  check_price(ell, "own");
  if (!std::isfinite(ell)) return 0.0;
  const double p = ell / params.ell_max;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  // The monopoly region only depends on the unordered pair {sigma, 1-sigma}.
  const double s = std::max(params.sigma, 1.0 - params.sigma);
  if (s >= 1.0) return 1.0 - p;
  const double spread = 2.0 * s * (1.0 - s);
  if (p < 1.0 - s) return 1.0 - p * p / spread;
  if (p < s) return (1.0 + s - 2.0 * p) / (2.0 * s);
  return (1.0 - p) * (1.0 - p) / spread;
}

double demand_duo(const MarketParams& params, double own, double other) {
  params.validate();
  if (!std::isfinite(own)) {
    throw std::invalid_argument("own price must be finite");
  }
  check_price(own, "own");
  check_price(other, "rival");
  if (!std::isfinite(other)) return demand_mono(params, own);
  const Region r = purchase_region(params.sigma, own / params.ell_max,
                                   other / params.ell_max);
  return std::clamp(area(r.poly), 0.0, 1.0);
}

DemandGradient demand_duo_gradient(const MarketParams& params, double own,
                                   double other) {
  params.validate();
  if (!std::isfinite(own)) {
    throw std::invalid_argument("own price must be finite");
  }
  check_price(own, "own");
  check_price(other, "rival");
  const Region r = purchase_region(params.sigma, own / params.ell_max,
                                   other / params.ell_max);
  DemandGradient g;
  const Polygon& poly = r.poly;
  if (poly.size() < 3) {
    g.at_kink = !poly.empty();
    return g;
  }
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point& p = poly[k];
    const Point& q = poly[(k + 1) % poly.size()];
    for (std::size_t l = 0; l < r.lines.size(); ++l) {
      const HalfPlane& h = r.lines[l];
      if (on_line(p, h) && on_line(q, h)) {
        // Raising the offset c by dc moves the edge inward by dc / |grad|.
        const double rate = std::hypot(p.x - q.x, p.y - q.y) /
                            std::hypot(h.a, h.b);
        g.own -= rate * r.shift[l];
        g.other -= rate * r.shift_other[l];
      }
    }
    int structures = square_edges_through(p);
    bool touches_price_line = false;
    for (const HalfPlane& h : r.lines) {
      if (on_line(p, h)) {
        ++structures;
        touches_price_line = true;
      }
    }
    if (touches_price_line && structures >= 3) g.at_kink = true;
  }
  g.own /= params.ell_max;
  g.other /= params.ell_max;
  return g;
}

DemandSlope demand_duo_partial(const MarketParams& params, double own,
                               double other) {
  const DemandGradient g = demand_duo_gradient(params, own, other);
  return {g.own, g.at_kink};
}

double purchase_surplus(const MarketParams& params, double own,
                        double other) {
  params.validate();
  check_price(own, "own");
  check_price(other, "rival");
  if (!std::isfinite(own)) return 0.0;
  const double s = params.sigma;
  const double p = own / params.ell_max;
  const Region r = purchase_region(s, p, other / params.ell_max);
  const double payoff =
      linear_moment(r.poly, s, 1.0 - s) - p * area(r.poly);
  return std::max(0.0, payoff) * params.ell_max;
}

McEstimate mc_demand_oracle(const MarketParams& params, double ell_1,
                            double ell_2, std::int64_t n_samples,
                            std::uint64_t seed) {
  params.validate();
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, params.ell_max);
  std::int64_t buyers = 0;
  for (std::int64_t k = 0; k < n_samples; ++k) {
    const double x = unif(rng);
    const double y = unif(rng);
    const ValuationSample v = make_valuation(params, x, y);
    const double pay1 = v.v1 - ell_1;
    if (!(pay1 > 0.0)) continue;
    if (!std::isfinite(ell_2)) {
      ++buyers;
      continue;
    }
    const double pay2 = v.v2 - ell_2;
    if (pay1 > pay2 || (pay1 == pay2 && y >= 0.5 * params.ell_max)) ++buyers;
  }
  const double n = static_cast<double>(n_samples);
  const double est = static_cast<double>(buyers) / n;
  return {est, 2.5758293035489 * std::sqrt(est * (1.0 - est) / n)};
}

}  // namespace amod
