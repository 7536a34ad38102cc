#include "amod/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "amod/analytics.hpp"

namespace amod {

namespace {

[[noreturn]] void bad(const std::string& what) {
  throw std::invalid_argument("invalid network: " + what);
}

}  // namespace

void NetworkSpec::validate() const {
  params.validate();
  if (n < 2) bad("need at least two nodes");
  if (theta.size() != n || tau.size() != n || energy.size() != n) {
    bad("matrix dimensions do not match n");
  }
  if (static_cast<int>(elec_price.size()) != n) bad("one price per node");
  if (e_max < 1) bad("e_max must be >= 1");
  if (!(beta_t >= 0) || !(beta_c >= 0) || !std::isfinite(beta_t) ||
      !std::isfinite(beta_c)) {
    bad("operational costs must be finite and nonnegative");
  }
  if (!(delta_t_minutes > 0)) bad("period length must be positive");
  for (int i = 0; i < n; ++i) {
    if (!(elec_price[i] >= 0) || !std::isfinite(elec_price[i])) {
      bad("electricity prices must be finite and nonnegative");
    }
    for (int j = 0; j < n; ++j) {
      const double th = theta(i, j);
      if (!std::isfinite(th) || th < 0) bad("theta must be finite, >= 0");
      if (i == j) {
        if (th != 0) bad("theta(i, i) must be zero");
        continue;
      }
      if (tau(i, j) < 1) bad("travel times must be >= 1 period");
      if (energy(i, j) < 0 || energy(i, j) > e_max) {
        bad("trip energy must lie in [0, e_max]");
      }
    }
  }
}

double lambda_bar(const NetworkSpec& spec, int i, int j) {
  if (i == j) throw std::invalid_argument("lambda_bar needs i != j");
  if (i < 0 || j < 0 || i >= spec.n || j >= spec.n) {
    throw std::out_of_range("lambda_bar: node out of range");
  }
  return spec.beta_t * (spec.tau(i, j) + spec.tau(j, i)) +
         spec.energy(i, j) * (spec.elec_price[j] + spec.beta_c) +
         spec.energy(j, i) * (spec.elec_price[i] + spec.beta_c);
}

AssumptionReport validate_assumptions(const NetworkSpec& spec) {
  AssumptionReport r;
  r.assumption1 = spec.params.assumption1();
  r.cap = assumption2_cap(spec.params);
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      if (i != j) r.max_lambda_bar = std::max(r.max_lambda_bar, lambda_bar(spec, i, j));
    }
  }
  r.assumption2 = r.max_lambda_bar <= r.cap;
  return r;
}

NetworkKind parse_network_kind(const std::string& name) {
  if (name == "symmetric-pair") return NetworkKind::kSymmetricPair;
  if (name == "ring") return NetworkKind::kRing;
  if (name == "random") return NetworkKind::kRandom;
  throw std::invalid_argument("unknown network kind: " + name);
}

namespace {

NetworkSpec blank(int n) {
  NetworkSpec s;
  s.n = n;
  s.theta = Grid<double>(n, 0.0);
  s.tau = Grid<int>(n, 0);
  s.energy = Grid<int>(n, 0);
  s.elec_price.assign(n, 0.0);
  return s;
}

NetworkSpec symmetric_pair() {
  NetworkSpec s = blank(2);
  s.theta(0, 1) = s.theta(1, 0) = 100.0;
  s.tau(0, 1) = s.tau(1, 0) = 1;
  s.energy(0, 1) = s.energy(1, 0) = 1;
  s.elec_price = {0.5, 0.5};
  s.e_max = 2;
  return s;
}

// Shrinks the trips of any pair over the cap: energy first, then time.
void enforce_cap(NetworkSpec& s) {
  const double cap = assumption2_cap(s.params);
  for (int i = 0; i < s.n; ++i) {
    for (int j = i + 1; j < s.n; ++j) {
      while (lambda_bar(s, i, j) > cap) {
        if (s.energy(i, j) > 1 || s.energy(j, i) > 1) {
          int& e = s.energy(i, j) >= s.energy(j, i) ? s.energy(i, j)
                                                    : s.energy(j, i);
          --e;
        } else if (s.tau(i, j) > 1 || s.tau(j, i) > 1) {
          int& t = s.tau(i, j) >= s.tau(j, i) ? s.tau(i, j) : s.tau(j, i);
          --t;
        } else {
          throw std::invalid_argument(
              "cost profile cannot satisfy the per-ride cost cap");
        }
      }
    }
  }
}

}  // namespace

NetworkSpec synth_network(NetworkKind kind, int n, std::uint64_t seed,
                          const CostProfile& profile) {
  if (n < 2) throw std::invalid_argument("synth_network needs n >= 2");
  if (kind == NetworkKind::kSymmetricPair) {
    if (n != 2) throw std::invalid_argument("symmetric-pair has n = 2");
    return symmetric_pair();
  }
  if (!(profile.price_lo >= 0) || profile.price_hi < profile.price_lo) {
    throw std::invalid_argument("electricity price range is empty");
  }
  const bool safe = profile.kind == CostProfile::Kind::kAssumptionSafe;
  NetworkSpec s = blank(n);
  s.beta_t = profile.beta_t;
  s.beta_c = profile.beta_c;
  if (safe) {
    const double cheapest =
        2 * profile.beta_t + 2 * (profile.price_lo + profile.beta_c);
    if (cheapest > assumption2_cap(s.params)) {
      throw std::invalid_argument(
          "cost profile infeasible: even unit trips exceed the cost cap");
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> px(n), py(n);
  for (int i = 0; i < n; ++i) {
    if (kind == NetworkKind::kRing) {
      const double a = 2 * std::numbers::pi * i / n;
      px[i] = 0.5 + 0.5 * std::cos(a);
      py[i] = 0.5 + 0.5 * std::sin(a);
    } else {
      px[i] = unit(rng);
      py[i] = unit(rng);
    }
  }
  for (int i = 0; i < n; ++i) {
    s.elec_price[i] =
        profile.price_lo + (profile.price_hi - profile.price_lo) * unit(rng);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      s.theta(i, j) = 5.0 + 35.0 * unit(rng);
      const double dist = std::hypot(px[i] - px[j], py[i] - py[j]);
      if (safe) {
        s.tau(i, j) = std::clamp(1 + static_cast<int>(dist * 2.5), 1, 3);
        s.energy(i, j) = dist > 0.7 ? 2 : 1;
      } else {
        s.tau(i, j) = std::max(1, static_cast<int>(std::ceil(dist * 6)));
        s.energy(i, j) =
            std::clamp(static_cast<int>(std::ceil(dist * 3)), 1, s.e_max);
      }
    }
  }
  if (safe) enforce_cap(s);
  s.validate();
  return s;
}

}  // namespace amod
