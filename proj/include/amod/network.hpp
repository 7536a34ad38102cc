#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amod/demand.hpp"

namespace amod {

// Dense n x n table indexed by (origin, destination).
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int n, T fill) : n_(n), data_(static_cast<std::size_t>(n) * n, fill) {}

  int size() const { return n_; }
  T& operator()(int i, int j) { return data_[index(i, j)]; }
  const T& operator()(int i, int j) const { return data_[index(i, j)]; }
  const std::vector<T>& values() const { return data_; }
  std::vector<T>& values() { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * n_ + j;
  }
  int n_ = 0;
  std::vector<T> data_;
};

struct NetworkSpec {
  int n = 0;
  MarketParams params;
  Grid<double> theta;   // potential riders per period, zero diagonal
  Grid<int> tau;        // travel time in periods, >= 1 off the diagonal
  Grid<int> energy;     // battery units consumed per trip
  std::vector<double> elec_price;  // currency per battery unit, per node
  double beta_t = 0.2;  // per-period cost of a trip-making vehicle
  double beta_c = 0.1;  // per-period cost of a charging vehicle
  int e_max = 6;
  double delta_t_minutes = 5.0;

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

// Worst-case cost of one ride on (i, j): a round trip plus recharging the
// energy of both legs.
double lambda_bar(const NetworkSpec& spec, int i, int j);

struct AssumptionReport {
  bool assumption1 = false;  // sigma >= 3/5
  bool assumption2 = false;  // every lambda_bar within the cap
  double cap = 0.0;
  double max_lambda_bar = 0.0;
};

AssumptionReport validate_assumptions(const NetworkSpec& spec);

enum class NetworkKind { kSymmetricPair, kRing, kRandom };

struct CostProfile {
  enum class Kind { kAssumptionSafe, kUnconstrained };
  Kind kind = Kind::kAssumptionSafe;
  double beta_t = 0.2;
  double beta_c = 0.1;
  double price_lo = 0.32;
  double price_hi = 1.2;
};

NetworkKind parse_network_kind(const std::string& name);

// Deterministic per seed. The symmetric pair is the fixed analytic instance
// and ignores seed and profile.
NetworkSpec synth_network(NetworkKind kind, int n, std::uint64_t seed,
                          const CostProfile& profile = {});

}  // namespace amod
