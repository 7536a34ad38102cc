#include "amod/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

#include <fmt/format.h>

#include "json.hpp"

namespace amod {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
      cell.pop_back();
    }
    const auto first = cell.find_first_not_of(' ');
    out.push_back(first == std::string::npos ? "" : cell.substr(first));
  }
  return out;
}

double parse_number(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  if (used != text.size()) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return v;
}

int parse_int(const std::string& text) {
  const double v = parse_number(text);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw std::invalid_argument("not an integer: '" + text + "'");
  }
  return static_cast<int>(v);
}

// Ceiling that ignores floating noise just above an integer.
int ceil_clean(double x) { return static_cast<int>(std::ceil(x - 1e-9)); }

}  // namespace

double parse_timestamp_minutes(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double s = 0.0;
  char sep = 0;
  if (std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d", &y, &mo, &d, &sep, &h,
                  &mi) == 6 &&
      (sep == ' ' || sep == 'T')) {
    const auto colon = text.find(':', text.find(':') + 1);
    if (colon != std::string::npos) s = parse_number(text.substr(colon + 1));
    const std::chrono::year_month_day date{std::chrono::year{y},
                                           std::chrono::month(mo),
                                           std::chrono::day(d)};
    if (!date.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 ||
        s >= 61) {
      throw std::invalid_argument("invalid timestamp: '" + text + "'");
    }
    const auto days = std::chrono::sys_days(date).time_since_epoch().count();
    return days * 1440.0 + h * 60.0 + mi + s / 60.0;
  }
  return parse_number(text);
}

std::vector<TripRecord> read_trips_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty trip file");
  const std::vector<std::string> expected{"pickup_region", "dropoff_region",
                                          "pickup_time", "duration_minutes",
                                          "distance_miles"};
  if (split_csv(line) != expected) {
    throw std::invalid_argument(
        "trip header must be pickup_region,dropoff_region,pickup_time,"
        "duration_minutes,distance_miles");
  }
  std::vector<TripRecord> out;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    try {
      if (cells.size() != expected.size()) {
        throw std::invalid_argument("expected 5 fields");
      }
      TripRecord r;
      r.pickup_region = parse_int(cells[0]) - 1;
      r.dropoff_region = parse_int(cells[1]) - 1;
      r.pickup_minute = parse_timestamp_minutes(cells[2]);
      r.duration_minutes = parse_number(cells[3]);
      r.distance_miles = parse_number(cells[4]);
      out.push_back(r);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(fmt::format("line {}: {}", number, e.what()));
    }
  }
  return out;
}

void RunConfig::validate() const {
  auto bad = [](const std::string& what) {
    throw std::invalid_argument("config: " + what);
  };
  if (!(delta_t_minutes > 0)) bad("delta_t_minutes must be > 0");
  MarketParams{sigma, ell_max}.validate();
  if (!(beta_t >= 0) || !(beta_c >= 0)) bad("costs must be >= 0");
  if (e_max < 1) bad("e_max must be >= 1");
  if (!(unit_energy_kwh > 0) || !(consumption_kwh_per_mile > 0)) {
    bad("energy figures must be > 0");
  }
  if (!(price_lo >= 0) || !(price_hi >= price_lo)) bad("empty price range");
  for (double p : elec_price) {
    if (!(p >= 0) || !std::isfinite(p)) bad("electricity prices must be >= 0");
  }
  if (horizon < 1) bad("horizon must be >= 1");
  if (mpc.horizon < 1) bad("mpc.horizon must be >= 1");
  if (!(mpc.penalty >= 0)) bad("mpc.penalty must be >= 0");
  if (!(mpc.early_bias >= 0)) bad("mpc.early_bias must be >= 0");
}

IngestResult ingest_trips(const std::vector<TripRecord>& records, int n,
                          const IngestWindow& window, const RunConfig& config) {
  config.validate();
  if (n < 2) throw std::invalid_argument("need at least two regions");
  const double periods =
      (window.end_minute - window.start_minute) / config.delta_t_minutes;
  if (!(periods > 0)) throw std::invalid_argument("window is empty");

  Grid<int> count(n, 0);
  Grid<double> duration(n, 0.0), distance(n, 0.0);
  double total_duration = 0.0, total_distance = 0.0;
  for (const TripRecord& r : records) {
    if (r.pickup_region < 0 || r.pickup_region >= n || r.dropoff_region < 0 ||
        r.dropoff_region >= n) {
      throw std::invalid_argument(fmt::format(
          "region out of range 1..{}: {} -> {}", n, r.pickup_region + 1,
          r.dropoff_region + 1));
    }
    if (!(r.duration_minutes > 0) || !(r.distance_miles > 0)) {
      throw std::invalid_argument("trip duration and distance must be > 0");
    }
    if (r.pickup_minute < window.start_minute ||
        r.pickup_minute >= window.end_minute) {
      continue;
    }
    if (r.pickup_region == r.dropoff_region) continue;
    const int i = r.pickup_region, j = r.dropoff_region;
    ++count(i, j);
    duration(i, j) += r.duration_minutes;
    distance(i, j) += r.distance_miles;
    total_duration += r.duration_minutes;
    total_distance += r.distance_miles;
  }
  if (total_distance <= 0) {
    throw std::invalid_argument("no usable trips inside the window");
  }
  const double pace = total_duration / total_distance;  // minutes per mile

  // Mean distances, with the reverse direction standing in when one side is
  // unobserved, then shortest chains for the remaining pairs.
  Grid<double> chain(n, kInf);
  for (int i = 0; i < n; ++i) {
    chain(i, i) = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (count(i, j) > 0) {
        chain(i, j) = distance(i, j) / count(i, j);
      } else if (count(j, i) > 0) {
        chain(i, j) = distance(j, i) / count(j, i);
      }
    }
  }
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        chain(i, j) = std::min(chain(i, j), chain(i, k) + chain(k, j));
      }
    }
  }

  IngestResult out;
  out.trips = count;
  out.imputed = Grid<int>(n, 0);
  NetworkSpec& spec = out.spec;
  spec.n = n;
  spec.params = MarketParams{config.sigma, config.ell_max};
  spec.theta = Grid<double>(n, 0.0);
  spec.tau = Grid<int>(n, 0);
  spec.energy = Grid<int>(n, 0);
  spec.beta_t = config.beta_t;
  spec.beta_c = config.beta_c;
  spec.e_max = config.e_max;
  spec.delta_t_minutes = config.delta_t_minutes;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double minutes = 0.0, miles = 0.0;
      if (count(i, j) > 0) {
        spec.theta(i, j) = count(i, j) / periods;
        minutes = duration(i, j) / count(i, j);
        miles = distance(i, j) / count(i, j);
      } else {
        if (!std::isfinite(chain(i, j))) {
          throw std::runtime_error(fmt::format(
              "cannot impute pair {} -> {}: no chain of observed trips", i + 1,
              j + 1));
        }
        out.imputed(i, j) = 1;
        miles = chain(i, j);
        minutes = miles * pace;
      }
      spec.tau(i, j) = std::max(1, ceil_clean(minutes / config.delta_t_minutes));
      spec.energy(i, j) = std::clamp(
          ceil_clean(miles * config.consumption_kwh_per_mile /
                     config.unit_energy_kwh),
          1, config.e_max);
    }
  }
  if (!config.elec_price.empty()) {
    if (static_cast<int>(config.elec_price.size()) != n) {
      throw std::invalid_argument("config: elec_price needs one entry per region");
    }
    spec.elec_price = config.elec_price;
  } else {
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> price(config.price_lo, config.price_hi);
    spec.elec_price.resize(n);
    for (double& p : spec.elec_price) p = price(rng);
  }
  spec.validate();
  return out;
}

namespace {

json price_grid(const Grid<double>& g) {
  json rows = json::array();
  for (int i = 0; i < g.size(); ++i) {
    json row = json::array();
    for (int j = 0; j < g.size(); ++j) {
      if (std::isfinite(g(i, j))) {
        row.push_back(g(i, j));
      } else {
        row.push_back(nullptr);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class T>
json int_grid(const Grid<T>& g) {
  json rows = json::array();
  for (int i = 0; i < g.size(); ++i) {
    json row = json::array();
    for (int j = 0; j < g.size(); ++j) row.push_back(g(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Strict reader: rejects unknown keys and type mismatches with a path.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
  }

  const json& at(const std::string& key) {
    seen_.push_back(key);
    if (!j_.contains(key)) fail("missing key '" + key + "'");
    return j_.at(key);
  }
  bool has(const std::string& key) const { return j_.contains(key); }

  double number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) fail("'" + key + "' must be a number");
    return v.get<double>();
  }
  int integer(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number_integer()) fail("'" + key + "' must be an integer");
    return v.get<int>();
  }
  template <class T>
  void optional(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = at(key);
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      fail("'" + key + "' has the wrong type");
    }
  }

  Grid<double> grid(const std::string& key, int n, bool allow_null) {
    const json& v = at(key);
    Grid<double> g(n, 0.0);
    check_square(v, key, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const json& c = v[i][j];
        if (c.is_null() && allow_null) {
          g(i, j) = kAbsent;
        } else if (c.is_number()) {
          g(i, j) = c.get<double>();
        } else {
          fail(fmt::format("'{}'[{}][{}] must be a number", key, i, j));
        }
      }
    }
    return g;
  }
  Grid<int> int_grid(const std::string& key, int n) {
    const json& v = at(key);
    Grid<int> g(n, 0);
    check_square(v, key, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (!v[i][j].is_number_integer()) {
          fail(fmt::format("'{}'[{}][{}] must be an integer", key, i, j));
        }
        g(i, j) = v[i][j].get<int>();
      }
    }
    return g;
  }
  std::vector<double> vector(const std::string& key) {
    const json& v = at(key);
    if (!v.is_array()) fail("'" + key + "' must be an array");
    std::vector<double> out;
    for (const json& c : v) {
      if (!c.is_number()) fail("'" + key + "' must hold numbers");
      out.push_back(c.get<double>());
    }
    return out;
  }

  void finish() {
    for (const auto& item : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), item.key()) == seen_.end()) {
        fail("unknown key '" + item.key() + "'");
      }
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument(where_ + ": " + what);
  }

 private:
  void check_square(const json& v, const std::string& key, int n) const {
    if (!v.is_array() || static_cast<int>(v.size()) != n) {
      fail(fmt::format("'{}' must have {} rows", key, n));
    }
    for (const json& row : v) {
      if (!row.is_array() || static_cast<int>(row.size()) != n) {
        fail(fmt::format("'{}' rows must have {} entries", key, n));
      }
    }
  }

  const json& j_;
  std::string where_;
  std::vector<std::string> seen_;
};

json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(what + ": " + e.what());
  }
}

}  // namespace

std::string spec_to_json(const NetworkSpec& spec) {
  json j;
  j["n"] = spec.n;
  j["sigma"] = spec.params.sigma;
  j["ell_max"] = spec.params.ell_max;
  j["theta"] = price_grid(spec.theta);
  j["tau"] = int_grid(spec.tau);
  j["energy"] = int_grid(spec.energy);
  j["elec_price"] = spec.elec_price;
  j["beta_t"] = spec.beta_t;
  j["beta_c"] = spec.beta_c;
  j["e_max"] = spec.e_max;
  j["delta_t_minutes"] = spec.delta_t_minutes;
  return j.dump(2) + "\n";
}

NetworkSpec spec_from_json(const std::string& text) {
  const json j = parse(text, "spec");
  Reader r(j, "spec");
  NetworkSpec spec;
  spec.n = r.integer("n");
  if (spec.n < 2 || spec.n > 10000) r.fail("'n' out of range");
  spec.params.sigma = r.number("sigma");
  spec.params.ell_max = r.number("ell_max");
  spec.theta = r.grid("theta", spec.n, false);
  spec.tau = r.int_grid("tau", spec.n);
  spec.energy = r.int_grid("energy", spec.n);
  spec.elec_price = r.vector("elec_price");
  r.optional("beta_t", spec.beta_t);
  r.optional("beta_c", spec.beta_c);
  r.optional("e_max", spec.e_max);
  r.optional("delta_t_minutes", spec.delta_t_minutes);
  r.finish();
  spec.validate();
  return spec;
}

std::string solution_to_json(const StaticSolution& s) {
  json j;
  const int n = s.prices.size();
  j["n"] = n;
  j["e_max"] = s.flow.e_max();
  j["prices"] = price_grid(s.prices);
  j["lambda"] = price_grid(s.lambda);
  j["served"] = price_grid(s.served);
  json route = json::array(), charge = json::array();
  for (int i = 0; i < n; ++i) {
    json per_i = json::array();
    for (int jj = 0; jj < n; ++jj) {
      json per_j = json::array();
      for (int e = 0; e <= s.flow.e_max(); ++e) {
        per_j.push_back(s.flow.route(i, jj, e));
      }
      per_i.push_back(std::move(per_j));
    }
    route.push_back(std::move(per_i));
    json c = json::array();
    for (int e = 0; e <= s.flow.e_max(); ++e) c.push_back(s.flow.charge(i, e));
    charge.push_back(std::move(c));
  }
  j["route"] = std::move(route);
  j["charge"] = std::move(charge);
  j["mu"] = s.mu;
  j["objective"] = s.objective;
  j["revenue"] = s.revenue;
  j["op_cost"] = s.op_cost;
  j["charge_cost"] = s.charge_cost;
  j["primal_objective"] = s.primal_objective;
  j["dual_objective"] = s.dual_objective;
  j["iterations"] = s.iterations;
  j["converged"] = s.converged;
  j["warnings"] = s.warnings;
  return j.dump(2) + "\n";
}

StaticSolution solution_from_json(const std::string& text) {
  const json j = parse(text, "solution");
  Reader r(j, "solution");
  StaticSolution s;
  const int n = r.integer("n");
  const int e_max = r.integer("e_max");
  if (n < 1 || e_max < 0) r.fail("bad dimensions");
  s.prices = r.grid("prices", n, true);
  s.lambda = r.grid("lambda", n, true);
  s.served = r.grid("served", n, true);
  s.flow = FleetFlow(n, e_max);
  try {
    const json& route = r.at("route");
    const json& charge = r.at("charge");
    for (int i = 0; i < n; ++i) {
      for (int jj = 0; jj < n; ++jj) {
        for (int e = 0; e <= e_max; ++e) {
          s.flow.route(i, jj, e) = route.at(i).at(jj).at(e).get<double>();
        }
      }
      for (int e = 0; e <= e_max; ++e) {
        s.flow.charge(i, e) = charge.at(i).at(e).get<double>();
      }
    }
    s.mu = r.at("mu").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    r.fail(std::string("malformed flow: ") + e.what());
  }
  s.objective = r.number("objective");
  s.revenue = r.number("revenue");
  s.op_cost = r.number("op_cost");
  s.charge_cost = r.number("charge_cost");
  s.primal_objective = r.number("primal_objective");
  s.dual_objective = r.number("dual_objective");
  s.iterations = r.integer("iterations");
  r.optional("converged", s.converged);
  r.optional("warnings", s.warnings);
  r.finish();
  return s;
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["delta_t_minutes"] = c.delta_t_minutes;
  j["sigma"] = c.sigma;
  j["ell_max"] = c.ell_max;
  j["beta_t"] = c.beta_t;
  j["beta_c"] = c.beta_c;
  j["e_max"] = c.e_max;
  j["unit_energy_kwh"] = c.unit_energy_kwh;
  j["consumption_kwh_per_mile"] = c.consumption_kwh_per_mile;
  j["price_lo"] = c.price_lo;
  j["price_hi"] = c.price_hi;
  j["elec_price"] = c.elec_price;
  j["seed"] = c.seed;
  j["horizon"] = c.horizon;
  j["mpc"] = {{"horizon", c.mpc.horizon},
              {"penalty", c.mpc.penalty},
              {"early_bias", c.mpc.early_bias}};
  return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
  const json j = parse(text, "config");
  Reader r(j, "config");
  RunConfig c;
  r.optional("delta_t_minutes", c.delta_t_minutes);
  r.optional("sigma", c.sigma);
  r.optional("ell_max", c.ell_max);
  r.optional("beta_t", c.beta_t);
  r.optional("beta_c", c.beta_c);
  r.optional("e_max", c.e_max);
  r.optional("unit_energy_kwh", c.unit_energy_kwh);
  r.optional("consumption_kwh_per_mile", c.consumption_kwh_per_mile);
  r.optional("price_lo", c.price_lo);
  r.optional("price_hi", c.price_hi);
  r.optional("elec_price", c.elec_price);
  r.optional("seed", c.seed);
  r.optional("horizon", c.horizon);
  if (r.has("mpc")) {
    Reader m(r.at("mpc"), "config.mpc");
    m.optional("horizon", c.mpc.horizon);
    m.optional("penalty", c.mpc.penalty);
    m.optional("early_bias", c.mpc.early_bias);
    m.finish();
  }
  r.finish();
  c.validate();
  return c;
}

std::string summary_to_json(const std::vector<RunSummary>& summary,
                            const std::string& label) {
  json firms = json::array();
  for (const RunSummary& s : summary) {
    firms.push_back({{"firm", s.firm},
                     {"periods", s.periods},
                     {"fleet", s.fleet},
                     {"mean_profit_minus_penalty", s.mean_profit_minus_penalty},
                     {"var_profit_minus_penalty", s.var_profit_minus_penalty},
                     {"mean_profit", s.mean_profit},
                     {"mean_wait_minutes", s.mean_wait_minutes},
                     {"var_wait_minutes", s.var_wait_minutes},
                     {"mean_normalized_queue", s.mean_normalized_queue},
                     {"final_outstanding", s.final_outstanding}});
  }
  json j;
  j["label"] = label;
  j["firms"] = std::move(firms);
  return j.dump(2) + "\n";
}

double solver_tolerance(double fallback) {
  const char* env = std::getenv("AMOD_SOLVER_TOL");
  if (env == nullptr || *env == '\0') return fallback;
  double v = 0.0;
  try {
    v = parse_number(env);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(std::string("AMOD_SOLVER_TOL is not a number: ") + env);
  }
  if (!(v > 0) || v >= 1) {
    throw std::invalid_argument("AMOD_SOLVER_TOL must lie in (0, 1)");
  }
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += fmt::format(".tmp{}", static_cast<long>(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot replace " + path.string());
  }
}

std::string solution_table(const NetworkSpec& spec, const StaticSolution& s) {
  std::string out = fmt::format("{:>6} {:>6} {:>12} {:>12} {:>12}\n", "origin",
                                "dest", "price", "lambda", "served");
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      if (i == j || spec.theta(i, j) <= 0) continue;
      out += fmt::format("{:>6} {:>6} {:>12.6f} {:>12.6f} {:>12.6f}\n", i + 1,
                         j + 1, s.prices(i, j), s.lambda(i, j), s.served(i, j));
    }
  }
  out += fmt::format(
      "objective {:.6f}  revenue {:.6f}  op_cost {:.6f}  charge_cost {:.6f}  "
      "fleet {:.3f}\n",
      s.objective, s.revenue, s.op_cost, s.charge_cost, s.flow.fleet_size(spec));
  return out;
}

}  // namespace amod
