#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "amod/mpc.hpp"

namespace amod {

// One observed ride. Regions are 1-based in files and 0-based here.
struct TripRecord {
  int pickup_region = 0;
  int dropoff_region = 0;
  double pickup_minute = 0.0;  // minutes since 1970-01-01 00:00
  double duration_minutes = 0.0;
  double distance_miles = 0.0;
};

// Accepts "YYYY-MM-DD HH:MM[:SS]" (also with 'T') or a plain number of
// minutes. Throws std::invalid_argument otherwise.
double parse_timestamp_minutes(const std::string& text);

// Header: pickup_region,dropoff_region,pickup_time,duration_minutes,
// distance_miles. Throws std::invalid_argument naming the bad line.
std::vector<TripRecord> read_trips_csv(std::istream& in);

struct MpcSettings {
  int horizon = 10;
  double penalty = 4.0;
  double early_bias = 1e-3;

  bool operator==(const MpcSettings&) const = default;
};

struct RunConfig {
  double delta_t_minutes = 5.0;
  double sigma = 0.6;
  double ell_max = 50.0;
  double beta_t = 0.2;
  double beta_c = 0.1;
  int e_max = 6;
  double unit_energy_kwh = 20.0 * 5.0 / 60.0;  // 20 kW charger, one period
  double consumption_kwh_per_mile = 0.34;
  double price_lo = 0.32;
  double price_hi = 1.2;
  std::vector<double> elec_price;  // per node; overrides the range
  std::uint64_t seed = 1;
  int horizon = 200;
  MpcSettings mpc;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

struct IngestWindow {
  double start_minute = 0.0;
  double end_minute = 0.0;  // exclusive
};

struct IngestResult {
  NetworkSpec spec;
  Grid<int> trips;      // observations per OD pair inside the window
  Grid<int> imputed;    // 1 where travel time and energy were estimated
};

// Rides within one region are dropped. Unobserved pairs get theta = 0;
// their distance is the shortest chain of observed mean distances and their
// duration that distance at the fleet-wide mean pace.
IngestResult ingest_trips(const std::vector<TripRecord>& records, int n,
                          const IngestWindow& window, const RunConfig& config);

// Structured text (JSON). Finite doubles are written with round-trip
// precision; kAbsent is written as null.
std::string spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const std::string& text);

std::string solution_to_json(const StaticSolution& solution);
StaticSolution solution_from_json(const std::string& text);

std::string config_to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys are an error.
RunConfig config_from_json(const std::string& text);

std::string summary_to_json(const std::vector<RunSummary>& summary,
                            const std::string& label);

// Tolerance from AMOD_SOLVER_TOL when set, else `fallback`.
double solver_tolerance(double fallback);

std::string read_file(const std::filesystem::path& path);
// Writes a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content);

// Aligned plain-text table of static results.
std::string solution_table(const NetworkSpec& spec,
                           const StaticSolution& solution);

}  // namespace amod
