#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "amod/analytics.hpp"
#include "amod/equilibrium.hpp"
#include "amod/io.hpp"
#include "amod/mpc.hpp"

namespace {

using namespace amod;

FlowOptions flow_options() {
  FlowOptions o;
  o.qp.tolerance = solver_tolerance(o.qp.tolerance);
  return o;
}

RunConfig load_config(const std::string& path) {
  return path.empty() ? RunConfig{} : config_from_json(read_file(path));
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    write_file_atomic(path, content);
  }
}

std::string interval_row(const std::string& name, const Interval& v) {
  return fmt::format("{:<24} {:>10.4f} {:>10.4f}\n", name, v.lo, v.hi);
}

std::string bounds_text(const BoundReport& r) {
  std::string out = fmt::format(
      "Ratios of average prices, induced demand, profits, and consumer "
      "surplus (sigma = {})\n{:<24} {:>10} {:>10}\n",
      r.params.sigma, "ratio (duo / mono)", "lower", "upper");
  out += interval_row("price", r.ratio_price);
  out += interval_row("induced demand", r.ratio_demand);
  out += interval_row("profit", r.ratio_profit);
  out += interval_row("consumer surplus", r.ratio_cs);
  out += fmt::format("\n{:<24} {:>10} {:>10}\n", "level", "lower", "upper");
  out += interval_row("price mono", r.price_mono);
  out += interval_row("price duo", r.price_duo);
  out += interval_row("demand mono", r.demand_mono);
  out += interval_row("demand duo", r.demand_duo);
  out += interval_row("profit mono", r.profit_mono);
  out += interval_row("profit duo", r.profit_duo);
  out += interval_row("cs mono", r.cs_mono);
  out += interval_row("cs duo", r.cs_duo);
  return out;
}

nlohmann::json interval_json(const Interval& v) { return {v.lo, v.hi}; }

std::string bounds_json(const BoundReport& r,
                        const std::vector<std::pair<double, PriceGapBounds>>& gaps) {
  nlohmann::json j;
  j["sigma"] = r.params.sigma;
  j["ell_max"] = r.params.ell_max;
  j["ratio_price"] = interval_json(r.ratio_price);
  j["ratio_demand"] = interval_json(r.ratio_demand);
  j["ratio_profit"] = interval_json(r.ratio_profit);
  j["ratio_cs"] = interval_json(r.ratio_cs);
  j["price_mono"] = interval_json(r.price_mono);
  j["price_duo"] = interval_json(r.price_duo);
  j["demand_mono"] = interval_json(r.demand_mono);
  j["demand_duo"] = interval_json(r.demand_duo);
  j["profit_mono"] = interval_json(r.profit_mono);
  j["profit_duo"] = interval_json(r.profit_duo);
  j["cs_mono"] = interval_json(r.cs_mono);
  j["cs_duo"] = interval_json(r.cs_duo);
  nlohmann::json g = nlohmann::json::array();
  for (const auto& [lb, b] : gaps) {
    g.push_back({{"lambda_bar", lb}, {"lower", b.lower}, {"upper", b.upper}});
  }
  j["price_gap"] = std::move(g);
  return j.dump(2) + "\n";
}

std::string summary_table(const std::string& label,
                          const std::vector<RunSummary>& summary,
                          double static_objective) {
  std::string out = fmt::format("{}\n{:<5} {:>22} {:>14} {:>18} {:>12} {:>7}\n",
                                label, "firm", "profit - penalty", "profit",
                                "avg wait (min)", "norm queue", "fleet");
  for (const RunSummary& s : summary) {
    out += fmt::format("{:<5} {:>22.3f} {:>14.3f} {:>18.4f} {:>12.5f} {:>7}\n",
                       s.firm + 1, s.mean_profit_minus_penalty, s.mean_profit,
                       s.mean_wait_minutes, s.mean_normalized_queue, s.fleet);
  }
  out += fmt::format("static objective per firm {:.3f}\n", static_objective);
  return out;
}

int run_report(const std::vector<std::string>& inputs, const std::string& out) {
  std::string table = fmt::format("{:<28} {:<5} {:>22} {:>18} {:>12}\n", "run",
                                  "firm", "profit - penalty", "avg wait (min)",
                                  "norm queue");
  for (const std::string& path : inputs) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
      for (const auto& f : j.at("firms")) {
        table += fmt::format("{:<28} {:<5} {:>22.3f} {:>18.4f} {:>12.5f}\n",
                             j.at("label").get<std::string>(),
                             f.at("firm").get<int>() + 1,
                             f.at("mean_profit_minus_penalty").get<double>(),
                             f.at("mean_wait_minutes").get<double>(),
                             f.at("mean_normalized_queue").get<double>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(path + ": not a run summary (" + e.what() + ")");
    }
  }
  emit(out, table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electric mobility-on-demand market planning and simulation"};
  app.require_subcommand(1);

  std::string spec_path, out_path, table_path, config_path;

  auto* mono = app.add_subcommand("solve-mono", "Static monopoly plan");
  mono->add_option("--spec", spec_path, "Network spec (JSON)")->required();
  mono->add_option("--out", out_path, "Solution file (JSON)")->required();
  mono->add_option("--table", table_path, "Human-readable table (default stdout)");

  auto* duo = app.add_subcommand("solve-duo", "Symmetric duopoly equilibrium plan");
  duo->add_option("--spec", spec_path, "Network spec (JSON)")->required();
  duo->add_option("--out", out_path, "Solution file for one firm (JSON)")->required();
  duo->add_option("--table", table_path, "Human-readable table (default stdout)");

  std::string init = "mono", trace_path;
  int max_rounds = 50;
  bool simultaneous = false;
  auto* br = app.add_subcommand("best-response", "Best-response dynamics");
  br->add_option("--spec", spec_path, "Network spec (JSON)")->required();
  br->add_option("--init", init, "Initial prices: mono, or a solution file");
  br->add_option("--out", out_path, "Firm 1 final solution (JSON)")->required();
  br->add_option("--trace", trace_path, "Per-step price trace (CSV)");
  br->add_option("--max-rounds", max_rounds, "Round cap")->check(CLI::PositiveNumber);
  br->add_flag("--simultaneous", simultaneous, "Both firms answer the previous round");

  double sigma = 0.6, ell_max = 50.0;
  std::vector<double> lambda_bars;
  auto* bounds = app.add_subcommand("bounds", "Monopoly/duopoly comparison bounds");
  bounds->add_option("--sigma", sigma, "Correlation weight in [3/5, 1]");
  bounds->add_option("--ell-max", ell_max, "Valuation ceiling");
  bounds->add_option("--lambda-bar", lambda_bars, "Worst-case ride costs for price-gap bounds");
  bounds->add_option("--out", out_path, "Report (JSON)");
  bounds->add_option("--table", table_path, "Table (default stdout)");

  std::string controller = "mpc-sp", firms_mode = "mono", prefix;
  std::uint64_t seed = 1;
  int horizon = 0;
  auto* sim = app.add_subcommand("simulate", "Stochastic simulation");
  sim->add_option("--spec", spec_path, "Network spec (JSON)")->required();
  sim->add_option("--controller", controller, "mpc-sp | mpc-dp | static-random")
      ->check(CLI::IsMember({"mpc-sp", "mpc-dp", "static-random"}));
  sim->add_option("--firms", firms_mode, "mono | duo")->check(CLI::IsMember({"mono", "duo"}));
  sim->add_option("--seed", seed, "Random seed");
  sim->add_option("--horizon", horizon, "Periods (default from config)");
  sim->add_option("--config", config_path, "Run config (JSON)");
  sim->add_option("--out-prefix", prefix, "Writes PREFIX.csv and PREFIX.json")->required();

  std::string trips_path, start_text, end_text;
  int regions = 0;
  auto* ingest = app.add_subcommand("ingest-trips", "Trip records to a network spec");
  ingest->add_option("--trips", trips_path, "Trip CSV")->required();
  ingest->add_option("--regions", regions, "Number of regions")->required();
  ingest->add_option("--start", start_text, "Window start (timestamp or minutes)")->required();
  ingest->add_option("--end", end_text, "Window end, exclusive")->required();
  ingest->add_option("--config", config_path, "Run config (JSON)");
  ingest->add_option("--out", out_path, "Network spec (JSON)")->required();

  std::vector<std::string> inputs;
  auto* report = app.add_subcommand("report", "Compare simulation summaries");
  report->add_option("inputs", inputs, "Summary files")->required();
  report->add_option("--out", out_path, "Table file (default stdout)");

  std::string kind = "ring", profile = "safe";
  int nodes = 5;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic network");
  synth->add_option("--kind", kind, "symmetric-pair | ring | random");
  synth->add_option("--n", nodes, "Nodes");
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--profile", profile, "safe | unconstrained")
      ->check(CLI::IsMember({"safe", "unconstrained"}));
  synth->add_option("--out", out_path, "Network spec (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*mono || *duo) {
      const NetworkSpec spec = spec_from_json(read_file(spec_path));
      const StaticSolution s = *mono ? solve_monopoly_static(spec, flow_options())
                                     : solve_duopoly_symmetric(spec, flow_options());
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
      write_file_atomic(out_path, solution_to_json(s));
      emit(table_path, solution_table(spec, s));
    } else if (*br) {
      const NetworkSpec spec = spec_from_json(read_file(spec_path));
      BrOptions options;
      options.max_rounds = max_rounds;
      options.simultaneous = simultaneous;
      options.flow = flow_options();
      const Grid<double> start =
          init == "mono" ? solve_monopoly_static(spec, options.flow).prices
                         : solution_from_json(read_file(init)).prices;
      const BrTrace trace = best_response_dynamics(spec, start, options);
      write_file_atomic(out_path, solution_to_json(trace.firm1));
      if (!trace_path.empty()) write_file_atomic(trace_path, trace_csv(trace));
      std::cout << fmt::format(
          "rounds {}  converged {}  price gap {:.3e}  FOC residual {:.3e}\n",
          trace.rounds, trace.converged ? "yes" : "no", trace.final_gap,
          trace.max_foc_residual);
      std::cout << solution_table(spec, trace.firm1);
      if (!trace.converged) return 2;
    } else if (*bounds) {
      const MarketParams params{sigma, ell_max};
      params.validate();
      const BoundReport r = bound_suite(params);
      std::vector<std::pair<double, PriceGapBounds>> gaps;
      for (double lb : lambda_bars) gaps.emplace_back(lb, price_gap_bounds(params, lb));
      std::string text = bounds_text(r);
      for (const auto& [lb, b] : gaps) {
        text += fmt::format("price gap at lambda_bar {:.4f}: [{:.4f}, {:.4f}]\n",
                            lb, b.lower, b.upper);
      }
      if (!out_path.empty()) write_file_atomic(out_path, bounds_json(r, gaps));
      emit(table_path, text);
    } else if (*sim) {
      const NetworkSpec spec = spec_from_json(read_file(spec_path));
      const RunConfig config = load_config(config_path);
      const int periods = horizon > 0 ? horizon : config.horizon;
      const bool two = firms_mode == "duo";
      const FlowOptions fo = flow_options();
      const StaticSolution plan =
          two ? solve_duopoly_symmetric(spec, fo) : solve_monopoly_static(spec, fo);
      MpcConfig mc;
      mc.horizon = config.mpc.horizon;
      mc.penalty = config.mpc.penalty;
      mc.early_bias = config.mpc.early_bias;
      mc.qp.tolerance = solver_tolerance(mc.qp.tolerance);
      std::vector<std::unique_ptr<Controller>> owned;
      for (int f = 0; f < (two ? 2 : 1); ++f) {
        if (controller == "static-random") {
          owned.push_back(static_randomized_controller(plan, seed * 7919 + f));
        } else {
          mc.price_mode = controller == "mpc-sp" ? PriceMode::kStatic : PriceMode::kDynamic;
          mc.static_prices = plan.prices;
          owned.push_back(two ? mpc_controller(mc, plan.prices) : mpc_controller(mc));
        }
      }
      std::vector<Controller*> ctl;
      for (auto& c : owned) ctl.push_back(c.get());
      SimOptions so;
      so.queue_penalty = config.mpc.penalty;
      const SimState state = initial_state(spec, plan.flow, plan.prices, two ? 2 : 1, seed);
      const RunResult result = run(spec, state, ctl, periods, so);
      const std::string label = fmt::format("{} {} seed {}", controller, firms_mode, seed);
      write_file_atomic(prefix + ".csv", trajectory_csv(result));
      write_file_atomic(prefix + ".json", summary_to_json(result.summary, label));
      std::cout << summary_table(label, result.summary, plan.objective);
    } else if (*ingest) {
      const RunConfig config = load_config(config_path);
      std::ifstream in(trips_path);
      if (!in) throw std::runtime_error("cannot open " + trips_path);
      const auto records = read_trips_csv(in);
      const IngestWindow window{parse_timestamp_minutes(start_text),
                                parse_timestamp_minutes(end_text)};
      const IngestResult r = ingest_trips(records, regions, window, config);
      write_file_atomic(out_path, spec_to_json(r.spec));
      int imputed = 0;
      for (int v : r.imputed.values()) imputed += v;
      std::cout << fmt::format("{} regions, {} pairs imputed\n", regions, imputed);
      for (int i = 0; i < regions; ++i) {
        for (int j = 0; j < regions; ++j) {
          if (r.imputed(i, j)) std::cerr << fmt::format("imputed {} -> {}\n", i + 1, j + 1);
        }
      }
    } else if (*report) {
      return run_report(inputs, out_path);
    } else if (*synth) {
      CostProfile cp;
      cp.kind = profile == "safe" ? CostProfile::Kind::kAssumptionSafe
                                  : CostProfile::Kind::kUnconstrained;
      const NetworkSpec spec = synth_network(parse_network_kind(kind), nodes, seed, cp);
      write_file_atomic(out_path, spec_to_json(spec));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
