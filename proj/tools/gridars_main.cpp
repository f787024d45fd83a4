// gridars: hierarchical derivative-free training for emergency grid voltage
// control on the multi-area surrogate. Subcommands cover neighbor discovery,
// two-level and centralized training, evaluation, and single-scenario
// simulation.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "gridars/orchestrator.hpp"

namespace {

namespace fs = std::filesystem;
using namespace gridars;

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitLearnerCrash = 3;
constexpr int kExitEvaluationFailure = 4;

struct CommonFlags {
  std::string config_path;
  std::string out_dir = "runs/out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
  bool deterministic = false;
  bool resume = false;
  bool allow_hyper_change = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", flags.config_path, "run configuration file (JSON)")
                  ->envname("GRIDARS_CONFIG");
  if (needs_config) opt->required();
  cmd->add_option("--out-dir", flags.out_dir, "output directory")->envname("GRIDARS_OUT_DIR");
  cmd->add_option("--seed", flags.seed, "override the config seed")
      ->envname("GRIDARS_SEED")
      ->each([&](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--workers", flags.workers, "total worker thread budget")
      ->envname("GRIDARS_WORKERS");
  cmd->add_flag("--deterministic", flags.deterministic,
                "bit-reproducible mode: paced snapshot schedule, zeroed wall-clock columns");
  cmd->add_flag("--resume", flags.resume, "resume from checkpoints in --out-dir");
  cmd->add_flag("--allow-hyper-change", flags.allow_hyper_change,
                "accept changed hyperparameters when resuming");
}

RunConfig load_config_or_exit(const std::string& path) {
  auto parsed = parse_config(path);
  if (!parsed.ok()) {
    std::cerr << "config error in " << path << ":\n";
    for (const auto& e : parsed.errors) std::cerr << "  " << e << "\n";
    std::exit(kExitConfigError);
  }
  return std::move(*parsed.config);
}

RunOptions make_options(const CommonFlags& flags) {
  RunOptions options;
  options.out_dir = flags.out_dir;
  options.deterministic = flags.deterministic;
  options.workers_override = flags.workers;
  options.resume = flags.resume;
  options.allow_hyper_change = flags.allow_hyper_change;
  if (flags.seed_set) options.seed_override = flags.seed;
  return options;
}

int cmd_discover_neighbors(const CommonFlags& flags, const std::string& out_file) {
  const RunConfig cfg = load_config_or_exit(flags.config_path);
  GridEnv env(cfg.topology, cfg.surrogate);
  std::vector<NeighborReport> reports;
  for (std::size_t a = 0; a < cfg.areas.size(); ++a) {
    std::set<double> durations(cfg.areas[a].durations.begin(), cfg.areas[a].durations.end());
    durations.insert(0.1);
    durations.erase(0.0);
    std::vector<double> probe_durations(durations.begin(), durations.end());
    reports.push_back(discover_neighbors(env, cfg.topology.areas[a].id, probe_durations,
                                         cfg.fault_defaults, RecoveryProfile{}));
  }
  fs::create_directories(fs::path(out_file).parent_path().empty()
                             ? "."
                             : fs::path(out_file).parent_path().string());
  save_neighbor_reports(reports, out_file);
  for (const auto& r : reports) {
    std::cout << "area " << r.area_id << ": selected {";
    for (std::size_t i = 0; i < r.selection.selected.size(); ++i) {
      std::cout << (i ? ", " : "") << r.selection.selected[i];
    }
    std::cout << "}\n";
  }
  std::cout << "wrote " << out_file << "\n";
  return kExitOk;
}

int cmd_train(const CommonFlags& flags, bool sequential) {
  const RunConfig cfg = load_config_or_exit(flags.config_path);
  try {
    const auto artifacts = sequential ? run_sequential(cfg, make_options(flags))
                                      : run_hierarchical(cfg, make_options(flags));
    std::cout << "bundle: " << artifacts.bundle_path << "\n";
    std::cout << "total: " << artifacts.ledger.total_seconds
              << " s (prefix " << artifacts.ledger.dars_prefix_seconds << " s + concurrent "
              << artifacts.ledger.concurrent_phase_seconds << " s)\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kExitLearnerCrash;
  }
}

int cmd_train_centralized(const CommonFlags& flags) {
  const RunConfig cfg = load_config_or_exit(flags.config_path);
  try {
    const auto artifacts = run_centralized_baseline(cfg, make_options(flags));
    std::cout << "checkpoint: " << artifacts.checkpoint_path << "\n";
    std::cout << "total: " << artifacts.ledger.total_seconds << " s\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kExitLearnerCrash;
  }
}

int cmd_evaluate(const std::string& bundle_path, const std::string& scenarios_path,
                 const std::string& out_dir, const std::string& composition,
                 bool write_traces) {
  try {
    const Bundle bundle = load_bundle(bundle_path);
    const auto scenarios = load_scenarios(scenarios_path, FaultScenario{});
    EvalComposition mode = EvalComposition::kCoordinator;
    if (composition == "fault-area-only") mode = EvalComposition::kFaultAreaOnly;
    else if (composition == "all-areas") mode = EvalComposition::kAllAreas;
    else if (composition == "none") mode = EvalComposition::kNone;
    else if (composition != "coordinator") {
      std::cerr << "unknown composition " << composition << "\n";
      return kExitConfigError;
    }
    fs::create_directories(out_dir);
    const auto report = evaluate_bundle(
        bundle, scenarios, mode, write_traces ? (fs::path(out_dir) / "traces").string() : "",
        (fs::path(out_dir) / ("summary_" + composition_name(mode) + ".csv")).string());
    int violations = 0;
    for (const auto& row : report.rows) violations += row.violated_after4 ? 1 : 0;
    std::cout << report.rows.size() << " scenarios, " << violations
              << " with a bus below 0.95 after T_pf+4\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "evaluation failed: " << e.what() << "\n";
    return kExitEvaluationFailure;
  }
}

int cmd_simulate(const CommonFlags& flags, const std::string& scenarios_path,
                 const std::string& scenario_id, int fault_bus, double duration,
                 bool no_control, const std::string& bundle_path, const std::string& out_file) {
  const RunConfig cfg = load_config_or_exit(flags.config_path);
  try {
    GridEnv env(cfg.topology, cfg.surrogate);
    FaultScenario scenario = cfg.fault_defaults;
    if (!scenarios_path.empty()) {
      const auto scenarios = load_scenarios(scenarios_path, cfg.fault_defaults);
      auto it = std::find_if(scenarios.begin(), scenarios.end(),
                             [&](const NamedScenario& ns) { return ns.id == scenario_id; });
      if (it == scenarios.end()) {
        std::cerr << "scenario " << scenario_id << " not found in " << scenarios_path << "\n";
        return kExitConfigError;
      }
      scenario = it->scenario;
    } else if (fault_bus >= 0) {
      scenario.fault_bus = fault_bus;
      scenario.duration = duration;
    }

    EpisodeTrace trace;
    if (no_control || bundle_path.empty()) {
      const auto rr = scripted_rollout(env, scenario, {}, true);
      trace = *rr.trace;
    } else {
      const Bundle bundle = load_bundle(bundle_path);
      GridEnv benv(bundle.topology, bundle.surrogate);
      std::vector<AreaView> views;
      for (std::size_t a = 0; a < bundle.lower.size(); ++a) {
        views.push_back(make_area_view(benv, bundle.topology.areas[a].id,
                                       bundle.neighbor_buses.at(a)));
      }
      CoordinatorConfig cc;
      cc.spec = bundle.coordinator.spec;
      cc.space = bundle.action_space;
      cc.coeffs = bundle.reward;
      cc.profile = bundle.profile;
      cc.area_weights = bundle.area_weights;
      cc.decision_mode = bundle.decision_mode;
      const auto rr = coordinator_rollout(benv, cc, views, bundle.lower,
                                          bundle.coordinator.theta, bundle.coordinator.stats,
                                          scenario, true);
      trace = *rr.trace;
    }
    if (!fs::path(out_file).parent_path().empty()) {
      fs::create_directories(fs::path(out_file).parent_path());
    }
    write_trace_csv(env, trace, out_file);
    std::cout << "wrote " << out_file << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "simulate failed: " << e.what() << "\n";
    return kExitEvaluationFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical ARS voltage control on a multi-area grid surrogate"};
  app.require_subcommand(1);

  CommonFlags train_flags, seq_flags, central_flags, discover_flags, sim_flags;

  auto* discover = app.add_subcommand("discover-neighbors",
                                      "probe contingencies and select neighbor buses per area");
  add_common(discover, discover_flags);
  std::string neighbors_out = "neighbors.json";
  discover->add_option("--out", neighbors_out, "output report file");

  auto* train = app.add_subcommand("train", "train DARS learners and the coordinator");
  add_common(train, train_flags);

  auto* train_seq = app.add_subcommand(
      "train-sequential", "train the coordinator only after all areas converge");
  add_common(train_seq, seq_flags);

  auto* central = app.add_subcommand("train-centralized",
                                     "train the full-scale centralized baseline");
  add_common(central, central_flags);

  auto* evaluate = app.add_subcommand("evaluate", "closed-loop evaluation of a trained bundle");
  std::string bundle_path, scenarios_path, eval_out = "eval_out";
  std::string composition = "coordinator";
  bool write_traces = false;
  evaluate->add_option("--bundle", bundle_path, "bundle file from train")->required();
  evaluate->add_option("--scenarios", scenarios_path, "scenario list file")->required();
  evaluate->add_option("--out-dir", eval_out, "output directory");
  evaluate->add_option("--composition", composition,
                       "coordinator | fault-area-only | all-areas | none");
  evaluate->add_flag("--traces", write_traces, "write per-scenario trace CSVs");

  auto* eval_dec = app.add_subcommand(
      "evaluate-decentralized",
      "evaluate with only the fault area's policy acting (no coordinator)");
  std::string dec_bundle, dec_scenarios, dec_out = "eval_out";
  bool dec_traces = false;
  eval_dec->add_option("--bundle", dec_bundle, "bundle file from train")->required();
  eval_dec->add_option("--scenarios", dec_scenarios, "scenario list file")->required();
  eval_dec->add_option("--out-dir", dec_out, "output directory");
  eval_dec->add_flag("--traces", dec_traces, "write per-scenario trace CSVs");

  auto* simulate = app.add_subcommand("simulate", "run one scenario and dump its trace");
  add_common(simulate, sim_flags);
  std::string sim_scenarios, sim_id, sim_bundle, sim_out = "trace.csv";
  int sim_fault_bus = -1;
  double sim_duration = 0.1;
  bool sim_no_control = false;
  simulate->add_option("--scenarios", sim_scenarios, "scenario list file");
  simulate->add_option("--scenario", sim_id, "scenario id within --scenarios");
  simulate->add_option("--fault-bus", sim_fault_bus, "fault bus (instead of --scenarios)");
  simulate->add_option("--duration", sim_duration, "fault duration in seconds");
  simulate->add_flag("--no-control", sim_no_control, "zero actions throughout");
  simulate->add_option("--bundle", sim_bundle, "act with this trained bundle");
  simulate->add_option("--out", sim_out, "trace CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (discover->parsed()) return cmd_discover_neighbors(discover_flags, neighbors_out);
  if (train->parsed()) return cmd_train(train_flags, false);
  if (train_seq->parsed()) return cmd_train(seq_flags, true);
  if (central->parsed()) return cmd_train_centralized(central_flags);
  if (evaluate->parsed()) {
    return cmd_evaluate(bundle_path, scenarios_path, eval_out, composition, write_traces);
  }
  if (eval_dec->parsed()) {
    return cmd_evaluate(dec_bundle, dec_scenarios, dec_out, "fault-area-only", dec_traces);
  }
  if (simulate->parsed()) {
    return cmd_simulate(sim_flags, sim_scenarios, sim_id, sim_fault_bus, sim_duration,
                        sim_no_control, sim_bundle, sim_out);
  }
  return kExitOk;
}
