#include "gridars/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "gridars/csv.hpp"
#include "gridars/rng.hpp"
#include "json.hpp"

namespace gridars {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string iteration_tag(int iteration) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", iteration);
  return buf;
}

std::string joined(const std::vector<int>& values, char sep = '|') {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(values[i]);
  }
  return out;
}

int resolve_worker_budget(const RunConfig& config, const RunOptions& options) {
  if (options.workers_override > 0) return options.workers_override;
  if (config.workers > 0) return config.workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

struct LearnerSetup {
  std::string name;
  LearnerConfig config;
  std::unique_ptr<csv::Writer> curve_csv;
  bool coordinator = false;
};

}  // namespace

long long EventLog::append(const std::string& kind, const std::string& learner, int iteration,
                           int version, const std::string& detail) {
  const long long seq = next_seq_.fetch_add(1);
  std::lock_guard lock(mutex_);
  events_.push_back(Event{seq, kind, learner, iteration, version, detail});
  return seq;
}

std::vector<Event> EventLog::events() const {
  std::lock_guard lock(mutex_);
  auto copy = events_;
  std::sort(copy.begin(), copy.end(),
            [](const Event& a, const Event& b) { return a.seq < b.seq; });
  return copy;
}

void EventLog::write_csv(const std::string& path) const {
  csv::Writer w(path);
  w.header({"seq", "kind", "learner", "iteration", "version", "detail"});
  for (const auto& e : events()) {
    w.cell(e.seq).cell(e.kind).cell(e.learner).cell(e.iteration).cell(e.version).cell(e.detail);
    w.end_row();
  }
}

void write_ledger(const TimingLedger& ledger, const std::string& path) {
  json j{{"dars_prefix_seconds", ledger.dars_prefix_seconds},
         {"concurrent_phase_seconds", ledger.concurrent_phase_seconds},
         {"total_seconds", ledger.total_seconds},
         {"learner_wall_seconds", ledger.learner_wall_seconds},
         {"learner_env_steps", ledger.learner_env_steps},
         {"learner_rollouts", ledger.learner_rollouts},
         {"learner_iterations", ledger.learner_iterations}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ledger " + path);
  out << j.dump(2) << '\n';
}

std::string composition_name(EvalComposition mode) {
  switch (mode) {
    case EvalComposition::kCoordinator: return "coordinator";
    case EvalComposition::kFaultAreaOnly: return "fault-area-only";
    case EvalComposition::kAllAreas: return "all-areas";
    case EvalComposition::kNone: return "none";
  }
  return "unknown";
}

std::vector<FaultScenario> area_scenarios(const RunConfig& config,
                                          const AreaTrainingConfig& area) {
  std::vector<FaultScenario> out;
  for (int bus : area.fault_buses) {
    for (double duration : area.durations) {
      FaultScenario s = config.fault_defaults;
      s.fault_bus = bus;
      s.duration = duration;
      out.push_back(s);
    }
  }
  return out;
}

std::vector<NamedScenario> training_scenarios(const RunConfig& config) {
  std::vector<NamedScenario> out;
  for (const auto& area : config.areas) {
    for (int bus : area.fault_buses) {
      for (double duration : area.durations) {
        FaultScenario s = config.fault_defaults;
        s.fault_bus = bus;
        s.duration = duration;
        NamedScenario ns;
        ns.id = "area" + std::to_string(area.area_id) + "_bus" + std::to_string(bus) + "_d" +
                csv::format_double(duration);
        ns.scenario = s;
        out.push_back(std::move(ns));
      }
    }
  }
  return out;
}

std::vector<int> resolve_representative_buses(const RunConfig& config) {
  if (!config.coordinator.representative_buses.empty()) {
    for (std::size_t i = 0; i < config.areas.size(); ++i) {
      const auto& buses = config.areas[i].fault_buses;
      const int bus = config.coordinator.representative_buses[i];
      if (std::find(buses.begin(), buses.end(), bus) == buses.end()) {
        throw std::invalid_argument("representative bus " + std::to_string(bus) +
                                    " is not a training fault bus of area " +
                                    std::to_string(config.areas[i].area_id));
      }
    }
    return config.coordinator.representative_buses;
  }
  rng::Stream stream(rng::derive(config.seed, 0x5e1ec7));
  std::vector<int> out;
  for (const auto& area : config.areas) {
    out.push_back(area.fault_buses[stream.below(area.fault_buses.size())]);
  }
  return out;
}

namespace {

// Everything the hierarchical runner derives from the parsed config.
struct HierarchicalSetup {
  GridEnv env;
  std::vector<AreaView> views;
  std::vector<NeighborReport> neighbor_reports;  // only when discovered
  std::vector<LstmPolicySpec> area_specs;
  CoordinatorActionSpace space;
  LstmPolicySpec coordinator_spec;
  std::vector<int> representative_buses;
  std::vector<FaultScenario> coordinator_scenarios;
};

HierarchicalSetup build_setup(const RunConfig& config) {
  HierarchicalSetup setup{GridEnv(config.topology, config.surrogate), {}, {}, {}, {}, {}, {}, {}};
  const GridEnv& env = setup.env;
  const int r = env.area_count();

  std::vector<std::vector<int>> neighbor_sets(r);
  switch (config.neighbors.kind) {
    case NeighborsSource::Kind::kAuto: {
      // Probe durations: the area's training durations plus a stress probe.
      for (int a = 0; a < r; ++a) {
        std::set<double> durations(config.areas[a].durations.begin(),
                                   config.areas[a].durations.end());
        durations.insert(0.1);
        durations.erase(0.0);  // a no-fault probe reveals nothing
        std::vector<double> probe_durations(durations.begin(), durations.end());
        auto report = discover_neighbors(env, config.topology.areas[a].id, probe_durations,
                                         config.fault_defaults, RecoveryProfile{});
        neighbor_sets[a] = report.selection.selected;
        setup.neighbor_reports.push_back(std::move(report));
      }
      break;
    }
    case NeighborsSource::Kind::kFile: {
      const auto reports = load_neighbor_reports(config.neighbors.file);
      for (const auto& report : reports) {
        neighbor_sets.at(env.area_index(report.area_id)) = report.selection.selected;
      }
      break;
    }
    case NeighborsSource::Kind::kInline:
      neighbor_sets = config.neighbors.inline_sets;
      break;
  }

  for (int a = 0; a < r; ++a) {
    setup.views.push_back(make_area_view(env, config.topology.areas[a].id, neighbor_sets[a]));
    LstmPolicySpec spec;
    spec.input_dim = setup.views[a].obs_dims();
    spec.lstm_units = config.lstm_units;
    spec.dense_units = config.dense_units;
    spec.head = PolicyHead{HeadKind::kContinuous,
                           static_cast<int>(setup.views[a].load_indices.size())};
    setup.area_specs.push_back(spec);
  }

  setup.space = build_action_space(area_adjacency(env), config.coordinator.action_mode);
  setup.coordinator_spec.input_dim = r;
  setup.coordinator_spec.lstm_units = config.lstm_units;
  setup.coordinator_spec.dense_units = config.dense_units;
  setup.coordinator_spec.head = PolicyHead{HeadKind::kDiscrete, setup.space.head_arity()};

  setup.representative_buses = resolve_representative_buses(config);
  std::vector<int> rep_union = setup.representative_buses;
  std::sort(rep_union.begin(), rep_union.end());
  rep_union.erase(std::unique(rep_union.begin(), rep_union.end()), rep_union.end());
  for (int bus : rep_union) {
    for (double duration : config.coordinator.durations) {
      FaultScenario s = config.fault_defaults;
      s.fault_bus = bus;
      s.duration = duration;
      setup.coordinator_scenarios.push_back(s);
    }
  }
  return setup;
}

struct ResumeState {
  std::map<std::string, PolicyCheckpoint> latest;                 // per learner
  std::map<std::string, std::vector<PolicyCheckpoint>> history;   // per learner, by iteration
};

ResumeState load_resume_state(const std::string& checkpoint_dir) {
  ResumeState state;
  if (!fs::is_directory(checkpoint_dir)) {
    throw std::runtime_error("resume: no checkpoint directory at " + checkpoint_dir);
  }
  for (const auto& entry : fs::directory_iterator(checkpoint_dir)) {
    if (entry.path().extension() != ".json") continue;
    if (entry.path().filename().string().find("_final") != std::string::npos) continue;
    auto cp = load_checkpoint(entry.path().string());
    auto& hist = state.history[cp.learner.name];
    hist.push_back(cp);
    auto it = state.latest.find(cp.learner.name);
    if (it == state.latest.end() || cp.learner.iteration > it->second.learner.iteration) {
      state.latest[cp.learner.name] = cp;
    }
  }
  for (auto& [name, hist] : state.history) {
    std::sort(hist.begin(), hist.end(), [](const auto& a, const auto& b) {
      return a.learner.iteration < b.learner.iteration;
    });
  }
  if (state.latest.empty()) throw std::runtime_error("resume: no checkpoints found");
  return state;
}

void check_resume_hyper(const PolicyCheckpoint& cp, const ArsHyperParams& hyper,
                        bool allow_change) {
  if (allow_change) return;
  if (cp.hyper_fingerprint != hyper_fingerprint(hyper)) {
    throw std::runtime_error(
        "resume: hyperparameters changed for " + cp.learner.name +
        "; pass the explicit override flag to resume anyway");
  }
}

HierarchicalArtifacts run_two_level(const RunConfig& config, const RunOptions& options,
                                    SnapshotPolicy snapshot_policy, bool sequential) {
  RunConfig cfg = config;
  if (options.seed_override) cfg.seed = *options.seed_override;

  const auto t0 = Clock::now();
  fs::create_directories(options.out_dir);
  fs::create_directories(fs::path(options.out_dir) / "curves");
  fs::create_directories(fs::path(options.out_dir) / "checkpoints");

  {
    std::ofstream echo(fs::path(options.out_dir) / "config_echo.json");
    echo << serialize_config(cfg);
  }

  auto setup = build_setup(cfg);
  const GridEnv& env = setup.env;
  const int r = env.area_count();
  if (!setup.neighbor_reports.empty()) {
    save_neighbor_reports(setup.neighbor_reports,
                          (fs::path(options.out_dir) / "neighbors.json").string());
  }

  const int worker_budget = resolve_worker_budget(cfg, options);
  const int workers_per_learner = std::max(1, worker_budget / (r + 1));

  EventLog log;
  SnapshotBoard board(r);
  TimingLedger ledger;
  std::mutex ledger_mutex;
  std::vector<std::string> failures;
  std::mutex failure_mutex;

  ResumeState resume;
  if (options.resume) {
    resume = load_resume_state((fs::path(options.out_dir) / "checkpoints").string());
  }

  // Per-learner fixed seeds: area index for DARS, a distinct tag for CARS.
  std::vector<LearnerResult> area_results(r);
  std::vector<std::optional<LearnerCheckpoint>> area_resume(r);
  LearnerResult coordinator_result;
  std::optional<LearnerCheckpoint> coordinator_resume;
  int scheduler_refreshes_done = 0;

  if (options.resume) {
    for (int a = 0; a < r; ++a) {
      const std::string name = "area" + std::to_string(cfg.topology.areas[a].id);
      auto it = resume.latest.find(name);
      if (it == resume.latest.end()) continue;
      check_resume_hyper(it->second, cfg.areas[a].hyper, options.allow_hyper_change);
      area_resume[a] = it->second.learner;
      // Prime the board with the published history so paced refreshes can
      // fetch past ordinals.
      for (const auto& cp : resume.history[name]) {
        if (cp.learner.iteration == 0 || cp.learner.iteration % cfg.schedule.h_l != 0) continue;
        PolicySnapshot snap;
        snap.area_index = a;
        snap.version = cp.learner.iteration / cfg.schedule.h_l;
        snap.dars_iteration = cp.learner.iteration;
        snap.converged = cp.learner.final_checkpoint ||
                         cp.learner.iteration >= cfg.areas[a].hyper.max_iters;
        snap.policy = cp.policy();
        board.publish(std::move(snap));
      }
    }
    auto it = resume.latest.find("coordinator");
    if (it != resume.latest.end()) {
      check_resume_hyper(it->second, cfg.coordinator.hyper, options.allow_hyper_change);
      coordinator_resume = it->second.learner;
      scheduler_refreshes_done = it->second.learner.iteration / cfg.schedule.h_c;
    }
  }

  auto record_failure = [&](const std::string& what) {
    std::lock_guard lock(failure_mutex);
    failures.push_back(what);
  };

  auto checkpoint_writer = [&](const LearnerCheckpoint& cp, const LstmPolicySpec& spec,
                               const ArsHyperParams& hyper) {
    PolicyCheckpoint file;
    file.learner = cp;
    file.spec = spec;
    file.action_bias = cfg.action_bias;
    file.hyper_fingerprint = hyper_fingerprint(hyper);
    const auto dir = fs::path(options.out_dir) / "checkpoints";
    save_checkpoint(file, (dir / (cp.name + "_iter" + iteration_tag(cp.iteration) + ".json"))
                              .string());
    if (cp.final_checkpoint) {
      save_checkpoint(file, (dir / (cp.name + "_final.json")).string());
    }
  };

  // --- DARS learners, one thread per area ---
  std::vector<std::thread> threads;
  double cars_start_rel = 0.0;
  for (int a = 0; a < r; ++a) {
    threads.emplace_back([&, a]() {
      const std::string name = "area" + std::to_string(cfg.topology.areas[a].id);
      const auto t_start = Clock::now();
      try {
        AreaRolloutBackend backend(env, setup.views[a], setup.area_specs[a],
                                   area_scenarios(cfg, cfg.areas[a]), cfg.reward,
                                   RecoveryProfile{}, cfg.action_bias);
        LearnerConfig lc;
        lc.name = name;
        lc.hyper = cfg.areas[a].hyper;
        lc.master_seed = rng::derive(cfg.seed, static_cast<std::uint64_t>(a));
        lc.publish_interval = cfg.schedule.h_l;
        lc.workers = workers_per_learner;
        lc.deterministic_timing = options.deterministic;

        csv::Writer curve((fs::path(options.out_dir) / "curves" / (name + ".csv")).string(),
                          options.resume);
        if (!options.resume) {
          curve.header({"iteration", "mean_return", "alpha", "noise_std", "wall_seconds"});
        }

        LearnerHooks hooks;
        hooks.on_iteration = [&](const IterationRecord& rec) {
          curve.cell(rec.iteration)
              .cell(rec.mean_return)
              .cell(rec.alpha)
              .cell(rec.noise_std)
              .cell(rec.wall_seconds);
          curve.end_row();
        };
        hooks.publish = [&](const SnapshotEvent& ev) {
          PolicySnapshot snap;
          snap.area_index = a;
          snap.version = ev.ordinal;
          snap.dars_iteration = ev.iteration;
          snap.converged = ev.converged;
          snap.policy = AreaPolicy{setup.area_specs[a], ev.theta, ev.obs_stats, cfg.action_bias};
          board.publish(std::move(snap));
          log.append("snapshot_published", name, ev.iteration, ev.ordinal);
        };
        hooks.checkpoint = [&](const LearnerCheckpoint& cp) {
          checkpoint_writer(cp, setup.area_specs[a], cfg.areas[a].hyper);
        };

        const LearnerCheckpoint* resume_ptr =
            area_resume[a] ? &*area_resume[a] : nullptr;
        area_results[a] = run_ars_learner(backend, lc, hooks, resume_ptr);
        log.append("learner_done", name, lc.hyper.max_iters, 0);
      } catch (const std::exception& e) {
        record_failure(name + ": " + e.what());
        board.mark_failed(name + " failed");
      }
      std::lock_guard lock(ledger_mutex);
      ledger.learner_wall_seconds[name] = std::chrono::duration<double>(Clock::now() - t_start)
                                              .count();
    });
  }

  // --- coordinator learner ---
  threads.emplace_back([&]() {
    const std::string name = "coordinator";
    const auto t_thread = Clock::now();
    (void)t_thread;
    try {
      if (sequential) {
        board.wait_all(std::numeric_limits<int>::max());
      } else {
        board.wait_all(1);
      }
      cars_start_rel = seconds_since(t0);
      log.append("cars_start", name, 1, 0);
      const auto t_start = Clock::now();

      CoordinatorConfig cc;
      cc.spec = setup.coordinator_spec;
      cc.space = setup.space;
      cc.coeffs = cfg.reward;
      cc.profile = RecoveryProfile{};
      cc.area_weights = cfg.area_weights;
      cc.decision_mode = cfg.coordinator.decision_mode;

      std::string versions_cell;
      CoordinatorRolloutBackend backend(
          env, cc, setup.views, setup.coordinator_scenarios, board,
          SnapshotScheduler(cfg.schedule, snapshot_policy, scheduler_refreshes_done),
          [&](int iteration, const ActiveSnapshotSet& set) {
            versions_cell = joined(set.versions());
            log.append("snapshot_refresh", name, iteration, 0, versions_cell);
          });

      LearnerConfig lc;
      lc.name = name;
      lc.hyper = cfg.coordinator.hyper;
      lc.master_seed = rng::derive(cfg.seed, 0x0c0cULL);
      lc.publish_interval = cfg.schedule.h_c;
      lc.workers = workers_per_learner;
      lc.deterministic_timing = options.deterministic;

      csv::Writer curve((fs::path(options.out_dir) / "curves" / "coordinator.csv").string(),
                        options.resume);
      if (!options.resume) {
        curve.header({"iteration", "mean_return", "alpha", "noise_std", "wall_seconds",
                      "snapshot_versions"});
      }
      LearnerHooks hooks;
      hooks.on_iteration = [&](const IterationRecord& rec) {
        curve.cell(rec.iteration)
            .cell(rec.mean_return)
            .cell(rec.alpha)
            .cell(rec.noise_std)
            .cell(rec.wall_seconds)
            .cell(versions_cell);
        curve.end_row();
      };
      hooks.checkpoint = [&](const LearnerCheckpoint& cp) {
        checkpoint_writer(cp, setup.coordinator_spec, cfg.coordinator.hyper);
      };

      const LearnerCheckpoint* resume_ptr =
          coordinator_resume ? &*coordinator_resume : nullptr;
      coordinator_result = run_ars_learner(backend, lc, hooks, resume_ptr);
      log.append("learner_done", name, lc.hyper.max_iters, 0);
      std::lock_guard lock(ledger_mutex);
      ledger.learner_wall_seconds[name] =
          std::chrono::duration<double>(Clock::now() - t_start).count();
    } catch (const std::exception& e) {
      record_failure(name + std::string(": ") + e.what());
      board.mark_failed("coordinator failed");
      std::lock_guard lock(ledger_mutex);
      ledger.learner_wall_seconds[name] = 0.0;
    }
  });

  for (auto& t : threads) t.join();

  const double total_rel = seconds_since(t0);
  ledger.dars_prefix_seconds = cars_start_rel;
  ledger.concurrent_phase_seconds = total_rel - cars_start_rel;
  ledger.total_seconds = ledger.dars_prefix_seconds + ledger.concurrent_phase_seconds;
  for (int a = 0; a < r; ++a) {
    const std::string name = "area" + std::to_string(cfg.topology.areas[a].id);
    ledger.learner_env_steps[name] = area_results[a].total_env_steps;
    ledger.learner_iterations[name] = static_cast<int>(area_results[a].curve.size());
    ledger.learner_rollouts[name] =
        2LL * cfg.areas[a].hyper.n_directions *
        static_cast<long long>(area_scenarios(cfg, cfg.areas[a]).size()) *
        static_cast<long long>(area_results[a].curve.size());
  }
  ledger.learner_env_steps["coordinator"] = coordinator_result.total_env_steps;
  ledger.learner_iterations["coordinator"] = static_cast<int>(coordinator_result.curve.size());
  ledger.learner_rollouts["coordinator"] =
      2LL * cfg.coordinator.hyper.n_directions *
      static_cast<long long>(setup.coordinator_scenarios.size()) *
      static_cast<long long>(coordinator_result.curve.size());

  log.write_csv((fs::path(options.out_dir) / "events.csv").string());
  write_ledger(ledger, (fs::path(options.out_dir) / "ledger.json").string());

  if (!failures.empty()) {
    std::string what = "learner failure:";
    for (const auto& f : failures) what += " [" + f + "]";
    what += "; partial state under " + options.out_dir + " (resume token: --resume " +
            options.out_dir + ")";
    throw std::runtime_error(what);
  }

  HierarchicalArtifacts artifacts;
  artifacts.ledger = ledger;
  artifacts.events = log.events();
  for (int a = 0; a < r; ++a) {
    artifacts.curves["area" + std::to_string(cfg.topology.areas[a].id)] = area_results[a].curve;
  }
  artifacts.curves["coordinator"] = coordinator_result.curve;

  Bundle bundle;
  bundle.topology = cfg.topology;
  bundle.surrogate = cfg.surrogate;
  bundle.reward = cfg.reward;
  bundle.profile = RecoveryProfile{};
  bundle.area_weights = cfg.area_weights;
  bundle.schedule = cfg.schedule;
  bundle.decision_mode = cfg.coordinator.decision_mode;
  for (const auto& view : setup.views) bundle.neighbor_buses.push_back(view.neighbor_buses);
  bundle.action_space = setup.space;
  for (int a = 0; a < r; ++a) {
    bundle.lower.push_back(AreaPolicy{setup.area_specs[a], area_results[a].theta,
                                      area_results[a].obs_stats, cfg.action_bias});
  }
  bundle.coordinator = AreaPolicy{setup.coordinator_spec, coordinator_result.theta,
                                  coordinator_result.obs_stats, 0.0};
  artifacts.bundle_path = (fs::path(options.out_dir) / "bundle.json").string();
  save_bundle(bundle, artifacts.bundle_path);
  artifacts.bundle = std::move(bundle);

  evaluate_bundle(artifacts.bundle, training_scenarios(cfg), EvalComposition::kCoordinator, "",
                  (fs::path(options.out_dir) / "final_eval.csv").string());
  return artifacts;
}

}  // namespace

HierarchicalArtifacts run_hierarchical(const RunConfig& config, const RunOptions& options) {
  return run_two_level(config, options,
                       options.deterministic ? SnapshotPolicy::kPaced : SnapshotPolicy::kLatest,
                       /*sequential=*/false);
}

HierarchicalArtifacts run_sequential(const RunConfig& config, const RunOptions& options) {
  return run_two_level(config, options, SnapshotPolicy::kFinal, /*sequential=*/true);
}

CentralizedArtifacts run_centralized_baseline(const RunConfig& config,
                                              const RunOptions& options) {
  if (!config.centralized) {
    throw std::invalid_argument("centralized baseline: config has no training.centralized block");
  }
  RunConfig cfg = config;
  if (options.seed_override) cfg.seed = *options.seed_override;

  const auto t0 = Clock::now();
  fs::create_directories(options.out_dir);
  fs::create_directories(fs::path(options.out_dir) / "curves");
  fs::create_directories(fs::path(options.out_dir) / "checkpoints");
  {
    std::ofstream echo(fs::path(options.out_dir) / "config_echo.json");
    echo << serialize_config(cfg);
  }

  GridEnv env(cfg.topology, cfg.surrogate);

  // One whole-grid view: every bus observed, every load actuated.
  AreaView view;
  view.area_id = 0;
  view.own_buses = cfg.topology.buses;
  view.load_indices.resize(env.load_count());
  for (int l = 0; l < env.load_count(); ++l) view.load_indices[l] = l;
  LstmPolicySpec spec;
  spec.input_dim = view.obs_dims();
  spec.lstm_units = cfg.lstm_units;
  spec.dense_units = cfg.dense_units;
  spec.head = PolicyHead{HeadKind::kContinuous, env.load_count()};

  std::vector<FaultScenario> scenarios;
  for (int bus : cfg.centralized->fault_buses) {
    for (double duration : cfg.centralized->durations) {
      FaultScenario s = cfg.fault_defaults;
      s.fault_bus = bus;
      s.duration = duration;
      scenarios.push_back(s);
    }
  }

  AreaRolloutBackend backend(env, view, spec, scenarios, cfg.reward, RecoveryProfile{},
                             cfg.action_bias);
  LearnerConfig lc;
  lc.name = "centralized";
  lc.hyper = cfg.centralized->hyper;
  lc.master_seed = rng::derive(cfg.seed, 0ULL);
  lc.publish_interval = cfg.schedule.h_l;
  lc.workers = resolve_worker_budget(cfg, options);
  lc.deterministic_timing = options.deterministic;

  csv::Writer curve((fs::path(options.out_dir) / "curves" / "centralized.csv").string());
  curve.header({"iteration", "mean_return", "alpha", "noise_std", "wall_seconds"});
  LearnerHooks hooks;
  hooks.on_iteration = [&](const IterationRecord& rec) {
    curve.cell(rec.iteration)
        .cell(rec.mean_return)
        .cell(rec.alpha)
        .cell(rec.noise_std)
        .cell(rec.wall_seconds);
    curve.end_row();
  };
  hooks.checkpoint = [&](const LearnerCheckpoint& cp) {
    PolicyCheckpoint file;
    file.learner = cp;
    file.spec = spec;
    file.action_bias = cfg.action_bias;
    file.hyper_fingerprint = hyper_fingerprint(cfg.centralized->hyper);
    const auto dir = fs::path(options.out_dir) / "checkpoints";
    save_checkpoint(
        file, (dir / (cp.name + "_iter" + iteration_tag(cp.iteration) + ".json")).string());
    if (cp.final_checkpoint) save_checkpoint(file, (dir / (cp.name + "_final.json")).string());
  };

  std::optional<LearnerCheckpoint> resume_cp;
  if (options.resume) {
    auto state = load_resume_state((fs::path(options.out_dir) / "checkpoints").string());
    auto it = state.latest.find("centralized");
    if (it == state.latest.end()) throw std::runtime_error("resume: no centralized checkpoint");
    check_resume_hyper(it->second, cfg.centralized->hyper, options.allow_hyper_change);
    resume_cp = it->second.learner;
  }

  auto result = run_ars_learner(backend, lc, hooks, resume_cp ? &*resume_cp : nullptr);

  CentralizedArtifacts artifacts;
  artifacts.policy = AreaPolicy{spec, result.theta, result.obs_stats, cfg.action_bias};
  artifacts.curve = result.curve;
  artifacts.checkpoint_path =
      (fs::path(options.out_dir) / "checkpoints" / "centralized_final.json").string();
  artifacts.ledger.total_seconds = seconds_since(t0);
  artifacts.ledger.concurrent_phase_seconds = artifacts.ledger.total_seconds;
  artifacts.ledger.learner_wall_seconds["centralized"] = artifacts.ledger.total_seconds;
  artifacts.ledger.learner_env_steps["centralized"] = result.total_env_steps;
  artifacts.ledger.learner_iterations["centralized"] = static_cast<int>(result.curve.size());
  artifacts.ledger.learner_rollouts["centralized"] =
      2LL * cfg.centralized->hyper.n_directions * static_cast<long long>(scenarios.size()) *
      static_cast<long long>(result.curve.size());
  write_ledger(artifacts.ledger, (fs::path(options.out_dir) / "ledger.json").string());
  return artifacts;
}

EvaluationReport evaluate_bundle(const Bundle& bundle,
                                 const std::vector<NamedScenario>& scenarios,
                                 EvalComposition composition, const std::string& traces_dir,
                                 const std::string& summary_path) {
  GridEnv env(bundle.topology, bundle.surrogate);
  const int r = env.area_count();
  if (static_cast<int>(bundle.lower.size()) != r) {
    throw std::invalid_argument("evaluate: bundle lower policy count mismatch");
  }

  std::vector<AreaView> views;
  for (int a = 0; a < r; ++a) {
    views.push_back(
        make_area_view(env, bundle.topology.areas[a].id, bundle.neighbor_buses.at(a)));
  }

  if (!traces_dir.empty()) fs::create_directories(traces_dir);

  EvaluationReport report;
  report.composition = composition;
  for (const auto& ns : scenarios) {
    CoordinatorConfig cc;
    cc.spec = bundle.coordinator.spec;
    cc.space = bundle.action_space;
    cc.coeffs = bundle.reward;
    cc.profile = bundle.profile;
    cc.area_weights = bundle.area_weights;
    cc.decision_mode = bundle.decision_mode;
    switch (composition) {
      case EvalComposition::kCoordinator:
        break;
      case EvalComposition::kFaultAreaOnly: {
        std::vector<int> acting;
        if (ns.scenario.has_fault()) acting.push_back(env.area_of_bus(*ns.scenario.fault_bus));
        cc.forced_areas = acting;
        break;
      }
      case EvalComposition::kAllAreas: {
        std::vector<int> acting(r);
        for (int a = 0; a < r; ++a) acting[a] = a;
        cc.forced_areas = acting;
        break;
      }
      case EvalComposition::kNone:
        cc.forced_areas = std::vector<int>{};
        break;
    }

    const auto rr = coordinator_rollout(env, cc, views, bundle.lower,
                                        bundle.coordinator.theta, bundle.coordinator.stats,
                                        ns.scenario, true);

    ScenarioOutcome row;
    row.id = ns.id;
    row.fault_bus = ns.scenario.fault_bus;
    row.duration = ns.scenario.duration;
    row.episode_return = rr.episode_return;
    row.total_shed_pu = rr.total_shed_pu;
    row.invalid_actions = rr.invalid_actions;
    row.steps = rr.steps;

    const double t_pf = ns.scenario.t_clear();
    const auto& steps = rr.trace->steps;
    std::vector<double> times;
    times.reserve(steps.size());
    for (const auto& st : steps) times.push_back(st.t);
    row.nadir = std::numeric_limits<double>::infinity();
    std::vector<double> series(steps.size());
    for (int j = 0; j < env.bus_count(); ++j) {
      for (std::size_t i = 0; i < steps.size(); ++i) series[i] = steps[i].voltage[j];
      const auto check = check_profile_violation(times, series, bundle.profile, t_pf);
      row.violated_profile = row.violated_profile || check.violated;
      row.nadir = std::min(row.nadir, check.nadir);
      for (std::size_t i = 0; i < steps.size(); ++i) {
        if (times[i] > t_pf + 4.0 && series[i] < 0.95) row.violated_after4 = true;
      }
    }

    if (!traces_dir.empty()) {
      const auto path = fs::path(traces_dir) /
                        (ns.id + "_" + composition_name(composition) + ".csv");
      write_trace_csv(env, *rr.trace, path.string());
    }
    report.rows.push_back(std::move(row));
  }

  if (!summary_path.empty()) {
    csv::Writer w(summary_path);
    w.header({"scenario", "fault_bus", "duration", "composition", "episode_return",
              "violated_after4", "violated_profile", "nadir", "total_shed_pu",
              "invalid_actions", "steps"});
    for (const auto& row : report.rows) {
      w.cell(row.id);
      if (row.fault_bus) {
        w.cell(*row.fault_bus);
      } else {
        w.cell(std::string{"none"});
      }
      w.cell(row.duration)
          .cell(composition_name(composition))
          .cell(row.episode_return)
          .cell(row.violated_after4 ? 1 : 0)
          .cell(row.violated_profile ? 1 : 0)
          .cell(row.nadir)
          .cell(row.total_shed_pu)
          .cell(row.invalid_actions)
          .cell(row.steps);
      w.end_row();
    }
  }
  return report;
}

}  // namespace gridars
