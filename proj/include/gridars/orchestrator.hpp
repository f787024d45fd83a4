#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gridars/config.hpp"
#include "gridars/io.hpp"

namespace gridars {

// Ordered instrumentation of the learner/coordinator interplay.
struct Event {
  long long seq = 0;
  std::string kind;     // snapshot_published | cars_start | snapshot_refresh | learner_done
  std::string learner;  // "area<N>" | "coordinator" | "centralized"
  int iteration = 0;    // learner iteration the event belongs to
  int version = 0;      // snapshot ordinal (publish) or joined versions (refresh rows)
  std::string detail;
};

class EventLog {
 public:
  long long append(const std::string& kind, const std::string& learner, int iteration,
                   int version, const std::string& detail = "");
  std::vector<Event> events() const;
  void write_csv(const std::string& path) const;

 private:
  mutable std::mutex mutex_;
  std::vector<Event> events_;
  std::atomic<long long> next_seq_{0};
};

struct TimingLedger {
  double dars_prefix_seconds = 0.0;       // run start until the coordinator starts
  double concurrent_phase_seconds = 0.0;  // coordinator start until the last learner finishes
  double total_seconds = 0.0;             // prefix + concurrent phase, by construction
  std::map<std::string, double> learner_wall_seconds;
  std::map<std::string, long long> learner_env_steps;
  std::map<std::string, long long> learner_rollouts;
  std::map<std::string, int> learner_iterations;
};

void write_ledger(const TimingLedger& ledger, const std::string& path);

struct RunOptions {
  std::string out_dir;
  bool deterministic = true;  // pins the snapshot schedule and zeroes wall-clock columns
  int workers_override = 0;   // 0: use config / hardware
  std::optional<std::uint64_t> seed_override;
  bool resume = false;
  bool allow_hyper_change = false;  // with resume: accept changed hyperparameters
};

struct HierarchicalArtifacts {
  Bundle bundle;
  TimingLedger ledger;
  std::vector<Event> events;
  std::string bundle_path;
  std::map<std::string, std::vector<IterationRecord>> curves;
};

// Launches one DARS learner per area plus the concurrently trained
// coordinator; writes curves, checkpoints, the bundle, the event log, the
// timing ledger, and a final per-scenario evaluation into out_dir.
HierarchicalArtifacts run_hierarchical(const RunConfig& config, const RunOptions& options);

// Same coordinator training but against the final (converged) lower policies
// only; used for the concurrent-vs-sequential comparison. DARS learners run
// to completion before the coordinator starts.
HierarchicalArtifacts run_sequential(const RunConfig& config, const RunOptions& options);

struct CentralizedArtifacts {
  AreaPolicy policy;
  TimingLedger ledger;
  std::vector<IterationRecord> curve;
  std::string checkpoint_path;
};

// One ARS learner over the full observation/action vector (all buses, all
// loads, no coordinator), trained on the configured grid-wide fault set.
CentralizedArtifacts run_centralized_baseline(const RunConfig& config, const RunOptions& options);

enum class EvalComposition {
  kCoordinator,    // trained coordinator picks the acting subset each step
  kFaultAreaOnly,  // only the fault area's policy acts (decentralized-only)
  kAllAreas,       // every area's policy acts every step
  kNone,           // zero actions
};

std::string composition_name(EvalComposition mode);

struct ScenarioOutcome {
  std::string id;
  std::optional<int> fault_bus;
  double duration = 0.0;
  double episode_return = 0.0;
  bool violated_after4 = false;   // any bus below 0.95 past T_pf + 4
  bool violated_profile = false;  // any bus below sigma(t) past T_pf
  double nadir = 0.0;             // minimum post-clearing voltage over all buses
  double total_shed_pu = 0.0;
  int invalid_actions = 0;
  int steps = 0;
};

struct EvaluationReport {
  EvalComposition composition = EvalComposition::kCoordinator;
  std::vector<ScenarioOutcome> rows;
};

// Deterministic closed-loop evaluation. When traces_dir is non-empty, one
// trace CSV per scenario lands there; summary_path likewise optional.
EvaluationReport evaluate_bundle(const Bundle& bundle,
                                 const std::vector<NamedScenario>& scenarios,
                                 EvalComposition composition,
                                 const std::string& traces_dir = "",
                                 const std::string& summary_path = "");

// The training scenario set of a config: every (fault bus x duration) pair of
// every area, in area order (the set final_eval.csv is computed over).
std::vector<NamedScenario> training_scenarios(const RunConfig& config);

// Assembled per-area fault scenarios for one area config.
std::vector<FaultScenario> area_scenarios(const RunConfig& config,
                                          const AreaTrainingConfig& area);

// Representative coordinator fault buses: explicit config list or a
// seed-pinned random pick of one training bus per area.
std::vector<int> resolve_representative_buses(const RunConfig& config);

}  // namespace gridars
