#pragma once

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "gridars/rollout.hpp"

namespace gridars {

// A candidate coordinator action: the set of area indices whose lower
// policies act this step. Always sorted, never empty.
struct AreaSubset {
  std::vector<int> areas;

  bool contains(int area) const;
  bool operator==(const AreaSubset&) const = default;
};

struct CoordinatorActionSpace {
  enum class Mode { kUnrestricted, kRestricted };

  Mode mode = Mode::kUnrestricted;
  std::vector<AreaSubset> unrestricted;  // all non-empty subsets, size then lex
  // Restricted mode: per fault area i, all subsets S with i in S, S within
  // {i} union physical neighbors of i; same ordering.
  std::vector<std::vector<AreaSubset>> per_fault_area;

  // Candidate list for a rollout. Restricted mode without a fault area (the
  // no-fault case) falls back to the unrestricted list.
  const std::vector<AreaSubset>& candidates(std::optional<int> fault_area) const;

  // Fixed policy-head width: the largest candidate list; shorter lists use a
  // masked argmax over their prefix.
  int head_arity() const;
};

// `adjacency[i]` holds the physically adjacent area indices of area i
// (symmetric, no self entries).
CoordinatorActionSpace build_action_space(const std::vector<std::vector<int>>& adjacency,
                                          CoordinatorActionSpace::Mode mode);

// Derive area adjacency from the line graph: areas joined by at least one
// cross-area line are physical neighbors.
std::vector<std::vector<int>> area_adjacency(const GridEnv& env);

struct PolicySnapshot {
  int area_index = 0;
  int version = 0;         // publication ordinal, strictly increasing per area
  int dars_iteration = 0;  // learner iteration at publication
  bool converged = false;
  AreaPolicy policy;
};

// Single-writer-per-area, many-reader snapshot exchange (DARS -> CARS).
class SnapshotBoard {
 public:
  explicit SnapshotBoard(int area_count);

  void publish(PolicySnapshot snapshot);
  std::shared_ptr<const PolicySnapshot> latest(int area_index) const;

  // Blocks until area has published version >= `version` or its final
  // (converged) snapshot. Returns the exact requested version when available,
  // otherwise the final snapshot. Throws if the board is marked failed.
  std::shared_ptr<const PolicySnapshot> at_version_or_final(int area_index, int version) const;

  // Blocks until every area has published at least `version` or its final.
  void wait_all(int version) const;

  void mark_failed(const std::string& reason);

 private:
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::vector<std::map<int, std::shared_ptr<const PolicySnapshot>>> history_;
  std::string failure_;
};

struct ConcurrencySchedule {
  int h_l = 10;  // DARS iterations between snapshot publications
  int h_c = 10;  // CARS iterations per snapshot refresh

  void validate() const;
};

enum class CoordinatorDecisionMode { kEveryStep, kOnEvent };

// How the coordinator adopts lower-policy snapshots at refresh instants.
enum class SnapshotPolicy {
  kPaced,   // refresh n takes exactly publication ordinal n+1 (bit-reproducible pacing)
  kLatest,  // take the newest published snapshot (wall-clock concurrent training)
  kFinal,   // take the converged final snapshots only (sequential training)
};

// Active lower-policy set used by the coordinator during rollouts.
struct ActiveSnapshotSet {
  std::vector<std::shared_ptr<const PolicySnapshot>> per_area;
  std::vector<int> versions() const;
};

// Maps CARS iterations to snapshot refreshes: refreshes happen at iterations
// 1, h_c+1, 2*h_c+1, ...; between refreshes the active set is immutable.
class SnapshotScheduler {
 public:
  SnapshotScheduler(ConcurrencySchedule schedule, SnapshotPolicy policy,
                    int refreshes_done = 0)
      : schedule_(schedule), policy_(policy), refreshes_done_(refreshes_done) {
    schedule_.validate();
  }

  bool is_refresh_iteration(int cars_iteration) const {
    return (cars_iteration - 1) % schedule_.h_c == 0;
  }
  // Returns the refreshed set; call only on refresh iterations.
  ActiveSnapshotSet refresh(const SnapshotBoard& board, int area_count, int cars_iteration);

 private:
  ConcurrencySchedule schedule_;
  SnapshotPolicy policy_;
  int refreshes_done_ = 0;
};

struct CoordinatorConfig {
  LstmPolicySpec spec;  // input_dim = r, discrete head over the candidates
  CoordinatorActionSpace space;
  RewardCoefficients coeffs;
  RecoveryProfile profile;
  std::vector<double> area_weights;  // per-area c_i
  CoordinatorDecisionMode decision_mode = CoordinatorDecisionMode::kEveryStep;
  // Bypass the coordinator net and hardwire the acting areas (possibly none);
  // used for baseline compositions and oracle tests.
  std::optional<std::vector<int>> forced_areas;
};

struct CoordinatorRolloutResult {
  double episode_return = 0.0;
  int steps = 0;
  double total_shed_pu = 0.0;
  int invalid_actions = 0;
  RunningNormalizer obs_stats;  // raw coordinator observations
  std::optional<EpisodeTrace> trace;
};

// Closed loop: coordinator picks a candidate subset each control step, the
// selected areas' lower policies act through their own frozen normalizers and
// persistent LSTM states, unselected areas hold zero action.
CoordinatorRolloutResult coordinator_rollout(const GridEnv& env, const CoordinatorConfig& config,
                                             const std::vector<AreaView>& views,
                                             const std::vector<AreaPolicy>& lower,
                                             const ParameterVector& coordinator_theta,
                                             const RunningNormalizer& frozen_stats,
                                             const FaultScenario& scenario,
                                             bool record_trace = false);

// ARS backend for the coordinator; the active snapshot set is swapped by the
// scheduler at refresh iterations.
class CoordinatorRolloutBackend : public RolloutBackend {
 public:
  CoordinatorRolloutBackend(const GridEnv& env, CoordinatorConfig config,
                            std::vector<AreaView> views, std::vector<FaultScenario> scenarios,
                            const SnapshotBoard& board, SnapshotScheduler scheduler,
                            std::function<void(int cars_iteration, const ActiveSnapshotSet&)>
                                on_refresh = {});

  int param_count() const override { return config_.spec.param_count(); }
  int obs_dims() const override { return env_.area_count(); }
  int scenario_count() const override { return static_cast<int>(scenarios_.size()); }
  ParameterVector initial_params(std::uint64_t seed) const override {
    return init_params(config_.spec, seed);
  }
  Episode run(const ParameterVector& theta, const RunningNormalizer& frozen_stats,
              int scenario_index) const override;
  void begin_iteration(int iteration) override;

  const std::vector<AreaPolicy>& active_policies() const { return active_; }
  const CoordinatorConfig& config() const { return config_; }
  const std::vector<FaultScenario>& scenarios() const { return scenarios_; }

 private:
  const GridEnv& env_;
  CoordinatorConfig config_;
  std::vector<AreaView> views_;
  std::vector<FaultScenario> scenarios_;
  const SnapshotBoard& board_;
  SnapshotScheduler scheduler_;
  std::function<void(int, const ActiveSnapshotSet&)> on_refresh_;
  std::vector<AreaPolicy> active_;
  std::vector<int> active_versions_;
};

}  // namespace gridars
