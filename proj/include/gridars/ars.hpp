#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridars/policy.hpp"

namespace gridars {

struct ArsHyperParams {
  double alpha = 1.0;       // step size
  int n_directions = 16;    // perturbation directions per iteration
  double noise_std = 2.0;   // exploration noise nu
  int top_b = 8;            // directions kept for the update
  double decay = 0.995;     // per-iteration decay of alpha and nu
  int max_iters = 200;

  void validate() const;
  bool operator==(const ArsHyperParams&) const = default;
};

struct DirectionOutcome {
  int index = 0;
  std::uint64_t delta_seed = 0;
  double r_plus = 0.0;
  double r_minus = 0.0;
};

// Seed for direction `index` of iteration `iteration`; only seeds cross the
// learner/worker boundary, vectors are regenerated on demand.
std::uint64_t direction_seed(std::uint64_t master_seed, int iteration, int index);

std::vector<double> direction_from_seed(int n_params, std::uint64_t delta_seed);

std::vector<std::vector<double>> sample_directions(int n_params, int n,
                                                   std::uint64_t master_seed, int iteration);

// theta +- nu * delta
std::pair<ParameterVector, ParameterVector> perturb(const ParameterVector& theta,
                                                    std::span<const double> delta, double nu);

// Sort by max(r+, r-) descending (ties: lower index), keep top_b, update
//   theta' = theta + alpha / (b * sigma_b) * sum (r+ - r-) * delta
// with sigma_b the population std of the 2b selected rewards, floored at 1e-8.
ParameterVector rank_and_update(const ParameterVector& theta,
                                std::vector<DirectionOutcome> outcomes, double alpha, int top_b);

// One decay application: (alpha * eps, nu * eps).
std::pair<double, double> decay_step(double alpha, double nu, double eps);

// Evaluation backend for the learner: a set of scenarios and a way to run one
// episode. Implementations must be safe to call concurrently.
class RolloutBackend {
 public:
  struct Episode {
    double episode_return = 0.0;
    int steps = 0;
    RunningNormalizer obs_stats;  // raw (pre-normalization) observation stats
  };

  virtual ~RolloutBackend() = default;
  virtual int param_count() const = 0;
  virtual int obs_dims() const = 0;
  virtual int scenario_count() const = 0;
  virtual ParameterVector initial_params(std::uint64_t seed) const = 0;
  virtual Episode run(const ParameterVector& theta, const RunningNormalizer& frozen_stats,
                      int scenario_index) const = 0;
  // Called at the start of every iteration on the learner thread (1-based).
  virtual void begin_iteration(int /*iteration*/) {}
};

struct IterationRecord {
  int iteration = 0;
  double mean_return = 0.0;  // over all 2 * N * m rollouts
  double alpha = 0.0;
  double noise_std = 0.0;
  double wall_seconds = 0.0;
};

struct LearnerResult {
  ParameterVector theta;
  RunningNormalizer obs_stats;
  std::vector<IterationRecord> curve;
  long long total_env_steps = 0;
};

struct LearnerCheckpoint {
  std::string name;
  int iteration = 0;
  double alpha = 0.0;
  double noise_std = 0.0;
  std::uint64_t master_seed = 0;
  ParameterVector theta;
  RunningNormalizer obs_stats;
  bool final_checkpoint = false;
  long long total_env_steps = 0;
};

struct SnapshotEvent {
  int ordinal = 0;    // 1, 2, ... per publication
  int iteration = 0;  // learner iteration at publication
  bool converged = false;
  ParameterVector theta;
  RunningNormalizer obs_stats;
};

struct LearnerHooks {
  std::function<void(const IterationRecord&)> on_iteration;
  std::function<void(const SnapshotEvent&)> publish;           // every publish_interval iters
  std::function<void(const LearnerCheckpoint&)> checkpoint;    // same cadence, plus final
};

struct LearnerConfig {
  std::string name = "learner";
  ArsHyperParams hyper;
  std::uint64_t master_seed = 0;
  int publish_interval = 10;  // iterations between snapshot/checkpoint events
  int workers = 1;
  bool deterministic_timing = false;  // zero wall-clock in records (reproducible CSVs)
};

// Thrown when a worker fails mid-iteration; the last completed iteration has
// already been checkpointed through the hooks.
struct LearnerAborted : std::runtime_error {
  explicit LearnerAborted(const std::string& what) : std::runtime_error(what) {}
};

// The ARS learner loop: sample directions, evaluate 2*N*m rollouts through
// the backend, rank, update, decay, fold observation statistics, publish.
LearnerResult run_ars_learner(RolloutBackend& backend, const LearnerConfig& config,
                              const LearnerHooks& hooks = {},
                              const LearnerCheckpoint* resume_from = nullptr);

}  // namespace gridars
