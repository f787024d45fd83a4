#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gridars/ars.hpp"
#include "gridars/grid.hpp"
#include "gridars/policy.hpp"
#include "gridars/reward.hpp"

namespace gridars {

// What an area policy sees and touches: own buses, discovered neighbor buses,
// and the area's load buses (as global load indices).
struct AreaView {
  int area_id = 0;
  std::vector<int> own_buses;       // topology order
  std::vector<int> neighbor_buses;  // topology order
  std::vector<int> load_indices;    // global load order

  int obs_dims() const {
    return static_cast<int>(own_buses.size() + neighbor_buses.size() + load_indices.size());
  }
  int voltage_dims() const {
    return static_cast<int>(own_buses.size() + neighbor_buses.size());
  }
};

AreaView make_area_view(const GridEnv& env, int area_id, std::span<const int> neighbor_bus_ids);

// An immutable, runnable policy: architecture, weights, the frozen
// normalization statistics it was trained with, and its action-map bias.
struct AreaPolicy {
  LstmPolicySpec spec;
  ParameterVector theta;
  RunningNormalizer stats;
  double action_bias = 0.0;
};

// One inference step of an area policy; scatters its shed actions into the
// global action vector. The caller owns the persistent LSTM state.
void apply_area_policy(const GridEnv& env, const GridState& state, const AreaView& view,
                       const AreaPolicy& policy, LstmState& lstm,
                       std::span<double> global_action);

struct StepTrace {
  double t = 0.0;
  std::vector<double> voltage;    // per bus
  std::vector<double> remaining;  // per load bus
  std::vector<double> action;     // per load bus
  double reward = 0.0;
  int chosen_candidate = -1;      // coordinator candidate index, -1 otherwise
};

struct EpisodeTrace {
  std::vector<StepTrace> steps;
};

void append_step_trace(EpisodeTrace& trace, const GridState& state,
                       std::span<const double> action, double reward, int chosen_candidate);

struct GridRolloutResult {
  double episode_return = 0.0;
  int steps = 0;
  double total_shed_pu = 0.0;
  int invalid_actions = 0;
  RunningNormalizer obs_stats;  // raw observations fed to the acting policy
  std::optional<EpisodeTrace> trace;
};

// Closed-loop episode for a single area policy; all other load buses hold
// zero action. Rewards follow the area reward on the policy's observed buses.
GridRolloutResult area_rollout(const GridEnv& env, const AreaView& view,
                               const AreaPolicy& policy, const FaultScenario& scenario,
                               const RewardCoefficients& coeffs, const RecoveryProfile& profile,
                               bool record_trace = false);

// Rollout with a fixed global action sequence provider (used for probes and
// hand-driven simulations): zero actions when `actions` is empty.
GridRolloutResult scripted_rollout(const GridEnv& env, const FaultScenario& scenario,
                                   std::span<const std::vector<double>> actions,
                                   bool record_trace);

// ARS backend for one area of the grid.
class AreaRolloutBackend : public RolloutBackend {
 public:
  AreaRolloutBackend(const GridEnv& env, AreaView view, LstmPolicySpec spec,
                     std::vector<FaultScenario> scenarios, RewardCoefficients coeffs,
                     RecoveryProfile profile, double action_bias);

  int param_count() const override { return spec_.param_count(); }
  int obs_dims() const override { return view_.obs_dims(); }
  int scenario_count() const override { return static_cast<int>(scenarios_.size()); }
  ParameterVector initial_params(std::uint64_t seed) const override {
    return init_params(spec_, seed);
  }
  Episode run(const ParameterVector& theta, const RunningNormalizer& frozen_stats,
              int scenario_index) const override;

  const LstmPolicySpec& spec() const { return spec_; }
  const AreaView& view() const { return view_; }
  const std::vector<FaultScenario>& scenarios() const { return scenarios_; }

 private:
  const GridEnv& env_;
  AreaView view_;
  LstmPolicySpec spec_;
  std::vector<FaultScenario> scenarios_;
  RewardCoefficients coeffs_;
  RecoveryProfile profile_;
  double action_bias_;
};

}  // namespace gridars
