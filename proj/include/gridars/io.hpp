#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridars/ars.hpp"
#include "gridars/cars.hpp"
#include "gridars/neighbors.hpp"
#include "gridars/rollout.hpp"

namespace gridars {

// Versioned checkpoint: everything needed to resume a learner mid-training
// and to replay the contained policy.
struct PolicyCheckpoint {
  LearnerCheckpoint learner;
  LstmPolicySpec spec;
  double action_bias = 0.0;
  std::uint64_t hyper_fingerprint = 0;  // guards resume against changed hyperparameters
  int layout_version = kParamLayoutVersion;

  AreaPolicy policy() const {
    return AreaPolicy{spec, learner.theta, learner.obs_stats, action_bias};
  }
};

std::uint64_t hyper_fingerprint(const ArsHyperParams& hyper);

void save_checkpoint(const PolicyCheckpoint& checkpoint, const std::string& path);

// Throws std::runtime_error on parse failure, missing keys, or a layout
// version mismatch (the message reports both versions). Never partially loads.
PolicyCheckpoint load_checkpoint(const std::string& path);

// Self-contained artifact of a hierarchical run: the environment, the area
// views, the coordinator action space, and every trained policy.
struct Bundle {
  GridTopology topology;
  SurrogateParams surrogate;
  RewardCoefficients reward;
  RecoveryProfile profile;
  std::vector<double> area_weights;
  ConcurrencySchedule schedule;
  CoordinatorDecisionMode decision_mode = CoordinatorDecisionMode::kEveryStep;
  std::vector<std::vector<int>> neighbor_buses;  // per area index, bus ids
  CoordinatorActionSpace action_space;
  std::vector<AreaPolicy> lower;  // per area index
  AreaPolicy coordinator;
};

void save_bundle(const Bundle& bundle, const std::string& path);
Bundle load_bundle(const std::string& path);

void save_neighbor_reports(const std::vector<NeighborReport>& reports, const std::string& path);
std::vector<NeighborReport> load_neighbor_reports(const std::string& path);

// Topology file schema: buses, lines, areas with load buses and sag factors.
GridTopology load_topology_file(const std::string& path);
void save_topology_file(const GridTopology& topology, const std::string& path);

// Scenario list file: [{"id", "fault_bus", "duration", optional overrides}].
struct NamedScenario {
  std::string id;
  FaultScenario scenario;
};
std::vector<NamedScenario> load_scenarios(const std::string& path,
                                          const FaultScenario& defaults);

void write_trace_csv(const GridEnv& env, const EpisodeTrace& trace, const std::string& path);

}  // namespace gridars
