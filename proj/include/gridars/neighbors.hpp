#pragma once

#include <map>
#include <span>
#include <vector>

#include "gridars/grid.hpp"

namespace gridars {

struct ProbeSpec {
  int fault_bus = 0;
  double duration = 0.0;
};

// One zero-control rollout per probe; voltage traces for every bus sampled at
// the control interval.
struct ProbeResult {
  ProbeSpec probe;
  double t_pf = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> voltage_by_bus;  // [bus index][sample]
};

struct BusFinding {
  int bus = 0;
  bool violated = false;
  double nadir = 0.0;  // minimum post-clearing sample over all probes
};

struct NeighborSelection {
  std::map<int, std::vector<BusFinding>> findings_by_area;  // foreign area id -> findings
  std::vector<int> selected;                                // sorted by bus id
};

struct NeighborReport {
  int area_id = 0;
  std::vector<ProbeSpec> probes;
  NeighborSelection selection;
};

// Runs contingencies at every control-actuation (load) bus of the area, one
// per duration, with zero control actions.
std::vector<ProbeResult> probe_area(const GridEnv& env, int area_id,
                                    std::span<const double> durations,
                                    const FaultScenario& base);

// Foreign areas with at most max(1, 5% of their buses) violating buses are
// ignored; among the rest, buses whose nadir dips below `nadir_threshold` in
// any probe qualify, capped at the `max_per_area` lowest nadirs per area.
NeighborSelection select_neighbors(const GridEnv& env, int area_id,
                                   std::span<const ProbeResult> probes,
                                   const RecoveryProfile& profile,
                                   double nadir_threshold = 0.75, int max_per_area = 10);

NeighborReport discover_neighbors(const GridEnv& env, int area_id,
                                  std::span<const double> durations, const FaultScenario& base,
                                  const RecoveryProfile& profile,
                                  double nadir_threshold = 0.75, int max_per_area = 10);

}  // namespace gridars
