#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridars/ars.hpp"
#include "gridars/cars.hpp"
#include "gridars/grid.hpp"
#include "gridars/reward.hpp"

namespace gridars {

struct AreaTrainingConfig {
  int area_id = 0;
  std::vector<int> fault_buses;
  std::vector<double> durations;
  ArsHyperParams hyper;
};

struct CoordinatorTrainingConfig {
  std::vector<int> representative_buses;  // empty: one seed-pinned pick per area
  std::vector<double> durations;
  ArsHyperParams hyper;
  CoordinatorActionSpace::Mode action_mode = CoordinatorActionSpace::Mode::kUnrestricted;
  CoordinatorDecisionMode decision_mode = CoordinatorDecisionMode::kEveryStep;
};

struct CentralizedTrainingConfig {
  std::vector<int> fault_buses;
  std::vector<double> durations;
  ArsHyperParams hyper;
};

// Neighbor sets: discovered at train start ("auto"), loaded from a
// discover-neighbors report file, or given inline per area.
struct NeighborsSource {
  enum class Kind { kAuto, kFile, kInline };
  Kind kind = Kind::kAuto;
  std::string file;
  std::vector<std::vector<int>> inline_sets;  // per area, topology order
};

struct RunConfig {
  GridTopology topology;
  SurrogateParams surrogate;
  RewardCoefficients reward;
  std::vector<double> area_weights;
  FaultScenario fault_defaults;  // fault_bus/duration filled per scenario
  int lstm_units = 16;
  int dense_units = 16;
  double action_bias = 0.0;
  std::uint64_t seed = 0;
  ConcurrencySchedule schedule;
  NeighborsSource neighbors;
  std::vector<AreaTrainingConfig> areas;  // topology area order
  CoordinatorTrainingConfig coordinator;
  std::optional<CentralizedTrainingConfig> centralized;
  int workers = 0;  // 0: one per learner plus spares from hardware concurrency
};

struct ConfigParseResult {
  std::optional<RunConfig> config;
  std::vector<std::string> errors;  // all schema errors, each with a key path

  bool ok() const { return errors.empty() && config.has_value(); }
};

// Parses and validates a run configuration; collects every schema error
// (unknown keys, type mismatches, constraint violations) instead of stopping
// at the first one.
ConfigParseResult parse_config(const std::string& path);
ConfigParseResult parse_config_text(const std::string& text, const std::string& base_dir);

// Serializes a config back to JSON text; parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& config);

bool config_equal(const RunConfig& a, const RunConfig& b);

}  // namespace gridars
