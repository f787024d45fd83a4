#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gridars {

struct Line {
  int from = 0;
  int to = 0;
  double weight = 1.0;
};

struct LoadBus {
  int bus = 0;
  double nominal_demand = 1.0;  // p.u.
  double demand_sag = 1.0;      // gamma: voltage sag per unit of load deviation
};

struct AreaSpec {
  int id = 0;
  std::vector<int> buses;
  std::vector<LoadBus> loads;  // ordered; defines the area-local action order
};

struct GridTopology {
  std::vector<int> buses;  // defines topology order
  std::vector<Line> lines;
  std::vector<AreaSpec> areas;

  void validate() const;  // partition/ids/loads; throws std::invalid_argument
};

struct SurrogateParams {
  double v_stall = 0.7;          // p.u.; stall accumulates below this voltage
  double v_recover = 0.9;        // p.u.; stall decays above this voltage
  double kappa_stall = 8.0;      // 1/s
  double kappa_recover = 1.2;    // 1/s
  double stall_load_gain = 2.5;  // lambda: extra demand drawn by stalled load
  double hop_decay = 0.45;       // rho: coupling decay per hop
  double dt_sim = 0.01;          // s
  double dt_control = 0.1;       // s; must be an integer multiple of dt_sim

  void validate() const;
  int substeps_per_control() const;
};

struct FaultScenario {
  std::optional<int> fault_bus;  // nullopt or duration 0: no fault applied
  double t_fault = 1.0;          // s
  double duration = 0.0;         // s; clearing time T_pf = t_fault + duration
  double depth = 0.9;            // p.u. drop at the faulted bus
  double episode_length = 10.0;  // s

  double t_clear() const { return t_fault + duration; }
  bool has_fault() const { return fault_bus.has_value() && duration > 0.0; }
};

// Safe voltage recovery profile. Thresholds are anchored to the clearing
// instant; each boundary belongs to the earlier band via (a, b] windows.
struct RecoveryProfile {
  double th1 = 0.70, t1 = 0.33;
  double th2 = 0.80, t2 = 0.50;
  double th3 = 0.90, t3 = 1.50;
  double th4 = 0.95;

  // Threshold for elapsed time dt = t - T_pf, dt >= 0.
  double threshold_after(double dt) const {
    if (dt <= t1) return th1;
    if (dt <= t2) return th2;
    if (dt <= t3) return th3;
    return th4;
  }
  double sigma(double t, double t_pf) const { return threshold_after(t - t_pf); }
};

struct GridState {
  std::int64_t substeps = 0;      // simulated substeps since reset
  double t = 0.0;                 // seconds, substeps * dt_sim
  std::vector<double> voltage;    // per bus, topology order
  std::vector<double> remaining;  // per load bus, global load order, in [0, 1]
  std::vector<double> stall;      // per bus, in [0, 1]
  std::vector<bool> fully_shed;   // per load bus
};

struct StepResult {
  int invalid_actions = 0;             // shed requested on an already-empty bus
  std::vector<double> shed_fraction;   // per load bus, fraction of nominal removed this step
};

struct ProfileCheck {
  bool violated = false;
  double nadir = 0.0;
};

// violated iff any sample with t >= t_pf falls below sigma(t); nadir is the
// minimum over those samples. Throws if no sample lies at or after t_pf.
ProfileCheck check_profile_violation(std::span<const double> times, std::span<const double> values,
                                     const RecoveryProfile& profile, double t_pf);

// Coupling matrix: w[j][k] = rho^hopdist(j,k), rows normalized to sum 1.
// Hop distances run over the full line graph; buses of one area must be
// mutually reachable (a fully isolated bus in a multi-bus area is an error).
std::vector<std::vector<double>> build_coupling(const GridTopology& topology, double hop_decay);

// Multi-area voltage surrogate with fault-induced delayed recovery dynamics.
//
// Voltage is algebraic in the load and stall states,
//   V_j = 1 - sum_k w_jk * gamma_k * (D_k * (1 + lambda * s_k) - 1) - fault_j(t),
// which pins V = 1 exactly at nominal load (D = 1, s = 0, no fault). The
// fault term is depth * w_j,fault inside the open window (t_fault, T_pf).
// Stall integrates by explicit Euler at dt_sim:
//   ds_j/dt = kappa_stall * max(0, V_stall - V_j) * (1 - s_j)
//           - kappa_recover * s_j * max(0, V_j - V_recover).
class GridEnv {
 public:
  GridEnv(GridTopology topology, SurrogateParams params);

  const GridTopology& topology() const { return topology_; }
  const SurrogateParams& params() const { return params_; }
  const std::vector<std::vector<double>>& coupling() const { return coupling_; }

  int bus_count() const { return static_cast<int>(topology_.buses.size()); }
  int load_count() const { return static_cast<int>(load_buses_.size()); }
  int area_count() const { return static_cast<int>(topology_.areas.size()); }

  // Global load order: areas in topology order, loads in area order.
  const std::vector<LoadBus>& load_buses() const { return load_buses_; }
  int bus_index(int bus_id) const;                    // throws on unknown id
  int area_index(int area_id) const;                  // throws on unknown id
  int area_of_bus(int bus_id) const;                  // area index
  const std::vector<int>& area_load_indices(int area_index) const;
  int steps_per_episode(const FaultScenario& scenario) const;

  GridState reset(const FaultScenario& scenario) const;

  // Advances one control interval. Actions are per global load bus in
  // [-0.2, 0], applied once at interval start as a fraction of nominal load.
  StepResult step(GridState& state, std::span<const double> actions,
                  const FaultScenario& scenario) const;

  // Observation vector for one area: own-bus voltages, then neighbor-bus
  // voltages, then remaining load fractions (each in topology/load order).
  std::vector<double> observe_area(const GridState& state, std::span<const int> own_buses,
                                   std::span<const int> neighbor_buses,
                                   std::span<const int> load_indices) const;

  // Per-area minimum instantaneous bus voltage, length = area count.
  std::vector<double> observe_coordinator(const GridState& state) const;

 private:
  double bus_voltage(int bus_index, std::span<const double> remaining,
                     std::span<const double> stall, double fault_term) const;
  void refresh_voltages(GridState& state, const FaultScenario& scenario) const;
  bool fault_active(std::int64_t substep, const FaultScenario& scenario) const;

  GridTopology topology_;
  SurrogateParams params_;
  std::vector<std::vector<double>> coupling_;
  std::vector<LoadBus> load_buses_;
  std::vector<int> load_bus_index_;             // load -> bus index
  std::map<int, int> bus_index_;                // id -> index
  std::map<int, int> area_index_;               // id -> index
  std::vector<int> bus_area_;                   // bus index -> area index
  std::vector<std::vector<int>> area_loads_;    // area index -> load indices
};

}  // namespace gridars
