#include "gridars/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <stdexcept>

namespace gridars {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

constexpr double kActionEps = 1e-3;     // threshold for "still shedding" on an empty bus
constexpr double kActionSlack = 1e-12;  // tolerance on the [-0.2, 0] action range

}  // namespace

void GridTopology::validate() const {
  require(!buses.empty(), "topology: no buses");
  std::set<int> ids(buses.begin(), buses.end());
  require(ids.size() == buses.size(), "topology: duplicate bus ids");
  for (const auto& line : lines) {
    require(ids.count(line.from) && ids.count(line.to), "topology: line references unknown bus");
    require(line.from != line.to, "topology: self-loop line");
    require(line.weight > 0.0, "topology: non-positive line weight");
  }
  require(!areas.empty(), "topology: no areas");
  std::set<int> covered;
  std::set<int> area_ids;
  for (const auto& area : areas) {
    require(area_ids.insert(area.id).second, "topology: duplicate area id");
    require(!area.buses.empty(), "topology: empty area");
    for (int b : area.buses) {
      require(ids.count(b), "topology: area references unknown bus");
      require(covered.insert(b).second, "topology: bus in more than one area");
    }
    std::set<int> area_buses(area.buses.begin(), area.buses.end());
    std::set<int> area_load_ids;
    for (const auto& load : area.loads) {
      require(area_buses.count(load.bus), "topology: load bus outside its area");
      require(area_load_ids.insert(load.bus).second, "topology: duplicate load bus");
      require(load.nominal_demand > 0.0, "topology: non-positive nominal demand");
      require(load.demand_sag > 0.0, "topology: non-positive demand sag");
    }
  }
  require(covered.size() == ids.size(), "topology: areas do not cover all buses");
}

void SurrogateParams::validate() const {
  require(v_stall > 0 && v_recover > v_stall, "surrogate: need 0 < v_stall < v_recover");
  require(kappa_stall > 0 && kappa_recover > 0, "surrogate: rates must be positive");
  require(stall_load_gain > 0, "surrogate: stall_load_gain must be positive");
  require(hop_decay > 0 && hop_decay < 1, "surrogate: hop_decay must be in (0, 1)");
  require(dt_sim > 0 && dt_control > 0, "surrogate: time steps must be positive");
  const double ratio = dt_control / dt_sim;
  require(std::abs(ratio - std::round(ratio)) < 1e-9 && ratio >= 1.0,
          "surrogate: dt_control must be an integer multiple of dt_sim");
}

int SurrogateParams::substeps_per_control() const {
  return static_cast<int>(std::llround(dt_control / dt_sim));
}

ProfileCheck check_profile_violation(std::span<const double> times, std::span<const double> values,
                                     const RecoveryProfile& profile, double t_pf) {
  require(!times.empty() && times.size() == values.size(),
          "profile check: empty or mismatched trace");
  ProfileCheck out;
  out.nadir = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t_pf) continue;
    any = true;
    out.nadir = std::min(out.nadir, values[i]);
    if (values[i] < profile.sigma(times[i], t_pf)) out.violated = true;
  }
  require(any, "profile check: no samples at or after t_pf");
  return out;
}

std::vector<std::vector<double>> build_coupling(const GridTopology& topology, double hop_decay) {
  topology.validate();
  const int n = static_cast<int>(topology.buses.size());
  std::map<int, int> index;
  for (int i = 0; i < n; ++i) index[topology.buses[i]] = i;

  std::vector<std::vector<int>> adj(n);
  for (const auto& line : topology.lines) {
    adj[index.at(line.from)].push_back(index.at(line.to));
    adj[index.at(line.to)].push_back(index.at(line.from));
  }

  // Unweighted shortest-path hops from every bus.
  const int kUnreached = -1;
  std::vector<std::vector<int>> hops(n, std::vector<int>(n, kUnreached));
  for (int s = 0; s < n; ++s) {
    std::deque<int> queue{s};
    hops[s][s] = 0;
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      for (int w : adj[v]) {
        if (hops[s][w] == kUnreached) {
          hops[s][w] = hops[s][v] + 1;
          queue.push_back(w);
        }
      }
    }
  }

  // Buses of one area must be mutually reachable.
  for (const auto& area : topology.areas) {
    const int first = index.at(area.buses.front());
    for (int b : area.buses) {
      if (hops[first][index.at(b)] == kUnreached) {
        throw std::invalid_argument("topology: bus " + std::to_string(b) +
                                    " is disconnected from its area");
      }
    }
  }

  std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
  for (int j = 0; j < n; ++j) {
    double row_sum = 0.0;
    for (int k = 0; k < n; ++k) {
      if (hops[j][k] != kUnreached) {
        w[j][k] = std::pow(hop_decay, hops[j][k]);
        row_sum += w[j][k];
      }
    }
    for (int k = 0; k < n; ++k) w[j][k] /= row_sum;
  }
  return w;
}

GridEnv::GridEnv(GridTopology topology, SurrogateParams params)
    : topology_(std::move(topology)), params_(params) {
  topology_.validate();
  params_.validate();
  coupling_ = build_coupling(topology_, params_.hop_decay);

  const int n = static_cast<int>(topology_.buses.size());
  for (int i = 0; i < n; ++i) bus_index_[topology_.buses[i]] = i;
  bus_area_.assign(n, -1);
  area_loads_.resize(topology_.areas.size());
  for (int a = 0; a < static_cast<int>(topology_.areas.size()); ++a) {
    area_index_[topology_.areas[a].id] = a;
    for (int b : topology_.areas[a].buses) bus_area_[bus_index_.at(b)] = a;
    for (const auto& load : topology_.areas[a].loads) {
      area_loads_[a].push_back(static_cast<int>(load_buses_.size()));
      load_buses_.push_back(load);
      load_bus_index_.push_back(bus_index_.at(load.bus));
    }
  }
  require(!load_buses_.empty(), "topology: no controllable load buses");
}

int GridEnv::bus_index(int bus_id) const {
  auto it = bus_index_.find(bus_id);
  require(it != bus_index_.end(), "unknown bus id " + std::to_string(bus_id));
  return it->second;
}

int GridEnv::area_index(int area_id) const {
  auto it = area_index_.find(area_id);
  require(it != area_index_.end(), "unknown area id " + std::to_string(area_id));
  return it->second;
}

int GridEnv::area_of_bus(int bus_id) const { return bus_area_[bus_index(bus_id)]; }

const std::vector<int>& GridEnv::area_load_indices(int area_index) const {
  require(area_index >= 0 && area_index < static_cast<int>(area_loads_.size()),
          "bad area index");
  return area_loads_[area_index];
}

int GridEnv::steps_per_episode(const FaultScenario& scenario) const {
  return static_cast<int>(std::llround(scenario.episode_length / params_.dt_control));
}

bool GridEnv::fault_active(std::int64_t substep, const FaultScenario& scenario) const {
  if (!scenario.has_fault()) return false;
  // Open window (t_fault, T_pf), compared on the substep grid.
  const auto start = std::llround(scenario.t_fault / params_.dt_sim);
  const auto end = std::llround(scenario.t_clear() / params_.dt_sim);
  return substep > start && substep < end;
}

double GridEnv::bus_voltage(int bus, std::span<const double> remaining,
                            std::span<const double> stall, double fault_term) const {
  double sag = 0.0;
  for (int l = 0; l < load_count(); ++l) {
    const int k = load_bus_index_[l];
    const double demand = remaining[l] * (1.0 + params_.stall_load_gain * stall[k]);
    sag += coupling_[bus][k] * load_buses_[l].demand_sag * (demand - 1.0);
  }
  return 1.0 - sag - fault_term;
}

void GridEnv::refresh_voltages(GridState& state, const FaultScenario& scenario) const {
  const bool active = fault_active(state.substeps, scenario);
  const int fault_bus_idx =
      scenario.fault_bus.has_value() ? bus_index(*scenario.fault_bus) : -1;
  for (int j = 0; j < bus_count(); ++j) {
    const double fault_term =
        active ? scenario.depth * coupling_[j][fault_bus_idx] : 0.0;
    state.voltage[j] = bus_voltage(j, state.remaining, state.stall, fault_term);
  }
}

GridState GridEnv::reset(const FaultScenario& scenario) const {
  if (scenario.fault_bus.has_value()) bus_index(*scenario.fault_bus);  // validates
  require(scenario.duration >= 0.0, "scenario: negative duration");
  require(scenario.t_fault >= 0.0 && scenario.episode_length > 0.0, "scenario: bad times");
  GridState state;
  state.substeps = 0;
  state.t = 0.0;
  state.voltage.assign(bus_count(), 1.0);
  state.remaining.assign(load_count(), 1.0);
  state.stall.assign(bus_count(), 0.0);
  state.fully_shed.assign(load_count(), false);
  return state;
}

StepResult GridEnv::step(GridState& state, std::span<const double> actions,
                         const FaultScenario& scenario) const {
  require(static_cast<int>(actions.size()) == load_count(), "step: action size mismatch");
  StepResult result;
  result.shed_fraction.assign(load_count(), 0.0);

  for (int l = 0; l < load_count(); ++l) {
    const double u = actions[l];
    require(std::isfinite(u), "step: non-finite action");
    require(u <= kActionSlack && u >= -0.2 - kActionSlack,
            "step: action out of range [-0.2, 0]");
    if (u < -kActionEps && state.remaining[l] == 0.0) ++result.invalid_actions;
    const double before = state.remaining[l];
    state.remaining[l] = std::max(0.0, before + std::min(0.0, u));
    result.shed_fraction[l] = before - state.remaining[l];
    state.fully_shed[l] = state.remaining[l] == 0.0;
  }

  const int fault_bus_idx =
      scenario.fault_bus.has_value() ? bus_index(*scenario.fault_bus) : -1;
  const int substeps = params_.substeps_per_control();
  std::vector<double> v(bus_count());
  for (int s = 0; s < substeps; ++s) {
    const bool active = fault_active(state.substeps, scenario);
    for (int j = 0; j < bus_count(); ++j) {
      const double fault_term =
          active ? scenario.depth * coupling_[j][fault_bus_idx] : 0.0;
      v[j] = bus_voltage(j, state.remaining, state.stall, fault_term);
      if (!std::isfinite(v[j])) throw std::runtime_error("step: non-finite voltage");
    }
    for (int j = 0; j < bus_count(); ++j) {
      const double grow =
          params_.kappa_stall * std::max(0.0, params_.v_stall - v[j]) * (1.0 - state.stall[j]);
      const double decay =
          params_.kappa_recover * state.stall[j] * std::max(0.0, v[j] - params_.v_recover);
      state.stall[j] += params_.dt_sim * (grow - decay);
      if (state.stall[j] < 0.0 || state.stall[j] > 1.0 || !std::isfinite(state.stall[j])) {
        throw std::runtime_error("step: stall state left [0, 1]");
      }
    }
    ++state.substeps;
  }
  state.t = static_cast<double>(state.substeps) * params_.dt_sim;
  refresh_voltages(state, scenario);
  return result;
}

std::vector<double> GridEnv::observe_area(const GridState& state, std::span<const int> own_buses,
                                          std::span<const int> neighbor_buses,
                                          std::span<const int> load_indices) const {
  std::vector<double> obs;
  obs.reserve(own_buses.size() + neighbor_buses.size() + load_indices.size());
  for (int b : own_buses) obs.push_back(state.voltage[bus_index(b)]);
  for (int b : neighbor_buses) obs.push_back(state.voltage[bus_index(b)]);
  for (int l : load_indices) {
    require(l >= 0 && l < load_count(), "observe_area: bad load index");
    obs.push_back(state.remaining[l]);
  }
  return obs;
}

std::vector<double> GridEnv::observe_coordinator(const GridState& state) const {
  std::vector<double> minima(area_count(), std::numeric_limits<double>::infinity());
  for (int j = 0; j < bus_count(); ++j) {
    minima[bus_area_[j]] = std::min(minima[bus_area_[j]], state.voltage[j]);
  }
  return minima;
}

}  // namespace gridars
