#include "gridars/cars.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <stdexcept>

namespace gridars {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::vector<AreaSubset> subsets_of(const std::vector<int>& members,
                                   std::optional<int> required) {
  std::vector<AreaSubset> out;
  const int n = static_cast<int>(members.size());
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    AreaSubset s;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) s.areas.push_back(members[i]);
    }
    std::sort(s.areas.begin(), s.areas.end());
    if (required && !s.contains(*required)) continue;
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const AreaSubset& a, const AreaSubset& b) {
    if (a.areas.size() != b.areas.size()) return a.areas.size() < b.areas.size();
    return a.areas < b.areas;
  });
  return out;
}

}  // namespace

bool AreaSubset::contains(int area) const {
  return std::find(areas.begin(), areas.end(), area) != areas.end();
}

const std::vector<AreaSubset>& CoordinatorActionSpace::candidates(
    std::optional<int> fault_area) const {
  if (mode == Mode::kRestricted && fault_area.has_value()) {
    return per_fault_area.at(*fault_area);
  }
  return unrestricted;
}

int CoordinatorActionSpace::head_arity() const {
  std::size_t arity = unrestricted.size();
  for (const auto& list : per_fault_area) arity = std::max(arity, list.size());
  return static_cast<int>(arity);
}

CoordinatorActionSpace build_action_space(const std::vector<std::vector<int>>& adjacency,
                                          CoordinatorActionSpace::Mode mode) {
  const int r = static_cast<int>(adjacency.size());
  require(r >= 1, "action space: need at least one area");
  for (int i = 0; i < r; ++i) {
    for (int j : adjacency[i]) {
      require(j >= 0 && j < r && j != i, "action space: bad adjacency entry");
      require(std::find(adjacency[j].begin(), adjacency[j].end(), i) != adjacency[j].end(),
              "action space: adjacency must be symmetric");
    }
  }

  CoordinatorActionSpace space;
  space.mode = mode;
  std::vector<int> all(r);
  for (int i = 0; i < r; ++i) all[i] = i;
  space.unrestricted = subsets_of(all, std::nullopt);
  space.per_fault_area.resize(r);
  for (int i = 0; i < r; ++i) {
    std::vector<int> members{i};
    members.insert(members.end(), adjacency[i].begin(), adjacency[i].end());
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    space.per_fault_area[i] = subsets_of(members, i);
  }
  return space;
}

std::vector<std::vector<int>> area_adjacency(const GridEnv& env) {
  std::vector<std::set<int>> adj(env.area_count());
  for (const auto& line : env.topology().lines) {
    const int a = env.area_of_bus(line.from);
    const int b = env.area_of_bus(line.to);
    if (a != b) {
      adj[a].insert(b);
      adj[b].insert(a);
    }
  }
  std::vector<std::vector<int>> out(env.area_count());
  for (int i = 0; i < env.area_count(); ++i) out[i].assign(adj[i].begin(), adj[i].end());
  return out;
}

SnapshotBoard::SnapshotBoard(int area_count) : history_(area_count) {}

void SnapshotBoard::publish(PolicySnapshot snapshot) {
  std::lock_guard lock(mutex_);
  auto& hist = history_.at(snapshot.area_index);
  if (!hist.empty() && snapshot.version <= hist.rbegin()->first) {
    throw std::logic_error("snapshot board: version must strictly increase");
  }
  const int version = snapshot.version;
  hist.emplace(version, std::make_shared<const PolicySnapshot>(std::move(snapshot)));
  cv_.notify_all();
}

std::shared_ptr<const PolicySnapshot> SnapshotBoard::latest(int area_index) const {
  std::lock_guard lock(mutex_);
  const auto& hist = history_.at(area_index);
  return hist.empty() ? nullptr : hist.rbegin()->second;
}

std::shared_ptr<const PolicySnapshot> SnapshotBoard::at_version_or_final(int area_index,
                                                                         int version) const {
  std::unique_lock lock(mutex_);
  const auto& hist = history_.at(area_index);
  cv_.wait(lock, [&] {
    if (!failure_.empty()) return true;
    if (hist.count(version)) return true;
    return !hist.empty() && hist.rbegin()->second->converged;
  });
  if (!failure_.empty()) throw std::runtime_error("snapshot board: " + failure_);
  auto it = hist.find(version);
  if (it != hist.end()) return it->second;
  return hist.rbegin()->second;  // converged final with version < requested
}

void SnapshotBoard::wait_all(int version) const {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] {
    if (!failure_.empty()) return true;
    for (const auto& hist : history_) {
      if (hist.empty()) return false;
      if (hist.rbegin()->first < version && !hist.rbegin()->second->converged) return false;
    }
    return true;
  });
  if (!failure_.empty()) throw std::runtime_error("snapshot board: " + failure_);
}

void SnapshotBoard::mark_failed(const std::string& reason) {
  std::lock_guard lock(mutex_);
  failure_ = reason.empty() ? "failed" : reason;
  cv_.notify_all();
}

void ConcurrencySchedule::validate() const {
  require(h_l >= 1 && h_c >= 1, "schedule: H_l and H_c must be >= 1");
}

std::vector<int> ActiveSnapshotSet::versions() const {
  std::vector<int> out;
  out.reserve(per_area.size());
  for (const auto& s : per_area) out.push_back(s ? s->version : 0);
  return out;
}

ActiveSnapshotSet SnapshotScheduler::refresh(const SnapshotBoard& board, int area_count,
                                             int cars_iteration) {
  require(is_refresh_iteration(cars_iteration), "scheduler: not a refresh iteration");
  ActiveSnapshotSet set;
  set.per_area.resize(area_count);
  ++refreshes_done_;
  for (int a = 0; a < area_count; ++a) {
    switch (policy_) {
      case SnapshotPolicy::kPaced:
        set.per_area[a] = board.at_version_or_final(a, refreshes_done_);
        break;
      case SnapshotPolicy::kLatest:
        // Never adopt a set older than the first publication wave.
        set.per_area[a] = board.at_version_or_final(a, 1);
        if (auto newest = board.latest(a); newest) set.per_area[a] = newest;
        break;
      case SnapshotPolicy::kFinal:
        set.per_area[a] = board.at_version_or_final(a, std::numeric_limits<int>::max());
        break;
    }
  }
  return set;
}

CoordinatorRolloutResult coordinator_rollout(const GridEnv& env, const CoordinatorConfig& config,
                                             const std::vector<AreaView>& views,
                                             const std::vector<AreaPolicy>& lower,
                                             const ParameterVector& coordinator_theta,
                                             const RunningNormalizer& frozen_stats,
                                             const FaultScenario& scenario, bool record_trace) {
  require(static_cast<int>(views.size()) == env.area_count() &&
              static_cast<int>(lower.size()) == env.area_count(),
          "coordinator rollout: need one view and one lower policy per area");
  if (!config.forced_areas) {
    require(config.spec.input_dim == env.area_count(),
            "coordinator rollout: spec input_dim must equal area count");
    require(config.spec.head.kind == HeadKind::kDiscrete &&
                config.spec.head.arity == config.space.head_arity(),
            "coordinator rollout: head must be discrete over the candidate list");
  }
  require(static_cast<int>(config.area_weights.size()) == env.area_count(),
          "coordinator rollout: area weight count mismatch");

  std::optional<int> fault_area;
  if (scenario.has_fault()) fault_area = env.area_of_bus(*scenario.fault_bus);
  const auto& candidates = config.space.candidates(fault_area);
  require(!candidates.empty(), "coordinator rollout: empty candidate list");
  if (config.forced_areas) {
    for (int a : *config.forced_areas) {
      require(a >= 0 && a < env.area_count(), "coordinator rollout: bad forced area");
    }
  }

  CoordinatorRolloutResult result;
  result.obs_stats = RunningNormalizer(env.area_count());
  if (record_trace) result.trace = EpisodeTrace{};

  GridState state = env.reset(scenario);
  LstmState coord_lstm = LstmState::zeros(config.spec.lstm_units);
  std::vector<LstmState> lower_lstm;
  lower_lstm.reserve(env.area_count());
  for (const auto& p : lower) lower_lstm.push_back(LstmState::zeros(p.spec.lstm_units));

  std::vector<double> action(env.load_count(), 0.0);
  std::vector<double> shed_pu(env.load_count(), 0.0);
  const double t_pf = scenario.t_clear();
  const int n_steps = env.steps_per_episode(scenario);
  int held_choice = -1;  // kOnEvent: frozen after the first depressed observation

  for (int step = 0; step < n_steps; ++step) {
    const auto obs_raw = env.observe_coordinator(state);
    result.obs_stats.update(obs_raw);

    int choice = -1;
    const std::vector<int>* acting = nullptr;
    if (config.forced_areas) {
      acting = &*config.forced_areas;
    } else {
      const auto obs = frozen_stats.normalize(obs_raw);
      auto fr = forward(config.spec, coordinator_theta, coord_lstm, obs);
      coord_lstm = std::move(fr.state);
      // Masked argmax over this scenario's candidate list.
      choice = map_action_discrete(std::span<const double>(fr.raw.data(), candidates.size()));
      if (config.decision_mode == CoordinatorDecisionMode::kOnEvent) {
        if (held_choice >= 0) {
          choice = held_choice;
        } else {
          const bool event = *std::min_element(obs_raw.begin(), obs_raw.end()) < 0.95;
          if (event) held_choice = choice;
        }
      }
      acting = &candidates[choice].areas;
    }

    std::fill(action.begin(), action.end(), 0.0);
    for (int a : *acting) {
      apply_area_policy(env, state, views[a], lower[a], lower_lstm[a], action);
    }

    const auto sr = env.step(state, action, scenario);
    double shed_step = 0.0;
    for (int l = 0; l < env.load_count(); ++l) {
      shed_pu[l] = sr.shed_fraction[l] * env.load_buses()[l].nominal_demand;
      shed_step += shed_pu[l];
    }
    result.total_shed_pu += shed_step;
    result.invalid_actions += sr.invalid_actions;

    const auto minima = env.observe_coordinator(state);
    StepContext ctx;
    ctx.t = state.t;
    ctx.t_pf = t_pf;
    ctx.observed_voltage = minima;
    ctx.shed = shed_pu;
    ctx.invalid_count = sr.invalid_actions;
    const double r = coordinator_reward(ctx, config.area_weights, config.coeffs, config.profile);
    result.episode_return += r;
    ++result.steps;
    if (result.trace) append_step_trace(*result.trace, state, action, r, choice);
    if (config.coeffs.terminate_on_penalty && r == config.coeffs.penalty) break;
  }
  return result;
}

CoordinatorRolloutBackend::CoordinatorRolloutBackend(
    const GridEnv& env, CoordinatorConfig config, std::vector<AreaView> views,
    std::vector<FaultScenario> scenarios, const SnapshotBoard& board,
    SnapshotScheduler scheduler, std::function<void(int, const ActiveSnapshotSet&)> on_refresh)
    : env_(env),
      config_(std::move(config)),
      views_(std::move(views)),
      scenarios_(std::move(scenarios)),
      board_(board),
      scheduler_(scheduler),
      on_refresh_(std::move(on_refresh)) {
  require(!scenarios_.empty(), "coordinator backend: no scenarios");
  config_.coeffs.validate();
}

void CoordinatorRolloutBackend::begin_iteration(int iteration) {
  if (!scheduler_.is_refresh_iteration(iteration)) return;
  const auto set = scheduler_.refresh(board_, env_.area_count(), iteration);
  active_.clear();
  active_versions_ = set.versions();
  for (const auto& snap : set.per_area) {
    if (!snap) throw std::runtime_error("coordinator backend: missing snapshot");
    active_.push_back(snap->policy);
  }
  if (on_refresh_) on_refresh_(iteration, set);
}

RolloutBackend::Episode CoordinatorRolloutBackend::run(const ParameterVector& theta,
                                                       const RunningNormalizer& frozen_stats,
                                                       int scenario_index) const {
  if (active_.empty()) throw std::logic_error("coordinator backend: no active snapshot set");
  const auto rr = coordinator_rollout(env_, config_, views_, active_, theta, frozen_stats,
                                      scenarios_.at(scenario_index), false);
  Episode ep;
  ep.episode_return = rr.episode_return;
  ep.steps = rr.steps;
  ep.obs_stats = rr.obs_stats;
  return ep;
}

}  // namespace gridars
