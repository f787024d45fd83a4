#include "gridars/rollout.hpp"

#include <algorithm>
#include <stdexcept>

namespace gridars {

AreaView make_area_view(const GridEnv& env, int area_id, std::span<const int> neighbor_bus_ids) {
  const int a = env.area_index(area_id);
  AreaView view;
  view.area_id = area_id;
  view.own_buses = env.topology().areas[a].buses;
  std::sort(view.own_buses.begin(), view.own_buses.end(),
            [&](int x, int y) { return env.bus_index(x) < env.bus_index(y); });
  view.neighbor_buses.assign(neighbor_bus_ids.begin(), neighbor_bus_ids.end());
  for (int b : view.neighbor_buses) {
    if (env.area_of_bus(b) == a) {
      throw std::invalid_argument("area view: neighbor bus " + std::to_string(b) +
                                  " belongs to the area itself");
    }
  }
  std::sort(view.neighbor_buses.begin(), view.neighbor_buses.end(),
            [&](int x, int y) { return env.bus_index(x) < env.bus_index(y); });
  view.load_indices = env.area_load_indices(a);
  return view;
}

void apply_area_policy(const GridEnv& env, const GridState& state, const AreaView& view,
                       const AreaPolicy& policy, LstmState& lstm,
                       std::span<double> global_action) {
  const auto obs_raw =
      env.observe_area(state, view.own_buses, view.neighbor_buses, view.load_indices);
  const auto obs = policy.stats.normalize(obs_raw);
  auto fr = forward(policy.spec, policy.theta, lstm, obs);
  lstm = std::move(fr.state);
  const auto actions = map_action_continuous(fr.raw, policy.action_bias);
  for (std::size_t i = 0; i < view.load_indices.size(); ++i) {
    global_action[view.load_indices[i]] = actions[i];
  }
}

void append_step_trace(EpisodeTrace& trace, const GridState& state,
                       std::span<const double> action, double reward, int chosen_candidate) {
  StepTrace st;
  st.t = state.t;
  st.voltage = state.voltage;
  st.remaining = state.remaining;
  st.action.assign(action.begin(), action.end());
  st.reward = reward;
  st.chosen_candidate = chosen_candidate;
  trace.steps.push_back(std::move(st));
}

GridRolloutResult area_rollout(const GridEnv& env, const AreaView& view,
                               const AreaPolicy& policy, const FaultScenario& scenario,
                               const RewardCoefficients& coeffs, const RecoveryProfile& profile,
                               bool record_trace) {
  GridRolloutResult result;
  result.obs_stats = RunningNormalizer(view.obs_dims());
  if (record_trace) result.trace = EpisodeTrace{};

  GridState state = env.reset(scenario);
  LstmState lstm = LstmState::zeros(policy.spec.lstm_units);
  std::vector<double> action(env.load_count(), 0.0);
  std::vector<double> shed_pu(view.load_indices.size(), 0.0);
  const double t_pf = scenario.t_clear();
  const int n_steps = env.steps_per_episode(scenario);

  for (int step = 0; step < n_steps; ++step) {
    const auto obs_raw =
        env.observe_area(state, view.own_buses, view.neighbor_buses, view.load_indices);
    result.obs_stats.update(obs_raw);
    const auto obs = policy.stats.normalize(obs_raw);
    auto fr = forward(policy.spec, policy.theta, lstm, obs);
    lstm = std::move(fr.state);
    const auto local = map_action_continuous(fr.raw, policy.action_bias);
    std::fill(action.begin(), action.end(), 0.0);
    for (std::size_t i = 0; i < view.load_indices.size(); ++i) {
      action[view.load_indices[i]] = local[i];
    }

    const auto sr = env.step(state, action, scenario);
    for (std::size_t i = 0; i < view.load_indices.size(); ++i) {
      const int l = view.load_indices[i];
      shed_pu[i] = sr.shed_fraction[l] * env.load_buses()[l].nominal_demand;
      result.total_shed_pu += shed_pu[i];
    }
    result.invalid_actions += sr.invalid_actions;

    const auto v_obs =
        env.observe_area(state, view.own_buses, view.neighbor_buses, {});
    StepContext ctx;
    ctx.t = state.t;
    ctx.t_pf = t_pf;
    ctx.observed_voltage = v_obs;
    ctx.shed = shed_pu;
    ctx.invalid_count = sr.invalid_actions;
    const double r = lower_reward(ctx, coeffs, profile);
    result.episode_return += r;
    ++result.steps;
    if (result.trace) append_step_trace(*result.trace, state, action, r, -1);
    if (coeffs.terminate_on_penalty && r == coeffs.penalty) break;
  }
  return result;
}

GridRolloutResult scripted_rollout(const GridEnv& env, const FaultScenario& scenario,
                                   std::span<const std::vector<double>> actions,
                                   bool record_trace) {
  GridRolloutResult result;
  result.obs_stats = RunningNormalizer(0);
  if (record_trace) result.trace = EpisodeTrace{};

  GridState state = env.reset(scenario);
  std::vector<double> zero(env.load_count(), 0.0);
  const int n_steps = env.steps_per_episode(scenario);
  for (int step = 0; step < n_steps; ++step) {
    const std::vector<double>& a =
        step < static_cast<int>(actions.size()) ? actions[step] : zero;
    const auto sr = env.step(state, a, scenario);
    for (int l = 0; l < env.load_count(); ++l) {
      result.total_shed_pu += sr.shed_fraction[l] * env.load_buses()[l].nominal_demand;
    }
    result.invalid_actions += sr.invalid_actions;
    ++result.steps;
    if (result.trace) append_step_trace(*result.trace, state, a, 0.0, -1);
  }
  return result;
}

AreaRolloutBackend::AreaRolloutBackend(const GridEnv& env, AreaView view, LstmPolicySpec spec,
                                       std::vector<FaultScenario> scenarios,
                                       RewardCoefficients coeffs, RecoveryProfile profile,
                                       double action_bias)
    : env_(env),
      view_(std::move(view)),
      spec_(std::move(spec)),
      scenarios_(std::move(scenarios)),
      coeffs_(coeffs),
      profile_(profile),
      action_bias_(action_bias) {
  if (scenarios_.empty()) throw std::invalid_argument("area backend: no scenarios");
  if (spec_.input_dim != view_.obs_dims()) {
    throw std::invalid_argument("area backend: spec input_dim does not match view");
  }
  if (spec_.head.kind != HeadKind::kContinuous ||
      spec_.head.arity != static_cast<int>(view_.load_indices.size())) {
    throw std::invalid_argument("area backend: head must be continuous over the area loads");
  }
  coeffs_.validate();
}

RolloutBackend::Episode AreaRolloutBackend::run(const ParameterVector& theta,
                                                const RunningNormalizer& frozen_stats,
                                                int scenario_index) const {
  AreaPolicy policy{spec_, theta, frozen_stats, action_bias_};
  const auto rr = area_rollout(env_, view_, policy, scenarios_.at(scenario_index), coeffs_,
                               profile_, false);
  Episode ep;
  ep.episode_return = rr.episode_return;
  ep.steps = rr.steps;
  ep.obs_stats = rr.obs_stats;
  return ep;
}

}  // namespace gridars
