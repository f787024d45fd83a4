#include "gridars/reward.hpp"

#include <algorithm>
#include <stdexcept>

namespace gridars {

void RewardCoefficients::validate() const {
  if (!(c1 > 0 && c2 > 0 && c3 > 0)) {
    throw std::invalid_argument("reward: c1, c2, c3 must be positive");
  }
  if (!(penalty < 0)) throw std::invalid_argument("reward: penalty must be negative");
}

double delta_v(double v, double t, double t_pf, const RecoveryProfile& profile) {
  if (t <= t_pf) return 0.0;
  return std::min(v - profile.threshold_after(t - t_pf), 0.0);
}

double lower_reward(const StepContext& ctx, const RewardCoefficients& coeffs,
                    const RecoveryProfile& profile) {
  if (ctx.t <= ctx.t_pf) return 0.0;
  if (ctx.t > ctx.t_pf + 4.0) {
    for (double v : ctx.observed_voltage) {
      if (v < 0.95) return coeffs.penalty;
    }
  }
  double dv_sum = 0.0;
  for (double v : ctx.observed_voltage) dv_sum += delta_v(v, ctx.t, ctx.t_pf, profile);
  double shed_sum = 0.0;
  for (double s : ctx.shed) shed_sum += s;
  return coeffs.c1 * dv_sum - coeffs.c2 * shed_sum - coeffs.c3 * ctx.invalid_count;
}

double coordinator_q(double sigma_t, double y_c_i) {
  return std::min(y_c_i - sigma_t, 0.0);
}

double coordinator_reward(const StepContext& ctx, std::span<const double> area_weights,
                          const RewardCoefficients& coeffs, const RecoveryProfile& profile) {
  if (ctx.observed_voltage.size() != area_weights.size()) {
    throw std::invalid_argument("coordinator_reward: weight count mismatch");
  }
  if (ctx.t <= ctx.t_pf) return 0.0;
  if (ctx.t > ctx.t_pf + 4.0) {
    for (double v : ctx.observed_voltage) {
      if (v < 0.95) return coeffs.penalty;
    }
  }
  const double sigma_t = profile.sigma(ctx.t, ctx.t_pf);
  double q_sum = 0.0;
  for (std::size_t i = 0; i < ctx.observed_voltage.size(); ++i) {
    q_sum += area_weights[i] * coordinator_q(sigma_t, ctx.observed_voltage[i]);
  }
  double shed_sum = 0.0;
  for (double s : ctx.shed) shed_sum += s;
  return q_sum - coeffs.c2 * shed_sum - coeffs.c3 * ctx.invalid_count;
}

double episode_return(std::span<const double> step_rewards) {
  if (step_rewards.empty()) throw std::invalid_argument("episode_return: empty sequence");
  double total = 0.0;
  for (double r : step_rewards) total += r;
  return total;
}

}  // namespace gridars
