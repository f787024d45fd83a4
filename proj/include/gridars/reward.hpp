#pragma once

#include <span>
#include <vector>

#include "gridars/grid.hpp"

namespace gridars {

struct RewardCoefficients {
  double c1 = 5.0;  // voltage-deviation weight
  double c2 = 2.0;  // load-shed weight
  double c3 = 1.0;  // invalid-action weight
  double penalty = -1000.0;
  bool terminate_on_penalty = true;

  void validate() const;
};

struct StepContext {
  double t = 0.0;
  double t_pf = 0.0;
  std::span<const double> observed_voltage;  // V_ai (lower) or per-area minima (coordinator)
  std::span<const double> shed;              // per own load bus, p.u. of nominal, >= 0
  int invalid_count = 0;
};

// Piecewise voltage-deviation term, <= 0. Returns 0 for t <= t_pf; otherwise
// min(v - threshold, 0) with the recovery-profile band active at t.
double delta_v(double v, double t, double t_pf, const RecoveryProfile& profile = {});

// Per-step reward for an area agent. Zero until the fault clears; the flat
// penalty fires when any observed voltage sits below 0.95 past t_pf + 4.
double lower_reward(const StepContext& ctx, const RewardCoefficients& coeffs,
                    const RecoveryProfile& profile = {});

// q_i = min(y_c_i - sigma(t), 0)
double coordinator_q(double sigma_t, double y_c_i);

// Coordinator reward over per-area voltage minima with per-area weights.
double coordinator_reward(const StepContext& ctx, std::span<const double> area_weights,
                          const RewardCoefficients& coeffs, const RecoveryProfile& profile = {});

// Undiscounted sum. Throws on an empty sequence.
double episode_return(std::span<const double> step_rewards);

}  // namespace gridars
