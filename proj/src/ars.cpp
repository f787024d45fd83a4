#include "gridars/ars.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "gridars/rng.hpp"

namespace gridars {

namespace {

constexpr double kSigmaFloor = 1e-8;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void ArsHyperParams::validate() const {
  require(alpha > 0, "ars: alpha must be positive");
  require(n_directions >= 1, "ars: n_directions must be >= 1");
  require(noise_std > 0, "ars: noise_std must be positive");
  require(top_b >= 1 && top_b <= n_directions, "ars: need 1 <= top_b <= n_directions");
  require(decay > 0 && decay <= 1, "ars: decay must be in (0, 1]");
  require(max_iters >= 0, "ars: max_iters must be >= 0");
}

std::uint64_t direction_seed(std::uint64_t master_seed, int iteration, int index) {
  return rng::derive(master_seed, static_cast<std::uint64_t>(iteration),
                     static_cast<std::uint64_t>(index));
}

std::vector<double> direction_from_seed(int n_params, std::uint64_t delta_seed) {
  rng::Stream stream(delta_seed);
  std::vector<double> delta(n_params);
  for (double& d : delta) d = stream.normal();
  return delta;
}

std::vector<std::vector<double>> sample_directions(int n_params, int n,
                                                   std::uint64_t master_seed, int iteration) {
  require(n_params >= 1, "ars: n_params must be >= 1");
  std::vector<std::vector<double>> out;
  out.reserve(n);
  for (int j = 0; j < n; ++j) {
    out.push_back(direction_from_seed(n_params, direction_seed(master_seed, iteration, j)));
  }
  return out;
}

std::pair<ParameterVector, ParameterVector> perturb(const ParameterVector& theta,
                                                    std::span<const double> delta, double nu) {
  require(theta.values.size() == delta.size(), "perturb: length mismatch");
  ParameterVector plus = theta, minus = theta;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    plus.values[i] += nu * delta[i];
    minus.values[i] -= nu * delta[i];
  }
  return {std::move(plus), std::move(minus)};
}

ParameterVector rank_and_update(const ParameterVector& theta,
                                std::vector<DirectionOutcome> outcomes, double alpha,
                                int top_b) {
  require(!outcomes.empty(), "rank_and_update: no outcomes");
  require(top_b >= 1 && top_b <= static_cast<int>(outcomes.size()),
          "rank_and_update: bad top_b");
  for (const auto& o : outcomes) {
    require(std::isfinite(o.r_plus) && std::isfinite(o.r_minus),
            "rank_and_update: non-finite reward");
  }

  std::sort(outcomes.begin(), outcomes.end(), [](const auto& a, const auto& b) {
    const double ma = std::max(a.r_plus, a.r_minus);
    const double mb = std::max(b.r_plus, b.r_minus);
    if (ma != mb) return ma > mb;
    return a.index < b.index;
  });
  outcomes.resize(top_b);

  double sum = 0.0;
  for (const auto& o : outcomes) sum += o.r_plus + o.r_minus;
  const double mean = sum / (2.0 * top_b);
  double sq = 0.0;
  for (const auto& o : outcomes) {
    sq += (o.r_plus - mean) * (o.r_plus - mean) + (o.r_minus - mean) * (o.r_minus - mean);
  }
  const double sigma_b = std::max(std::sqrt(sq / (2.0 * top_b)), kSigmaFloor);

  ParameterVector next = theta;
  const double scale = alpha / (static_cast<double>(top_b) * sigma_b);
  for (const auto& o : outcomes) {
    const auto delta = direction_from_seed(theta.size(), o.delta_seed);
    const double w = scale * (o.r_plus - o.r_minus);
    for (int i = 0; i < theta.size(); ++i) next.values[i] += w * delta[i];
  }
  return next;
}

std::pair<double, double> decay_step(double alpha, double nu, double eps) {
  require(eps > 0 && eps <= 1, "decay_step: eps must be in (0, 1]");
  return {alpha * eps, nu * eps};
}

namespace {

struct DirectionEval {
  DirectionOutcome outcome;
  RunningNormalizer stats_plus;
  RunningNormalizer stats_minus;
  long long env_steps = 0;
  double return_sum = 0.0;  // over the 2m rollouts
};

// Evaluate directions [0, n) across `workers` threads; results land by index.
void evaluate_directions(RolloutBackend& backend, const ParameterVector& theta,
                         const RunningNormalizer& frozen, double nu,
                         std::uint64_t master_seed, int iteration, int n, int workers,
                         std::vector<DirectionEval>& evals) {
  const int m = backend.scenario_count();
  auto eval_one = [&](int j) {
    DirectionEval ev;
    ev.outcome.index = j;
    ev.outcome.delta_seed = direction_seed(master_seed, iteration, j);
    const auto delta = direction_from_seed(backend.param_count(), ev.outcome.delta_seed);
    auto [theta_plus, theta_minus] = perturb(theta, delta, nu);
    ev.stats_plus = RunningNormalizer(backend.obs_dims());
    ev.stats_minus = RunningNormalizer(backend.obs_dims());
    double sum_plus = 0.0, sum_minus = 0.0;
    for (int s = 0; s < m; ++s) {
      const auto ep = backend.run(theta_plus, frozen, s);
      sum_plus += ep.episode_return;
      ev.stats_plus.merge(ep.obs_stats);
      ev.env_steps += ep.steps;
    }
    for (int s = 0; s < m; ++s) {
      const auto ep = backend.run(theta_minus, frozen, s);
      sum_minus += ep.episode_return;
      ev.stats_minus.merge(ep.obs_stats);
      ev.env_steps += ep.steps;
    }
    ev.outcome.r_plus = sum_plus / m;
    ev.outcome.r_minus = sum_minus / m;
    ev.return_sum = sum_plus + sum_minus;
    evals[j] = std::move(ev);
  };

  if (workers <= 1 || n == 1) {
    for (int j = 0; j < n; ++j) eval_one(j);
    return;
  }

  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const int used = std::min(workers, n);
  for (int w = 0; w < used; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (int j = w; j < n; j += used) eval_one(j);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace

LearnerResult run_ars_learner(RolloutBackend& backend, const LearnerConfig& config,
                              const LearnerHooks& hooks, const LearnerCheckpoint* resume_from) {
  config.hyper.validate();
  require(config.publish_interval >= 1, "learner: publish_interval must be >= 1");
  require(config.workers >= 1, "learner: workers must be >= 1");

  LearnerResult result;
  double alpha = config.hyper.alpha;
  double nu = config.hyper.noise_std;
  int start_iteration = 0;
  int snapshot_ordinal = 0;

  if (resume_from != nullptr) {
    result.theta = resume_from->theta;
    result.obs_stats = resume_from->obs_stats;
    alpha = resume_from->alpha;
    nu = resume_from->noise_std;
    start_iteration = resume_from->iteration;
    snapshot_ordinal = resume_from->iteration / config.publish_interval;
    result.total_env_steps = resume_from->total_env_steps;
  } else {
    result.theta = backend.initial_params(rng::derive(config.master_seed, 0x7e7a));
    result.obs_stats = RunningNormalizer(backend.obs_dims());
  }

  const int n = config.hyper.n_directions;
  const int m = backend.scenario_count();
  require(m >= 1, "learner: backend has no scenarios");

  auto make_checkpoint = [&](int iteration, bool final_flag) {
    LearnerCheckpoint cp;
    cp.name = config.name;
    cp.iteration = iteration;
    cp.alpha = alpha;
    cp.noise_std = nu;
    cp.master_seed = config.master_seed;
    cp.theta = result.theta;
    cp.obs_stats = result.obs_stats;
    cp.final_checkpoint = final_flag;
    cp.total_env_steps = result.total_env_steps;
    return cp;
  };

  auto publish = [&](int iteration, bool converged) {
    if (!hooks.publish) return;
    SnapshotEvent ev;
    ev.ordinal = ++snapshot_ordinal;
    ev.iteration = iteration;
    ev.converged = converged;
    ev.theta = result.theta;
    ev.obs_stats = result.obs_stats;
    hooks.publish(ev);
  };

  for (int k = start_iteration + 1; k <= config.hyper.max_iters; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    backend.begin_iteration(k);
    const RunningNormalizer frozen = result.obs_stats;

    std::vector<DirectionEval> evals(n);
    try {
      evaluate_directions(backend, result.theta, frozen, nu, config.master_seed, k, n,
                          config.workers, evals);
    } catch (const std::exception& e) {
      if (hooks.checkpoint) hooks.checkpoint(make_checkpoint(k - 1, false));
      throw LearnerAborted(config.name + ": worker failure in iteration " +
                           std::to_string(k) + ": " + e.what());
    }

    std::vector<DirectionOutcome> outcomes;
    outcomes.reserve(n);
    double return_sum = 0.0;
    for (const auto& ev : evals) {
      outcomes.push_back(ev.outcome);
      return_sum += ev.return_sum;
      result.total_env_steps += ev.env_steps;
    }

    result.theta = rank_and_update(result.theta, std::move(outcomes), alpha, config.hyper.top_b);
    std::tie(alpha, nu) = decay_step(alpha, nu, config.hyper.decay);

    // Fold observation statistics in fixed order: direction index, then sign.
    for (const auto& ev : evals) {
      result.obs_stats.merge(ev.stats_plus);
      result.obs_stats.merge(ev.stats_minus);
    }

    IterationRecord rec;
    rec.iteration = k;
    rec.mean_return = return_sum / (2.0 * n * m);
    rec.alpha = alpha;
    rec.noise_std = nu;
    rec.wall_seconds =
        config.deterministic_timing
            ? 0.0
            : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.curve.push_back(rec);
    if (hooks.on_iteration) hooks.on_iteration(rec);

    const bool last = k == config.hyper.max_iters;
    if (k % config.publish_interval == 0 || last) {
      publish(k, last);
      if (hooks.checkpoint) hooks.checkpoint(make_checkpoint(k, last));
    }
  }

  if (config.hyper.max_iters == 0) {
    publish(0, true);
    if (hooks.checkpoint) hooks.checkpoint(make_checkpoint(0, true));
  }
  return result;
}

}  // namespace gridars
