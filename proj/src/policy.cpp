#include "gridars/policy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gridars/rng.hpp"

namespace gridars {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

int LstmPolicySpec::param_count() const {
  const int u = lstm_units, i = input_dim, d = dense_units, a = head.arity;
  return 4 * u * (i + u + 1) + d * (u + 1) + a * (d + 1);
}

void LstmPolicySpec::validate() const {
  require(input_dim >= 1, "policy spec: input_dim must be >= 1");
  require(lstm_units >= 1, "policy spec: lstm_units must be >= 1");
  require(dense_units >= 1, "policy spec: dense_units must be >= 1");
  require(head.arity >= 1, "policy spec: head arity must be >= 1");
}

void RunningNormalizer::update(std::span<const double> obs) {
  require(static_cast<int>(obs.size()) == dims(), "normalizer: dimension mismatch");
  ++n_;
  for (int i = 0; i < dims(); ++i) {
    const double old_mean = mean_[i];
    mean_[i] += (obs[i] - old_mean) / static_cast<double>(n_);
    m2_[i] += (obs[i] - old_mean) * (obs[i] - mean_[i]);
  }
}

void RunningNormalizer::merge(const RunningNormalizer& other) {
  require(other.dims() == dims(), "normalizer: dimension mismatch in merge");
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double nab = na + nb;
  for (int i = 0; i < dims(); ++i) {
    const double delta = other.mean_[i] - mean_[i];
    mean_[i] += delta * nb / nab;
    m2_[i] += other.m2_[i] + delta * delta * na * nb / nab;
  }
  n_ += other.n_;
}

std::vector<double> RunningNormalizer::normalize(std::span<const double> obs) const {
  require(static_cast<int>(obs.size()) == dims(), "normalizer: dimension mismatch");
  std::vector<double> out(obs.size());
  for (int i = 0; i < dims(); ++i) {
    double scale = 1.0;
    if (n_ > 0) {
      const double var = m2_[i] / static_cast<double>(n_);
      if (var >= kVarianceFloor) scale = std::sqrt(var);
    }
    out[i] = (obs[i] - mean_[i]) / scale;
  }
  return out;
}

RunningNormalizer RunningNormalizer::restore(long long n, std::vector<double> mean,
                                             std::vector<double> m2) {
  require(n >= 0, "normalizer: negative count");
  require(mean.size() == m2.size(), "normalizer: mean/m2 size mismatch");
  RunningNormalizer r;
  r.n_ = n;
  r.mean_ = std::move(mean);
  r.m2_ = std::move(m2);
  return r;
}

ParameterVector init_params(const LstmPolicySpec& spec, std::uint64_t seed) {
  spec.validate();
  rng::Stream stream(rng::derive(seed, 0x1a17));
  ParameterVector out;
  out.values.resize(spec.param_count(), 0.0);

  const int u = spec.lstm_units, i = spec.input_dim, d = spec.dense_units, a = spec.head.arity;
  std::size_t pos = 0;
  auto fill_block = [&](int rows, int cols, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int k = 0; k < rows * cols; ++k) out.values[pos++] = stream.uniform(-bound, bound);
  };
  auto skip_bias = [&](int n) { pos += n; };  // biases stay zero

  fill_block(4 * u, i, i);  // lstm input weights
  fill_block(4 * u, u, u);  // lstm recurrent weights
  skip_bias(4 * u);
  fill_block(d, u, u);      // dense
  skip_bias(d);
  fill_block(a, d, d);      // head
  skip_bias(a);
  return out;
}

ForwardResult forward(const LstmPolicySpec& spec, const ParameterVector& params,
                      const LstmState& state, std::span<const double> obs) {
  spec.validate();
  require(params.size() == spec.param_count(), "forward: parameter count mismatch");
  require(static_cast<int>(obs.size()) == spec.input_dim, "forward: observation size mismatch");
  require(static_cast<int>(state.hidden.size()) == spec.lstm_units &&
              static_cast<int>(state.cell.size()) == spec.lstm_units,
          "forward: lstm state size mismatch");

  const int u = spec.lstm_units, in = spec.input_dim, d = spec.dense_units, a = spec.head.arity;
  const double* p = params.values.data();
  const double* wx = p;                    // 4u x in
  const double* wh = wx + 4 * u * in;      // 4u x u
  const double* b = wh + 4 * u * u;        // 4u
  const double* dw = b + 4 * u;            // d x u
  const double* db = dw + d * u;           // d
  const double* hw = db + d;               // a x d
  const double* hb = hw + a * d;           // a

  // Gate preactivations, gate order i, f, g, o.
  std::vector<double> gates(4 * u);
  for (int r = 0; r < 4 * u; ++r) {
    double acc = b[r];
    const double* wxr = wx + static_cast<std::size_t>(r) * in;
    for (int c = 0; c < in; ++c) acc += wxr[c] * obs[c];
    const double* whr = wh + static_cast<std::size_t>(r) * u;
    for (int c = 0; c < u; ++c) acc += whr[c] * state.hidden[c];
    gates[r] = acc;
  }

  ForwardResult out;
  out.state.hidden.resize(u);
  out.state.cell.resize(u);
  for (int k = 0; k < u; ++k) {
    const double gi = sigmoid(gates[k]);
    const double gf = sigmoid(gates[u + k]);
    const double gg = std::tanh(gates[2 * u + k]);
    const double go = sigmoid(gates[3 * u + k]);
    const double c_new = gf * state.cell[k] + gi * gg;
    out.state.cell[k] = c_new;
    out.state.hidden[k] = go * std::tanh(c_new);
  }

  std::vector<double> dense(d);
  for (int r = 0; r < d; ++r) {
    double acc = db[r];
    const double* dwr = dw + static_cast<std::size_t>(r) * u;
    for (int c = 0; c < u; ++c) acc += dwr[c] * out.state.hidden[c];
    dense[r] = std::tanh(acc);
  }

  out.raw.resize(a);
  for (int r = 0; r < a; ++r) {
    double acc = hb[r];
    const double* hwr = hw + static_cast<std::size_t>(r) * d;
    for (int c = 0; c < d; ++c) acc += hwr[c] * dense[c];
    out.raw[r] = acc;
  }
  return out;
}

std::vector<double> map_action_continuous(std::span<const double> raw, double bias) {
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    require(std::isfinite(raw[i]), "map_action_continuous: non-finite raw output");
    out[i] = 0.1 * (std::tanh(raw[i] + bias) - 1.0);
  }
  return out;
}

int map_action_discrete(std::span<const double> raw) {
  require(!raw.empty(), "map_action_discrete: empty raw output");
  int best = 0;
  for (int i = 1; i < static_cast<int>(raw.size()); ++i) {
    if (raw[i] > raw[best]) best = i;
  }
  return best;
}

}  // namespace gridars
