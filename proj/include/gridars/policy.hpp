#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gridars {

inline constexpr int kParamLayoutVersion = 1;

// Variance floor below which observation channels are treated as constant
// and normalized with identity scale.
inline constexpr double kVarianceFloor = 1e-8;

enum class HeadKind { kContinuous, kDiscrete };

struct PolicyHead {
  HeadKind kind = HeadKind::kContinuous;
  int arity = 1;

  bool operator==(const PolicyHead&) const = default;
};

// Architecture: obs -> LSTM(lstm_units) -> dense(dense_units, tanh) -> head (linear).
struct LstmPolicySpec {
  int input_dim = 1;
  int lstm_units = 16;
  int dense_units = 16;
  PolicyHead head;

  // Flat parameter layout (gate order i, f, g, o; matrices row-major):
  //   lstm input weights   4 * lstm_units x input_dim
  //   lstm recurrent wts   4 * lstm_units x lstm_units
  //   lstm biases          4 * lstm_units
  //   dense weights        dense_units x lstm_units
  //   dense biases         dense_units
  //   head weights         arity x dense_units
  //   head biases          arity
  int param_count() const;

  void validate() const;  // throws std::invalid_argument

  bool operator==(const LstmPolicySpec&) const = default;
};

struct ParameterVector {
  std::vector<double> values;
  int layout_version = kParamLayoutVersion;

  int size() const { return static_cast<int>(values.size()); }
  bool operator==(const ParameterVector&) const = default;
};

struct LstmState {
  std::vector<double> hidden;
  std::vector<double> cell;

  static LstmState zeros(int units) {
    return LstmState{std::vector<double>(units, 0.0), std::vector<double>(units, 0.0)};
  }
  bool operator==(const LstmState&) const = default;
};

// Streaming mean/variance (Welford). Variance is the population variance m2/n.
class RunningNormalizer {
 public:
  RunningNormalizer() = default;
  explicit RunningNormalizer(int dims) : mean_(dims, 0.0), m2_(dims, 0.0) {}

  void update(std::span<const double> obs);
  void merge(const RunningNormalizer& other);

  // (obs - mean) / std, with identity scale when n == 0 or the per-dimension
  // variance is below kVarianceFloor.
  std::vector<double> normalize(std::span<const double> obs) const;

  long long count() const { return n_; }
  int dims() const { return static_cast<int>(mean_.size()); }
  double mean(int i) const { return mean_[i]; }
  double variance(int i) const { return n_ > 0 ? m2_[i] / static_cast<double>(n_) : 0.0; }
  const std::vector<double>& mean_vector() const { return mean_; }
  const std::vector<double>& m2_vector() const { return m2_; }

  // Restore from persisted state.
  static RunningNormalizer restore(long long n, std::vector<double> mean, std::vector<double> m2);

  bool operator==(const RunningNormalizer&) const = default;

 private:
  long long n_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

// Seed-reproducible init: weight entries uniform on +-1/sqrt(fan_in), biases zero.
ParameterVector init_params(const LstmPolicySpec& spec, std::uint64_t seed);

struct ForwardResult {
  std::vector<double> raw;
  LstmState state;
};

// Deterministic single-step inference. Throws on dimension mismatch.
ForwardResult forward(const LstmPolicySpec& spec, const ParameterVector& params,
                      const LstmState& state, std::span<const double> obs);

// Componentwise u = 0.1 * (tanh(raw + bias) - 1), always inside [-0.2, 0].
// `bias` shifts where the zero-shed point sits (0 keeps the plain map).
std::vector<double> map_action_continuous(std::span<const double> raw, double bias = 0.0);

// Argmax with ties broken by lowest index. Throws on empty input.
int map_action_discrete(std::span<const double> raw);

}  // namespace gridars
