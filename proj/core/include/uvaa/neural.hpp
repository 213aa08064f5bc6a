#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "uvaa/rng.hpp"

namespace uvaa::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Sequence batches are stored column-wise: a (features x T*B) matrix whose
// column t*B + b holds step t of sequence b.

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

/// Owning, ordered set of named parameters. Copying deep-copies every tensor.
class ParameterSet {
 public:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const noexcept { return params_.size(); }
  std::span<Parameter> all() noexcept { return params_; }
  std::span<const Parameter> all() const noexcept { return params_; }

  /// Total number of scalars.
  std::size_t count() const noexcept;
  void zero_grad();
  double grad_norm() const;
  void scale_grad(double factor);
  bool grad_finite() const;
  bool value_finite() const;

 private:
  std::vector<Parameter> params_;
};

// ---------------------------------------------------------------- LSTM cell

/// Gate rows are stacked as [input; forget; candidate; output], each H rows.
struct LstmCellParams {
  Matrix w_x;  // 4H x D
  Matrix w_h;  // 4H x H
  Vector b;    // 4H

  Eigen::Index input_size() const { return w_x.cols(); }
  Eigen::Index hidden_size() const { return w_h.cols(); }
};

struct RecurrentState {
  Matrix h;  // H x B
  Matrix c;  // H x B
};

struct LstmCache {
  int batch = 1;
  Matrix gates;   // 4H x TB, post-activation
  Matrix cell;    // H x TB
  Matrix hidden;  // H x TB
  Matrix h0, c0;  // H x B
};

/// Runs the recursion over a whole sequence batch and returns the hidden
/// outputs (H x TB). `state` holds (h0, c0) on entry and (hT, cT) on exit.
Matrix lstm_forward(const Matrix& w_x, const Matrix& w_h, const Matrix& b, const Matrix& inputs,
                    int batch, RecurrentState& state, LstmCache* cache = nullptr);
Matrix lstm_forward(const LstmCellParams& p, const Matrix& inputs, int batch,
                    RecurrentState& state, LstmCache* cache = nullptr);

struct LstmGrads {
  Matrix w_x, w_h, b, inputs;
};

/// Backpropagation through time. `truncation` > 0 cuts the recurrent
/// gradient at every multiple of that many steps; forward values are not
/// affected. Gradients are accumulated into `grads`, which must be shaped.
void lstm_backward(const Matrix& w_x, const Matrix& w_h, const Matrix& inputs,
                   const LstmCache& cache, const Matrix& d_hidden, int truncation,
                   LstmGrads& grads, bool want_input_grad);

// ---------------------------------------------------------------- networks

struct NetworkShape {
  int input_size = 0;
  int lstm_hidden = 128;
  std::vector<int> fc_hidden{256, 256, 256};
  int output_size = 0;
  bool use_lstm = true;  // false replaces the LSTM with a tanh dense layer
};

/// LSTM (or dense tanh) followed by tanh dense layers; shared by the actor
/// and the critic.
class Trunk {
 public:
  struct Cache {
    int batch = 1;
    LstmCache lstm;
    std::vector<Matrix> activations;  // output of each layer, first one included
  };

  Trunk() = default;
  Trunk(ParameterSet& params, const NetworkShape& shape, const std::string& prefix, Rng& rng);

  Matrix forward(const ParameterSet& params, const Matrix& x, int batch, RecurrentState& state,
                 Cache* cache) const;
  /// Accumulates parameter gradients for d(loss)/d(output).
  void backward(ParameterSet& params, const Matrix& x, const Cache& cache, const Matrix& d_out,
                int truncation) const;

  int output_size() const noexcept { return output_size_; }
  int recurrent_size() const noexcept { return use_lstm_ ? lstm_hidden_ : 0; }

 private:
  struct DenseIdx {
    std::size_t w = 0, b = 0;
  };
  bool use_lstm_ = true;
  int lstm_hidden_ = 0;
  int output_size_ = 0;
  std::size_t lstm_wx_ = 0, lstm_wh_ = 0, lstm_b_ = 0;
  DenseIdx first_;
  std::vector<DenseIdx> fc_;
};

struct GaussianParams {
  Matrix mean;     // A x cols
  Vector log_std;  // A, already clamped
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// Actor: trunk, linear mean head, state-independent log-std vector.
class PolicyNetwork {
 public:
  struct Cache {
    Trunk::Cache trunk;
    Matrix features;
  };

  PolicyNetwork() = default;
  PolicyNetwork(const NetworkShape& shape, Rng& rng, double initial_log_std = -0.5);

  GaussianParams forward(const Matrix& obs, int batch, Cache* cache = nullptr) const;
  /// One step for B parallel sequences; advances `state`.
  GaussianParams step(const Matrix& obs_t, RecurrentState& state) const;
  void backward(const Matrix& obs, const Cache& cache, const Matrix& d_mean,
                const Vector& d_log_std, int truncation = 0);

  RecurrentState initial_state(int batch) const;
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }
  const NetworkShape& shape() const noexcept { return shape_; }
  int action_size() const noexcept { return shape_.output_size; }

 private:
  NetworkShape shape_;
  ParameterSet params_;
  Trunk trunk_;
  std::size_t head_w_ = 0, head_b_ = 0, log_std_ = 0;
};

/// Critic: trunk with a linear head of M outputs (one per objective).
class ValueNetwork {
 public:
  struct Cache {
    Trunk::Cache trunk;
    Matrix features;
  };

  ValueNetwork() = default;
  ValueNetwork(const NetworkShape& shape, Rng& rng);

  Matrix forward(const Matrix& obs, int batch, Cache* cache = nullptr) const;
  Matrix step(const Matrix& obs_t, RecurrentState& state) const;
  void backward(const Matrix& obs, const Cache& cache, const Matrix& d_values, int truncation = 0);

  RecurrentState initial_state(int batch) const;
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }
  const NetworkShape& shape() const noexcept { return shape_; }

 private:
  NetworkShape shape_;
  ParameterSet params_;
  Trunk trunk_;
  std::size_t head_w_ = 0, head_b_ = 0;
};

/// Closed-form scalar count of a network with the given shape; the policy
/// variant adds the log-std vector.
std::size_t parameter_count(const NetworkShape& shape, bool with_log_std);

// ------------------------------------------------- squashed Gaussian policy

struct ActionSample {
  Vector pre_squash;  // u
  Vector squashed;    // tanh(u), in (-1, 1)
  double log_prob = 0.0;
};

/// log density of tanh(u) when u ~ N(mean, exp(log_std)^2), evaluated in the
/// squashed space (the affine map to the action bounds is excluded).
double squashed_log_prob(const Vector& mean, const Vector& log_std, const Vector& u);

/// Gradients of squashed_log_prob with respect to mean and log_std.
void squashed_log_prob_grad(const Vector& mean, const Vector& log_std, const Vector& u,
                            Vector& d_mean, Vector& d_log_std);

ActionSample sample_action(const Vector& mean, const Vector& log_std, Rng& rng);

/// Affine map of a squashed action in [-1, 1] onto [low, high], clamped.
std::vector<double> scale_action(const Vector& squashed, std::span<const double> low,
                                 std::span<const double> high);

// ---------------------------------------------------------------- training

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(const ParameterSet& params, AdamConfig config);

  const AdamConfig& config() const noexcept { return config_; }
  std::int64_t step_count() const noexcept { return step_; }
  std::vector<Matrix>& first_moment() noexcept { return m_; }
  std::vector<Matrix>& second_moment() noexcept { return v_; }
  const std::vector<Matrix>& first_moment() const noexcept { return m_; }
  const std::vector<Matrix>& second_moment() const noexcept { return v_; }
  void set_step_count(std::int64_t s) noexcept { step_ = s; }

 private:
  friend void adam_update(ParameterSet&, AdamState&);
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<Matrix> m_, v_;
};

/// One bias-corrected Adam step. Throws NonFiniteGradient before touching any
/// parameter if a gradient entry is NaN or infinite.
void adam_update(ParameterSet& params, AdamState& state);

/// Compares the gradients currently stored in `params` against central finite
/// differences of `loss`. Checks at most `max_per_param` entries per tensor
/// (all when 0). Relative error is |a - n| / max(|a|, |n|, floor).
double max_relative_gradient_error(ParameterSet& params, const std::function<double()>& loss,
                                   double h = 1e-5, std::size_t max_per_param = 0,
                                   double floor = 1e-6, Rng* rng = nullptr);

// ---------------------------------------------------------------- checkpoints

/// Versioned flat file: magic, version, metadata, shape manifest, then every
/// array as little-endian float64 in manifest order (column-major).
struct Checkpoint {
  static constexpr char kMagic[8] = {'U', 'V', 'A', 'A', 'C', 'K', 'P', 'T'};
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Matrix>> arrays;

  const Matrix& array(const std::string& name) const;  // throws CheckpointError
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);
};

void append_parameters(Checkpoint& ckpt, const std::string& prefix, const ParameterSet& params);
/// Copies arrays named prefix + parameter name into `params`; throws
/// CheckpointError on a missing array or a shape mismatch.
void restore_parameters(const Checkpoint& ckpt, const std::string& prefix, ParameterSet& params);

std::string encode_shape(const NetworkShape& shape);
NetworkShape decode_shape(const std::string& text);

}  // namespace uvaa::nn
