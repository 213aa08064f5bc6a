#pragma once

#include <array>
#include <exception>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "uvaa/env.hpp"
#include "uvaa/neural.hpp"

namespace uvaa::moppo {

inline constexpr int kObjectives = 2;

struct Transition {
  std::vector<double> observation;
  std::array<double, kObjectives> reward{};
  bool valid = true;
  double rate = 0.0;    // raw objective-1 increment
  double energy = 0.0;  // raw objective-2 increment (J)
};

/// Fixed-horizon episodic environment with a bounded continuous action box.
class EpisodeEnv {
 public:
  virtual ~EpisodeEnv() = default;
  virtual std::size_t observation_size() const = 0;
  virtual std::size_t action_size() const = 0;
  virtual int horizon() const = 0;
  virtual std::vector<double> action_low() const = 0;
  virtual std::vector<double> action_high() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual Transition step(std::span<const double> action) = 0;
};

using EnvFactory = std::function<std::unique_ptr<EpisodeEnv>()>;

/// The UAV swarm MOMDP behind the EpisodeEnv interface.
class UvaaEpisodeEnv final : public EpisodeEnv {
 public:
  explicit UvaaEpisodeEnv(env::EnvConfig config) : env_(std::move(config)) {}

  std::size_t observation_size() const override { return env_.config().observation_size(); }
  std::size_t action_size() const override { return env_.config().action_size(); }
  int horizon() const override { return env_.config().horizon; }
  std::vector<double> action_low() const override { return env::action_low(env_.config()); }
  std::vector<double> action_high() const override { return env::action_high(env_.config()); }
  std::vector<double> reset(std::uint64_t seed) override;
  Transition step(std::span<const double> action) override;

  const env::Environment& environment() const noexcept { return env_; }

 private:
  env::Environment env_;
};

EnvFactory uvaa_env_factory(const env::EnvConfig& config);

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  int epochs = 10;
  int episodes_per_iteration = 4;
  int minibatch_episodes = 1;  // whole episodes keep recurrent sequences intact
  double learning_rate = 1e-4;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  int bptt_truncation = 0;     // 0 = full-sequence BPTT
  bool normalize_advantage = true;

  void validate() const;
};

/// Architecture knobs shared by the actor and the critic.
struct ModelConfig {
  int lstm_hidden = 128;
  std::vector<int> fc_hidden{256, 256, 256};
  bool use_lstm = true;
  double initial_log_std = -0.5;
};

/// Learning task <weight vector, policy, vector critic> plus optimizer state.
struct Task {
  std::uint64_t id = 0;
  std::vector<double> weight;
  nn::PolicyNetwork policy;
  nn::ValueNetwork value;
  nn::AdamState policy_opt;
  nn::AdamState value_opt;

  static Task create(std::uint64_t id, std::vector<double> weight, std::size_t observation_size,
                     std::size_t action_size, const ModelConfig& model, double learning_rate,
                     std::uint64_t init_seed);

  /// Content hash over the weight vector and every network parameter.
  std::uint64_t content_hash() const;
};

/// Snapshot file holding policy, critic and optimizer moments.
nn::Checkpoint task_to_checkpoint(const Task& task);
Task task_from_checkpoint(const nn::Checkpoint& ckpt, double learning_rate);
/// Rebuilds only the policy network (evaluation path).
nn::PolicyNetwork policy_from_checkpoint(const nn::Checkpoint& ckpt);

/// Trajectories of B episodes of length T in sequence-batch layout.
struct RolloutBatch {
  int episodes = 0;
  int horizon = 0;
  nn::Matrix observations;  // D x TB
  nn::Matrix pre_squash;    // A x TB
  nn::Vector log_prob;      // TB, behavior policy
  nn::Matrix rewards;       // M x TB
  nn::Matrix values;        // M x TB, behavior critic
  std::vector<bool> valid;  // TB
  nn::Matrix episode_objectives;  // 2 x B: (sum rate, sum energy)

  std::size_t size() const noexcept { return static_cast<std::size_t>(episodes) * static_cast<std::size_t>(horizon); }
};

/// Runs `n_episodes` full episodes in lockstep. Environment seeds and action
/// noise derive from `seed` only.
RolloutBatch collect_rollouts(const Task& task, const EnvFactory& make_env, int n_episodes,
                              std::uint64_t seed);

/// Componentwise GAE with a zero bootstrap after the last step of each
/// episode. Returns M x TB advantages.
nn::Matrix vector_gae(const nn::Matrix& rewards, const nn::Matrix& values, int episodes,
                      double gamma, double lambda);

/// omega . A[t] per column, optionally standardized over the batch.
nn::Vector scalarize_advantage(const nn::Matrix& advantages, std::span<const double> weight,
                               bool normalize = true);

/// min(r A, clip(r, 1 - eps, 1 + eps) A) for one sample.
double clipped_objective(double ratio, double advantage, double clip);

struct PolicyLossResult {
  double loss = 0.0;  // negated mean clipped surrogate
  double clip_fraction = 0.0;
  nn::Matrix d_mean;
  nn::Vector d_log_std;
};

/// Clipped-surrogate loss of a sequence batch and its gradient w.r.t. the
/// distribution parameters.
PolicyLossResult policy_loss(const nn::GaussianParams& dist, const nn::Matrix& pre_squash,
                             const nn::Vector& old_log_prob, const nn::Vector& advantages,
                             double clip);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
};

/// Epochs of clipped-surrogate and vector-value regression on `batch`.
/// On a non-finite loss or gradient the task is restored to its state on
/// entry and NonFiniteLoss is thrown.
UpdateStats ppo_update(Task& task, const RolloutBatch& batch, const PpoConfig& config);

struct IterationRecord {
  std::uint64_t task_id = 0;
  int iteration = 0;
  double scalarized_return = 0.0;  // mean over episodes of sum_t omega . r[t]
  double f1 = 0.0;                 // mean sum of rates
  double f2 = 0.0;                 // mean sum of energies (J)
  UpdateStats stats;
  bool rolled_back = false;
};

/// Called once per finished iteration with a deep copy of the task. Invoked
/// from worker threads; implementations must only touch per-(task, iteration)
/// state.
using SnapshotSink =
    std::function<void(std::size_t task_index, int iteration, const Task&, const IterationRecord&)>;

struct TrainContext {
  EnvFactory make_env;
  PpoConfig ppo;
  std::uint64_t master_seed = 0;
  std::uint64_t generation = 0;
  int threads = 1;
  SnapshotSink sink;
  bool keep_snapshots = true;
  /// When set (sized like the task set), a task that throws stops training
  /// and its exception is stored here instead of propagating.
  std::vector<std::exception_ptr>* task_errors = nullptr;
};

/// Trains every task for `n_iter` iterations and returns |tasks| * n_iter
/// snapshots in (task, iteration) order; `tasks` hold the final states.
std::vector<Task> lstm_moppo(std::vector<Task>& tasks, int n_iter, const TrainContext& ctx);

/// Mean-action evaluation of a policy over fixed seeds: (mean f1, mean f2)
/// in raw units (rate sum, energy sum in J).
std::array<double, 2> evaluate_raw(const nn::PolicyNetwork& policy, const EnvFactory& make_env,
                                   std::span<const std::uint64_t> seeds);

}  // namespace uvaa::moppo
