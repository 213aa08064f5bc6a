#include "uvaa/moppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>

#include "uvaa/error.hpp"
#include "uvaa/parallel.hpp"

namespace uvaa::moppo {

using nn::Matrix;
using nn::Vector;

// ------------------------------------------------------------ environment

std::vector<double> UvaaEpisodeEnv::reset(std::uint64_t seed) {
  env_.reset(seed);
  return env_.observe();
}

Transition UvaaEpisodeEnv::step(std::span<const double> action) {
  const env::StepResult r = env_.step(env::unflatten_action(action));
  Transition t;
  t.observation = env_.observe();
  t.reward = {r.reward.rate, r.reward.energy};
  t.valid = r.valid;
  t.rate = r.rate;
  t.energy = r.energy;
  return t;
}

EnvFactory uvaa_env_factory(const env::EnvConfig& config) {
  config.validate();
  return [config] { return std::make_unique<UvaaEpisodeEnv>(config); };
}

void PpoConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("PpoConfig: gamma must be in [0,1)");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("PpoConfig: lambda must be in [0,1]");
  if (!(clip > 0.0)) throw std::invalid_argument("PpoConfig: clip must be > 0");
  if (epochs < 1) throw std::invalid_argument("PpoConfig: epochs must be >= 1");
  if (episodes_per_iteration < 1)
    throw std::invalid_argument("PpoConfig: episodes_per_iteration must be >= 1");
  if (minibatch_episodes < 1) throw std::invalid_argument("PpoConfig: minibatch_episodes must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("PpoConfig: learning_rate must be > 0");
  if (bptt_truncation < 0) throw std::invalid_argument("PpoConfig: bptt_truncation must be >= 0");
}

// ------------------------------------------------------------ tasks

Task Task::create(std::uint64_t id, std::vector<double> weight, std::size_t observation_size,
                  std::size_t action_size, const ModelConfig& model, double learning_rate,
                  std::uint64_t init_seed) {
  nn::NetworkShape shape;
  shape.input_size = static_cast<int>(observation_size);
  shape.lstm_hidden = model.lstm_hidden;
  shape.fc_hidden = model.fc_hidden;
  shape.use_lstm = model.use_lstm;
  shape.output_size = static_cast<int>(action_size);
  nn::NetworkShape vshape = shape;
  vshape.output_size = kObjectives;

  Rng rng(init_seed);
  Task t;
  t.id = id;
  t.weight = std::move(weight);
  t.policy = nn::PolicyNetwork(shape, rng, model.initial_log_std);
  t.value = nn::ValueNetwork(vshape, rng);
  const nn::AdamConfig adam{learning_rate, 0.9, 0.999, 1e-8};
  t.policy_opt = nn::AdamState(t.policy.parameters(), adam);
  t.value_opt = nn::AdamState(t.value.parameters(), adam);
  return t;
}

std::uint64_t Task::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const double* p, std::size_t n) {
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(p), n * sizeof(double)), h);
  };
  feed(weight.data(), weight.size());
  for (const auto* ps : {&policy.parameters(), &value.parameters()})
    for (const auto& p : ps->all()) feed(p.value.data(), static_cast<std::size_t>(p.value.size()));
  return h;
}

namespace {

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  char buf[40];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    if (i) s += ',';
    s += buf;
  }
  return s;
}

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stod(item));
  return out;
}

const std::string& meta(const nn::Checkpoint& c, const std::string& key) {
  auto it = c.meta.find(key);
  if (it == c.meta.end()) throw CheckpointError("checkpoint: missing metadata '" + key + "'");
  return it->second;
}

void append_moments(nn::Checkpoint& c, const std::string& prefix, const nn::ParameterSet& params,
                    const nn::AdamState& st) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    c.arrays.emplace_back(prefix + "m/" + params[i].name, st.first_moment()[i]);
    c.arrays.emplace_back(prefix + "v/" + params[i].name, st.second_moment()[i]);
  }
}

void restore_moments(const nn::Checkpoint& c, const std::string& prefix,
                     const nn::ParameterSet& params, nn::AdamState& st) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& m = c.array(prefix + "m/" + params[i].name);
    const Matrix& v = c.array(prefix + "v/" + params[i].name);
    if (m.rows() != params[i].value.rows() || m.cols() != params[i].value.cols() ||
        v.rows() != m.rows() || v.cols() != m.cols())
      throw CheckpointError("checkpoint: optimizer shape mismatch for '" + params[i].name + "'");
    st.first_moment()[i] = m;
    st.second_moment()[i] = v;
  }
}

}  // namespace

nn::Checkpoint task_to_checkpoint(const Task& task) {
  nn::Checkpoint c;
  c.meta["kind"] = "task";
  c.meta["task_id"] = std::to_string(task.id);
  c.meta["weight"] = join_doubles(task.weight);
  c.meta["policy_shape"] = nn::encode_shape(task.policy.shape());
  c.meta["value_shape"] = nn::encode_shape(task.value.shape());
  c.meta["policy_adam_step"] = std::to_string(task.policy_opt.step_count());
  c.meta["value_adam_step"] = std::to_string(task.value_opt.step_count());
  nn::append_parameters(c, "policy/", task.policy.parameters());
  nn::append_parameters(c, "value/", task.value.parameters());
  append_moments(c, "policy_adam/", task.policy.parameters(), task.policy_opt);
  append_moments(c, "value_adam/", task.value.parameters(), task.value_opt);
  return c;
}

nn::PolicyNetwork policy_from_checkpoint(const nn::Checkpoint& ckpt) {
  Rng scratch(0);
  nn::PolicyNetwork policy(nn::decode_shape(meta(ckpt, "policy_shape")), scratch);
  nn::restore_parameters(ckpt, "policy/", policy.parameters());
  return policy;
}

Task task_from_checkpoint(const nn::Checkpoint& ckpt, double learning_rate) {
  Rng scratch(0);
  Task t;
  try {
    t.id = std::stoull(meta(ckpt, "task_id"));
    t.weight = split_doubles(meta(ckpt, "weight"));
  } catch (const std::logic_error&) {
    throw CheckpointError("checkpoint: malformed task metadata");
  }
  t.policy = policy_from_checkpoint(ckpt);
  t.value = nn::ValueNetwork(nn::decode_shape(meta(ckpt, "value_shape")), scratch);
  nn::restore_parameters(ckpt, "value/", t.value.parameters());
  const nn::AdamConfig adam{learning_rate, 0.9, 0.999, 1e-8};
  t.policy_opt = nn::AdamState(t.policy.parameters(), adam);
  t.value_opt = nn::AdamState(t.value.parameters(), adam);
  restore_moments(ckpt, "policy_adam/", t.policy.parameters(), t.policy_opt);
  restore_moments(ckpt, "value_adam/", t.value.parameters(), t.value_opt);
  t.policy_opt.set_step_count(std::stoll(meta(ckpt, "policy_adam_step")));
  t.value_opt.set_step_count(std::stoll(meta(ckpt, "value_adam_step")));
  return t;
}

// ------------------------------------------------------------ rollouts

RolloutBatch collect_rollouts(const Task& task, const EnvFactory& make_env, int n_episodes,
                              std::uint64_t seed) {
  if (n_episodes < 1) throw std::invalid_argument("collect_rollouts: n_episodes must be >= 1");
  std::vector<std::unique_ptr<EpisodeEnv>> envs;
  for (int b = 0; b < n_episodes; ++b) envs.push_back(make_env());
  const auto D = static_cast<Eigen::Index>(envs[0]->observation_size());
  const auto A = static_cast<Eigen::Index>(envs[0]->action_size());
  const int T = envs[0]->horizon();
  const Eigen::Index B = n_episodes;
  if (task.policy.shape().input_size != D || task.policy.action_size() != A)
    throw ShapeMismatch("collect_rollouts: policy does not match the environment");
  const auto low = envs[0]->action_low();
  const auto high = envs[0]->action_high();

  RolloutBatch batch;
  batch.episodes = n_episodes;
  batch.horizon = T;
  batch.observations.resize(D, T * B);
  batch.pre_squash.resize(A, T * B);
  batch.log_prob.resize(T * B);
  batch.rewards.resize(kObjectives, T * B);
  batch.values.resize(kObjectives, T * B);
  batch.valid.assign(static_cast<std::size_t>(T * B), true);
  batch.episode_objectives = Matrix::Zero(2, B);

  Matrix obs(D, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto o = envs[static_cast<std::size_t>(b)]->reset(
        derive_seed(seed, "episode", {static_cast<std::uint64_t>(b)}));
    obs.col(b) = Eigen::Map<const Vector>(o.data(), D);
  }
  Rng noise(derive_seed(seed, "action-noise"));
  auto ps = task.policy.initial_state(static_cast<int>(B));
  auto vs = task.value.initial_state(static_cast<int>(B));
  for (int t = 0; t < T; ++t) {
    batch.observations.middleCols(t * B, B) = obs;
    const nn::GaussianParams dist = task.policy.step(obs, ps);
    batch.values.middleCols(t * B, B) = task.value.step(obs, vs);
    for (Eigen::Index b = 0; b < B; ++b) {
      const Eigen::Index col = t * B + b;
      const nn::ActionSample s = nn::sample_action(dist.mean.col(b), dist.log_std, noise);
      batch.pre_squash.col(col) = s.pre_squash;
      batch.log_prob(col) = s.log_prob;
      const auto action = nn::scale_action(s.squashed, low, high);
      const Transition tr = envs[static_cast<std::size_t>(b)]->step(action);
      batch.rewards(0, col) = tr.reward[0];
      batch.rewards(1, col) = tr.reward[1];
      batch.valid[static_cast<std::size_t>(col)] = tr.valid;
      batch.episode_objectives(0, b) += tr.rate;
      batch.episode_objectives(1, b) += tr.energy;
      if (t + 1 < T) obs.col(b) = Eigen::Map<const Vector>(tr.observation.data(), D);
    }
  }
  return batch;
}

Matrix vector_gae(const Matrix& rewards, const Matrix& values, int episodes, double gamma,
                  double lambda) {
  if (rewards.rows() != values.rows() || rewards.cols() != values.cols())
    throw ShapeMismatch("vector_gae: rewards/values shape mismatch");
  if (episodes < 1 || rewards.cols() % episodes != 0)
    throw ShapeMismatch("vector_gae: columns not a multiple of the episode count");
  const Eigen::Index B = episodes;
  const Eigen::Index T = rewards.cols() / B;
  Matrix adv(rewards.rows(), rewards.cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    Vector running = Vector::Zero(rewards.rows());
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const Eigen::Index col = t * B + b;
      const Vector next = t + 1 < T ? Vector(values.col(col + B)) : Vector::Zero(rewards.rows());
      const Vector delta = rewards.col(col) + gamma * next - values.col(col);
      running = delta + gamma * lambda * running;
      adv.col(col) = running;
    }
  }
  return adv;
}

Vector scalarize_advantage(const Matrix& advantages, std::span<const double> weight, bool normalize) {
  if (static_cast<std::size_t>(advantages.rows()) != weight.size())
    throw ShapeMismatch("scalarize_advantage: weight dimension mismatch");
  const Eigen::Map<const Vector> w(weight.data(), static_cast<Eigen::Index>(weight.size()));
  Vector s = advantages.transpose() * w;
  if (normalize && s.size() > 0) {
    const double mean = s.mean();
    s.array() -= mean;
    const double sd = std::sqrt(s.squaredNorm() / static_cast<double>(s.size()));
    if (sd > 1e-12) s /= sd;
  }
  return s;
}

double clipped_objective(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

PolicyLossResult policy_loss(const nn::GaussianParams& dist, const Matrix& pre_squash,
                             const Vector& old_log_prob, const Vector& advantages, double clip) {
  const Eigen::Index n = pre_squash.cols();
  PolicyLossResult out;
  out.d_mean = Matrix::Zero(dist.mean.rows(), n);
  out.d_log_std = Vector::Zero(dist.log_std.size());
  Vector dm, dl;
  int clipped = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector mean = dist.mean.col(j);
    const Vector u = pre_squash.col(j);
    const double lp = nn::squashed_log_prob(mean, dist.log_std, u);
    const double ratio = std::exp(lp - old_log_prob(j));
    const double a = advantages(j);
    const double unclipped = ratio * a;
    const double bounded = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * a;
    out.loss -= std::min(unclipped, bounded) / static_cast<double>(n);
    if (std::abs(ratio - 1.0) > clip) ++clipped;
    if (unclipped <= bounded) {
      // d/dtheta of r A = r A dlogp/dtheta
      const double coef = -ratio * a / static_cast<double>(n);
      nn::squashed_log_prob_grad(mean, dist.log_std, u, dm, dl);
      out.d_mean.col(j) = coef * dm;
      out.d_log_std += coef * dl;
    }
  }
  out.clip_fraction = n > 0 ? static_cast<double>(clipped) / static_cast<double>(n) : 0.0;
  return out;
}

namespace {

// Columns of the listed episodes, keeping the t-major layout.
Matrix select_episodes(const Matrix& m, int batch, int horizon, std::span<const int> eps) {
  const auto S = static_cast<Eigen::Index>(eps.size());
  Matrix out(m.rows(), horizon * S);
  for (Eigen::Index t = 0; t < horizon; ++t)
    for (Eigen::Index j = 0; j < S; ++j) out.col(t * S + j) = m.col(t * batch + eps[static_cast<std::size_t>(j)]);
  return out;
}

Vector select_episodes(const Vector& v, int batch, int horizon, std::span<const int> eps) {
  return select_episodes(Matrix(v.transpose()), batch, horizon, eps).transpose();
}

void clip_and_step(nn::ParameterSet& params, nn::AdamState& opt, double max_norm) {
  if (!params.grad_finite()) throw NonFiniteGradient("ppo_update: non-finite gradient");
  if (max_norm > 0.0) {
    const double norm = params.grad_norm();
    if (norm > max_norm) params.scale_grad(max_norm / norm);
  }
  nn::adam_update(params, opt);
}

}  // namespace

UpdateStats ppo_update(Task& task, const RolloutBatch& batch, const PpoConfig& config) {
  if (batch.size() == 0) throw std::invalid_argument("ppo_update: empty batch");
  config.validate();
  const Task snapshot = task;
  const int B = batch.episodes;
  const int T = batch.horizon;
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());

  const Matrix adv = vector_gae(batch.rewards, batch.values, B, config.gamma, config.lambda);
  const Vector adv_w = scalarize_advantage(adv, task.weight, config.normalize_advantage);
  Matrix targets = batch.rewards;
  for (Eigen::Index col = 0; col + B < n; ++col) targets.col(col) += config.gamma * batch.values.col(col + B);

  // Reference log-probabilities through the same sequence path as training.
  Vector old_lp(n);
  {
    const nn::GaussianParams d = task.policy.forward(batch.observations, B);
    for (Eigen::Index j = 0; j < n; ++j)
      old_lp(j) = nn::squashed_log_prob(d.mean.col(j), d.log_std, batch.pre_squash.col(j));
  }

  std::vector<std::vector<int>> minibatches;
  for (int start = 0; start < B; start += config.minibatch_episodes) {
    std::vector<int> eps;
    for (int b = start; b < std::min(B, start + config.minibatch_episodes); ++b) eps.push_back(b);
    minibatches.push_back(std::move(eps));
  }
  struct Slice {
    int episodes;
    Matrix obs, u, targets;
    Vector old_lp, adv;
  };
  std::vector<Slice> slices;
  for (const auto& eps : minibatches) {
    slices.push_back({static_cast<int>(eps.size()), select_episodes(batch.observations, B, T, eps),
                      select_episodes(batch.pre_squash, B, T, eps),
                      select_episodes(targets, B, T, eps), select_episodes(old_lp, B, T, eps),
                      select_episodes(adv_w, B, T, eps)});
  }

  UpdateStats stats;
  try {
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      double pl = 0.0, vl = 0.0, cf = 0.0;
      for (const Slice& s : slices) {
        auto& pp = task.policy.parameters();
        pp.zero_grad();
        nn::PolicyNetwork::Cache pc;
        const nn::GaussianParams dist = task.policy.forward(s.obs, s.episodes, &pc);
        const PolicyLossResult loss = policy_loss(dist, s.u, s.old_lp, s.adv, config.clip);
        if (!std::isfinite(loss.loss)) throw NonFiniteLoss("ppo_update: non-finite policy loss");
        task.policy.backward(s.obs, pc, loss.d_mean, loss.d_log_std, config.bptt_truncation);
        clip_and_step(pp, task.policy_opt, config.max_grad_norm);

        auto& vp = task.value.parameters();
        vp.zero_grad();
        nn::ValueNetwork::Cache vc;
        const Matrix v = task.value.forward(s.obs, s.episodes, &vc);
        const Matrix diff = v - s.targets;
        const double cols = static_cast<double>(diff.cols());
        const double value_loss = diff.squaredNorm() / cols;
        if (!std::isfinite(value_loss)) throw NonFiniteLoss("ppo_update: non-finite value loss");
        task.value.backward(s.obs, vc, (2.0 / cols) * diff, config.bptt_truncation);
        clip_and_step(vp, task.value_opt, config.max_grad_norm);

        pl += loss.loss;
        vl += value_loss;
        cf += loss.clip_fraction;
      }
      const double k = static_cast<double>(slices.size());
      stats = {pl / k, vl / k, cf / k};
    }
    if (!task.policy.parameters().value_finite() || !task.value.parameters().value_finite())
      throw NonFiniteLoss("ppo_update: parameters became non-finite");
  } catch (const NonFiniteGradient& e) {
    task = snapshot;
    throw NonFiniteLoss(e.what());
  } catch (const NonFiniteLoss&) {
    task = snapshot;
    throw;
  }
  return stats;
}

// ------------------------------------------------------------ LSTM-MOPPO

std::vector<Task> lstm_moppo(std::vector<Task>& tasks, int n_iter, const TrainContext& ctx) {
  if (tasks.empty()) throw std::invalid_argument("lstm_moppo: empty task set");
  if (n_iter < 1) throw std::invalid_argument("lstm_moppo: n_iter must be >= 1");
  ctx.ppo.validate();
  std::vector<std::vector<Task>> kept(tasks.size());
  if (ctx.task_errors) ctx.task_errors->assign(tasks.size(), nullptr);
  auto train = [&](std::size_t i) {
    Task& task = tasks[i];
    for (int j = 0; j < n_iter; ++j) {
      const std::uint64_t seed = derive_seed(ctx.master_seed, "rollout",
                                             {ctx.generation, i, static_cast<std::uint64_t>(j)});
      const RolloutBatch batch = collect_rollouts(task, ctx.make_env, ctx.ppo.episodes_per_iteration, seed);
      IterationRecord rec;
      rec.task_id = task.id;
      rec.iteration = j;
      const Eigen::Map<const Vector> w(task.weight.data(), static_cast<Eigen::Index>(task.weight.size()));
      rec.scalarized_return = (w.transpose() * batch.rewards).sum() / batch.episodes;
      rec.f1 = batch.episode_objectives.row(0).mean();
      rec.f2 = batch.episode_objectives.row(1).mean();
      try {
        rec.stats = ppo_update(task, batch, ctx.ppo);
      } catch (const NonFiniteLoss& e) {
        rec.rolled_back = true;
        std::fprintf(stderr, "lstm_moppo: task %llu iteration %d rolled back: %s\n",
                     static_cast<unsigned long long>(task.id), j, e.what());
      }
      if (ctx.sink) ctx.sink(i, j, task, rec);
      if (ctx.keep_snapshots) kept[i].push_back(task);
    }
  };
  parallel_for(tasks.size(), ctx.threads, [&](std::size_t i) {
    if (!ctx.task_errors) return train(i);
    try {
      train(i);
    } catch (...) {
      (*ctx.task_errors)[i] = std::current_exception();
    }
  });
  std::vector<Task> out;
  for (auto& v : kept)
    for (auto& t : v) out.push_back(std::move(t));
  return out;
}

std::array<double, 2> evaluate_raw(const nn::PolicyNetwork& policy, const EnvFactory& make_env,
                                   std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw std::invalid_argument("evaluate: at least one seed required");
  std::array<double, 2> total{0.0, 0.0};
  for (std::uint64_t seed : seeds) {
    auto env = make_env();
    const auto D = static_cast<Eigen::Index>(env->observation_size());
    if (policy.shape().input_size != D || policy.action_size() != static_cast<int>(env->action_size()))
      throw ShapeMismatch("evaluate: policy does not match the environment");
    const auto low = env->action_low();
    const auto high = env->action_high();
    auto obs = env->reset(seed);
    auto state = policy.initial_state(1);
    for (int t = 0; t < env->horizon(); ++t) {
      const Matrix x = Eigen::Map<const Vector>(obs.data(), D);
      const nn::GaussianParams d = policy.step(x, state);
      const Vector squashed = d.mean.col(0).array().tanh().matrix();
      const Transition tr = env->step(nn::scale_action(squashed, low, high));
      total[0] += tr.rate;
      total[1] += tr.energy;
      obs = tr.observation;
    }
  }
  const double k = static_cast<double>(seeds.size());
  return {total[0] / k, total[1] / k};
}

}  // namespace uvaa::moppo
