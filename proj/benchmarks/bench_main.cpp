#include <benchmark/benchmark.h>

#include "uvaa/env.hpp"
#include "uvaa/metrics.hpp"
#include "uvaa/moppo.hpp"
#include "uvaa/neural.hpp"
#include "uvaa/physics.hpp"

using namespace uvaa;

namespace {

physics::SwarmLayout swarm(int n, double extent) {
  Rng rng(1);
  physics::SwarmLayout l;
  for (int i = 0; i < n; ++i) {
    l.positions.push_back({rng.uniform(0, extent), rng.uniform(0, extent), rng.uniform(0, extent)});
    l.weights.push_back(rng.uniform(0.1, 1.0));
  }
  return l;
}

void BM_GainQuadrature(benchmark::State& st) {
  const auto l = swarm(static_cast<int>(st.range(0)), 100.0);
  for (auto _ : st) benchmark::DoNotOptimize(physics::array_gain(l, {1.0, 0.3}, {}, {}));
}
BENCHMARK(BM_GainQuadrature)->Arg(4)->Arg(8)->Arg(16);

void BM_GainClosedForm(benchmark::State& st) {
  const auto l = swarm(static_cast<int>(st.range(0)), 100.0);
  for (auto _ : st) benchmark::DoNotOptimize(physics::array_gain_closed_form(l, {1.0, 0.3}, {}));
}
BENCHMARK(BM_GainClosedForm)->Arg(4)->Arg(8)->Arg(16);

void BM_EnvStep(benchmark::State& st) {
  env::EnvConfig c;
  c.n_uav = static_cast<int>(st.range(0));
  env::Environment e(c);
  env::ActionVector hover(static_cast<std::size_t>(c.n_uav));
  for (auto& u : hover) u.weight = 1.0;
  e.reset(1);
  for (auto _ : st) {
    if (e.done()) e.reset(1);
    benchmark::DoNotOptimize(e.step(hover));
  }
}
BENCHMARK(BM_EnvStep)->Arg(4)->Arg(8)->Arg(16);

// one desk-scale minibatch: 8 episodes of 50 slots, N = 4
nn::PolicyNetwork desk_policy() {
  env::EnvConfig c;
  c.n_uav = 4;
  nn::NetworkShape s;
  s.input_size = static_cast<int>(c.observation_size());
  s.output_size = static_cast<int>(c.action_size());
  Rng rng(2);
  return nn::PolicyNetwork(s, rng);
}

void BM_PolicyForward(benchmark::State& st) {
  const auto p = desk_policy();
  const nn::Matrix obs = nn::Matrix::Random(p.shape().input_size, 8 * 50);
  for (auto _ : st) benchmark::DoNotOptimize(p.forward(obs, 8).mean);
}
BENCHMARK(BM_PolicyForward)->Unit(benchmark::kMillisecond);

void BM_PolicyForwardBackward(benchmark::State& st) {
  auto p = desk_policy();
  const nn::Matrix obs = nn::Matrix::Random(p.shape().input_size, 8 * 50);
  const nn::Matrix d_mean = nn::Matrix::Ones(p.action_size(), 8 * 50);
  const nn::Vector d_log_std = nn::Vector::Zero(p.action_size());
  for (auto _ : st) {
    nn::PolicyNetwork::Cache cache;
    p.forward(obs, 8, &cache);
    p.backward(obs, cache, d_mean, d_log_std);
  }
}
BENCHMARK(BM_PolicyForwardBackward)->Unit(benchmark::kMillisecond);

void BM_Gae(benchmark::State& st) {
  const nn::Matrix r = nn::Matrix::Random(2, 8 * 50), v = nn::Matrix::Random(2, 8 * 50);
  for (auto _ : st) benchmark::DoNotOptimize(moppo::vector_gae(r, v, 8, 0.99, 0.95));
}
BENCHMARK(BM_Gae);

void BM_Hypervolume(benchmark::State& st) {
  Rng rng(4);
  metrics::Front f;
  for (int i = 0; i < st.range(0); ++i) f.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
  for (auto _ : st) benchmark::DoNotOptimize(metrics::hypervolume(f, {-0.1, -0.1}));
}
BENCHMARK(BM_Hypervolume)->Arg(100)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
