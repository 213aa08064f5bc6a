// Acceptance runner: one [PASS]/[FAIL] line per criterion.
//   acceptance [--criterion N]... [--work-dir DIR]

#include <boost/math/distributions/chi_squared.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "toy_env.hpp"
#include "uvaa/dynamics.hpp"
#include "uvaa/evolve.hpp"
#include "uvaa/harness.hpp"
#include "uvaa/metrics.hpp"
#include "uvaa/mobility.hpp"
#include "uvaa/moppo.hpp"
#include "uvaa/physics.hpp"

using namespace uvaa;
namespace fs = std::filesystem;

namespace {

// Collects failed checks; a criterion passes when none failed.
struct Checks {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
      std::ostringstream s;
      s.precision(17);
      s << what << ": got " << got << ", want " << want << " +- " << tol;
      failures.push_back(s.str());
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// ------------------------------------------------------------------ 1

void physics_suite(Checks& c) {
  using namespace physics;
  const double lambda = ChannelParams{}.wavelength;
  auto colocated = [](int n) {
    SwarmLayout l;
    for (int i = 0; i < n; ++i) {
      l.positions.push_back({0, 0, 0});
      l.weights.push_back(1.0);
    }
    return l;
  };
  auto af = array_factor(colocated(1), {0.7, -1.2}, lambda);
  c.near(af.real(), 1.0, 1e-12, "AF single element, real");
  c.near(af.imag(), 0.0, 1e-12, "AF single element, imag");
  af = array_factor(colocated(5), {2.1, 0.4}, lambda);
  c.near(af.real(), 5.0, 1e-12, "AF co-located, real");
  c.near(af.imag(), 0.0, 1e-12, "AF co-located, imag");
  SwarmLayout pair = colocated(2);
  pair.positions[1] = {lambda / 2, 0, 0};
  c.near(std::abs(array_factor(pair, {std::numbers::pi / 2, 0.0}, lambda)), 0.0, 1e-12, "AF half-wavelength null");
  // phase of a single displaced element: exp(j k d sin(theta) cos(phi))
  SwarmLayout one = colocated(1);
  one.positions[0] = {0.3, 0, 0};
  const auto shifted = array_factor(one, {std::numbers::pi / 2, 0.0}, lambda);
  const double phase = 2 * std::numbers::pi / lambda * 0.3;
  c.near(shifted.real(), std::cos(phase), 1e-12, "AF displaced element, real");
  c.near(std::abs(shifted.imag()), std::abs(std::sin(phase)), 1e-12, "AF displaced element, |imag|");

  for (int n : {1, 2, 4, 8, 16})
    for (double eta : {1.0, 0.8, 0.55}) {
      ChannelParams p;
      p.antenna_efficiency = eta;
      c.near(array_gain(colocated(n), {1.1, -0.4}, p, {}), eta, 1e-3,
             "gain of co-located swarm N=" + std::to_string(n));
    }
  c.expect(achievable_rate(0.0) == 0.0, "log2(1+0) == 0");
  c.expect(achievable_rate(1.0) == 1.0, "log2(1+1) == 1");
  c.expect(achievable_rate(3.0) == 2.0, "log2(1+3) == 2");
}

// ------------------------------------------------------------------ 2

void stochastic_suite(Checks& c) {
  Rng rng(20240601);
  double s = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) s += physics::sample_rician(5.0, 1.0, rng);
  c.near(s / n, 1.0, 0.01, "Rician K=5 sample mean");
  c.note("rician mean " + fmt("%.5f", s / n));

  std::vector<double> xs(100000);
  for (double& x : xs) x = physics::sample_rician(0.0, 1.0, rng);
  const double p = oracle::ks_p_value(xs, [](double x) { return 1.0 - std::exp(-x); });
  c.expect(p > 0.01, "K=0 KS p-value " + fmt("%.4f", p) + " <= 0.01");
  c.note("KS p " + fmt("%.3f", p));

  for (double alpha : {0.5, 0.8, 0.95}) {
    mobility::GaussMarkovState st;
    st.memory = alpha;
    st.mean_speed = 5.0;
    st.speed = 5.0;
    std::vector<double> v(200000);
    for (double& x : v) {
      std::tie(st.speed, st.heading) = mobility::gm_step(st, rng);
      x = st.speed;
    }
    for (int k = 1; k <= 5; ++k)
      c.near(oracle::autocorrelation(v, k), std::pow(alpha, k), 0.05,
             "GM lag-" + std::to_string(k) + " autocorrelation at alpha " + fmt("%.2f", alpha));
  }

  dynamics::RotorParams r;
  c.expect(dynamics::propulsion_power(0.0, r) == r.blade_power + r.induced_power, "hover power == P_B + P_I");
}

// ------------------------------------------------------------------ 3

void gradient_suite(Checks& c) {
  const std::vector<std::pair<std::string, std::function<double(std::uint64_t)>>> kinds{
      {"lstm", gradcheck::lstm},
      {"mlp", gradcheck::mlp},
      {"policy head", gradcheck::policy},
      {"value head", gradcheck::value},
      {"tanh-squash log-prob", gradcheck::squashed_log_prob}};
  Rng seeds(77);
  for (const auto& [name, fn] : kinds) {
    double worst = 0.0;
    for (int i = 0; i < 25; ++i) worst = std::max(worst, fn(seeds.next_u64()));
    c.expect(worst < 1e-4, name + " max relative error " + fmt("%.3g", worst));
    c.note(name + " " + fmt("%.1e", worst));
  }
}

// ------------------------------------------------------------------ 4

void oracle_suite(Checks& c) {
  Rng rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int B = 1 + trial % 4, T = 10;
    const nn::Matrix r = gradcheck::gaussian(2, T * B, 1.0, rng), v = gradcheck::gaussian(2, T * B, 1.0, rng);
    const double gamma = rng.uniform(0.8, 1.0), lambda = rng.uniform(0.0, 1.0);
    const nn::Matrix a = moppo::vector_gae(r, v, B, gamma, lambda);
    worst = std::max(worst, (a - oracle::gae_double_loop(r, v, B, gamma, lambda)).cwiseAbs().maxCoeff());
  }
  c.expect(worst <= 1e-12, "GAE vs double loop " + fmt("%.3g", worst));

  worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<oracle::P2> f(5), ref(5);
    metrics::Front mf, mr;
    for (int i = 0; i < 5; ++i) {
      f[i] = {rng.uniform(0, 10), rng.uniform(0, 10)};
      ref[i] = {rng.uniform(0, 10), rng.uniform(0, 10)};
      mf.push_back(f[i]);
      mr.push_back(ref[i]);
    }
    worst = std::max(worst, std::abs(metrics::igd(mf, mr) - oracle::igd_brute(f, ref)));
  }
  c.expect(worst <= 1e-12, "IGD vs brute force " + fmt("%.3g", worst));

  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x;
    for (int i = 0; i < 7; ++i) x.push_back(rng.uniform(0.5, 9.5));
    std::sort(x.begin(), x.end());
    metrics::Front f;
    for (double xi : x) f.push_back({xi, 10.0 - xi * xi / 10.0});
    const std::vector<oracle::P2> fo(f.begin(), f.end());
    const auto mc = oracle::hv_monte_carlo(fo, {0, 0}, {10, 10}, 1000000, rng);
    const double hv = metrics::hypervolume(f, {0, 0});
    c.near(hv, mc.value, 3 * mc.sigma, "HV vs Monte Carlo, front " + std::to_string(trial));
  }
}

// ------------------------------------------------------------------ 5

bool no_dominated_pair(const std::vector<evolve::ArchiveEntry>& ep) {
  for (std::size_t i = 0; i < ep.size(); ++i)
    for (std::size_t j = 0; j < ep.size(); ++j)
      if (i != j && (metrics::dominates(ep[i].f, ep[j].f) || ep[i].f == ep[j].f)) return false;
  return true;
}

void structure_suite(Checks& c, const fs::path& work) {
  // offspring count
  {
    std::vector<moppo::Task> tasks;
    for (std::uint64_t i = 0; i < 5; ++i)
      tasks.push_back(moppo::Task::create(i, {0.25 * double(i % 5), 1 - 0.25 * double(i % 5)}, 3, 2,
                                          toy::small_model(), 1e-3, i));
    moppo::TrainContext ctx;
    ctx.make_env = toy::factory();
    ctx.ppo = toy::toy_ppo();
    ctx.ppo.epochs = 1;
    for (int n_iter : {1, 4, 10}) {
      const auto out = moppo::lstm_moppo(tasks, n_iter, ctx);
      c.expect(out.size() == tasks.size() * static_cast<std::size_t>(n_iter),
               "|P'| = " + std::to_string(out.size()) + " for n_iter " + std::to_string(n_iter));
    }
  }

  // TPU caps
  {
    Rng rng(5);
    std::vector<evolve::TaskRecord> pop, off;
    for (std::uint64_t i = 0; i < 300; ++i) pop.push_back({i, {0.5, 0.5}, {rng.uniform(0, 50), -rng.uniform(0, 3e4)}});
    for (std::uint64_t i = 300; i < 1500; ++i) off.push_back({i, {0.5, 0.5}, {rng.uniform(0, 50), -rng.uniform(0, 3e4)}});
    std::vector<evolve::Objectives> pts;
    for (const auto* g : {&pop, &off})
      for (const auto& r : *g) pts.push_back(r.f);
    const auto z = evolve::reference_vector(pts);
    const auto kept = evolve::tpu(pop, off, z, 50, 2);
    c.expect(kept.size() <= 100, "TPU kept " + std::to_string(kept.size()) + " > 100");
    const auto norm = evolve::Normalizer::fit(pts);
    const auto zn = norm(z);
    const auto dirs = evolve::make_weight_vectors(50);
    std::map<std::size_t, int> per_buffer;
    for (const auto& r : kept) {
      const auto p = norm(r.f);
      ++per_buffer[evolve::buffer_index({p[0] - zn[0], p[1] - zn[1]}, dirs)];
    }
    for (const auto& [b, n] : per_buffer) c.expect(n <= 2, "buffer " + std::to_string(b) + " holds " + std::to_string(n));
    c.note("TPU kept " + std::to_string(kept.size()) + " in " + std::to_string(per_buffer.size()) + " buffers");
  }

  // selection frequencies. The points already span [0,1] on both axes and are
  // point-symmetric about (0.5, 0.5), so the centroid and the 8 sectors are known:
  // counts 3, 2, 1 in sectors 0..2 and again in 4..6.
  {
    const std::vector<evolve::Objectives> half{{1, 0.6}, {0.9, 0.7}, {0.8, 0.55}, {0.6, 1}, {0.7, 0.9}, {0.3, 0.8}};
    const std::vector<double> per_sector_count{3, 3, 3, 2, 2, 1};
    std::vector<evolve::TaskRecord> pop;
    std::vector<double> expected;
    for (std::size_t i = 0; i < half.size(); ++i) {
      pop.push_back({i, {0.5, 0.5}, half[i]});
      pop.push_back({100 + i, {0.5, 0.5}, {1 - half[i][0], 1 - half[i][1]}});
      expected.push_back(2.0 / per_sector_count[i]);
      expected.push_back(2.0 / per_sector_count[i]);
    }
    double total = 0.0;
    for (double e : expected) total += e;
    for (double& e : expected) e /= total;

    Rng rng(6);
    const int trials = 10000;
    std::vector<int> hits(pop.size(), 0);
    for (int t = 0; t < trials; ++t) ++hits[evolve::hypersphere_select({{0.5, 0.5}}, pop, 12, 2.0, 8, rng)[0]];
    double chi2 = 0.0, worst = 0.0;
    for (std::size_t j = 0; j < pop.size(); ++j) {
      const double e = expected[j] * trials;
      chi2 += (hits[j] - e) * (hits[j] - e) / e;
      worst = std::max(worst, std::abs(hits[j] / double(trials) - expected[j]));
    }
    const boost::math::chi_squared dist(static_cast<double>(pop.size() - 1));
    const double p = boost::math::cdf(boost::math::complement(dist, chi2));
    c.expect(p > 0.02, "chi-square p-value " + fmt("%.4f", p) + " <= 0.02");
    c.expect(worst < 0.02, "selection frequency off by " + fmt("%.4f", worst));
    c.note("chi2 " + fmt("%.2f", chi2) + " p " + fmt("%.3f", p) + " max dev " + fmt("%.4f", worst));
  }

  // archive after every generation
  {
    evolve::RunConfig rc;
    rc.env.n_uav = 2;
    rc.env.horizon = 10;
    rc.ppo.episodes_per_iteration = 2;
    rc.ppo.epochs = 2;
    rc.model = toy::small_model();
    rc.evolution.n_tasks = 4;
    rc.evolution.n_warm = 2;
    rc.evolution.n_evo = 2;
    rc.evolution.generations = 4;
    rc.master_seed = 5;
    rc.output_dir = work / "structure_run";
    fs::remove_all(rc.output_dir);
    const auto r = evolve::run(rc);
    for (const auto& g : r.generations)
      c.expect(no_dominated_pair(g.ep), "dominated pair in EP of generation " + std::to_string(g.generation));
    fs::remove_all(rc.output_dir);
  }
}

// ------------------------------------------------------------------ 6

void learning_suite(Checks& c) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const int it = toy::iterations_to_target(seed, 200);
    c.expect(it > 0, "seed " + std::to_string(seed) + " did not reach 95% in 200 iterations");
    c.note("seed " + std::to_string(seed) + ": " + std::to_string(it) + " iterations");
  }
}

// ------------------------------------------------------------------ 7, 8

struct Variant {
  std::string name;
  harness::Ablation ablation;
};
const std::vector<Variant> kVariants{{"full", {}}, {"no_lstm", {true, false}}, {"no_hypersphere", {false, true}}};
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

harness::ExperimentConfig desk(std::uint64_t seed, const harness::Ablation& ablation, const fs::path& out) {
  harness::ExperimentConfig c;
  c.scenario = "custom";
  c.seed = seed;
  c.env.n_uav = 4;
  c.env.horizon = 50;
  c.evolution.n_tasks = 5;
  c.evolution.n_warm = 10;
  c.evolution.n_evo = 5;
  c.evolution.generations = 10;
  c.ablation = ablation;
  c.output_dir = out.string();
  return c;
}

metrics::Front front_of(const std::vector<evolve::ArchiveEntry>& ep) {
  metrics::Front f;
  for (const auto& e : ep) f.push_back(e.f);
  return f;
}

// Archive of 5 * (10 + 5 * 10) freshly initialized policies, evaluated like
// the run's own snapshots.
std::vector<evolve::ArchiveEntry> random_archive(const harness::ExperimentConfig& cfg) {
  const auto rc = harness::to_run_config(harness::resolve(cfg), 1);
  const auto& ev = rc.evolution;
  const int count = ev.n_tasks * (ev.n_warm + ev.n_evo * ev.generations);
  const auto seeds = evolve::evaluation_seeds(rc.master_seed, ev.n_eval);
  const auto make_env = moppo::uvaa_env_factory(rc.env);
  std::vector<evolve::ArchiveEntry> ep;
  for (int k = 0; k < count; ++k) {
    const auto task = moppo::Task::create(0, {0.5, 0.5}, rc.env.observation_size(), rc.env.action_size(), rc.model,
                                          rc.ppo.learning_rate,
                                          derive_seed(rc.master_seed, "random-archive", {static_cast<std::uint64_t>(k)}));
    const evolve::ArchiveEntry e{static_cast<std::uint64_t>(k), evolve::evaluate_policy(task.policy, make_env, seeds)};
    evolve::update_ep(ep, {&e, 1});
  }
  return ep;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Comparative {
  fs::path work;
  int threads = 1;
  std::map<std::uint64_t, fs::path> full_dirs;

  void run7(Checks& c) {
    int b_wins = 0, c_wins = 0;
    for (auto seed : kSeeds) {
      std::map<std::string, evolve::RunResult> res;
      for (const auto& v : kVariants) {
        const fs::path dir = work / (v.name + "_seed" + std::to_string(seed));
        fs::remove_all(dir);
        const auto t0 = std::chrono::steady_clock::now();
        res[v.name] = harness::train(desk(seed, v.ablation, dir), threads);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("  run %s seed %llu: %.0f s, |EP| %zu\n", v.name.c_str(), static_cast<unsigned long long>(seed),
                    secs, res[v.name].ep.size());
        std::fflush(stdout);
        if (v.name == "full") full_dirs[seed] = dir;
      }

      // (a) every run, every generation
      for (const auto& [name, r] : res) {
        metrics::Front all;
        for (const auto& g : r.generations)
          for (const auto& e : g.ep) all.push_back(e.f);
        const auto ref = metrics::reference_point(all);
        double prev = -1.0;
        for (const auto& g : r.generations) {
          const double hv = metrics::hypervolume(front_of(g.ep), ref);
          c.expect(hv >= prev, name + " seed " + std::to_string(seed) + ": HV drops at generation " +
                                   std::to_string(g.generation));
          prev = hv;
        }
      }

      // (b) against the random-policy archive
      const auto random = random_archive(desk(seed, {}, work));
      metrics::Front both = front_of(res["full"].ep);
      for (const auto& e : random) both.push_back(e.f);
      const auto ref_b = metrics::reference_point(both);
      const double hv_full_b = metrics::hypervolume(front_of(res["full"].ep), ref_b);
      const double hv_random = metrics::hypervolume(front_of(random), ref_b);
      const bool b_ok = hv_full_b > hv_random;
      b_wins += b_ok;
      c.note("seed " + std::to_string(seed) + " HV full " + fmt("%.4g", hv_full_b) + " vs random " +
             fmt("%.4g", hv_random));

      // (c) shared reference across the three variants
      metrics::Front all;
      for (const auto& [_, r] : res)
        for (const auto& e : r.ep) all.push_back(e.f);
      const auto ref_c = metrics::reference_point(all);
      std::map<std::string, double> hv;
      for (const auto& [name, r] : res) hv[name] = metrics::hypervolume(front_of(r.ep), ref_c);
      const bool c_ok = hv["full"] >= hv["no_lstm"] && hv["full"] >= hv["no_hypersphere"];
      c_wins += c_ok;
      c.note("seed " + std::to_string(seed) + " HV full " + fmt("%.4g", hv["full"]) + ", no_lstm " +
             fmt("%.4g", hv["no_lstm"]) + ", no_hypersphere " + fmt("%.4g", hv["no_hypersphere"]));
    }
    c.expect(b_wins == 3, "full beats the random archive on " + std::to_string(b_wins) + "/3 seeds");
    c.expect(c_wins >= 2, "full >= both ablations on " + std::to_string(c_wins) + "/3 seeds");
  }

  void run8(Checks& c) {
    const int other = threads == 2 ? 3 : 2;
    for (auto seed : kSeeds) {
      if (!full_dirs.count(seed)) {
        const fs::path dir = work / ("full_seed" + std::to_string(seed));
        fs::remove_all(dir);
        harness::train(desk(seed, {}, dir), threads);
        full_dirs[seed] = dir;
      }
      const fs::path again = work / ("full_seed" + std::to_string(seed) + "_threads" + std::to_string(other));
      fs::remove_all(again);
      const auto r = harness::train(desk(seed, {}, again), other);
      for (const auto& g : r.generations) {
        const auto name = evolve::ep_file_name(g.generation);
        const std::string a = slurp(full_dirs[seed] / name), b = slurp(again / name);
        c.expect(!a.empty() && a == b, "seed " + std::to_string(seed) + ": " + name + " differs between " +
                                           std::to_string(threads) + " and " + std::to_string(other) + " threads");
      }
    }
    c.note("threads " + std::to_string(threads) + " vs " + std::to_string(other));
  }
};

struct Criterion {
  int id;
  std::string title;
  double budget_s;
};

const std::vector<Criterion> kCriteria{
    {1, "physics identities", 1.0},
    {2, "stochastic models", 30.0},
    {3, "gradients vs finite differences", 60.0},
    {4, "oracle equivalence", 30.0},
    {5, "algorithm structure", 600.0},
    {6, "learning sanity on the toy bandit", 300.0},
    {7, "desk-scale comparative runs", 7200.0},
    {8, "determinism across thread counts", 7200.0},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  fs::path work = fs::temp_directory_path() / "uvaa_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      wanted.insert(std::atoi(argv[++i]));
    } else if (a == "--work-dir" && i + 1 < argc) {
      work = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--criterion N]... [--work-dir DIR]\n");
      return 2;
    }
  }
  if (wanted.empty())
    for (const auto& c : kCriteria) wanted.insert(c.id);
  fs::create_directories(work);

  Comparative comparative{work, harness::threads_from_env(), {}};
  bool all_ok = true;
  for (const auto& crit : kCriteria) {
    if (!wanted.count(crit.id)) continue;
    Checks c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      switch (crit.id) {
        case 1: physics_suite(c); break;
        case 2: stochastic_suite(c); break;
        case 3: gradient_suite(c); break;
        case 4: oracle_suite(c); break;
        case 5: structure_suite(c, work); break;
        case 6: learning_suite(c); break;
        case 7: comparative.run7(c); break;
        case 8: comparative.run8(c); break;
      }
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(secs < crit.budget_s, "runtime " + fmt("%.1f", secs) + " s over budget " + fmt("%.0f", crit.budget_s) + " s");
    const bool ok = c.failures.empty();
    all_ok = all_ok && ok;
    std::printf("[%s] criterion %d: %s (%.2f s)\n", ok ? "PASS" : "FAIL", crit.id, crit.title.c_str(), secs);
    for (const auto& n : c.notes) std::printf("    %s\n", n.c_str());
    for (const auto& f : c.failures) std::printf("    failed: %s\n", f.c_str());
    std::fflush(stdout);
  }
  return all_ok ? 0 : 1;
}
