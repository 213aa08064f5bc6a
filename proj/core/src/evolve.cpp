#include "uvaa/evolve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>

#include "uvaa/error.hpp"

namespace uvaa::evolve {

namespace fs = std::filesystem;

std::vector<std::vector<double>> make_weight_vectors(int n) {
  if (n < 2) throw std::invalid_argument("make_weight_vectors: n must be >= 2");
  std::vector<std::vector<double>> out;
  for (int i = 0; i < n; ++i) {
    const double a = static_cast<double>(i) / (n - 1);
    out.push_back({a, 1.0 - a});
  }
  return out;
}

Objectives evaluate_policy(const nn::PolicyNetwork& policy, const moppo::EnvFactory& make_env,
                           std::span<const std::uint64_t> seeds) {
  const auto raw = moppo::evaluate_raw(policy, make_env, seeds);
  return {raw[0], -raw[1]};
}

Normalizer Normalizer::fit(std::span<const Objectives> points) {
  Normalizer n;
  if (points.empty()) return n;
  Objectives hi = points[0];
  n.lo = points[0];
  for (const auto& p : points)
    for (int k = 0; k < 2; ++k) {
      n.lo[k] = std::min(n.lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  for (int k = 0; k < 2; ++k) n.span[k] = hi[k] > n.lo[k] ? hi[k] - n.lo[k] : 1.0;
  return n;
}

Objectives Normalizer::operator()(const Objectives& p) const {
  return {(p[0] - lo[0]) / span[0], (p[1] - lo[1]) / span[1]};
}

Objectives reference_vector(std::span<const Objectives> observed, double margin) {
  if (observed.empty()) throw EmptyFront("reference_vector: nothing observed");
  Objectives lo = observed[0], hi = observed[0];
  for (const auto& p : observed)
    for (int k = 0; k < 2; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  Objectives z;
  for (int k = 0; k < 2; ++k) {
    const double range = hi[k] > lo[k] ? hi[k] - lo[k] : std::max(std::abs(lo[k]), 1.0);
    z[k] = lo[k] - margin * range;
  }
  return z;
}

std::size_t buffer_index(const Objectives& f_ref, const std::vector<std::vector<double>>& directions) {
  if (directions.empty()) throw std::invalid_argument("buffer_index: no directions");
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < directions.size(); ++j) {
    const auto& w = directions[j];
    const double score = (w[0] * f_ref[0] + w[1] * f_ref[1]) / std::hypot(w[0], w[1]);
    if (score > best_score) {
      best_score = score;
      best = j;
    }
  }
  return best;
}

std::vector<TaskRecord> tpu(const std::vector<TaskRecord>& population,
                            const std::vector<TaskRecord>& offspring, const Objectives& z_ref,
                            int buffer_count, int buffer_size) {
  if (buffer_count < 1 || buffer_size < 1) throw std::invalid_argument("tpu: buffer sizes must be >= 1");
  std::vector<TaskRecord> all;
  std::set<std::uint64_t> seen;
  for (const auto* group : {&population, &offspring})
    for (const auto& r : *group)
      if (seen.insert(r.id).second) all.push_back(r);
  if (all.empty()) return {};

  std::vector<Objectives> pts;
  for (const auto& r : all) pts.push_back(r.f);
  const Normalizer norm = Normalizer::fit(pts);
  const Objectives z = norm(z_ref);
  const auto directions =
      buffer_count == 1 ? std::vector<std::vector<double>>{{0.5, 0.5}} : make_weight_vectors(buffer_count);

  struct Entry {
    std::size_t index;
    double distance;
  };
  std::vector<std::vector<Entry>> buffers(static_cast<std::size_t>(buffer_count));
  for (std::size_t i = 0; i < all.size(); ++i) {
    const Objectives p = norm(all[i].f);
    const Objectives fr{p[0] - z[0], p[1] - z[1]};
    buffers[buffer_index(fr, directions)].push_back({i, std::hypot(fr[0], fr[1])});
  }
  std::vector<TaskRecord> out;
  for (auto& b : buffers) {
    std::stable_sort(b.begin(), b.end(), [](const Entry& x, const Entry& y) { return x.distance > y.distance; });
    if (b.size() > static_cast<std::size_t>(buffer_size)) b.resize(static_cast<std::size_t>(buffer_size));
    for (const auto& e : b) out.push_back(all[e.index]);
  }
  return out;
}

std::vector<double> sector_weights(std::span<const Objectives> points, int sectors, double c) {
  if (points.empty()) return {};
  if (sectors < 1) throw std::invalid_argument("sector_weights: sectors must be >= 1");
  Objectives centre{0.0, 0.0};
  for (const auto& p : points) {
    centre[0] += p[0];
    centre[1] += p[1];
  }
  centre[0] /= static_cast<double>(points.size());
  centre[1] /= static_cast<double>(points.size());

  const double width = 2.0 * std::numbers::pi / sectors;
  std::vector<int> sector(points.size());
  std::vector<int> count(static_cast<std::size_t>(sectors), 0);
  for (std::size_t j = 0; j < points.size(); ++j) {
    double angle = std::atan2(points[j][1] - centre[1], points[j][0] - centre[0]);
    if (angle < 0.0) angle += 2.0 * std::numbers::pi;
    sector[j] = std::min(sectors - 1, static_cast<int>(angle / width));
    ++count[static_cast<std::size_t>(sector[j])];
  }
  std::vector<double> w(points.size());
  double total = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    w[j] = c / count[static_cast<std::size_t>(sector[j])];
    total += w[j];
  }
  for (double& x : w) x /= total;
  return w;
}

std::vector<std::size_t> hypersphere_select(const std::vector<std::vector<double>>& weights,
                                            const std::vector<TaskRecord>& population, int k_can,
                                            double c, int sectors, Rng& rng) {
  if (population.empty()) throw std::invalid_argument("hypersphere_select: empty population");
  if (k_can < 1) throw std::invalid_argument("hypersphere_select: k_can must be >= 1");
  if (!(c > 1.0)) throw std::invalid_argument("hypersphere_select: c must be > 1");
  std::vector<Objectives> pts;
  for (const auto& r : population) pts.push_back(r.f);
  const Normalizer norm = Normalizer::fit(pts);
  for (auto& p : pts) p = norm(p);

  const std::size_t k = std::min(population.size(), static_cast<std::size_t>(k_can));
  std::vector<std::size_t> chosen;
  for (const auto& w : weights) {
    std::vector<std::size_t> order(population.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    auto score = [&](std::size_t j) { return w[0] * pts[j][0] + w[1] * pts[j][1]; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score(a) > score(b); });
    order.resize(k);
    if (k == 1) {
      chosen.push_back(order[0]);
      continue;
    }
    std::vector<Objectives> cand;
    for (std::size_t j : order) cand.push_back(pts[j]);
    const auto prob = sector_weights(cand, sectors, c);
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t pick = order.back();
    for (std::size_t j = 0; j < k; ++j) {
      acc += prob[j];
      if (u < acc) {
        pick = order[j];
        break;
      }
    }
    chosen.push_back(pick);
  }
  return chosen;
}

bool update_ep(std::vector<ArchiveEntry>& ep, std::span<const ArchiveEntry> candidates) {
  bool changed = false;
  for (const auto& cand : candidates) {
    if (!std::isfinite(cand.f[0]) || !std::isfinite(cand.f[1]))
      throw std::invalid_argument("update_ep: non-finite objective vector");
    const bool rejected = std::any_of(ep.begin(), ep.end(), [&](const ArchiveEntry& m) {
      return m.f == cand.f || metrics::dominates(m.f, cand.f);
    });
    if (rejected) continue;
    std::erase_if(ep, [&](const ArchiveEntry& m) { return metrics::dominates(cand.f, m.f); });
    ep.push_back(cand);
    changed = true;
  }
  return changed;
}

// ---------------------------------------------------------------- store

std::string format_id(std::uint64_t id) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id));
  return buf;
}

SnapshotStore::SnapshotStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path SnapshotStore::task_path(std::uint64_t id) const { return dir_ / (format_id(id) + ".task"); }
fs::path SnapshotStore::policy_path(std::uint64_t id) const { return dir_ / (format_id(id) + ".policy"); }

void SnapshotStore::save_task(const moppo::Task& task) const {
  const fs::path p = task_path(task.id);
  if (!fs::exists(p)) moppo::task_to_checkpoint(task).save(p);
}

void SnapshotStore::save_policy(std::uint64_t id, const moppo::Task& task) const {
  nn::Checkpoint c;
  c.meta["kind"] = "policy";
  c.meta["task_id"] = std::to_string(id);
  c.meta["policy_shape"] = nn::encode_shape(task.policy.shape());
  nn::append_parameters(c, "policy/", task.policy.parameters());
  c.save(policy_path(id));
}

moppo::Task SnapshotStore::load_task(std::uint64_t id, double learning_rate) const {
  return moppo::task_from_checkpoint(nn::Checkpoint::load(task_path(id)), learning_rate);
}

namespace {

void collect(const fs::path& dir, const std::string& ext, std::span<const std::uint64_t> keep) {
  std::set<std::string> names;
  for (auto id : keep) names.insert(format_id(id) + ext);
  std::vector<fs::path> doomed;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ext && !names.contains(e.path().filename().string())) doomed.push_back(e.path());
  for (const auto& p : doomed) fs::remove(p);
}

}  // namespace

void SnapshotStore::collect_tasks(std::span<const std::uint64_t> keep) const { collect(dir_, ".task", keep); }
void SnapshotStore::collect_policies(std::span<const std::uint64_t> keep) const { collect(dir_, ".policy", keep); }

// ---------------------------------------------------------------- run

void EvolutionConfig::validate() const {
  if (n_tasks < 2) throw std::invalid_argument("evolution.n_tasks must be >= 2");
  if (generations < 0) throw std::invalid_argument("evolution.generations must be >= 0");
  if (n_warm < 1) throw std::invalid_argument("evolution.n_warm must be >= 1");
  if (n_evo < 1) throw std::invalid_argument("evolution.n_evo must be >= 1");
  if (buffer_count < 1) throw std::invalid_argument("evolution.buffer_count must be >= 1");
  if (buffer_size < 1) throw std::invalid_argument("evolution.buffer_size must be >= 1");
  if (k_can < 1) throw std::invalid_argument("evolution.k_can must be >= 1");
  if (!(c > 1.0)) throw std::invalid_argument("evolution.c must be > 1");
  if (sectors < 1) throw std::invalid_argument("evolution.sectors must be >= 1");
  if (n_eval < 1) throw std::invalid_argument("evolution.n_eval must be >= 1");
  if (!(z_margin >= 0.0)) throw std::invalid_argument("evolution.z_margin must be >= 0");
}

std::string ep_file_name(int generation) { return "ep_gen" + std::to_string(generation) + ".csv"; }

std::vector<std::uint64_t> evaluation_seeds(std::uint64_t master_seed, int n_eval) {
  std::vector<std::uint64_t> s;
  for (int k = 0; k < n_eval; ++k) s.push_back(derive_seed(master_seed, "evaluation", {static_cast<std::uint64_t>(k)}));
  return s;
}

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_ep_csv(const fs::path& path, std::vector<ArchiveEntry> ep) {
  std::sort(ep.begin(), ep.end(), [](const ArchiveEntry& a, const ArchiveEntry& b) {
    return a.f[0] != b.f[0] ? a.f[0] < b.f[0] : a.id < b.id;
  });
  std::ofstream out(path, std::ios::binary);
  out << "snapshot_id,f1,f2\n";
  for (const auto& e : ep) out << format_id(e.id) << ',' << fmt(e.f[0]) << ',' << fmt(-e.f[1]) << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

class Run {
 public:
  explicit Run(const RunConfig& cfg)
      : cfg_(cfg),
        make_env_(moppo::uvaa_env_factory(cfg.env)),
        seeds_(evaluation_seeds(cfg.master_seed, cfg.evolution.n_eval)),
        store_((fs::create_directories(cfg.output_dir), cfg.output_dir / kCheckpointDir)),
        weights_(make_weight_vectors(cfg.evolution.n_tasks)),
        start_(std::chrono::steady_clock::now()) {
    telemetry_.open(cfg.output_dir / kTelemetryFile, std::ios::binary);
    telemetry_ << "generation,task_slot,task_id,iteration,scalarized_return,f1,f2,"
                  "policy_loss,value_loss,clip_fraction,rolled_back\n";
    result_.files.push_back(cfg.output_dir / kTelemetryFile);
  }

  RunResult execute() {
    const auto& ev = cfg_.evolution;
    std::vector<moppo::Task> tasks;
    for (int i = 0; i < ev.n_tasks; ++i)
      tasks.push_back(fresh_task(weights_[static_cast<std::size_t>(i)],
                                 derive_seed(cfg_.master_seed, "task-init", {static_cast<std::uint64_t>(i)})));
    std::vector<TaskRecord> population;
    std::vector<TaskRecord> offspring = train(tasks, ev.n_warm, 0);
    absorb(offspring, 0);

    for (int g = 1; g <= ev.generations; ++g) {
      const Objectives z = reference_vector(observed_, ev.z_margin);
      population = tpu(population, offspring, z, ev.buffer_count, ev.buffer_size);
      std::vector<std::uint64_t> keep;
      for (const auto& r : population) keep.push_back(r.id);
      store_.collect_tasks(keep);

      Rng rng(derive_seed(cfg_.master_seed, "selection", {static_cast<std::uint64_t>(g)}));
      const auto picks = hypersphere_select(weights_, population, ev.k_can, ev.c, ev.sectors, rng);
      tasks.clear();
      for (std::size_t i = 0; i < picks.size(); ++i) {
        moppo::Task t = store_.load_task(population[picks[i]].id, cfg_.ppo.learning_rate);
        t.weight = weights_[i];
        tasks.push_back(std::move(t));
      }
      offspring = train(tasks, ev.n_evo, static_cast<std::uint64_t>(g));
      absorb(offspring, g);
    }
    store_.collect_tasks({});
    telemetry_.close();
    write_metrics();
    result_.ep = ep_;
    return std::move(result_);
  }

 private:
  moppo::Task fresh_task(const std::vector<double>& weight, std::uint64_t seed) const {
    moppo::Task t = moppo::Task::create(0, weight, cfg_.env.observation_size(), cfg_.env.action_size(),
                                        cfg_.model, cfg_.ppo.learning_rate, seed);
    t.id = t.content_hash();
    return t;
  }

  TaskRecord record(const moppo::Task& t) const {
    store_.save_task(t);
    return {t.id, t.weight, evaluate_policy(t.policy, make_env_, seeds_)};
  }

  std::vector<TaskRecord> train(std::vector<moppo::Task>& tasks, int n_iter, std::uint64_t generation) {
    const std::size_t slots = tasks.size() * static_cast<std::size_t>(n_iter);
    std::vector<std::optional<TaskRecord>> out(slots);
    std::vector<std::optional<moppo::IterationRecord>> iters(slots);
    std::vector<std::exception_ptr> errors;

    moppo::TrainContext ctx;
    ctx.make_env = make_env_;
    ctx.ppo = cfg_.ppo;
    ctx.master_seed = cfg_.master_seed;
    ctx.generation = generation;
    ctx.threads = cfg_.threads;
    ctx.keep_snapshots = false;
    ctx.task_errors = &errors;
    ctx.sink = [&](std::size_t i, int j, const moppo::Task& task, const moppo::IterationRecord& rec) {
      moppo::Task snap = task;
      snap.id = snap.content_hash();
      const std::size_t slot = i * static_cast<std::size_t>(n_iter) + static_cast<std::size_t>(j);
      out[slot] = record(snap);
      iters[slot] = rec;
      iters[slot]->task_id = snap.id;
    };
    moppo::lstm_moppo(tasks, n_iter, ctx);

    std::vector<TaskRecord> offspring;
    for (std::size_t s = 0; s < slots; ++s) {
      if (iters[s]) {
        const auto& r = *iters[s];
        telemetry_ << generation << ',' << s / static_cast<std::size_t>(n_iter) << ',' << format_id(r.task_id)
                   << ',' << r.iteration << ',' << fmt(r.scalarized_return) << ',' << fmt(r.f1) << ','
                   << fmt(r.f2) << ',' << fmt(r.stats.policy_loss) << ',' << fmt(r.stats.value_loss) << ','
                   << fmt(r.stats.clip_fraction) << ',' << (r.rolled_back ? 1 : 0) << '\n';
      }
      if (out[s]) offspring.push_back(std::move(*out[s]));
    }
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (!errors[i]) continue;
      std::string what = "unknown error";
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      log("generation " + std::to_string(generation) + ": task slot " + std::to_string(i) +
          " failed (" + what + "); replaced by a fresh task");
      offspring.push_back(record(fresh_task(
          tasks[i].weight, derive_seed(cfg_.master_seed, "replacement", {generation, static_cast<std::uint64_t>(i)}))));
    }
    telemetry_.flush();
    return offspring;
  }

  void absorb(const std::vector<TaskRecord>& offspring, int generation) {
    std::vector<ArchiveEntry> cand;
    for (const auto& r : offspring) {
      observed_.push_back(r.f);
      cand.push_back({r.id, r.f});
    }
    std::set<std::uint64_t> before;
    for (const auto& e : ep_) before.insert(e.id);
    update_ep(ep_, cand);
    std::vector<std::uint64_t> keep;
    for (const auto& e : ep_) {
      keep.push_back(e.id);
      if (!before.contains(e.id) && !fs::exists(store_.policy_path(e.id)))
        store_.save_policy(e.id, store_.load_task(e.id, cfg_.ppo.learning_rate));
    }
    store_.collect_policies(keep);

    const fs::path path = cfg_.output_dir / ep_file_name(generation);
    write_ep_csv(path, ep_);
    result_.files.push_back(path);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    result_.generations.push_back({generation, ep_, wall});
    log("generation " + std::to_string(generation) + ": |EP|=" + std::to_string(ep_.size()) + ", " +
        std::to_string(offspring.size()) + " offspring, " + fmt(wall) + " s");
  }

  void write_metrics() {
    metrics::Front all;
    for (const auto& g : result_.generations)
      for (const auto& e : g.ep) all.push_back(e.f);
    const metrics::Front reference = metrics::non_dominated(all);
    const metrics::Point ref = metrics::reference_point(all);
    result_.reference_point = ref;
    const fs::path path = cfg_.output_dir / kMetricsFile;
    std::ofstream out(path, std::ios::binary);
    out << "generation,algorithm,igd,hv,ep_size,ref_f1,ref_f2,wall_time_s\n";
    for (const auto& g : result_.generations) {
      metrics::Front front;
      for (const auto& e : g.ep) front.push_back(e.f);
      out << g.generation << ',' << cfg_.algorithm << ',' << fmt(metrics::igd(front, reference)) << ','
          << fmt(metrics::hypervolume(front, ref)) << ',' << g.ep.size() << ',' << fmt(ref[0]) << ','
          << fmt(-ref[1]) << ',' << fmt(g.wall_time_s) << '\n';
    }
    if (!out) throw Error("cannot write " + path.string());
    result_.files.push_back(path);
  }

  void log(const std::string& msg) const {
    if (cfg_.log) cfg_.log(msg);
  }

  const RunConfig& cfg_;
  moppo::EnvFactory make_env_;
  std::vector<std::uint64_t> seeds_;
  SnapshotStore store_;
  std::vector<std::vector<double>> weights_;
  std::chrono::steady_clock::time_point start_;
  std::ofstream telemetry_;
  std::vector<Objectives> observed_;
  std::vector<ArchiveEntry> ep_;
  RunResult result_;
};

}  // namespace

RunResult run(const RunConfig& config) {
  config.env.validate();
  config.ppo.validate();
  config.evolution.validate();
  if (config.output_dir.empty()) throw std::invalid_argument("run: output_dir is empty");
  return Run(config).execute();
}

}  // namespace uvaa::evolve
