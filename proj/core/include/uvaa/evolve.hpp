#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uvaa/metrics.hpp"
#include "uvaa/moppo.hpp"
#include "uvaa/rng.hpp"

namespace uvaa::evolve {

using Objectives = metrics::Point;  // (f1, -f2): both maximized

/// n evenly spaced weight vectors on the 2-simplex: (i/(n-1), 1 - i/(n-1)).
std::vector<std::vector<double>> make_weight_vectors(int n);

/// Mean-action evaluation mapped to the maximize-both convention.
Objectives evaluate_policy(const nn::PolicyNetwork& policy, const moppo::EnvFactory& make_env,
                           std::span<const std::uint64_t> seeds);

// ---------------------------------------------------------------- population

/// A trained task snapshot as seen by the outer loop.
struct TaskRecord {
  std::uint64_t id = 0;
  std::vector<double> weight;
  Objectives f{};
};

/// Per-axis min-max scaling (a zero range maps to 1).
struct Normalizer {
  Objectives lo{}, span{1.0, 1.0};

  static Normalizer fit(std::span<const Objectives> points);
  Objectives operator()(const Objectives& p) const;
};

/// Componentwise minimum of `observed` minus `margin` of each range.
Objectives reference_vector(std::span<const Objectives> observed, double margin = 0.05);

/// argmax_j (w_j . f_ref / |w_j|), first index on ties.
std::size_t buffer_index(const Objectives& f_ref, const std::vector<std::vector<double>>& directions);

/// Performance-buffer population update over `population` followed by
/// `offspring`. Points are normalized over that union; every buffer keeps its
/// `buffer_size` members farthest from `z_ref` (earlier entries win ties).
/// Returns the retained records, buffer by buffer. Duplicate ids are
/// considered once.
std::vector<TaskRecord> tpu(const std::vector<TaskRecord>& population,
                            const std::vector<TaskRecord>& offspring, const Objectives& z_ref,
                            int buffer_count, int buffer_size);

/// Per-candidate roulette weights c / N_sector, normalized. `points` are the
/// candidates' normalized objective vectors; sectors are equal angles around
/// their centroid.
std::vector<double> sector_weights(std::span<const Objectives> points, int sectors, double c);

/// One task index into `population` per weight vector. Candidates are the
/// top `k_can` by w . normalized f (earlier entries win ties).
std::vector<std::size_t> hypersphere_select(const std::vector<std::vector<double>>& weights,
                                            const std::vector<TaskRecord>& population, int k_can,
                                            double c, int sectors, Rng& rng);

// ---------------------------------------------------------------- archive

struct ArchiveEntry {
  std::uint64_t id = 0;
  Objectives f{};
};

/// Inserts each non-dominated candidate and drops members it dominates.
/// Candidates equal in value to a member are skipped. Returns true if the
/// archive changed.
bool update_ep(std::vector<ArchiveEntry>& ep, std::span<const ArchiveEntry> candidates);

/// Snapshot files in a checkpoint directory, named by hex id.
class SnapshotStore {
 public:
  explicit SnapshotStore(std::filesystem::path dir);

  std::filesystem::path task_path(std::uint64_t id) const;
  std::filesystem::path policy_path(std::uint64_t id) const;
  void save_task(const moppo::Task& task) const;
  void save_policy(std::uint64_t id, const moppo::Task& task) const;
  moppo::Task load_task(std::uint64_t id, double learning_rate) const;
  /// Deletes task files whose id is not in `keep`.
  void collect_tasks(std::span<const std::uint64_t> keep) const;
  /// Deletes policy files whose id is not in `keep`.
  void collect_policies(std::span<const std::uint64_t> keep) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

std::string format_id(std::uint64_t id);

// ---------------------------------------------------------------- run

struct EvolutionConfig {
  int n_tasks = 15;
  int generations = 100;
  int n_warm = 60;
  int n_evo = 10;
  int buffer_count = 50;
  int buffer_size = 2;
  int k_can = 5;
  double c = 2.0;
  int sectors = 8;
  int n_eval = 3;
  double z_margin = 0.05;

  void validate() const;
};

struct RunConfig {
  env::EnvConfig env;
  moppo::PpoConfig ppo;
  moppo::ModelConfig model;
  EvolutionConfig evolution;
  std::uint64_t master_seed = 0;
  std::string algorithm = "emoppo-vlh";
  std::filesystem::path output_dir;
  int threads = 1;
  std::function<void(const std::string&)> log;
};

struct GenerationSummary {
  int generation = 0;
  std::vector<ArchiveEntry> ep;
  double wall_time_s = 0.0;
};

struct RunResult {
  std::vector<ArchiveEntry> ep;
  std::vector<GenerationSummary> generations;  // warm-up is generation 0
  metrics::Point reference_point{};
  std::vector<std::filesystem::path> files;    // every file written
};

/// Evaluation seeds shared by every policy of a run.
std::vector<std::uint64_t> evaluation_seeds(std::uint64_t master_seed, int n_eval);

/// Warm-up followed by `generations` rounds of tpu, selection, training and
/// archive update. Writes ep_gen{g}.csv, metrics.csv, telemetry.csv and the
/// checkpoints directory under output_dir.
RunResult run(const RunConfig& config);

/// File names inside an output directory.
inline constexpr const char* kCheckpointDir = "checkpoints";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kTelemetryFile = "telemetry.csv";
std::string ep_file_name(int generation);

}  // namespace uvaa::evolve
