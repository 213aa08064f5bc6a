#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "uvaa/env.hpp"
#include "uvaa/evolve.hpp"
#include "uvaa/moppo.hpp"

namespace uvaa::harness {

namespace fs = std::filesystem;

struct Ablation {
  bool disable_lstm = false;         // dense trunk instead of the LSTM
  bool disable_hypersphere = false;  // best task per weight vector
};

/// One experiment. Scenario "small" fixes N = 8, "large" N = 16 and
/// "custom" keeps env.n_uav.
struct ExperimentConfig {
  std::string scenario = "small";
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  env::EnvConfig env;
  moppo::PpoConfig ppo;
  moppo::ModelConfig model;
  evolve::EvolutionConfig evolution;
  Ablation ablation;
};

/// Strict parse: unknown keys and wrong types raise ConfigError naming the
/// offending key path. Missing keys keep their defaults.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const fs::path& path);
/// The resolved config recorded in a run manifest.
ExperimentConfig config_from_manifest(const fs::path& manifest);
/// Every field, in a fixed order, as a pretty-printed JSON document.
std::string serialize_config(const ExperimentConfig& config);
/// JSON Schema (draft-07) of the config document.
std::string config_schema();

/// Applies the scenario and validates every section. Throws ConfigError.
ExperimentConfig resolve(const ExperimentConfig& config);
std::string algorithm_tag(const Ablation& ablation);
evolve::RunConfig to_run_config(const ExperimentConfig& resolved, int threads);

/// UVAA_THREADS, or 1 when unset. Throws ConfigError on a bad value.
int threads_from_env();

struct ObjectiveInfo {
  std::string name, label, unit, sense;
};
const std::vector<ObjectiveInfo>& objectives();

inline constexpr const char* kManifestFile = "manifest.json";

/// Resolved config, version, seed table, timestamp and output patterns.
std::string manifest_json(const ExperimentConfig& resolved, int threads);

// ---------------------------------------------------------------- commands

/// Writes the manifest, then runs the evolutionary loop.
evolve::RunResult train(const ExperimentConfig& config, int threads,
                        std::function<void(const std::string&)> log = {});

struct EpisodeReport {
  std::uint64_t seed = 0;
  double f1 = 0.0;
  double f2 = 0.0;
};

struct EvaluationReport {
  std::string source;
  std::vector<EpisodeReport> episodes;
  double mean_f1 = 0.0;
  double mean_f2 = 0.0;
};

enum class Scripted { Hover, Random };

struct EvaluateRequest {
  std::optional<fs::path> checkpoint;
  std::optional<fs::path> ep_dir;          // pick by --select
  std::string select = "best-f1";
  std::optional<Scripted> scripted;
  int episodes = 5;
  std::uint64_t seed = 0;
};

/// Episode seeds are derived from `seed`, so equal requests give equal
/// reports. Shape mismatches raise ShapeMismatch or CheckpointError.
EvaluationReport evaluate(const ExperimentConfig& resolved, const EvaluateRequest& request);
std::string report_csv(const EvaluationReport& report);

/// Snapshot id and f1 of the ep_gen row with the largest f1 in the last
/// generation file of `dir`.
std::pair<std::string, double> select_best_f1(const fs::path& dir);

struct EpRow {
  std::string id;
  double f1 = 0.0;
  double f2 = 0.0;
};
struct EpFile {
  int generation = 0;
  std::vector<EpRow> rows;
};

/// Reads one ep_gen CSV. Throws ParseError.
std::vector<EpRow> read_ep_csv(const fs::path& path);
/// All ep_gen{g}.csv files of a run directory, by generation. Throws
/// EmptyDirectory when there are none.
std::vector<EpFile> read_run(const fs::path& dir);

/// IGD/HV of every generation of every run against the union front of all
/// runs. The first line records the shared reference point.
std::string metrics_report(const std::vector<fs::path>& run_dirs);

/// Writes SVG charts for each input CSV (ep_gen scatter, or IGD and HV line
/// charts for metrics files). Returns the files written. Throws ParseError.
std::vector<fs::path> plot(const std::vector<fs::path>& inputs, const fs::path& out_dir,
                           const std::optional<fs::path>& manifest);

/// One episode of a scripted policy as JSON lines, one per slot.
void env_trace(const ExperimentConfig& resolved, Scripted policy, std::uint64_t seed, std::ostream& out);

/// Maps an exception to the CLI exit code.
int exit_code(const std::exception& e);

}  // namespace uvaa::harness
