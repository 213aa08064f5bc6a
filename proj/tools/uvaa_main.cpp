// uvaa: train, evaluate and inspect UAV virtual-antenna-array swarm policies.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uvaa/error.hpp"
#include "uvaa/harness.hpp"

namespace fs = std::filesystem;
using namespace uvaa;

namespace {

harness::Scripted parse_scripted(const std::string& s) {
  if (s == "hover") return harness::Scripted::Hover;
  if (s == "random") return harness::Scripted::Random;
  throw ConfigError("unknown scripted policy '" + s + "' (hover, random)");
}

void emit(const std::string& text, const std::optional<std::string>& path) {
  if (!path) {
    std::cout << text;
    return;
  }
  if (fs::path(*path).has_parent_path()) fs::create_directories(fs::path(*path).parent_path());
  std::ofstream out(*path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + *path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV virtual antenna array: evolutionary multi-objective PPO"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "run warm-up and the evolutionary loop");
  std::string train_config;
  std::optional<std::string> train_out;
  std::optional<std::uint64_t> train_seed;
  bool quiet = false;
  train->add_option("--config,-c", train_config, "experiment config (JSON)")->required();
  train->add_option("--output-dir,-o", train_out, "override output_dir");
  train->add_option("--seed", train_seed, "override the master seed");
  train->add_flag("--quiet,-q", quiet, "no progress lines");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a policy snapshot or a scripted policy");
  std::optional<std::string> eval_config, eval_ckpt, eval_dir, eval_scripted, eval_out;
  std::string select = "best-f1";
  int episodes = 5;
  std::uint64_t eval_seed = 0;
  evaluate->add_option("--config,-c", eval_config, "experiment config (defaults to the run manifest)");
  auto* o_ckpt = evaluate->add_option("--checkpoint", eval_ckpt, "policy or task checkpoint");
  auto* o_dir = evaluate->add_option("--ep-dir", eval_dir, "run directory holding ep_gen files");
  auto* o_scr = evaluate->add_option("--scripted", eval_scripted, "hover | random");
  o_ckpt->excludes(o_dir)->excludes(o_scr);
  o_dir->excludes(o_scr);
  evaluate->add_option("--select", select, "archive selection rule")->check(CLI::IsMember({"best-f1"}));
  evaluate->add_option("--episodes,-n", episodes, "evaluation episodes")->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", eval_seed, "seed of the episode seed list");
  evaluate->add_option("--out", eval_out, "write the report CSV here");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "IGD/HV of runs against their shared union front");
  std::vector<std::string> metric_dirs;
  std::optional<std::string> metrics_out;
  metrics->add_option("dirs", metric_dirs, "run directories")->required();
  metrics->add_option("--out", metrics_out, "combined CSV (stdout when absent)");

  // plot
  auto* plot = app.add_subcommand("plot", "SVG charts from ep_gen or metrics CSV files");
  std::vector<std::string> plot_inputs;
  std::string plot_dir = "plots";
  std::optional<std::string> plot_manifest;
  plot->add_option("inputs", plot_inputs, "CSV files")->required();
  plot->add_option("--out-dir", plot_dir, "output directory");
  plot->add_option("--manifest", plot_manifest, "manifest with objective names and units");

  // env-trace
  auto* trace = app.add_subcommand("env-trace", "dump one scripted episode as JSON lines");
  std::string trace_config, trace_policy = "hover";
  std::uint64_t trace_seed = 0;
  std::optional<std::string> trace_out;
  trace->add_option("--config,-c", trace_config, "experiment config (JSON)")->required();
  trace->add_option("--policy", trace_policy, "hover | random");
  trace->add_option("--seed", trace_seed, "environment seed");
  trace->add_option("--out", trace_out, "JSONL file (stdout when absent)");

  // schema
  auto* schema = app.add_subcommand("schema", "print the config JSON schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*train) {
      harness::ExperimentConfig cfg = harness::load_config(train_config);
      if (train_out) cfg.output_dir = *train_out;
      if (train_seed) cfg.seed = *train_seed;
      const int threads = harness::threads_from_env();
      auto log = [quiet](const std::string& m) {
        if (!quiet) std::cerr << m << '\n';
      };
      const auto result = harness::train(cfg, threads, log);
      std::cout << "archive size " << result.ep.size() << ", outputs in " << cfg.output_dir << '\n';
      return 0;
    }
    if (*evaluate) {
      harness::ExperimentConfig cfg;
      if (eval_config) cfg = harness::load_config(*eval_config);
      else if (eval_dir && fs::exists(fs::path(*eval_dir) / harness::kManifestFile))
        cfg = harness::config_from_manifest(fs::path(*eval_dir) / harness::kManifestFile);
      else throw ConfigError("--config is required unless --ep-dir holds a manifest");
      harness::EvaluateRequest req;
      if (eval_ckpt) req.checkpoint = fs::path(*eval_ckpt);
      if (eval_dir) req.ep_dir = fs::path(*eval_dir);
      if (eval_scripted) req.scripted = parse_scripted(*eval_scripted);
      req.select = select;
      req.episodes = episodes;
      req.seed = eval_seed;
      const auto report = harness::evaluate(harness::resolve(cfg), req);
      const std::string csv = harness::report_csv(report);
      if (eval_out) emit(csv, eval_out);
      std::cout << "source " << report.source << '\n' << csv;
      return 0;
    }
    if (*metrics) {
      std::vector<fs::path> dirs(metric_dirs.begin(), metric_dirs.end());
      emit(harness::metrics_report(dirs), metrics_out);
      return 0;
    }
    if (*plot) {
      std::vector<fs::path> in(plot_inputs.begin(), plot_inputs.end());
      std::optional<fs::path> man;
      if (plot_manifest) man = fs::path(*plot_manifest);
      for (const auto& p : harness::plot(in, plot_dir, man)) std::cout << p.string() << '\n';
      return 0;
    }
    if (*trace) {
      const auto cfg = harness::resolve(harness::load_config(trace_config));
      const auto policy = parse_scripted(trace_policy);
      if (trace_out) {
        std::ofstream out(*trace_out, std::ios::binary);
        if (!out) throw Error("cannot write " + *trace_out);
        harness::env_trace(cfg, policy, trace_seed, out);
      } else {
        harness::env_trace(cfg, policy, trace_seed, std::cout);
      }
      return 0;
    }
    if (*schema) {
      std::cout << harness::config_schema();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "uvaa: " << e.what() << '\n';
    return harness::exit_code(e);
  }
  return 2;
}
