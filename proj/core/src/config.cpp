#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uvaa/error.hpp"
#include "uvaa/harness.hpp"

namespace uvaa::harness {

using json = nlohmann::ordered_json;

namespace {

using Choices = std::initializer_list<const char*>;

// One traversal drives parsing, serialization and the schema.
template <class V>
void visit(V& v, ExperimentConfig& c) {
  v.field("scenario", c.scenario, {"small", "large", "custom"});
  v.field("seed", c.seed);
  v.field("output_dir", c.output_dir);
  v.section("env", [&] {
    auto& e = c.env;
    v.field("n_uav", e.n_uav);
    v.field("horizon", e.horizon);
    v.field("slot_duration", e.slot_duration);
    v.field("l_min", e.l_min);
    v.field("l_max", e.l_max);
    v.field("h_min", e.h_min);
    v.field("h_max", e.h_max);
    v.field("d_h_max", e.d_h_max);
    v.field("d_v_max", e.d_v_max);
    v.field("d_min", e.d_min);
    v.field("bs_position", e.bs_position);
    v.field("eps1", e.eps1);
    v.field("eps2", e.eps2);
    v.field("eps3", e.eps3);
    v.section("channel", [&] {
      auto& ch = e.channel;
      v.field("k0", ch.k0);
      v.field("alpha", ch.alpha);
      v.field("rician_k", ch.rician_k);
      v.field("noise_power", ch.noise_power);
      v.field("wavelength", ch.wavelength);
      v.field("antenna_efficiency", ch.antenna_efficiency);
      v.field("bs_sidelobe_gain", ch.bs_sidelobe_gain);
      v.field("tx_power_per_uav", ch.tx_power_per_uav);
      v.field("bs_tx_power", ch.bs_tx_power);
    });
    v.section("rotor", [&] {
      auto& r = e.rotor;
      v.field("blade_power", r.blade_power);
      v.field("induced_power", r.induced_power);
      v.field("tip_speed", r.tip_speed);
      v.field("hover_induced_velocity", r.hover_induced_velocity);
      v.field("fuselage_drag_ratio", r.fuselage_drag_ratio);
      v.field("air_density", r.air_density);
      v.field("rotor_solidity", r.rotor_solidity);
      v.field("rotor_disc_area", r.rotor_disc_area);
      v.field("uav_mass", r.uav_mass);
      v.field("gravity", r.gravity);
    });
    v.section("mobility", [&] {
      auto& m = e.mobility;
      v.section("area", [&] {
        v.field("x_min", m.area.x_min);
        v.field("x_max", m.area.x_max);
        v.field("y_min", m.area.y_min);
        v.field("y_max", m.area.y_max);
      });
      v.field("memory", m.memory);
      v.field("mean_speed", m.mean_speed);
      v.field("mean_heading", m.mean_heading);
      v.field("sigma_speed", m.sigma_speed);
      v.field("sigma_heading", m.sigma_heading);
    });
    v.field("gain_integration", e.gain_integration);
    v.section("quadrature", [&] {
      v.field("n_theta", e.quadrature.n_theta);
      v.field("n_phi", e.quadrature.n_phi);
    });
    v.field("clamp_negative_energy", e.clamp_negative_energy);
  });
  v.section("ppo", [&] {
    auto& p = c.ppo;
    v.field("gamma", p.gamma);
    v.field("lambda", p.lambda);
    v.field("clip", p.clip);
    v.field("epochs", p.epochs);
    v.field("episodes_per_iteration", p.episodes_per_iteration);
    v.field("minibatch_episodes", p.minibatch_episodes);
    v.field("learning_rate", p.learning_rate);
    v.field("max_grad_norm", p.max_grad_norm);
    v.field("bptt_truncation", p.bptt_truncation);
    v.field("normalize_advantage", p.normalize_advantage);
  });
  v.section("model", [&] {
    v.field("lstm_hidden", c.model.lstm_hidden);
    v.field("fc_hidden", c.model.fc_hidden);
    v.field("initial_log_std", c.model.initial_log_std);
  });
  v.section("evolution", [&] {
    auto& ev = c.evolution;
    v.field("n_tasks", ev.n_tasks);
    v.field("generations", ev.generations);
    v.field("n_warm", ev.n_warm);
    v.field("n_evo", ev.n_evo);
    v.field("buffer_count", ev.buffer_count);
    v.field("buffer_size", ev.buffer_size);
    v.field("k_can", ev.k_can);
    v.field("c", ev.c);
    v.field("sectors", ev.sectors);
    v.field("n_eval", ev.n_eval);
    v.field("z_margin", ev.z_margin);
  });
  v.section("ablation", [&] {
    v.field("disable_lstm", c.ablation.disable_lstm);
    v.field("disable_hypersphere", c.ablation.disable_hypersphere);
  });
}

const char* gain_name(physics::GainIntegration g) {
  return g == physics::GainIntegration::Quadrature ? "quadrature" : "closed_form";
}

class Writer {
 public:
  json root = json::object();

  template <class T>
  void field(const char* name, const T& value, Choices = {}) {
    json& j = (*cur_)[name];
    if constexpr (std::is_same_v<T, Vec2>) {
      j = json::array({value.x, value.y});
    } else if constexpr (std::is_same_v<T, physics::GainIntegration>) {
      j = gain_name(value);
    } else {
      j = value;
    }
  }

  template <class Fn>
  void section(const char* name, Fn&& fn) {
    json* parent = cur_;
    cur_ = &(*parent)[name];
    *cur_ = json::object();
    fn();
    cur_ = parent;
  }

 private:
  json* cur_ = &root;
};

class Reader {
 public:
  explicit Reader(const json& root) : cur_(&root) { check_object(root, "<root>"); }

  template <class T>
  void field(const char* name, T& value, Choices choices = {}) {
    seen_.back().insert(name);
    auto it = cur_->find(name);
    if (it == cur_->end()) return;
    const json& j = *it;
    const std::string key = path(name);
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) fail(key, "expected a boolean");
      value = j.get<bool>();
    } else if constexpr (std::is_same_v<T, int>) {
      if (!j.is_number_integer()) fail(key, "expected an integer");
      const auto v = j.get<std::int64_t>();
      if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) fail(key, "out of range");
      value = static_cast<int>(v);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!j.is_number_unsigned()) fail(key, "expected a non-negative integer");
      value = j.get<std::uint64_t>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!j.is_number()) fail(key, "expected a number");
      value = j.get<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) fail(key, "expected a string");
      value = j.get<std::string>();
      if (choices.size() > 0) {
        bool ok = false;
        for (const char* c : choices) ok = ok || value == c;
        if (!ok) fail(key, "unsupported value '" + value + "'");
      }
    } else if constexpr (std::is_same_v<T, Vec2>) {
      if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        fail(key, "expected [x, y]");
      value = {j[0].get<double>(), j[1].get<double>()};
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!j.is_array()) fail(key, "expected an array of integers");
      value.clear();
      for (const auto& x : j) {
        if (!x.is_number_integer()) fail(key, "expected an array of integers");
        value.push_back(x.get<int>());
      }
    } else if constexpr (std::is_same_v<T, physics::GainIntegration>) {
      if (!j.is_string()) fail(key, "expected a string");
      const auto s = j.get<std::string>();
      if (s == "closed_form") value = physics::GainIntegration::ClosedForm;
      else if (s == "quadrature") value = physics::GainIntegration::Quadrature;
      else fail(key, "unsupported value '" + s + "'");
    }
  }

  template <class Fn>
  void section(const char* name, Fn&& fn) {
    seen_.back().insert(name);
    auto it = cur_->find(name);
    if (it == cur_->end()) return;
    const std::string key = path(name);
    check_object(*it, key);
    const json* parent = cur_;
    cur_ = &*it;
    prefix_.push_back(name);
    seen_.emplace_back();
    fn();
    finish();
    prefix_.pop_back();
    cur_ = parent;
  }

  void finish() {
    for (auto it = cur_->begin(); it != cur_->end(); ++it)
      if (!seen_.back().contains(it.key())) fail(path(it.key()), "unknown key");
    seen_.pop_back();
  }

 private:
  std::string path(const std::string& name) const {
    std::string p;
    for (const auto& s : prefix_) p += s + ".";
    return p + name;
  }
  [[noreturn]] static void fail(const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  }
  static void check_object(const json& j, const std::string& key) {
    if (!j.is_object()) fail(key, "expected an object");
  }

  const json* cur_;
  std::vector<std::string> prefix_;
  std::vector<std::set<std::string>> seen_{1};
};

class SchemaWriter {
 public:
  json root = object_schema();

  template <class T>
  void field(const char* name, const T& value, Choices choices = {}) {
    json s = json::object();
    if constexpr (std::is_same_v<T, bool>) {
      s["type"] = "boolean";
    } else if constexpr (std::is_same_v<T, int>) {
      s["type"] = "integer";
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      s["type"] = "integer";
      s["minimum"] = 0;
    } else if constexpr (std::is_same_v<T, double>) {
      s["type"] = "number";
    } else if constexpr (std::is_same_v<T, std::string>) {
      s["type"] = "string";
      if (choices.size() > 0) {
        s["enum"] = json::array();
        for (const char* c : choices) s["enum"].push_back(c);
      }
    } else if constexpr (std::is_same_v<T, Vec2>) {
      s = {{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 2}, {"maxItems", 2}};
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      s = {{"type", "array"}, {"items", {{"type", "integer"}, {"minimum", 1}}}, {"minItems", 1}};
    } else if constexpr (std::is_same_v<T, physics::GainIntegration>) {
      s = {{"type", "string"}, {"enum", {"closed_form", "quadrature"}}};
    }
    Writer w;
    w.field("v", value);
    s["default"] = w.root["v"];
    (*cur_)["properties"][name] = std::move(s);
  }

  template <class Fn>
  void section(const char* name, Fn&& fn) {
    json* parent = cur_;
    cur_ = &(*parent)["properties"][name];
    *cur_ = object_schema();
    fn();
    cur_ = parent;
  }

 private:
  static json object_schema() {
    return {{"type", "object"}, {"additionalProperties", false}, {"properties", json::object()}};
  }
  json* cur_ = &root;
};

json to_json(const ExperimentConfig& config) {
  Writer w;
  ExperimentConfig copy = config;
  visit(w, copy);
  return w.root;
}

std::string iso_utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Reader r(root);
  visit(r, c);
  r.finish();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

std::string config_schema() {
  SchemaWriter s;
  ExperimentConfig defaults;
  visit(s, defaults);
  json doc = {{"$schema", "http://json-schema.org/draft-07/schema#"}, {"title", "uvaa experiment config"}};
  for (auto it = s.root.begin(); it != s.root.end(); ++it) doc[it.key()] = it.value();
  return doc.dump(2) + "\n";
}

ExperimentConfig resolve(const ExperimentConfig& config) {
  ExperimentConfig r = config;
  if (r.scenario == "small") r.env.n_uav = 8;
  else if (r.scenario == "large") r.env.n_uav = 16;
  else if (r.scenario != "custom") throw ConfigError("config key 'scenario': unsupported value '" + r.scenario + "'");
  r.model.use_lstm = !r.ablation.disable_lstm;
  if (r.ablation.disable_hypersphere) r.evolution.k_can = 1;
  if (r.output_dir.empty()) throw ConfigError("config key 'output_dir': must not be empty");
  if (r.model.lstm_hidden < 1) throw ConfigError("config key 'model.lstm_hidden': must be >= 1");
  for (int h : r.model.fc_hidden)
    if (h < 1) throw ConfigError("config key 'model.fc_hidden': entries must be >= 1");
  try {
    r.env.validate();
    r.ppo.validate();
    r.evolution.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return r;
}

std::string algorithm_tag(const Ablation& a) {
  std::string tag = "emoppo-vlh";
  if (a.disable_lstm) tag += "-no-lstm";
  if (a.disable_hypersphere) tag += "-no-hypersphere";
  return tag;
}

evolve::RunConfig to_run_config(const ExperimentConfig& resolved, int threads) {
  evolve::RunConfig rc;
  rc.env = resolved.env;
  rc.ppo = resolved.ppo;
  rc.model = resolved.model;
  rc.evolution = resolved.evolution;
  rc.master_seed = resolved.seed;
  rc.algorithm = algorithm_tag(resolved.ablation);
  rc.output_dir = resolved.output_dir;
  rc.threads = threads;
  return rc;
}

int threads_from_env() {
  const char* v = std::getenv("UVAA_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  const std::string_view s(v);
  int n = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
  if (ec != std::errc() || p != s.data() + s.size() || n < 1)
    throw ConfigError("UVAA_THREADS must be a positive integer, got '" + std::string(s) + "'");
  return n;
}

const std::vector<ObjectiveInfo>& objectives() {
  static const std::vector<ObjectiveInfo> o{
      {"f1", "sum transmission rate", "bit/s/Hz", "maximize"},
      {"f2", "swarm energy", "J", "minimize"},
  };
  return o;
}

std::string manifest_json(const ExperimentConfig& resolved, int threads) {
  json m = json::object();
  m["name"] = "uvaa";
  m["version"] = UVAA_VERSION;
  m["created_utc"] = iso_utc_now();
  m["algorithm"] = algorithm_tag(resolved.ablation);
  m["threads"] = threads;
  m["config"] = to_json(resolved);

  json streams = json::array();
  auto stream = [&](const char* tag, json indices, const char* use) {
    streams.push_back({{"tag", tag}, {"indices", std::move(indices)}, {"use", use}});
  };
  stream("task-init", {"task"}, "initial network parameters of warm-up task i (master seed)");
  stream("rollout", {"generation", "task_slot", "iteration"}, "per-iteration rollout seed (master seed)");
  stream("episode", {"episode"}, "environment seed of rollout episode b (rollout seed)");
  stream("action-noise", json::array(), "policy sampling noise (rollout seed)");
  stream("env-placement", json::array(), "initial UAV placement (environment seed)");
  stream("env-dynamics", json::array(), "fading and user mobility (environment seed)");
  stream("evaluation", {"k"}, "k-th evaluation episode seed shared by every policy (master seed)");
  stream("selection", {"generation"}, "roulette draws of task selection (master seed)");
  stream("replacement", {"generation", "task_slot"}, "fresh task after a training failure (master seed)");
  m["seeds"] = {
      {"master", resolved.seed},
      {"derivation",
       "h = splitmix64(parent ^ fnv1a64(tag)); then h = splitmix64(h ^ k) for each index k; "
       "streams feed std::mt19937_64"},
      {"streams", std::move(streams)},
      {"evaluation", evolve::evaluation_seeds(resolved.seed, resolved.evolution.n_eval)},
  };
  m["outputs"] = json::array({
      {{"pattern", kManifestFile}, {"content", "this file"}},
      {{"pattern", "ep_gen{g}.csv"}, {"content", "external archive after generation g (0 = warm-up): snapshot_id,f1,f2"}},
      {{"pattern", evolve::kMetricsFile}, {"content", "IGD and HV per generation against the run's own union front"}},
      {{"pattern", evolve::kTelemetryFile}, {"content", "per-iteration training telemetry"}},
      {{"pattern", std::string(evolve::kCheckpointDir) + "/{snapshot_id}.policy"},
       {"content", "policy snapshots of the final archive"}},
  });
  json obj = json::array();
  for (const auto& o : objectives())
    obj.push_back({{"name", o.name}, {"label", o.label}, {"unit", o.unit}, {"sense", o.sense}});
  m["objectives"] = std::move(obj);
  m["normalization"] =
      "buffer assignment and candidate selection use min-max normalized objectives over the current "
      "population; CSV files and metrics use raw units";
  return m.dump(2) + "\n";
}

}  // namespace uvaa::harness
