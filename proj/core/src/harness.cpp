#include "uvaa/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "uvaa/error.hpp"
#include "uvaa/metrics.hpp"

namespace uvaa::harness {

using json = nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    throw ParseError(where + ": not a number '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& where) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError(where + ": not an integer '" + s + "'");
  return v;
}

env::ActionVector scripted_action(const env::EnvConfig& cfg, Scripted kind, Rng& rng) {
  env::ActionVector a(static_cast<std::size_t>(cfg.n_uav));
  if (kind == Scripted::Hover) {
    for (auto& u : a) u = {1.0, 0.0, 0.0, 0.0};
    return a;
  }
  const auto lo = env::action_low(cfg);
  const auto hi = env::action_high(cfg);
  std::vector<double> flat(lo.size());
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = rng.uniform(lo[i], hi[i]);
  return env::unflatten_action(flat);
}

std::uint64_t episode_seed(std::uint64_t seed, int k) {
  return derive_seed(seed, "evaluate", {static_cast<std::uint64_t>(k)});
}

}  // namespace

ExperimentConfig config_from_manifest(const fs::path& manifest) {
  json m;
  try {
    m = json::parse(read_file(manifest));
  } catch (const json::parse_error& e) {
    throw ConfigError("manifest " + manifest.string() + " is not valid JSON");
  }
  if (!m.contains("config")) throw ConfigError("manifest " + manifest.string() + " has no config");
  return parse_config(m["config"].dump());
}

// ---------------------------------------------------------------- train

evolve::RunResult train(const ExperimentConfig& config, int threads,
                        std::function<void(const std::string&)> log) {
  const ExperimentConfig resolved = resolve(config);
  const fs::path out(resolved.output_dir);
  fs::create_directories(out);
  write_file(out / kManifestFile, manifest_json(resolved, threads));
  evolve::RunConfig rc = to_run_config(resolved, threads);
  rc.log = std::move(log);
  return evolve::run(rc);
}

// ---------------------------------------------------------------- evaluate

std::vector<EpRow> read_ep_csv(const fs::path& path) {
  const auto lines = lines_of(read_file(path));
  const std::string where = path.string();
  if (lines.empty()) throw ParseError(where + ": empty file");
  if (lines[0] != "snapshot_id,f1,f2") throw ParseError(where + ": unexpected header '" + lines[0] + "'");
  std::vector<EpRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i]);
    const std::string at = where + ":" + std::to_string(i + 1);
    if (f.size() != 3) throw ParseError(at + ": expected 3 fields");
    rows.push_back({f[0], parse_double(f[1], at), parse_double(f[2], at)});
  }
  return rows;
}

std::vector<EpFile> read_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  static const std::regex name(R"(ep_gen(\d+)\.csv)");
  std::vector<EpFile> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string fn = e.path().filename().string();
    if (e.is_regular_file() && std::regex_match(fn, m, name))
      files.push_back({std::stoi(m[1].str()), read_ep_csv(e.path())});
  }
  if (files.empty()) throw EmptyDirectory("no ep_gen files in " + dir.string());
  std::sort(files.begin(), files.end(), [](const EpFile& a, const EpFile& b) { return a.generation < b.generation; });
  return files;
}

std::pair<std::string, double> select_best_f1(const fs::path& dir) {
  const auto files = read_run(dir);
  const auto& rows = files.back().rows;
  if (rows.empty()) throw EmptyDirectory("final archive in " + dir.string() + " is empty");
  const EpRow* best = &rows[0];
  for (const auto& r : rows)
    if (r.f1 > best->f1) best = &r;
  return {best->id, best->f1};
}

EvaluationReport evaluate(const ExperimentConfig& resolved, const EvaluateRequest& req) {
  if (req.episodes < 1) throw ConfigError("--episodes must be >= 1");
  const int sources = (req.checkpoint ? 1 : 0) + (req.ep_dir ? 1 : 0) + (req.scripted ? 1 : 0);
  if (sources != 1) throw ConfigError("exactly one of --checkpoint, --ep-dir or --scripted is required");
  EvaluationReport report;

  if (req.scripted) {
    report.source = *req.scripted == Scripted::Hover ? "scripted:hover" : "scripted:random";
    for (int k = 0; k < req.episodes; ++k) {
      const std::uint64_t s = episode_seed(req.seed, k);
      env::Environment e(resolved.env);
      e.reset(s);
      Rng rng(derive_seed(s, "scripted"));
      EpisodeReport ep{s, 0.0, 0.0};
      while (!e.done()) {
        const auto r = e.step(scripted_action(resolved.env, *req.scripted, rng));
        ep.f1 += r.rate;
        ep.f2 += r.energy;
      }
      report.episodes.push_back(ep);
    }
  } else {
    fs::path path;
    if (req.checkpoint) {
      path = *req.checkpoint;
    } else {
      if (req.select != "best-f1") throw ConfigError("unsupported --select '" + req.select + "'");
      const auto [id, f1] = select_best_f1(*req.ep_dir);
      path = *req.ep_dir / evolve::kCheckpointDir / (id + ".policy");
    }
    report.source = path.string();
    const nn::PolicyNetwork policy = moppo::policy_from_checkpoint(nn::Checkpoint::load(path));
    if (policy.shape().input_size != static_cast<int>(resolved.env.observation_size()) ||
        policy.action_size() != static_cast<int>(resolved.env.action_size()))
      throw ShapeMismatch("checkpoint " + path.string() + " was trained for a different swarm size");
    const auto make_env = moppo::uvaa_env_factory(resolved.env);
    for (int k = 0; k < req.episodes; ++k) {
      const std::uint64_t s = episode_seed(req.seed, k);
      const std::uint64_t seeds[] = {s};
      const auto f = moppo::evaluate_raw(policy, make_env, seeds);
      report.episodes.push_back({s, f[0], f[1]});
    }
  }
  for (const auto& e : report.episodes) {
    report.mean_f1 += e.f1;
    report.mean_f2 += e.f2;
  }
  report.mean_f1 /= static_cast<double>(report.episodes.size());
  report.mean_f2 /= static_cast<double>(report.episodes.size());
  return report;
}

std::string report_csv(const EvaluationReport& report) {
  std::string s = "episode,seed,f1,f2\n";
  for (std::size_t k = 0; k < report.episodes.size(); ++k) {
    const auto& e = report.episodes[k];
    s += std::to_string(k) + ',' + std::to_string(e.seed) + ',' + fmt(e.f1) + ',' + fmt(e.f2) + '\n';
  }
  s += "mean,," + fmt(report.mean_f1) + ',' + fmt(report.mean_f2) + '\n';
  return s;
}

// ---------------------------------------------------------------- metrics

std::string metrics_report(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.empty()) throw ConfigError("metrics: at least one run directory is required");
  struct Run {
    std::string name, algorithm;
    std::vector<EpFile> files;
  };
  std::vector<Run> runs;
  metrics::Front all;
  for (const auto& dir : run_dirs) {
    Run r{dir.filename().string(), "unknown", read_run(dir)};
    if (r.name.empty()) r.name = dir.parent_path().filename().string();
    if (fs::exists(dir / kManifestFile)) {
      try {
        const json m = json::parse(read_file(dir / kManifestFile));
        if (m.contains("algorithm") && m["algorithm"].is_string()) r.algorithm = m["algorithm"].get<std::string>();
      } catch (const json::parse_error&) {
        throw ParseError("manifest in " + dir.string() + " is not valid JSON");
      }
    }
    for (const auto& f : r.files)
      for (const auto& row : f.rows) all.push_back({row.f1, -row.f2});
    runs.push_back(std::move(r));
  }
  if (all.empty()) throw EmptyDirectory("no archive entries in the given directories");
  const metrics::Front reference = metrics::non_dominated(all);
  const metrics::Point ref = metrics::reference_point(all);

  std::string s = "# reference_point,f1=" + fmt(ref[0]) + ",f2=" + fmt(-ref[1]) + '\n';
  s += "run,algorithm,generation,igd,hv,ep_size\n";
  for (const auto& r : runs)
    for (const auto& f : r.files) {
      metrics::Front front;
      for (const auto& row : f.rows) front.push_back({row.f1, -row.f2});
      const std::string igd = front.empty() ? "nan" : fmt(metrics::igd(front, reference));
      s += r.name + ',' + r.algorithm + ',' + std::to_string(f.generation) + ',' + igd + ',' +
           fmt(metrics::hypervolume(front, ref)) + ',' + std::to_string(front.size()) + '\n';
    }
  return s;
}

// ---------------------------------------------------------------- plot

namespace {

struct Axis {
  double lo = 0.0, hi = 1.0;

  static Axis fit(const std::vector<double>& v) {
    Axis a{*std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end())};
    const double pad = a.hi > a.lo ? 0.05 * (a.hi - a.lo) : std::max(0.5 * std::abs(a.lo), 0.5);
    a.lo -= pad;
    a.hi += pad;
    return a;
  }
  double map(double x, double from, double to) const { return from + (x - lo) / (hi - lo) * (to - from); }
};

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char ch : s) {
    switch (ch) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += ch;
    }
  }
  return o;
}

constexpr double kW = 640, kH = 480, kLeft = 90, kRight = 30, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

class Svg {
 public:
  Svg(const std::string& title, const std::string& xlabel, const std::string& ylabel, Axis x, Axis y)
      : x_(x), y_(y) {
    body_ += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    body_ += "<text class=\"title\" x=\"" + tick_label(kW / 2) + "\" y=\"24\" text-anchor=\"middle\">" +
             xml_escape(title) + "</text>\n";
    const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
    body_ += "<g class=\"axes\" stroke=\"black\">\n";
    body_ += line(x0, y0, x1, y0) + line(x0, y0, x0, y1);
    body_ += "</g>\n<g class=\"ticks\" font-size=\"11\">\n";
    for (int i = 0; i <= 4; ++i) {
      const double xv = x.lo + (x.hi - x.lo) * i / 4.0;
      const double px = px_x(xv);
      body_ += line(px, y0, px, y0 + 5) + "<text x=\"" + tick_label(px) + "\" y=\"" + tick_label(y0 + 18) +
               "\" text-anchor=\"middle\">" + tick_label(xv) + "</text>\n";
      const double yv = y.lo + (y.hi - y.lo) * i / 4.0;
      const double py = px_y(yv);
      body_ += line(x0 - 5, py, x0, py) + "<text x=\"" + tick_label(x0 - 8) + "\" y=\"" + tick_label(py + 4) +
               "\" text-anchor=\"end\">" + tick_label(yv) + "</text>\n";
    }
    body_ += "</g>\n";
    body_ += "<text class=\"xlabel\" x=\"" + tick_label((x0 + x1) / 2) + "\" y=\"" + tick_label(kH - 15) +
             "\" text-anchor=\"middle\">" + xml_escape(xlabel) + "</text>\n";
    body_ += "<text class=\"ylabel\" transform=\"translate(20," + tick_label((y0 + y1) / 2) +
             ") rotate(-90)\" text-anchor=\"middle\">" + xml_escape(ylabel) + "</text>\n";
  }

  void point(double x, double y, const char* color) {
    body_ += "<circle class=\"point\" cx=\"" + tick_label(px_x(x)) + "\" cy=\"" + tick_label(px_y(y)) +
             "\" r=\"4\" fill=\"" + color + "\"/>\n";
  }

  void series(const std::vector<std::pair<double, double>>& pts, const std::string& name, int index) {
    const char* color = kPalette[index % 6];
    std::string p;
    for (const auto& [x, y] : pts) p += tick_label(px_x(x)) + "," + tick_label(px_y(y)) + " ";
    body_ += "<polyline class=\"series\" fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"2\" points=\"" + p + "\"/>\n";
    const double ly = kTop + 16.0 * index;
    body_ += "<text class=\"legend\" x=\"" + tick_label(kW - kRight - 4) + "\" y=\"" + tick_label(ly + 12) +
             "\" text-anchor=\"end\" font-size=\"11\" fill=\"" + color + "\">" + xml_escape(name) + "</text>\n";
  }

  std::string str() const {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + tick_label(kW) + "\" height=\"" + tick_label(kH) +
           "\" viewBox=\"0 0 " + tick_label(kW) + " " + tick_label(kH) + "\" font-family=\"sans-serif\">\n" + body_ +
           "</svg>\n";
  }

 private:
  static std::string line(double a, double b, double c, double d) {
    return "<line x1=\"" + tick_label(a) + "\" y1=\"" + tick_label(b) + "\" x2=\"" + tick_label(c) + "\" y2=\"" +
           tick_label(d) + "\"/>\n";
  }
  double px_x(double v) const { return x_.map(v, kLeft, kW - kRight); }
  double px_y(double v) const { return y_.map(v, kH - kBottom, kTop); }

  Axis x_, y_;
  std::string body_;
};

std::vector<ObjectiveInfo> manifest_objectives(const std::optional<fs::path>& manifest, const fs::path& input) {
  fs::path path;
  if (manifest) path = *manifest;
  else if (fs::exists(input.parent_path() / kManifestFile)) path = input.parent_path() / kManifestFile;
  else return objectives();
  json m;
  try {
    m = json::parse(read_file(path));
  } catch (const json::parse_error&) {
    throw ParseError("manifest " + path.string() + " is not valid JSON");
  }
  if (!m.contains("objectives") || !m["objectives"].is_array() || m["objectives"].size() != 2)
    throw ParseError("manifest " + path.string() + " lacks a two-entry objectives list");
  std::vector<ObjectiveInfo> out;
  for (const auto& o : m["objectives"]) {
    try {
      out.push_back({o.at("name").get<std::string>(), o.at("label").get<std::string>(),
                     o.at("unit").get<std::string>(), o.value("sense", "")});
    } catch (const json::exception&) {
      throw ParseError("manifest " + path.string() + " has a malformed objective entry");
    }
  }
  return out;
}

std::string axis_label(const ObjectiveInfo& o) { return o.name + ": " + o.label + " [" + o.unit + "]"; }

// generation -> value, per series name
using Curves = std::map<std::string, std::vector<std::pair<double, double>>>;

void line_chart(const Curves& curves, const std::string& title, const std::string& ylabel, const fs::path& out) {
  std::vector<double> xs, ys;
  for (const auto& [_, pts] : curves)
    for (const auto& [x, y] : pts) {
      xs.push_back(x);
      ys.push_back(y);
    }
  if (xs.empty()) throw ParseError(out.string() + ": no data rows");
  Svg svg(title, "generation", ylabel, Axis::fit(xs), Axis::fit(ys));
  int i = 0;
  for (const auto& [name, pts] : curves) svg.series(pts, name, i++);
  write_file(out, svg.str());
}

}  // namespace

std::vector<fs::path> plot(const std::vector<fs::path>& inputs, const fs::path& out_dir,
                           const std::optional<fs::path>& manifest) {
  if (inputs.empty()) throw ConfigError("plot: no input files");
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const auto& in : inputs) {
    if (!fs::exists(in)) throw ParseError(in.string() + ": no such file");
    const auto lines = lines_of(read_file(in));
    const std::string where = in.string();
    if (lines.empty()) throw ParseError(where + ": empty file");
    const std::string stem = in.stem().string();

    if (lines[0] == "snapshot_id,f1,f2") {
      const auto rows = read_ep_csv(in);
      if (rows.empty()) throw ParseError(where + ": no data rows");
      const auto obj = manifest_objectives(manifest, in);
      std::vector<double> xs, ys;
      for (const auto& r : rows) {
        xs.push_back(r.f1);
        ys.push_back(r.f2);
      }
      Svg svg("Pareto front: " + stem, axis_label(obj[0]), axis_label(obj[1]), Axis::fit(xs), Axis::fit(ys));
      for (const auto& r : rows) svg.point(r.f1, r.f2, kPalette[0]);
      const fs::path out = out_dir / (stem + ".svg");
      write_file(out, svg.str());
      written.push_back(out);
      continue;
    }

    // metrics.csv of a run, or the combined report of `uvaa metrics`
    std::size_t header = 0;
    if (lines[0].rfind("# reference_point", 0) == 0) header = 1;
    if (header >= lines.size()) throw ParseError(where + ": missing header");
    const auto cols = split(lines[header]);
    auto col = [&](const std::string& name) -> std::size_t {
      const auto it = std::find(cols.begin(), cols.end(), name);
      if (it == cols.end()) throw ParseError(where + ": unrecognized header '" + lines[header] + "'");
      return static_cast<std::size_t>(it - cols.begin());
    };
    const std::size_t cg = col("generation"), ci = col("igd"), ch = col("hv"), ca = col("algorithm");
    const bool combined = std::find(cols.begin(), cols.end(), "run") != cols.end();
    const std::size_t cr = combined ? col("run") : ca;
    Curves igd, hv;
    for (std::size_t i = header + 1; i < lines.size(); ++i) {
      const auto f = split(lines[i]);
      const std::string at = where + ":" + std::to_string(i + 1);
      if (f.size() != cols.size()) throw ParseError(at + ": expected " + std::to_string(cols.size()) + " fields");
      const std::string name = combined ? f[cr] + " (" + f[ca] + ")" : f[ca];
      const double g = parse_int(f[cg], at);
      if (f[ci] != "nan") igd[name].emplace_back(g, parse_double(f[ci], at));
      hv[name].emplace_back(g, parse_double(f[ch], at));
    }
    if (hv.empty()) throw ParseError(where + ": no data rows");
    const fs::path out_igd = out_dir / (stem + "_igd.svg");
    const fs::path out_hv = out_dir / (stem + "_hv.svg");
    line_chart(igd, "IGD per generation", "IGD", out_igd);
    line_chart(hv, "HV per generation", "HV", out_hv);
    written.push_back(out_igd);
    written.push_back(out_hv);
  }
  return written;
}

// ---------------------------------------------------------------- env-trace

void env_trace(const ExperimentConfig& resolved, Scripted policy, std::uint64_t seed, std::ostream& out) {
  env::Environment e(resolved.env);
  e.reset(seed);
  Rng rng(derive_seed(seed, "scripted"));
  while (!e.done()) {
    const int t = e.state().slot_index;
    const auto r = e.step(scripted_action(resolved.env, policy, rng));
    json line = json::object();
    line["t"] = t;
    json pos = json::array();
    for (const auto& p : r.state.layout.positions) pos.push_back({p.x, p.y, p.z});
    line["positions"] = std::move(pos);
    line["weights"] = r.state.layout.weights;
    line["user"] = {r.state.user.position.x, r.state.user.position.y};
    line["valid"] = r.valid;
    line["frozen"] = r.frozen;
    line["rate"] = r.rate;
    line["energy"] = r.energy;
    line["gain"] = r.gain;
    line["sinr"] = r.sinr;
    line["reward"] = {r.reward.rate, r.reward.energy};
    out << line.dump() << '\n';
  }
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 1;
  if (dynamic_cast<const CheckpointError*>(&e) || dynamic_cast<const ShapeMismatch*>(&e)) return 3;
  if (dynamic_cast<const EmptyDirectory*>(&e)) return 4;
  if (dynamic_cast<const ParseError*>(&e)) return 5;
  return 2;
}

}  // namespace uvaa::harness
