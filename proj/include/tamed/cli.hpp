#ifndef TAMED_CLI_HPP
#define TAMED_CLI_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "tamed/io.hpp"
#include "tamed/noise.hpp"
#include "tamed/parallel.hpp"
#include "tamed/rng.hpp"
#include "tamed/sampler.hpp"
#include "tamed/solver.hpp"
#include "tamed/verification.hpp"

namespace tamed::cli {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, validation_failure = 2, solver_failure = 3, verification_failure = 4 };

// Verification failure surfaced by a command; maps to exit code 4.
class VerificationFailure : public Error {
 public:
  using Error::Error;
};

struct FieldPreset {
  std::string preset = "zero";  // zero | shear | random | file
  double a = 1.0;               // shear amplitude
  double decay = 2.0;           // random: spectral decay exponent s
  double scale = 1.0;           // random: target H^1 norm
  std::uint64_t seed = 0;       // random: field seed
  std::string path;             // file: .sfld snapshot
};

struct RunConfig {
  int grid = 16;
  double taming_threshold = 1.0;
  FieldPreset u0;

  std::vector<double> marks = {1.0};
  int cutoff = 2;
  std::vector<double> scales;          // empty: all zero
  std::vector<FieldPreset> additive;   // empty: all zero

  std::optional<Control> control;
  std::string control_file;

  double dt = 1e-3;
  double horizon = 0.5;
  double eps = 0.1;
  std::size_t snapshot_stride = 0;
  std::size_t modes = 0;  // 0: every grid mode

  std::vector<double> eps_ladder = {0.2, 0.1, 0.05};
  std::size_t replicas = 100;
  std::size_t trials = 100;
  std::size_t statistical_replicas = 10000;
  bool write_replicas = true;

  std::string output = "out";
  std::uint64_t seed = 1;
  fs::path base_dir = ".";
};

namespace detail {

inline void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ValidationError("unknown key '" + key + "' in " + where);
}

template <class T>
T get(const Json& obj, const char* key, const T& fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(where + "." + key + " has the wrong type");
  }
}

inline FieldPreset parse_preset(const Json& j, const std::string& where) {
  check_keys(j, {"preset", "a", "decay", "scale", "seed", "path"}, where);
  FieldPreset p;
  p.preset = get<std::string>(j, "preset", "zero", where);
  p.a = get<double>(j, "a", 1.0, where);
  p.decay = get<double>(j, "decay", 2.0, where);
  p.scale = get<double>(j, "scale", 1.0, where);
  p.seed = get<std::uint64_t>(j, "seed", 0, where);
  p.path = get<std::string>(j, "path", "", where);
  if (p.preset != "zero" && p.preset != "shear" && p.preset != "random" && p.preset != "file")
    throw ValidationError(where + ".preset must be zero, shear, random or file");
  if (p.preset == "random" && !(p.scale >= 0.0 && std::isfinite(p.scale)))
    throw ValidationError(where + ".scale must be finite and nonnegative");
  if (p.preset == "random" && !std::isfinite(p.decay)) throw ValidationError(where + ".decay must be finite");
  if (p.preset == "shear" && !std::isfinite(p.a)) throw ValidationError(where + ".a must be finite");
  if (p.preset == "file" && p.path.empty()) throw ValidationError(where + ".path is required for the file preset");
  return p;
}

inline Json preset_json(const FieldPreset& p) {
  Json j;
  j["preset"] = p.preset;
  if (p.preset == "shear") j["a"] = p.a;
  if (p.preset == "random") {
    j["decay"] = p.decay;
    j["scale"] = p.scale;
    j["seed"] = p.seed;
  }
  if (p.preset == "file") j["path"] = p.path;
  return j;
}

}  // namespace detail

inline RunConfig parse_config(const Json& j, const fs::path& base_dir = ".") {
  using detail::check_keys;
  using detail::get;
  RunConfig c;
  c.base_dir = base_dir;
  check_keys(j, {"problem", "noise", "control", "solver", "experiment", "output", "seed"}, "config");
  if (j.contains("problem")) {
    const Json& p = j["problem"];
    check_keys(p, {"grid", "taming_threshold", "u0"}, "problem");
    c.grid = get<int>(p, "grid", c.grid, "problem");
    c.taming_threshold = get<double>(p, "taming_threshold", c.taming_threshold, "problem");
    if (p.contains("u0")) c.u0 = detail::parse_preset(p["u0"], "problem.u0");
  }
  if (j.contains("noise")) {
    const Json& n = j["noise"];
    check_keys(n, {"marks", "cutoff", "scales", "additive"}, "noise");
    c.marks = get<std::vector<double>>(n, "marks", c.marks, "noise");
    c.cutoff = get<int>(n, "cutoff", c.cutoff, "noise");
    c.scales = get<std::vector<double>>(n, "scales", {}, "noise");
    if (n.contains("additive")) {
      if (!n["additive"].is_array()) throw ValidationError("noise.additive must be an array");
      for (std::size_t k = 0; k < n["additive"].size(); ++k)
        c.additive.push_back(detail::parse_preset(n["additive"][k], "noise.additive[" + std::to_string(k) + "]"));
    }
  }
  if (j.contains("control")) {
    const Json& g = j["control"];
    if (g.is_object() && g.contains("file")) {
      check_keys(g, {"file"}, "control");
      c.control_file = get<std::string>(g, "file", "", "control");
    } else {
      check_keys(g, {"time_grid", "marks", "values"}, "control");
      c.control = control_from_json(g, "control");
    }
  }
  if (j.contains("solver")) {
    const Json& s = j["solver"];
    check_keys(s, {"dt", "T", "eps", "snapshot_stride", "modes"}, "solver");
    c.dt = get<double>(s, "dt", c.dt, "solver");
    c.horizon = get<double>(s, "T", c.horizon, "solver");
    c.eps = get<double>(s, "eps", c.eps, "solver");
    c.snapshot_stride = get<std::size_t>(s, "snapshot_stride", c.snapshot_stride, "solver");
    c.modes = get<std::size_t>(s, "modes", c.modes, "solver");
  }
  if (j.contains("experiment")) {
    const Json& e = j["experiment"];
    check_keys(e, {"eps_ladder", "replicas", "trials", "statistical_replicas", "write_replicas"}, "experiment");
    c.eps_ladder = get<std::vector<double>>(e, "eps_ladder", c.eps_ladder, "experiment");
    if (e.contains("replicas")) {
      if (!e["replicas"].is_number_integer() || e["replicas"].get<long long>() < 0)
        throw ValidationError("experiment.replicas must be a nonnegative integer");
      c.replicas = e["replicas"].get<std::size_t>();
    }
    c.trials = get<std::size_t>(e, "trials", c.trials, "experiment");
    c.statistical_replicas = get<std::size_t>(e, "statistical_replicas", c.statistical_replicas, "experiment");
    c.write_replicas = get<bool>(e, "write_replicas", c.write_replicas, "experiment");
  }
  c.output = get<std::string>(j, "output", c.output, "config");
  c.seed = get<std::uint64_t>(j, "seed", c.seed, "config");
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  const Json j = parse_json(read_file(path), path.string());
  return parse_config(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

inline fs::path resolve(const RunConfig& c, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : c.base_dir / path;
}

// Fully materialized run: every object the solvers need, built before any output is written.
struct Problem {
  GridPtr grid;
  SpectralField u0;
  MarkSpace marks;
  NoiseCoefficient sigma;
  std::optional<Control> control;
  SolverConfig solver;
  Json inputs = Json::object();  // input file -> git blob id
};

inline SpectralField build_field(const FieldPreset& p, const RunConfig& c, const GridPtr& grid, Json& inputs) {
  if (p.preset == "zero") return SpectralField(grid);
  if (p.preset == "shear") {
    SpectralField u(grid);
    u.set_mode({0, 1, 0}, {Complex(0.0, -0.5 * p.a), 0.0, 0.0});
    return u;
  }
  if (p.preset == "random") {
    Rng rng(p.seed);
    return random_field(grid, rng, p.decay, p.scale);
  }
  const fs::path path = resolve(c, p.path);
  const std::string bytes = read_file(path);
  Snapshot s = decode_sfld(bytes, path.string());
  if (s.n != grid->n()) {
    throw ValidationError(path.string() + ": snapshot grid " + std::to_string(s.n) + " does not match problem grid " +
                          std::to_string(grid->n()));
  }
  if (s.field.mean_defect() > 0.0 || s.field.divergence_defect() > 1e-10)
    throw ValidationError(path.string() + ": snapshot is not mean-zero and divergence-free");
  inputs[p.path] = git_blob_sha1(bytes);
  return SpectralField(grid) += s.field;
}

inline Problem build_problem(const RunConfig& c, bool need_control) {
  if (c.grid < 4 || c.grid % 2 != 0 || c.grid > 256) throw ValidationError("problem.grid must be an even integer in [4, 256]");
  Problem p;
  p.grid = make_grid(c.grid);
  p.marks = MarkSpace(c.marks);
  const std::size_t K = c.marks.size();
  if (K > 64) throw ValidationError("noise.marks has more than 64 entries");
  if (!c.scales.empty() && c.scales.size() != K)
    throw ValidationError("noise.scales has " + std::to_string(c.scales.size()) + " entries for " + std::to_string(K) +
                          " marks");
  if (!c.additive.empty() && c.additive.size() != K)
    throw ValidationError("noise.additive has " + std::to_string(c.additive.size()) + " entries for " +
                          std::to_string(K) + " marks");
  for (double s : c.scales)
    if (!std::isfinite(s)) throw ValidationError("noise.scales must be finite");
  if (c.cutoff < 1) throw ValidationError("noise.cutoff must be at least 1");
  std::vector<SpectralField> phi;
  for (std::size_t k = 0; k < K; ++k)
    phi.push_back(c.additive.empty() ? SpectralField(p.grid) : build_field(c.additive[k], c, p.grid, p.inputs));
  p.sigma = NoiseCoefficient(c.scales.empty() ? std::vector<double>(K, 0.0) : c.scales, phi, c.cutoff);
  p.u0 = build_field(c.u0, c, p.grid, p.inputs);

  p.solver.dt = c.dt;
  p.solver.horizon = c.horizon;
  p.solver.steps();
  p.solver.taming = TamingSpec(c.taming_threshold);
  p.solver.truncation = c.modes == 0 ? Truncation::full(p.grid) : Truncation(p.grid, c.modes);
  p.solver.snapshot_stride = c.snapshot_stride;
  p.solver.eps = c.eps;
  p.solver.seed = c.seed;

  if (!c.control_file.empty()) {
    const fs::path path = resolve(c, c.control_file);
    const std::string text = read_file(path);
    p.control = control_from_json(parse_json(text, path.string()), path.string());
    p.inputs[c.control_file] = git_blob_sha1(text);
  } else if (c.control) {
    p.control = c.control;
  }
  if (need_control) {
    if (!p.control) throw ValidationError("this command needs a control block");
    if (p.control->marks() != K)
      throw ValidationError("control has " + std::to_string(p.control->marks()) + " marks, noise has " +
                            std::to_string(K));
    if (p.control->horizon() < c.horizon * (1.0 - 1e-12))
      throw ValidationError("control horizon is shorter than solver.T");
  }
  return p;
}

// Resolved config in canonical form (output location excluded); the manifest stores it and
// hashes it.
inline Json config_json(const RunConfig& c, const Problem& p) {
  Json j;
  j["problem"]["grid"] = c.grid;
  j["problem"]["taming_threshold"] = c.taming_threshold;
  j["problem"]["u0"] = detail::preset_json(c.u0);
  j["noise"]["marks"] = c.marks;
  j["noise"]["cutoff"] = c.cutoff;
  j["noise"]["scales"] = c.scales.empty() ? std::vector<double>(c.marks.size(), 0.0) : c.scales;
  if (!c.additive.empty()) {
    j["noise"]["additive"] = Json::array();
    for (const auto& a : c.additive) j["noise"]["additive"].push_back(detail::preset_json(a));
  }
  if (p.control) j["control"] = control_to_json(*p.control);
  j["solver"]["dt"] = c.dt;
  j["solver"]["T"] = c.horizon;
  j["solver"]["eps"] = c.eps;
  j["solver"]["snapshot_stride"] = c.snapshot_stride;
  j["solver"]["modes"] = c.modes;
  j["experiment"]["eps_ladder"] = c.eps_ladder;
  j["experiment"]["replicas"] = c.replicas;
  j["experiment"]["trials"] = c.trials;
  j["experiment"]["statistical_replicas"] = c.statistical_replicas;
  j["experiment"]["write_replicas"] = c.write_replicas;
  j["seed"] = c.seed;
  return j;
}

// Collects output files in memory, then writes each atomically followed by the manifest.
class OutputSet {
 public:
  void add(const std::string& relative, std::string content) { files_[relative] = std::move(content); }

  void commit(const fs::path& dir, const std::string& command, const Json& config, const Problem& p) {
    Json manifest;
    manifest["command"] = command;
    manifest["config"] = config;
    manifest["config_hash"] = git_blob_sha1(config.dump());
    manifest["seed"] = config["seed"];
    manifest["seed_rule"] = "replica r uses splitmix64(master, r); sweep rung i replica r uses splitmix64(master, i, r)";
    manifest["inputs"] = p.inputs;
    manifest["outputs"] = Json::object();
    for (const auto& [name, content] : files_) manifest["outputs"][name] = git_blob_sha1(content);
    fs::create_directories(dir);
    for (const auto& [name, content] : files_) atomic_write(dir / name, content);
    atomic_write(dir / "config.json", config.dump(2) + "\n");
    atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  std::map<std::string, std::string> files_;
};

inline std::string zero_pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

inline void add_trajectory(OutputSet& out, const std::string& prefix, const Trajectory& traj) {
  out.add(prefix + "energy.csv", energy_csv(traj));
  for (std::size_t i = 0; i < traj.snapshots.size(); ++i)
    out.add(prefix + "snapshots/" + zero_pad(i, 6) + ".sfld",
            encode_sfld(traj.snapshots[i], "u", traj.snapshot_times[i]));
  out.add(prefix + "final.sfld", encode_sfld(traj.final_field, "u", traj.energy.back().time));
}

// Linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline Json describe(const std::vector<double>& v) {
  double sum = 0.0, sq = 0.0;
  for (double x : v) {
    sum += x;
    sq += x * x;
  }
  const double n = static_cast<double>(v.size());
  const double mean = sum / n;
  Json j;
  j["mean"] = mean;
  j["std_error"] = v.size() > 1 ? std::sqrt(std::max(0.0, sq / n - mean * mean) / (n - 1.0)) : 0.0;
  j["q05"] = quantile(v, 0.05);
  j["median"] = quantile(v, 0.5);
  j["q95"] = quantile(v, 0.95);
  j["max"] = *std::max_element(v.begin(), v.end());
  return j;
}

struct Options {
  std::string command;
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned threads = 1;
  // verify
  std::string selector = "all";
  // cost
  fs::path control;
  std::vector<double> marks;
  std::optional<double> horizon;
};

inline RunConfig effective_config(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output = *o.out;
  return c;
}

inline fs::path output_dir(const RunConfig& c, const Options& o) {
  return o.out ? fs::path(*o.out) : resolve(c, c.output);
}

inline int cmd_skeleton(const Options& o, std::ostream& log) {
  const RunConfig c = effective_config(o);
  const Problem p = build_problem(c, true);
  const Json config = config_json(c, p);
  const Trajectory traj = solve_skeleton(p.u0, *p.control, p.sigma, p.marks, p.solver);
  OutputSet out;
  add_trajectory(out, "", traj);
  Json summary;
  summary["final_h1_norm"] = sobolev_norm(traj.final_field, 1);
  summary["sup_h1_sq"] = traj.sup_h1_sq();
  summary["h2_integral"] = traj.energy.back().cum_h2_sq;
  summary["cost"] = cost(*p.control, p.marks);
  out.add("summary.json", summary.dump(2) + "\n");
  out.commit(output_dir(c, o), "skeleton", config, p);
  log << "skeleton: T=" << format_double(c.horizon) << " final_h1_norm=" << format_double(summary["final_h1_norm"])
      << " sup_h1_sq=" << format_double(summary["sup_h1_sq"]) << "\n";
  return ok;
}

// Ensemble of noisy (controlled = false) or controlled runs; replica r uses split_seed(seed, r).
inline int run_ensemble(const Options& o, std::ostream& log, bool controlled) {
  const RunConfig c = effective_config(o);
  if (c.replicas == 0) throw ValidationError("experiment.replicas must be at least 1");
  if (!(c.eps > 0.0) || !std::isfinite(c.eps)) throw ValidationError("solver.eps must be positive");
  const Problem p = build_problem(c, controlled);
  const Json config = config_json(c, p);
  std::vector<Trajectory> runs(c.replicas);
  std::vector<std::vector<PoissonEvent>> events(c.replicas);
  parallel_for(c.replicas, resolve_threads(o.threads), [&](std::size_t r) {
    const std::uint64_t seed = split_seed(c.seed, r);
    if (controlled) {
      runs[r] = solve_controlled(p.u0, c.eps, *p.control, p.sigma, p.marks, p.solver, seed);
      events[r] = sample_controlled_prm(*p.control, c.eps, p.marks, seed).events;
    } else {
      runs[r] = solve_sde(p.u0, c.eps, p.sigma, p.marks, p.solver, seed);
      events[r] = sample_prm(1.0 / c.eps, p.marks, c.horizon, seed).events;
    }
  });
  OutputSet out;
  std::vector<double> sup(c.replicas), jumps(c.replicas), counts(c.replicas);
  std::string table = "replica,seed,sup_h1_sq,h2_integral,event_count,jump_count\n";
  for (std::size_t r = 0; r < c.replicas; ++r) {
    sup[r] = runs[r].sup_h1_sq();
    jumps[r] = static_cast<double>(runs[r].jumps.size());
    counts[r] = static_cast<double>(runs[r].event_count);
    table += std::to_string(r) + "," + std::to_string(split_seed(c.seed, r)) + "," + format_double(sup[r]) + "," +
             format_double(runs[r].energy.back().cum_h2_sq) + "," + std::to_string(runs[r].event_count) + "," +
             std::to_string(runs[r].jumps.size()) + "\n";
    if (c.write_replicas) {
      const std::string prefix = "replicas/" + zero_pad(r, 5) + "/";
      add_trajectory(out, prefix, runs[r]);
      out.add(prefix + "events.csv", events_csv(events[r]));
      out.add(prefix + "jumps.jsonl", jumps_jsonl(runs[r].jumps));
    }
  }
  Json summary;
  summary["replicas"] = c.replicas;
  summary["eps"] = c.eps;
  summary["sup_h1_sq"] = describe(sup);
  summary["event_count"] = describe(counts);
  summary["jump_count"] = describe(jumps);
  if (!controlled) summary["expected_event_count"] = p.marks.total_mass() * c.horizon / c.eps;
  out.add("replicas.csv", table);
  out.add("summary.json", summary.dump(2) + "\n");
  const std::string name = controlled ? "controlled" : "simulate";
  out.commit(output_dir(c, o), name, config, p);
  log << name << ": replicas=" << c.replicas << " mean_sup_h1_sq=" << format_double(summary["sup_h1_sq"]["mean"])
      << " mean_event_count=" << format_double(summary["event_count"]["mean"]) << "\n";
  return ok;
}

inline int cmd_sweep_eps(const Options& o, std::ostream& log) {
  const RunConfig c = effective_config(o);
  if (c.replicas == 0) throw ValidationError("experiment.replicas must be at least 1");
  const Problem p = build_problem(c, true);
  const Json config = config_json(c, p);
  const ConvergenceReport r =
      eps_sweep(p.u0, *p.control, p.sigma, p.marks, p.solver, c.eps_ladder, c.replicas, c.seed, resolve_threads(o.threads));
  std::string table = "eps,mean_sup_h1_sq,std_error\n";
  for (std::size_t i = 0; i < r.ladder.size(); ++i)
    table += format_double(r.ladder[i]) + "," + format_double(r.errors[i]) + "," + format_double(r.std_errors[i]) + "\n";
  Json report;
  report["axis"] = r.axis;
  report["ladder"] = r.ladder;
  report["errors"] = r.errors;
  report["std_errors"] = r.std_errors;
  report["orders"] = Json::array();
  for (double x : r.orders) report["orders"].push_back(std::isfinite(x) ? Json(x) : Json());
  report["monotone"] = r.monotone;
  report["passed"] = r.passed;
  OutputSet out;
  out.add("sweep.csv", table);
  out.add("report.json", report.dump(2) + "\n");
  out.commit(output_dir(c, o), "sweep-eps", config, p);
  for (std::size_t i = 0; i < r.ladder.size(); ++i)
    log << "eps=" << format_double(r.ladder[i]) << " mean=" << format_double(r.errors[i])
        << " se=" << format_double(r.std_errors[i]) << "\n";
  log << "sweep-eps: " << (r.passed ? "PASS" : "FAIL") << " (strictly decreasing means)\n";
  if (!r.passed) throw VerificationFailure("eps sweep means are not strictly decreasing");
  return ok;
}

inline const std::vector<std::string>& verify_selectors() {
  static const std::vector<std::string> all = {"skew",        "leray",       "taming",   "energy-h0",
                                               "energy-h1",   "monotone-h0", "monotone-h1", "isometry",
                                               "thinning",    "cost"};
  return all;
}

inline int cmd_verify(const Options& o, std::ostream& log) {
  std::vector<std::string> chosen;
  if (o.selector == "all") {
    chosen = verify_selectors();
  } else if (std::find(verify_selectors().begin(), verify_selectors().end(), o.selector) != verify_selectors().end()) {
    chosen = {o.selector};
  } else {
    throw ValidationError("unknown verify selector '" + o.selector + "'");
  }
  const RunConfig c = effective_config(o);
  if (c.trials == 0) throw ValidationError("experiment.trials must be at least 1");
  if (c.statistical_replicas < 2) throw ValidationError("experiment.statistical_replicas must be at least 2");
  const Problem p = build_problem(c, false);
  const Json config = config_json(c, p);

  Json reports = Json::array();
  std::string table = "check,passed,value,detail\n";
  bool all_passed = true;
  auto record = [&](const std::string& name, bool passed, double value, const std::string& detail, Json j) {
    j["check"] = name;
    j["passed"] = passed;
    reports.push_back(j);
    table += name + "," + (passed ? "1" : "0") + "," + format_double(value) + "," + detail + "\n";
    log << (passed ? "PASS " : "FAIL ") << name << " " << detail << "\n";
    all_passed = all_passed && passed;
  };

  for (std::size_t s = 0; s < chosen.size(); ++s) {
    const std::string& name = chosen[s];
    const std::uint64_t seed = split_seed(c.seed, s);
    if (auto id = parse_estimate_id(name)) {
      const auto r = check_estimate(*id, p.grid, FieldSampler{}, c.trials, p.solver.taming, seed);
      Json j;
      j["samples"] = r.samples;
      j["max_ratio"] = r.max_ratio;
      j["constant"] = r.constant;
      j["worst_residual"] = r.worst_residual;
      j["violations"] = r.violations;
      j["seed"] = r.seed;
      record(name, r.passed, r.worst_residual,
             "constant=" + format_double(r.constant) + " worst_residual=" + format_double(r.worst_residual), j);
    } else if (name == "taming") {
      const auto r = check_taming(p.solver.taming);
      Json j;
      j["samples"] = r.samples;
      j["max_value_error"] = r.max_value_error;
      j["max_derivative_error"] = r.max_derivative_error;
      j["min_derivative"] = r.min_derivative;
      j["max_derivative"] = r.max_derivative;
      record(name, r.passed, r.max_derivative_error, "max_derivative_error=" + format_double(r.max_derivative_error), j);
    } else if (name == "isometry") {
      for (int preset = 0; preset < 3; ++preset) {
        const auto r = check_isometry(isometry_preset(preset, p.grid), c.statistical_replicas, split_seed(seed, preset));
        Json j;
        j["preset"] = r.name;
        j["replicas"] = r.replicas;
        j["exact"] = r.exact;
        j["mean"] = r.mean;
        j["std_error"] = r.std_error;
        j["seed"] = r.seed;
        record("isometry-" + r.name, r.passed, r.mean,
               "exact=" + format_double(r.exact) + " mean=" + format_double(r.mean) + " se=" + format_double(r.std_error),
               j);
      }
    } else if (name == "thinning") {
      const Control phi = p.control ? *p.control
                                    : Control({0.0, 0.5 * c.horizon, c.horizon}, p.marks.size(),
                                              std::vector<double>(2 * p.marks.size(), 1.5));
      if (phi.marks() != p.marks.size()) throw ValidationError("control and noise.marks disagree on K");
      const double eps = c.eps > 0.0 ? c.eps : 0.1;
      const auto r = check_thinning(phi, eps, p.marks, c.statistical_replicas, seed);
      Json j;
      j["replicas"] = r.replicas;
      j["alpha"] = r.alpha;
      j["seed"] = r.seed;
      j["cells"] = Json::array();
      double min_p = 1.0;
      for (const auto& cell : r.cells) {
        Json cj;
        cj["interval"] = cell.interval;
        cj["mark"] = cell.mark;
        cj["expected_mean"] = cell.expected_mean;
        cj["observed_mean"] = cell.observed_mean;
        cj["chi_square"] = cell.chi_square;
        cj["dof"] = cell.dof;
        cj["p_value"] = cell.p_value;
        j["cells"].push_back(cj);
        min_p = std::min(min_p, cell.p_value);
      }
      record(name, r.passed, min_p, "min_p_value=" + format_double(min_p), j);
    } else if (name == "cost") {
      const auto r = check_cost(100, seed);
      Json j;
      j["unit_cost"] = r.unit_cost;
      j["doubled_cost"] = r.doubled_cost;
      j["spot_checks"] = r.spot_checks;
      j["convexity_violations"] = r.convexity_violations;
      record(name, r.passed, r.doubled_cost, "cost(g=2)=" + format_significant(r.doubled_cost, 12), j);
    }
  }
  OutputSet out;
  out.add("reports.json", reports.dump(2) + "\n");
  out.add("summary.csv", table);
  out.commit(output_dir(c, o), "verify", config, p);
  if (!all_passed) throw VerificationFailure("one or more verification reports failed");
  return ok;
}

inline int cmd_cost(const Options& o, std::ostream& log) {
  Control g;
  std::vector<double> weights = o.marks;
  if (!o.control.empty()) {
    g = read_control(o.control);
  } else if (!o.config.empty()) {
    const RunConfig c = effective_config(o);
    const Problem p = build_problem(c, true);
    g = *p.control;
    if (weights.empty()) weights = c.marks;
  } else {
    throw ValidationError("cost needs --control or --config");
  }
  if (weights.empty()) weights.assign(g.marks(), 1.0);
  const MarkSpace marks(weights);
  if (marks.size() != g.marks())
    throw ValidationError("control has " + std::to_string(g.marks()) + " marks but " + std::to_string(marks.size()) +
                          " weights were given");
  if (o.horizon && std::abs(*o.horizon - g.horizon()) > 1e-12 * std::max(1.0, g.horizon()))
    throw ValidationError("--horizon " + format_double(*o.horizon) + " differs from the control horizon " +
                          format_double(g.horizon()));
  log << format_significant(cost(g, marks), 12) << "\n";
  return ok;
}

inline int dispatch(const Options& o, std::ostream& log) {
  if (o.command == "skeleton") return cmd_skeleton(o, log);
  if (o.command == "simulate") return run_ensemble(o, log, false);
  if (o.command == "controlled") return run_ensemble(o, log, true);
  if (o.command == "sweep-eps") return cmd_sweep_eps(o, log);
  if (o.command == "verify") return cmd_verify(o, log);
  if (o.command == "cost") return cmd_cost(o, log);
  throw ValidationError("unknown command '" + o.command + "'");
}

// Runs a command and maps failures to exit codes.
inline int run(const Options& o, std::ostream& log, std::ostream& err) {
  try {
    return dispatch(o, log);
  } catch (const VerificationFailure& e) {
    err << "verification failure: " << e.what() << "\n";
    return verification_failure;
  } catch (const BlowupError& e) {
    err << "solver failure: " << e.what() << " (last good time " << format_double(e.last_good_time()) << ")\n";
    return solver_failure;
  } catch (const IterationError& e) {
    err << "solver failure: " << e.what() << "\n";
    return solver_failure;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return validation_failure;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << "\n";
    return validation_failure;
  } catch (const StructuralError& e) {
    err << "invalid input: " << e.what() << "\n";
    return validation_failure;
  } catch (const UnsupportedOrderError& e) {
    err << "invalid input: " << e.what() << "\n";
    return validation_failure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return solver_failure;
  }
}

}  // namespace tamed::cli

#endif  // TAMED_CLI_HPP
