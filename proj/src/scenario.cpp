#include "delaymoc/scenario.hpp"

#include "delaymoc/attractor.hpp"
#include "delaymoc/error.hpp"
#include "delaymoc/io.hpp"
#include "delaymoc/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

namespace delaymoc::scenario {

const std::vector<std::string>& operations() {
  static const std::vector<std::string> ops = {"simulate",   "equilibria", "stability",   "sweep",
                                               "hysteresis", "hopf-curve", "criticality", "figure"};
  return ops;
}

const std::vector<std::string>& figures() {
  static const std::vector<std::string> names = {"fig4a", "fig4b", "fig4c", "fig5", "fig6b", "fig7b", "fig8"};
  return names;
}

fs::path default_out_root() {
  if (const char* env = std::getenv("DELAYMOC_OUT"); env && *env) return env;
  return "out";
}

namespace {

using Diag = std::vector<std::string>;

std::string join(const Diag& d) {
  std::string out;
  for (const auto& s : d) out += (out.empty() ? "" : "; ") + s;
  return out;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

enum class Check { Any, Positive, NonNegative };

// Typed access to an options object.  Problems are collected, never thrown,
// so validation reports every violation in one pass.
class Reader {
 public:
  Reader(const json* obj, std::string path, Diag* diag) : obj_(obj), path_(std::move(path)), diag_(diag) {
    if (obj_ && !obj_->is_object()) {
      fail("must be an object");
      obj_ = nullptr;
    }
  }

  bool has(const std::string& key) const { return obj_ && obj_->contains(key); }

  double number(const std::string& key, double def, Check check = Check::Any) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_number()) {
      fail(key, "must be a number");
      return def;
    }
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    else if (check == Check::Positive && !(x > 0.0)) fail(key, "must be > 0");
    else if (check == Check::NonNegative && x < 0.0) fail(key, "must be >= 0");
    return x;
  }

  int integer(const std::string& key, int def, int min_value) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_number_integer()) {
      fail(key, "must be an integer");
      return def;
    }
    const int x = v->get<int>();
    if (x < min_value) fail(key, "must be >= " + std::to_string(min_value));
    return x;
  }

  bool flag(const std::string& key, bool def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_boolean()) {
      fail(key, "must be true or false");
      return def;
    }
    return v->get<bool>();
  }

  std::string text(const std::string& key, const std::string& def, const std::vector<std::string>& allowed = {}) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_string()) {
      fail(key, "must be a string");
      return def;
    }
    std::string s = v->get<std::string>();
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(key, "'" + s + "' is not one of " + list);
      return def;
    }
    return s;
  }

  std::string axis(const std::string& key, const std::string& def) {
    std::string a = text(key, def);
    if (!is_axis(a)) {
      fail(key, "unknown parameter '" + a + "'");
      return def;
    }
    return a;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> def, Check check = Check::Any) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_array() || v->empty()) {
      fail(key, "must be a nonempty array of numbers");
      return def;
    }
    std::vector<double> out;
    for (const auto& x : *v) {
      if (!x.is_number() || !std::isfinite(x.get<double>())) {
        fail(key, "must contain only finite numbers");
        return def;
      }
      const double d = x.get<double>();
      if ((check == Check::Positive && !(d > 0.0)) || (check == Check::NonNegative && d < 0.0)) {
        fail(key, check == Check::Positive ? "entries must be > 0" : "entries must be >= 0");
        return def;
      }
      out.push_back(d);
    }
    return out;
  }

  /// Array of values or {start, stop, count}; must be strictly increasing.
  std::vector<double> grid(const std::string& key, std::vector<double> def) {
    const json* v = get(key);
    std::vector<double> out = def;
    if (v && v->is_object()) {
      Reader g(v, path_ + "." + key, diag_);
      const double a = g.number("start", 0.0), b = g.number("stop", 0.0);
      const int n = g.integer("count", 2, 2);
      for (const char* k : {"start", "stop", "count"})
        if (!g.has(k)) g.fail(k, "is required");
      g.finish();
      out = linspace(a, b, n);
    } else if (v) {
      out = numbers(key, def);
    }
    if (out.empty()) {
      fail(key, "grid is empty");
      return out;
    }
    for (std::size_t i = 1; i < out.size(); ++i)
      if (!(out[i] > out[i - 1])) {
        fail(key, "grid must be strictly increasing");
        break;
      }
    return out;
  }

  std::pair<double, double> range(const std::string& key, std::pair<double, double> def) {
    const json* v = get(key);
    if (!v) return def;
    const auto r = numbers(key, {def.first, def.second});
    if (r.size() != 2 || !(r[0] < r[1])) {
      fail(key, "must be [lo, hi] with lo < hi");
      return def;
    }
    return {r[0], r[1]};
  }

  Reader child(const std::string& key) { return Reader(get(key), path_ + "." + key, diag_); }

  /// Flags keys that were never read.
  void finish() {
    if (!obj_) return;
    for (const auto& item : obj_->items())
      if (!used_.count(item.key())) fail(item.key(), "is not a recognized option");
  }

  void fail(const std::string& key, const std::string& what) { diag_->push_back(path_ + "." + key + " " + what); }
  void fail(const std::string& what) { diag_->push_back(path_ + " " + what); }

 private:
  const json* get(const std::string& key) {
    used_.insert(key);
    if (!obj_ || !obj_->contains(key)) return nullptr;
    return &obj_->at(key);
  }

  const json* obj_;
  std::string path_;
  Diag* diag_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Option groups shared by several operations

SimulationOptions read_sim(Reader& r, SimulationOptions o = {}) {
  o.horizon = r.number("horizon_yr", o.horizon, Check::Positive);
  o.t_transient = r.number("transient_yr", o.t_transient, Check::NonNegative);
  o.h = r.number("h_yr", o.h, Check::NonNegative);
  o.perturbation = r.number("perturbation_psu", o.perturbation);
  o.settle_tol = r.number("settle_tol", o.settle_tol, Check::Positive);
  o.max_horizon = r.number("max_horizon_yr", o.max_horizon, Check::Positive);
  if (o.max_horizon < o.horizon) r.fail("max_horizon_yr", "must be at least horizon_yr");
  Reader t = r.child("tolerances");
  o.tols.eps_amp = t.number("eps_amp", o.tols.eps_amp, Check::Positive);
  o.tols.tol_per = t.number("tol_per", o.tols.tol_per, Check::Positive);
  o.tols.n_tail = t.integer("n_tail", o.tols.n_tail, 2);
  o.tols.min_quasi_peaks = t.integer("min_quasi_peaks", o.tols.min_quasi_peaks, 2);
  o.tols.drift_limit = t.number("drift_limit", o.tols.drift_limit, Check::Positive);
  t.finish();
  if (o.t_transient >= o.horizon) r.fail("transient_yr", "must be below horizon_yr");
  return o;
}

ProbeOptions read_probe(Reader& parent, ProbeOptions o = {}) {
  Reader r = parent.child("probe");
  o.deltas = r.numbers("deltas", o.deltas, Check::Positive);
  if (o.deltas.size() < 2) r.fail("deltas", "needs at least two offsets");
  o.perturbation = r.number("perturbation_psu", o.perturbation);
  o.growth_factor = r.number("growth_factor", o.growth_factor, Check::Positive);
  o.min_horizon = r.number("min_horizon_yr", o.min_horizon, Check::Positive);
  o.max_horizon = r.number("max_horizon_yr", o.max_horizon, Check::Positive);
  o.sqrt_tolerance = r.number("sqrt_tolerance", o.sqrt_tolerance, Check::Positive);
  o.persist_ratio = r.number("persist_ratio", o.persist_ratio, Check::Positive);
  o.target_growth = r.number("target_growth_per_yr", o.target_growth, Check::NonNegative);
  if (o.min_horizon > o.max_horizon) r.fail("min_horizon_yr", "must not exceed max_horizon_yr");
  r.finish();
  return o;
}

ContinuationOptions read_continuation(Reader& parent, ContinuationOptions o) {
  Reader r = parent.child("continuation");
  o.ds = r.number("ds", o.ds, Check::Positive);
  o.ds_min = r.number("ds_min", o.ds_min, Check::Positive);
  o.ds_max = r.number("ds_max", o.ds_max, Check::Positive);
  o.max_points = r.integer("max_points", o.max_points, 2);
  o.corrector_tol = r.number("corrector_tol", o.corrector_tol, Check::Positive);
  o.probe_stride = r.integer("probe_stride", o.probe_stride, 1);
  const auto a = r.range("bounds_a", {o.a_min, o.a_max});
  const auto b = r.range("bounds_b", {o.b_min, o.b_max});
  o.a_min = a.first;
  o.a_max = a.second;
  o.b_min = b.first;
  o.b_max = b.second;
  if (!(o.ds_min <= o.ds && o.ds <= o.ds_max)) r.fail("ds", "must satisfy ds_min <= ds <= ds_max");
  r.finish();
  return o;
}

std::vector<double> default_f1_grid(double lo, double hi) { return linspace(lo, hi, 200); }

// ---------------------------------------------------------------------------
// Operation configurations.  parse_* fills a config and records problems; the
// same functions serve validation and execution.

struct SimulateCfg {
  double horizon = 200000.0, h = 0.0, perturbation = 1e-3, record_from = 0.0, transient = 50000.0;
  std::size_t stride = 1;
  std::optional<State> init;
};

SimulateCfg parse_simulate(Reader& r, SimulateCfg c = {}) {
  c.horizon = r.number("horizon_yr", c.horizon, Check::Positive);
  c.h = r.number("h_yr", c.h, Check::NonNegative);
  c.perturbation = r.number("perturbation_psu", c.perturbation);
  c.record_from = r.number("record_from_yr", c.record_from, Check::NonNegative);
  c.transient = r.number("transient_yr", c.transient, Check::NonNegative);
  c.stride = static_cast<std::size_t>(r.integer("stride", static_cast<int>(c.stride), 1));
  if (r.has("init")) {
    Reader i = r.child("init");
    c.init = State{i.number("s1", 35.0), i.number("s2", 35.0)};
    if (!i.has("s1") || !i.has("s2")) i.fail("requires s1 and s2");
    i.finish();
  }
  if (c.transient >= c.horizon) r.fail("transient_yr", "must be below horizon_yr");
  return c;
}

struct StabilityCfg {
  int n_wanted = 6, n_nodes = 32;
  std::optional<std::pair<std::string, std::vector<double>>> scan;
};

StabilityCfg parse_stability(Reader& r) {
  StabilityCfg c;
  c.n_wanted = r.integer("n_wanted", c.n_wanted, 1);
  c.n_nodes = r.integer("n_nodes", c.n_nodes, 8);
  if (r.has("scan")) {
    Reader s = r.child("scan");
    c.scan.emplace(s.axis("axis", "f1_sv"), s.grid("grid", {}));
    if (!s.has("grid")) s.fail("grid", "is required");
    s.finish();
  }
  return c;
}

struct SweepCfg {
  std::string axis = "f1_sv";
  std::vector<double> grid;
  bool inherit = true;
  std::string direction = "up";
  SimulationOptions sim;
};

SweepCfg parse_sweep(Reader& r, bool hysteresis) {
  SweepCfg c;
  c.axis = r.axis("axis", c.axis);
  c.grid = r.grid("grid", {});
  if (!r.has("grid")) r.fail("grid", "is required");
  if (!hysteresis) {
    c.inherit = r.flag("inherit", c.inherit);
    c.direction = r.text("direction", c.direction, {"up", "down"});
  }
  c.sim = read_sim(r);
  return c;
}

struct LocateCfg {
  std::string axis = "f1_sv";
  std::pair<double, double> bracket{0.0, 0.0};
};

LocateCfg parse_locate(Reader r) {
  LocateCfg c;
  c.axis = r.axis("axis", c.axis);
  c.bracket = r.range("bracket", c.bracket);
  if (!r.has("bracket")) r.fail("bracket", "is required");
  r.finish();
  return c;
}

struct HopfCurveCfg {
  Plane plane{"f1_sv", "sigma_sv"};
  LocateCfg start;
  ContinuationOptions cont;
  bool both = true, tag = true;
  ProbeOptions probe;
};

HopfCurveCfg parse_hopf_curve(Reader& r) {
  HopfCurveCfg c;
  c.plane.a = r.axis("param_a", c.plane.a);
  c.plane.b = r.axis("param_b", c.plane.b);
  if (c.plane.a == c.plane.b) r.fail("param_b", "must differ from param_a");
  c.start = parse_locate(r.child("start"));
  if (!r.has("start")) r.fail("start", "is required");
  c.cont = read_continuation(r, {});
  c.both = r.flag("both_directions", c.both);
  c.tag = r.flag("tag", c.tag);
  c.probe = read_probe(r);
  return c;
}

struct CriticalityCfg {
  LocateCfg locate;
  ProbeOptions probe;
};

CriticalityCfg parse_criticality(Reader& r) {
  CriticalityCfg c;
  c.locate.axis = r.axis("axis", "f1_sv");
  c.locate.bracket = r.range("bracket", {0.0, 0.0});
  if (!r.has("bracket")) r.fail("bracket", "is required");
  c.probe = read_probe(r);
  return c;
}

struct BranchFigureCfg {
  double sigma = 0.0, tau = 900.0;
  std::vector<double> grid;
  SimulationOptions sim;
  ProbeOptions probe;
};

BranchFigureCfg parse_branch_figure(Reader& r, double sigma, double tau, double lo, double hi) {
  BranchFigureCfg c;
  c.sigma = r.number("sigma_sv", sigma, Check::NonNegative);
  c.tau = r.number("tau_yr", tau, Check::NonNegative);
  c.grid = r.grid("grid", default_f1_grid(lo, hi));
  c.sim = read_sim(r);
  c.probe = read_probe(r);
  return c;
}

struct TimeSeriesFigureCfg {
  double f1 = -0.208, sigma = 11.0, tau = 900.0;
  SimulateCfg sim;
};

TimeSeriesFigureCfg parse_timeseries_figure(Reader& r) {
  TimeSeriesFigureCfg c;
  c.f1 = r.number("f1_sv", c.f1);
  c.sigma = r.number("sigma_sv", c.sigma, Check::NonNegative);
  c.tau = r.number("tau_yr", c.tau, Check::NonNegative);
  SimulateCfg d;
  d.stride = 10;
  c.sim = parse_simulate(r, d);
  return c;
}

ProbeOptions curve_probe_defaults() {
  ProbeOptions p;
  p.target_growth = 2.5e-6;
  return p;
}

struct HopfFigureCfg {
  std::vector<double> taus = {850.0, 900.0, 1100.0};
  double start_sigma = 10.0;
  std::vector<double> start_grid;
  ContinuationOptions cont;
  bool tag = true;
  ProbeOptions probe;
};

HopfFigureCfg parse_fig5(Reader& r) {
  HopfFigureCfg c;
  c.taus = r.numbers("taus_yr", c.taus, Check::NonNegative);
  c.start_sigma = r.number("start_sigma_sv", c.start_sigma, Check::NonNegative);
  c.start_grid = r.grid("start_grid", linspace(-0.25, -0.19, 61));
  ContinuationOptions d;
  d.a_min = -0.5;
  d.a_max = -1e-3;
  d.b_min = 0.0;
  d.b_max = 30.0;
  c.cont = read_continuation(r, d);
  c.tag = r.flag("tag", c.tag);
  c.probe = read_probe(r, curve_probe_defaults());
  return c;
}

struct StabilityMapCfg {
  double f1 = -0.22;
  std::pair<double, double> sigma_range{0.0, 25.0}, tau_range{500.0, 1500.0};
  double transect_tau = 950.0, transect_sigma = 10.0;
  int transect_points = 101, grid_points = 20;
  ContinuationOptions cont;
  bool tag = true;
  ProbeOptions probe;
  SimulationOptions sim;
};

StabilityMapCfg parse_fig8(Reader& r) {
  StabilityMapCfg c;
  c.f1 = r.number("f1_sv", c.f1);
  c.sigma_range = r.range("sigma_range_sv", c.sigma_range);
  c.tau_range = r.range("tau_range_yr", c.tau_range);
  if (c.sigma_range.first < 0.0) r.fail("sigma_range_sv", "must be nonnegative");
  if (c.tau_range.first < 0.0) r.fail("tau_range_yr", "must be nonnegative");
  c.transect_tau = r.number("transect_tau_yr", c.transect_tau, Check::NonNegative);
  c.transect_sigma = r.number("transect_sigma_sv", c.transect_sigma, Check::NonNegative);
  c.transect_points = r.integer("transect_points", c.transect_points, 3);
  c.grid_points = r.integer("grid_points", c.grid_points, 3);
  ContinuationOptions d;
  d.a_min = c.sigma_range.first;
  d.a_max = c.sigma_range.second;
  d.b_min = c.tau_range.first;
  d.b_max = c.tau_range.second;
  c.cont = read_continuation(r, d);
  c.tag = r.flag("tag", c.tag);
  c.probe = read_probe(r, curve_probe_defaults());
  c.sim = read_sim(r);
  return c;
}

void parse_figure(Reader& r, const std::string& fig) {
  if (fig == "fig4a") parse_branch_figure(r, 0.0, 900.0, -0.30, -0.20);
  else if (fig == "fig4b") parse_branch_figure(r, 11.0, 900.0, -0.23, -0.20);
  else if (fig == "fig4c") parse_timeseries_figure(r);
  else if (fig == "fig5") parse_fig5(r);
  else if (fig == "fig6b") parse_branch_figure(r, 9.5, 1100.0, -0.225, -0.185);
  else if (fig == "fig7b") parse_branch_figure(r, 9.0, 850.0, -0.214, -0.206);
  else if (fig == "fig8") parse_fig8(r);
}

void parse_operation(Reader& r, const std::string& op) {
  if (op == "simulate") parse_simulate(r);
  else if (op == "equilibria") {
  } else if (op == "stability") parse_stability(r);
  else if (op == "sweep") parse_sweep(r, false);
  else if (op == "hysteresis") parse_sweep(r, true);
  else if (op == "hopf-curve") parse_hopf_curve(r);
  else if (op == "criticality") parse_criticality(r);
  else if (op == "figure") parse_figure(r, r.text("figure", "", figures()));
}

// ---------------------------------------------------------------------------
// Loading

std::optional<json> read_json_file(const fs::path& path, const std::string& what, Diag& diag) {
  std::ifstream in(path);
  if (!in) {
    diag.push_back(what + " '" + path.string() + "' does not exist or cannot be read");
    return std::nullopt;
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    diag.push_back(what + " '" + path.string() + "' is not valid JSON: " + e.what());
    return std::nullopt;
  }
}

Scenario parse(const fs::path& file, const std::optional<fs::path>& seed_params, Diag& diag) {
  Scenario sc;
  sc.file = file;
  const auto raw = read_json_file(file, "scenario", diag);
  if (!raw) return sc;
  if (!raw->is_object()) {
    diag.push_back("scenario must be a JSON object");
    return sc;
  }
  static const std::set<std::string> top = {"name", "description", "params", "overrides",
                                            "operation", "options", "output"};
  for (const auto& item : raw->items())
    if (!top.count(item.key())) diag.push_back("unknown top-level key '" + item.key() + "'");

  Reader r(&*raw, "scenario", &diag);
  sc.name = r.text("name", "");
  static const std::regex name_re("[A-Za-z0-9_.-]+");
  if (!std::regex_match(sc.name, name_re)) diag.push_back("scenario.name must be a nonempty [A-Za-z0-9_.-] string");
  r.text("description", "");
  sc.output = r.text("output", sc.name);
  if (sc.output.empty() || fs::path(sc.output).is_absolute() || sc.output.find("..") != std::string::npos)
    diag.push_back("scenario.output must be a relative directory name");

  const std::string params_rel = r.text("params", "");
  if (seed_params) sc.params_file = *seed_params;
  else if (params_rel.empty()) diag.push_back("scenario.params is required");
  else sc.params_file = file.parent_path() / params_rel;

  if (!sc.params_file.empty()) {
    if (auto pj = read_json_file(sc.params_file, "params file", diag)) {
      json merged = *pj;
      if (raw->contains("overrides")) {
        const json& ov = raw->at("overrides");
        if (!ov.is_object()) diag.push_back("scenario.overrides must be an object");
        else if (merged.is_object())
          for (const auto& item : ov.items()) merged[item.key()] = item.value();
      }
      try {
        make_params(merged);
        sc.base_params = merged;
      } catch (const Error& e) {
        diag.push_back(std::string("params: ") + e.what());
      }
    }
  }

  sc.operation = r.text("operation", "", operations());
  if (!raw->contains("operation")) diag.push_back("scenario.operation is required");
  if (raw->contains("options")) sc.options = raw->at("options");
  if (!sc.operation.empty()) {
    Reader opts(&sc.options, "options", &diag);
    parse_operation(opts, sc.operation);
    opts.finish();
    if (sc.operation == "figure" && !opts.has("figure")) diag.push_back("options.figure is required");
  }
  sc.canonical = json{{"scenario", *raw}, {"params", sc.base_params}}.dump();
  return sc;
}

}  // namespace

std::vector<std::string> validate_file(const fs::path& file, const std::optional<fs::path>& seed_params) {
  Diag diag;
  parse(file, seed_params, diag);
  return diag;
}

Scenario load(const fs::path& file, const std::optional<fs::path>& seed_params) {
  Diag diag;
  Scenario sc = parse(file, seed_params, diag);
  if (!diag.empty()) throw Error(ErrorKind::ConfigError, join(diag));
  return sc;
}

json RunReport::to_json() const {
  return {{"scenario", scenario},
          {"operation", operation},
          {"config_hash", config_hash},
          {"wall_time_s", wall_time_s},
          {"status_counts", status_counts},
          {"artifacts", artifacts},
          {"failures", failures},
          {"exit_code", exit_code()}};
}

namespace {

// ---------------------------------------------------------------------------
// Execution

struct Context {
  const Scenario& sc;
  ModelParams base;
  io::ArtifactWriter& out;
  RunReport& report;

  void count(const std::string& key, int n = 1) { report.status_counts[key] += n; }
  void failure(const std::string& what) { report.failures.push_back(what); }
};

json equilibrium_json(const Equilibrium& e, const ModelParams& p) {
  return {{"s1_psu", e.state.s1},
          {"s2_psu", e.state.s2},
          {"s3_psu", e.s3},
          {"m_sv", e.m / kSverdrup},
          {"branch", to_string(e.branch)},
          {"residual", steady_residual(e.state, p)}};
}

json roots_json(const RootReport& rr, const Linearization& lin) {
  json roots = json::array();
  for (const auto& z : rr.roots)
    roots.push_back({{"re_per_yr", z.real()}, {"im_per_yr", z.imag()}, {"residual", char_residual(z, lin)}});
  return {{"roots", roots},
          {"verdict", to_string(rr.verdict)},
          {"max_re_per_yr", rr.max_real()},
          {"unstable_count", unstable_count(rr)},
          {"dropped_seeds", rr.dropped_seeds}};
}

json probe_json(const ProbeResult& pr) {
  json samples = json::array();
  for (const auto& s : pr.samples)
    samples.push_back({{"delta", s.delta},
                       {"growth_rate_per_yr", s.growth_rate},
                       {"horizon_yr", s.horizon},
                       {"summary", io::summary_json(s.summary)}});
  return {{"verdict", to_string(pr.verdict)},
          {"axis", pr.axis},
          {"side", pr.side},
          {"note", pr.note},
          {"samples", samples}};
}

void record_branch(Context& ctx, const BranchData& br, const std::string& label) {
  for (std::size_t i = 0; i < br.summaries.size(); ++i) {
    ctx.count(std::string(to_string(br.summaries[i].kind)));
    if (!br.errors[i].empty())
      ctx.failure(label + " at " + br.axis + "=" + io::format_number(br.values[i]) + ": " + br.errors[i]);
  }
}

void write_branch(Context& ctx, const BranchData& br, const ModelParams& p0, const SimulationOptions& sim,
                  bool inherit, const std::string& stem) {
  ctx.out.write_text(stem + ".csv", io::branch_csv(br));
  ctx.out.write_json(stem + ".json", io::branch_meta(br, p0, sim, inherit));
  record_branch(ctx, br, stem);
}

void run_simulate(Context& ctx, const SimulateCfg& c, const ModelParams& p, const std::string& stem) {
  State init;
  if (c.init) init = *c.init;
  else {
    const Equilibrium eq = primary_equilibrium(p);
    init = {eq.state.s1 + c.perturbation, eq.state.s2};
  }
  IntegrateOptions io_opts;
  io_opts.record_from = c.record_from;
  io_opts.stride = c.stride;
  const Trajectory tr = integrate(p, init, c.horizon, c.h > 0.0 ? c.h : default_step(p), io_opts);
  json meta = io::trajectory_meta(tr, p);
  try {
    meta["summary"] = io::summary_json(classify(tr, c.transient));
  } catch (const Error& e) {
    meta["summary"] = nullptr;
    ctx.failure(std::string("classification: ") + e.what());
  }
  ctx.out.write_text(stem + ".csv", io::trajectory_csv(tr, p));
  ctx.out.write_json(stem + ".json", meta);
  ctx.count(tr.terminated ? "terminated" : "completed");
}

void run_equilibria(Context& ctx) {
  json list = json::array();
  for (const auto& e : equilibria(ctx.base)) list.push_back(equilibrium_json(e, ctx.base));
  ctx.count("equilibria", static_cast<int>(list.size()));
  ctx.out.write_json("equilibria.json", {{"params", io::params_json(ctx.base)}, {"equilibria", list}});
}

json hopf_scan_json(const HopfScan& scan) {
  json hopf = json::array();
  for (const auto& h : scan.hopf) hopf.push_back(io::hopf_json(h));
  return {{"hopf", hopf}, {"real_crossings", scan.folds}};
}

void run_stability(Context& ctx, const StabilityCfg& c) {
  const Equilibrium eq = primary_equilibrium(ctx.base);
  const Linearization lin = linearize(ctx.base);
  const RootReport rr = rightmost_roots(lin, c.n_wanted, c.n_nodes);
  json out = {{"params", io::params_json(ctx.base)},
              {"equilibrium", equilibrium_json(eq, ctx.base)},
              {"j0_per_yr", {{lin.j0(0, 0), lin.j0(0, 1)}, {lin.j0(1, 0), lin.j0(1, 1)}}},
              {"j1_per_yr", {{lin.j1(0, 0), lin.j1(0, 1)}, {lin.j1(1, 0), lin.j1(1, 1)}}},
              {"spectrum", roots_json(rr, lin)}};
  ctx.count(std::string(to_string(rr.verdict)));
  if (c.scan) {
    out["scan"] = hopf_scan_json(scan_hopf_1d(ctx.base, c.scan->first, c.scan->second));
    out["scan"]["axis"] = c.scan->first;
  }
  ctx.out.write_json("stability.json", out);
}

void run_sweep(Context& ctx, const SweepCfg& c) {
  std::vector<double> values = c.grid;
  if (c.direction == "down") std::reverse(values.begin(), values.end());
  const BranchData br = sweep(ctx.base, c.axis, values, c.inherit, c.sim);
  write_branch(ctx, br, ctx.base, c.sim, c.inherit, "branch");
}

json hysteresis_json(const HysteresisResult& h) {
  json windows = json::array();
  for (const auto& w : h.windows) windows.push_back({{"lo", w.lo}, {"hi", w.hi}});
  return {{"bistability_windows", windows},
          {"fold_estimate", h.fold_estimate ? json(*h.fold_estimate) : json(nullptr)}};
}

void run_hysteresis(Context& ctx, const SweepCfg& c) {
  const HysteresisResult h = hysteresis_scan(ctx.base, c.axis, c.grid, c.sim);
  write_branch(ctx, h.up, ctx.base, c.sim, true, "branch_up");
  write_branch(ctx, h.down, ctx.base, c.sim, true, "branch_down");
  json j = hysteresis_json(h);
  j["axis"] = c.axis;
  ctx.out.write_json("hysteresis.json", j);
}

Tagger curve_tagger(const Plane& plane, const ProbeOptions& probe) {
  return make_adaptive_probe_tagger({plane.a, plane.b}, probe);
}

void record_curve(Context& ctx, const HopfCurve& curve, const std::string& stem, const ContinuationOptions& opts,
                  json extra = json::object()) {
  json meta = io::hopf_curve_meta(curve, opts);
  for (const auto& item : extra.items()) meta[item.key()] = item.value();
  std::map<std::string, int> tags;
  for (const auto& h : curve.points) ++tags[std::string(to_string(h.criticality))];
  meta["criticality_counts"] = tags;
  ctx.out.write_text(stem + ".csv", io::hopf_curve_csv(curve));
  ctx.out.write_json(stem + ".json", meta);
  ctx.count("curve_points", static_cast<int>(curve.points.size()));
  if (curve.termination.find("step-failure") != std::string::npos)
    ctx.failure(stem + ": continuation stopped on step failure");
}

void run_hopf_curve(Context& ctx, const HopfCurveCfg& c) {
  const HopfPoint start = locate_hopf_1d(ctx.base, c.start.axis, c.start.bracket.first, c.start.bracket.second);
  ContinuationOptions opts = c.cont;
  if (c.tag) opts.tagger = curve_tagger(c.plane, c.probe);
  const HopfCurve curve = c.both ? continue_hopf_both(start, c.plane, opts) : continue_hopf_2d(start, c.plane, opts);
  record_curve(ctx, curve, "hopf_curve", opts, {{"start", io::hopf_json(start)}});
}

void run_criticality(Context& ctx, const CriticalityCfg& c) {
  HopfPoint h = locate_hopf_1d(ctx.base, c.locate.axis, c.locate.bracket.first, c.locate.bracket.second);
  const ProbeResult pr = criticality_probe(h, c.locate.axis, c.probe);
  h.criticality = to_criticality(pr.verdict);
  ctx.count(std::string(to_string(pr.verdict)));
  ctx.out.write_json("criticality.json", {{"hopf", io::hopf_json(h)}, {"probe", probe_json(pr)}});
}

// ---------------------------------------------------------------------------
// Figures

ModelParams with_sigma_tau(ModelParams p, double sigma, double tau) {
  return with_axis(with_axis(p, "sigma_sv", sigma), "tau_yr", tau);
}

void run_branch_figure(Context& ctx, const BranchFigureCfg& c) {
  const ModelParams p = with_sigma_tau(ctx.base, c.sigma, c.tau);
  const std::string axis = "f1_sv";
  const HysteresisResult hys = hysteresis_scan(p, axis, c.grid, c.sim);
  write_branch(ctx, hys.up, p, c.sim, true, "branch_up");
  write_branch(ctx, hys.down, p, c.sim, true, "branch_down");

  const HopfScan scan = scan_hopf_1d(p, axis, c.grid);
  json hopf = json::array();
  for (HopfPoint h : scan.hopf) {
    json entry;
    try {
      const ProbeResult pr = criticality_probe(h, axis, c.probe);
      h.criticality = to_criticality(pr.verdict);
      entry = io::hopf_json(h);
      entry["probe"] = probe_json(pr);
      ctx.count(std::string("hopf_") + std::string(to_string(pr.verdict)));
    } catch (const Error& e) {
      entry = io::hopf_json(h);
      entry["probe_error"] = e.what();
      ctx.failure(std::string("probe: ") + e.what());
    }
    hopf.push_back(entry);
  }

  json runs = json::array();
  for (const auto& r : periodic_runs(hys.up))
    runs.push_back({{"first", hys.up.values[r.first]},
                    {"last", hys.up.values[r.last]},
                    {"before", r.at_start ? json(nullptr) : json(to_string(r.before))},
                    {"after", r.at_end ? json(nullptr) : json(to_string(r.after))}});
  const auto torus = torus_bracket(hys.up);

  int periodic = 0, short_period = 0;
  for (const BranchData* br : {&hys.up, &hys.down})
    for (const auto& s : br->summaries)
      if (s.kind == AttractorKind::Periodic) {
        ++periodic;
        if (s.period < 2.0 * p.tau) ++short_period;
      }

  json markers = hysteresis_json(hys);
  markers["params"] = io::params_json(p);
  markers["axis"] = axis;
  markers["hopf"] = hopf;
  markers["real_crossings"] = scan.folds;
  markers["periodic_runs_up"] = runs;
  markers["torus_up"] = torus ? json{{"lo", torus->lo}, {"hi", torus->hi}} : json(nullptr);
  markers["period_check"] = {{"periodic_points", periodic},
                             {"below_two_delays", short_period},
                             {"two_delays_yr", 2.0 * p.tau}};
  ctx.out.write_json("markers.json", markers);
}

void run_fig4c(Context& ctx, const TimeSeriesFigureCfg& c) {
  const ModelParams p = with_axis(with_sigma_tau(ctx.base, c.sigma, c.tau), "f1_sv", c.f1);
  run_simulate(ctx, c.sim, p, "trajectory");
}

void run_fig5(Context& ctx, const HopfFigureCfg& c) {
  const Plane plane{"f1_sv", "sigma_sv"};
  for (double tau : c.taus) {
    const std::string stem = "hopf_curve_tau" + io::format_number(tau);
    const ModelParams p = with_sigma_tau(ctx.base, c.start_sigma, tau);
    const HopfScan scan = scan_hopf_1d(p, "f1_sv", c.start_grid);
    if (scan.hopf.empty()) {
      ctx.failure(stem + ": no Hopf point on the start grid");
      continue;
    }
    ContinuationOptions opts = c.cont;
    if (c.tag) opts.tagger = curve_tagger(plane, c.probe);
    const HopfCurve curve = continue_hopf_both(scan.hopf.front(), plane, opts);
    record_curve(ctx, curve, stem, opts, {{"tau_yr", tau}, {"start", io::hopf_json(scan.hopf.front())}});
  }
}

std::vector<std::string> compress(const std::vector<std::string>& seq) {
  std::vector<std::string> out;
  for (const auto& s : seq)
    if (out.empty() || out.back() != s) out.push_back(s);
  return out;
}

void run_fig8(Context& ctx, const StabilityMapCfg& c) {
  const ModelParams p = with_axis(ctx.base, "f1_sv", c.f1);
  const Plane plane{"sigma_sv", "tau_yr"};

  struct Transect {
    std::string axis;
    double fixed;
    std::vector<double> values;
    std::vector<std::string> verdicts;
    HopfScan scan;
  };
  std::vector<Transect> transects = {
      {"sigma_sv", c.transect_tau, linspace(c.sigma_range.first, c.sigma_range.second, c.transect_points), {}, {}},
      {"tau_yr", c.transect_sigma, linspace(c.tau_range.first, c.tau_range.second, c.transect_points), {}, {}}};
  json transect_json = json::array();
  std::vector<HopfPoint> starts;
  for (auto& t : transects) {
    const ModelParams q = t.axis == "sigma_sv" ? with_axis(p, "tau_yr", t.fixed) : with_axis(p, "sigma_sv", t.fixed);
    t.verdicts.resize(t.values.size());
    for_each_index(t.values.size(), [&](std::size_t i) {
      t.verdicts[i] = std::string(to_string(rightmost_roots(linearize(with_axis(q, t.axis, t.values[i]))).verdict));
    });
    t.scan = scan_hopf_1d(q, t.axis, t.values);
    for (const auto& h : t.scan.hopf) starts.push_back(h);
    json crossings = json::array();
    for (const auto& h : t.scan.hopf) crossings.push_back(get_axis(h.params, t.axis));
    transect_json.push_back({{"axis", t.axis},
                             {"fixed", {{t.axis == "sigma_sv" ? "tau_yr" : "sigma_sv", t.fixed}}},
                             {"values", t.values},
                             {"verdicts", t.verdicts},
                             {"sequence", compress(t.verdicts)},
                             {"hopf_crossings", crossings}});
  }

  std::vector<HopfCurve> curves;
  const double sa = axis_scale(plane.a), sb = axis_scale(plane.b);
  auto on_existing = [&](const HopfPoint& h) {
    const double a = get_axis(h.params, plane.a) / sa, b = get_axis(h.params, plane.b) / sb;
    for (const auto& cv : curves)
      for (const auto& q : cv.points)
        if (std::hypot(get_axis(q.params, plane.a) / sa - a, get_axis(q.params, plane.b) / sb - b) < 2.0 * c.cont.ds_max)
          return true;
    return false;
  };
  for (const auto& s : starts) {
    if (on_existing(s)) continue;
    curves.push_back(continue_hopf_both(s, plane, c.cont));
  }
  for (std::size_t k = 0; k < curves.size(); ++k) {
    if (c.tag) tag_curve(curves[k], curve_tagger(plane, c.probe), c.cont.probe_stride, c.cont.workers);
    char stem[32];
    std::snprintf(stem, sizeof stem, "hopf_curve_%02zu", k);
    record_curve(ctx, curves[k], stem, c.cont, {{"f1_sv", c.f1}});
  }

  // Linear verdicts against simulation on a regular grid.
  const auto n = static_cast<std::size_t>(c.grid_points);
  const auto sig = linspace(c.sigma_range.first, c.sigma_range.second, c.grid_points);
  const auto tau = linspace(c.tau_range.first, c.tau_range.second, c.grid_points);
  std::vector<Verdict> lin(n * n);
  std::vector<double> max_re(n * n);
  std::vector<AttractorKind> sim(n * n);
  for_each_index(n * n, [&](std::size_t idx) {
    const ModelParams q = with_sigma_tau(p, sig[idx / n], tau[idx % n]);
    const RootReport rr = rightmost_roots(linearize(q));
    lin[idx] = rr.verdict;
    max_re[idx] = rr.max_real();
    sim[idx] = simulate_point(q, c.sim).summary.kind;
  });
  std::ostringstream csv;
  csv << "sigma_sv,tau_yr,linear_verdict,max_re_per_yr,simulated_kind,near_boundary,agree\n";
  int agree = 0, disagree = 0, excluded = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t idx = i * n + j;
      bool near = false;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          const long ii = static_cast<long>(i) + di, jj = static_cast<long>(j) + dj;
          if (ii < 0 || jj < 0 || ii >= static_cast<long>(n) || jj >= static_cast<long>(n)) continue;
          if (lin[static_cast<std::size_t>(ii) * n + static_cast<std::size_t>(jj)] != lin[idx]) near = true;
        }
      const bool ok = (lin[idx] == Verdict::Stable) == (sim[idx] == AttractorKind::Steady);
      if (near) ++excluded;
      else if (ok) ++agree;
      else ++disagree;
      csv << io::format_number(sig[i]) << ',' << io::format_number(tau[j]) << ',' << to_string(lin[idx]) << ','
          << io::format_number(max_re[idx]) << ',' << to_string(sim[idx]) << ',' << (near ? 1 : 0) << ','
          << (ok ? 1 : 0) << '\n';
    }
  ctx.out.write_text("stability_grid.csv", csv.str());
  ctx.count("grid_agree", agree);
  ctx.count("grid_disagree", disagree);
  ctx.count("grid_near_boundary", excluded);
  if (disagree > 0) ctx.failure("stability grid: " + std::to_string(disagree) + " cells disagree with simulation");
  ctx.out.write_json("transects.json", {{"f1_sv", c.f1}, {"transects", transect_json}, {"curves", curves.size()}});
}

void run_figure(Context& ctx, Reader& r) {
  const std::string fig = r.text("figure", "", figures());
  if (fig == "fig4a") run_branch_figure(ctx, parse_branch_figure(r, 0.0, 900.0, -0.30, -0.20));
  else if (fig == "fig4b") run_branch_figure(ctx, parse_branch_figure(r, 11.0, 900.0, -0.23, -0.20));
  else if (fig == "fig4c") run_fig4c(ctx, parse_timeseries_figure(r));
  else if (fig == "fig5") run_fig5(ctx, parse_fig5(r));
  else if (fig == "fig6b") run_branch_figure(ctx, parse_branch_figure(r, 9.5, 1100.0, -0.225, -0.185));
  else if (fig == "fig7b") run_branch_figure(ctx, parse_branch_figure(r, 9.0, 850.0, -0.214, -0.206));
  else if (fig == "fig8") run_fig8(ctx, parse_fig8(r));
}

void dispatch(Context& ctx) {
  Diag diag;
  Reader r(&ctx.sc.options, "options", &diag);
  const std::string& op = ctx.sc.operation;
  if (op == "simulate") run_simulate(ctx, parse_simulate(r), ctx.base, "trajectory");
  else if (op == "equilibria") run_equilibria(ctx);
  else if (op == "stability") run_stability(ctx, parse_stability(r));
  else if (op == "sweep") run_sweep(ctx, parse_sweep(r, false));
  else if (op == "hysteresis") run_hysteresis(ctx, parse_sweep(r, true));
  else if (op == "hopf-curve") run_hopf_curve(ctx, parse_hopf_curve(r));
  else if (op == "criticality") run_criticality(ctx, parse_criticality(r));
  else if (op == "figure") run_figure(ctx, r);
  if (!diag.empty()) throw Error(ErrorKind::ConfigError, join(diag));
}

}  // namespace

RunReport run(const Scenario& sc, const RunOptions& opts) {
  if (opts.workers > 0) set_workers(opts.workers);
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  report.scenario = sc.name;
  report.operation = sc.operation;
  report.config_hash = io::git_blob_hash(sc.canonical);
  report.out_dir = opts.out_root / sc.output;

  io::ArtifactWriter out(report.out_dir);
  Context ctx{sc, make_params(sc.base_params), out, report};
  try {
    dispatch(ctx);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    ctx.failure(std::string(to_string(e.kind())) + ": " + e.what());
  } catch (const std::exception& e) {
    ctx.failure(e.what());
  }
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.artifacts = out.written();
  report.artifacts.push_back("report.json");
  out.write_json("report.json", report.to_json());
  return report;
}

}  // namespace delaymoc::scenario
