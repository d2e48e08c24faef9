#include "delaymoc/io.hpp"

#include "delaymoc/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

namespace delaymoc::io {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

// JSON has no NaN; absent values become null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json params_json(const ModelParams& p) {
  json j = json::object();
  for (const auto& key : param_keys()) j[key] = get_axis(p, key);
  return j;
}

json summary_json(const AttractorSummary& s) {
  return {{"kind", to_string(s.kind)},
          {"amplitude_psu", number_or_null(s.amplitude)},
          {"s1_max_psu", number_or_null(s.s1_max)},
          {"period_yr", number_or_null(s.period)},
          {"mean_s1_psu", number_or_null(s.mean_state.s1)},
          {"mean_s2_psu", number_or_null(s.mean_state.s2)},
          {"n_peaks", s.n_peaks},
          {"height_cv", number_or_null(s.height_cv)},
          {"interval_cv", number_or_null(s.interval_cv)}};
}

json tolerances_json(const ClassifyTolerances& t) {
  return {{"eps_amp", t.eps_amp},
          {"tol_per", t.tol_per},
          {"n_tail", t.n_tail},
          {"min_quasi_peaks", t.min_quasi_peaks},
          {"drift_limit", t.drift_limit}};
}

json hopf_json(const HopfPoint& h) {
  return {{"params", params_json(h.params)},
          {"omega_per_yr", h.omega},
          {"period_yr", 2.0 * std::numbers::pi / h.omega},
          {"criticality", to_string(h.criticality)},
          {"degeneracy", h.degeneracy}};
}

std::string trajectory_csv(const Trajectory& traj, const ModelParams& p) {
  std::ostringstream os;
  os << "t_yr,s1_psu,s2_psu,s3_psu,m_sv\n";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const State s{traj.s1[i], traj.s2[i]};
    os << format_number(traj.t[i]) << ',' << format_number(s.s1) << ',' << format_number(s.s2) << ','
       << format_number(salt_closure(s, p)) << ',' << format_number(traj.m[i] / kSverdrup) << '\n';
  }
  return os.str();
}

json trajectory_meta(const Trajectory& traj, const ModelParams& p) {
  json events = json::array();
  for (const auto& e : traj.events) events.push_back({{"t_yr", e.t}, {"kind", to_string(e.kind)}});
  return {{"params", params_json(p)},
          {"h_requested_yr", traj.h_requested},
          {"h_used_yr", traj.h_used},
          {"h_adjusted", traj.h_adjusted},
          {"delay_steps", traj.n_tau},
          {"horizon_yr", traj.horizon},
          {"terminated", traj.terminated},
          {"samples", traj.size()},
          {"events", events}};
}

std::string branch_csv(const BranchData& br) {
  std::ostringstream os;
  os << "param,kind,amplitude_psu,s1_max_psu,period_yr\n";
  for (std::size_t i = 0; i < br.values.size(); ++i) {
    const AttractorSummary& s = br.summaries[i];
    os << format_number(br.values[i]) << ',' << to_string(s.kind) << ',' << format_number(s.amplitude) << ','
       << format_number(s.s1_max) << ',' << format_number(s.period) << '\n';
  }
  return os.str();
}

json branch_meta(const BranchData& br, const ModelParams& p0, const SimulationOptions& opts, bool inherit) {
  json errors = json::array();
  for (std::size_t i = 0; i < br.errors.size(); ++i)
    if (!br.errors[i].empty()) errors.push_back({{"param", br.values[i]}, {"error", br.errors[i]}});
  return {{"axis", br.axis},
          {"direction", to_string(br.direction)},
          {"inherit", inherit},
          {"grid", br.values},
          {"base_params", params_json(p0)},
          {"horizon_yr", opts.horizon},
          {"transient_yr", opts.t_transient},
          {"h_yr", opts.h},
          {"perturbation_psu", opts.perturbation},
          {"settle_tol", opts.settle_tol},
          {"max_horizon_yr", opts.max_horizon},
          {"tolerances", tolerances_json(opts.tols)},
          {"errors", errors}};
}

std::string hopf_curve_csv(const HopfCurve& curve) {
  std::ostringstream os;
  os << "param_a,param_b,omega_per_yr,criticality\n";
  for (const auto& h : curve.points)
    os << format_number(get_axis(h.params, curve.plane.a)) << ',' << format_number(get_axis(h.params, curve.plane.b))
       << ',' << format_number(h.omega) << ',' << to_string(h.criticality) << '\n';
  return os.str();
}

json hopf_curve_meta(const HopfCurve& curve, const ContinuationOptions& opts) {
  json degeneracies = json::array();
  for (std::size_t i = 0; i < curve.points.size(); ++i)
    if (curve.points[i].degeneracy)
      degeneracies.push_back({{"index", i},
                              {"param_a", get_axis(curve.points[i].params, curve.plane.a)},
                              {"param_b", get_axis(curve.points[i].params, curve.plane.b)}});
  return {{"plane", {curve.plane.a, curve.plane.b}},
          {"fixed_params", params_json(curve.fixed)},
          {"points", curve.points.size()},
          {"termination", curve.termination},
          {"arclength_scaled", curve.arclength.empty() ? 0.0 : curve.arclength.back()},
          {"ds", opts.ds},
          {"ds_min", opts.ds_min},
          {"ds_max", opts.ds_max},
          {"corrector_tol", opts.corrector_tol},
          {"probe_stride", opts.probe_stride},
          {"bounds", {{"a", {opts.a_min, opts.a_max}}, {"b", {opts.b_min, opts.b_max}}}},
          {"degeneracies", degeneracies}};
}

std::string git_blob_hash(const std::string& content) {
  const std::string payload = "blob " + std::to_string(content.size()) + '\0' + content;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), payload.data(), payload.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("sha1 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

ArtifactWriter::ArtifactWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

void ArtifactWriter::write_text(const std::string& name, const std::string& content) {
  const fs::path path = dir_ / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw Error(ErrorKind::ConfigError, "write failed for " + path.string());
  if (std::find(written_.begin(), written_.end(), name) == written_.end()) written_.push_back(name);
}

void ArtifactWriter::write_json(const std::string& name, const json& value) { write_text(name, value.dump(2) + "\n"); }

}  // namespace delaymoc::io
