#pragma once

// CSV and JSON artifact writers.  Numbers are printed with %.17g so a rerun
// with the same inputs produces byte-identical files.

#include "delaymoc/attractor.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace delaymoc::io {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_number(double v);

json params_json(const ModelParams& p);
json summary_json(const AttractorSummary& s);
json tolerances_json(const ClassifyTolerances& t);
json hopf_json(const HopfPoint& h);

/// t_yr,s1_psu,s2_psu,s3_psu,m_sv
std::string trajectory_csv(const Trajectory& traj, const ModelParams& p);
json trajectory_meta(const Trajectory& traj, const ModelParams& p);

/// param,kind,amplitude_psu,s1_max_psu,period_yr
std::string branch_csv(const BranchData& br);
json branch_meta(const BranchData& br, const ModelParams& p0, const SimulationOptions& opts, bool inherit);

/// param_a,param_b,omega_per_yr,criticality
std::string hopf_curve_csv(const HopfCurve& curve);
json hopf_curve_meta(const HopfCurve& curve, const ContinuationOptions& opts);

/// Git blob object id (SHA-1 over "blob <size>\0" + content), lowercase hex.
std::string git_blob_hash(const std::string& content);

/// Tracks every file written under one output directory.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path dir);

  const fs::path& dir() const noexcept { return dir_; }
  const std::vector<std::string>& written() const noexcept { return written_; }

  void write_text(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const json& value);

 private:
  fs::path dir_;
  std::vector<std::string> written_;
};

}  // namespace delaymoc::io
