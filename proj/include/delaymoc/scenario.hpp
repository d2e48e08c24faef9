#pragma once

// Scenario files: validation, dispatch to the analysis kernels, artifact
// persistence and run reports.

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace delaymoc::scenario {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitPartialFailure = 3;

const std::vector<std::string>& operations();
const std::vector<std::string>& figures();

struct Scenario {
  std::string name;
  fs::path file;
  fs::path params_file;
  json base_params;  // params file contents with overrides applied
  std::string operation;
  json options = json::object();
  std::string output;  // directory under the output root; defaults to name
  std::string canonical;  // normalized config used for the content hash
};

/// Schema and referential checks only.  Returns every violation found.
std::vector<std::string> validate_file(const fs::path& file, const std::optional<fs::path>& seed_params = {});

/// Throws Error(ConfigError) listing all violations.
Scenario load(const fs::path& file, const std::optional<fs::path>& seed_params = {});

struct RunOptions {
  fs::path out_root;
  int workers = 0;
};

struct RunReport {
  std::string scenario;
  std::string operation;
  std::string config_hash;
  double wall_time_s = 0.0;
  std::map<std::string, int> status_counts;
  std::vector<std::string> artifacts;
  std::vector<std::string> failures;
  fs::path out_dir;

  int exit_code() const { return failures.empty() ? kExitSuccess : kExitPartialFailure; }
  json to_json() const;
};

/// Runs the scenario and writes its artifacts plus report.json.
RunReport run(const Scenario& sc, const RunOptions& opts);

/// DELAYMOC_OUT when set, otherwise ./out.
fs::path default_out_root();

}  // namespace delaymoc::scenario
