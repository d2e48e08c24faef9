#pragma once

// Three-box salinity model with a delayed zonal feedback on the southern box.
//
//   V dS1/dt = S0 F1 + m (S2 - S1) + sigma (S1(t - tau) - S1)
//   V dS2/dt = -S0 F2 + m (S3 - S2)
//   m        = k [beta (S2 - S1) - alpha T*],   S3 = 3 S0 - S1 - S2
//
// Internal units: years, m^3, psu.  Fluxes given in Sv are converted once at
// ingestion.

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace delaymoc {

/// 365-day year.
inline constexpr double kSecondsPerYear = 3.1536e7;
/// One Sverdrup expressed in m^3 / yr.
inline constexpr double kSverdrup = kSecondsPerYear * 1.0e6;

struct ModelParams {
  double k = 23.0e17;      // hydraulic constant, m^3/yr
  double alpha = 1.7e-4;   // 1/K
  double beta = 0.8e-3;    // 1/psu
  double s0 = 35.0;        // psu
  double vol = 3.5e17;     // m^3
  double f1 = 0.0;         // m^3/yr
  double f2 = kSverdrup;   // m^3/yr
  double t_star = 0.0;     // K
  double sigma = 0.0;      // m^3/yr
  double tau = 0.0;        // yr

  bool operator==(const ModelParams&) const = default;
};

struct State {
  double s1 = 0.0;
  double s2 = 0.0;

  bool operator==(const State&) const = default;
};

struct Derivative {
  double ds1 = 0.0;
  double ds2 = 0.0;
};

enum class Branch { PositiveM, NegativeM, Degenerate };

std::string_view to_string(Branch b);

struct Equilibrium {
  State state;
  double s3 = 0.0;
  double m = 0.0;
  Branch branch = Branch::PositiveM;
};

/// Config keys accepted by make_params, in user units.
const std::vector<std::string>& param_keys();

/// Builds validated params from a flat JSON object in user units
/// (Sv, yr, psu).  Every key in param_keys() is required; others are rejected.
ModelParams make_params(const nlohmann::json& config);

/// Inverse of make_params.
nlohmann::json params_to_json(const ModelParams& p);

/// Throws if an invariant of ModelParams is violated.
void validate(const ModelParams& p);

/// Reads a named parameter in user units.  Axis names are the config keys.
double get_axis(const ModelParams& p, std::string_view axis);
/// Returns a copy with one parameter replaced (value in user units).
ModelParams with_axis(ModelParams p, std::string_view axis, double value);
bool is_axis(std::string_view axis);

inline double transport_m(const State& s, const ModelParams& p) {
  return p.k * (p.beta * (s.s2 - s.s1) - p.alpha * p.t_star);
}

inline double salt_closure(const State& s, const ModelParams& p) {
  return 3.0 * p.s0 - s.s1 - s.s2;
}

inline Derivative rhs(const State& s, double s1_delayed, const ModelParams& p) {
  const double m = transport_m(s, p);
  const double s3 = salt_closure(s, p);
  return {(p.s0 * p.f1 + m * (s.s2 - s.s1) + p.sigma * (s1_delayed - s.s1)) / p.vol,
          (-p.s0 * p.f2 + m * (s3 - s.s2)) / p.vol};
}

/// Steady states with m >= 0.  T* = 0 uses the closed form; otherwise damped
/// Newton from several seeds.  A Degenerate entry marks the F1 = 0, T* = 0
/// limit where the upper branch collapses onto m = 0.
std::vector<Equilibrium> equilibria(const ModelParams& p);

/// The upper-branch (largest m) equilibrium; throws NoEquilibrium if none.
Equilibrium primary_equilibrium(const ModelParams& p);

/// Absolute residual max(|ds1|, |ds2|) of the undelayed steady system.
double steady_residual(const State& s, const ModelParams& p);

}  // namespace delaymoc
