#pragma once

// Long-run behaviour of simulated trajectories: classification, branch
// sweeps with history inheritance, hysteresis scans and numerical Hopf
// criticality probes.

#include "delaymoc/dde.hpp"
#include "delaymoc/parallel.hpp"
#include "delaymoc/stability.hpp"

#include <optional>
#include <string>
#include <vector>

namespace delaymoc {

enum class AttractorKind { Steady, Periodic, Quasiperiodic, NonConverged, MSignViolated };

std::string_view to_string(AttractorKind k);

struct ClassifyTolerances {
  double eps_amp = 1e-6;     // psu
  double tol_per = 1e-3;     // coefficient of variation
  int n_tail = 8;            // peaks/intervals entering the periodicity test
  int min_quasi_peaks = 16;
  /// Max |mean of late-half peaks - mean of early-half peaks| / peak-height std,
  /// and max relative change of the s1 range between the window halves.
  double drift_limit = 0.5;
};

struct AttractorSummary {
  AttractorKind kind = AttractorKind::NonConverged;
  double amplitude = 0.0;  // max(s1) - min(s1) after the transient, psu
  double s1_max = 0.0;
  double period = 0.0;     // yr, Periodic only (0 otherwise)
  State mean_state;
  int n_peaks = 0;
  double height_cv = 0.0;
  double interval_cv = 0.0;
};

/// Peak times and heights of s1 with 3-point quadratic refinement.
struct Peaks {
  std::vector<double> t;
  std::vector<double> height;
};
Peaks find_peaks(const std::vector<double>& t, const std::vector<double>& y);

/// Post-transient verdict.  Any m-sign crossing or m < 0 sample after t_transient
/// gives MSignViolated.
AttractorSummary classify(const Trajectory& traj, double t_transient, const ClassifyTolerances& tols = {});

struct SimulationOptions {
  double horizon = 200000.0;
  double t_transient = 50000.0;
  double h = 0.0;             // 0: default_step(p)
  double perturbation = 1e-3; // psu added to s1 of the equilibrium history
  /// While the s1 range of the late half of the window differs from the early
  /// half by more than settle_tol (relative), the run continues from its
  /// terminal history, up to max_horizon years in total.  Steady,
  /// Quasiperiodic and MSignViolated verdicts end the run at once.
  double settle_tol = 1e-5;
  double max_horizon = 5.0e6;
  ClassifyTolerances tols;
};

/// Integrates from the primary equilibrium plus a perturbation (or from an
/// inherited history) and classifies the result.
struct PointResult {
  AttractorSummary summary;
  std::vector<State> final_history;
  double h_used = 0.0;
  double elapsed = 0.0;  // yr integrated, including extensions
  std::string error;     // non-empty when the point failed
};

PointResult simulate_point(const ModelParams& p, const SimulationOptions& opts,
                           const std::vector<State>* inherited = nullptr, double inherited_step = 0.0);

enum class SweepDirection { Up, Down };

std::string_view to_string(SweepDirection d);

struct BranchData {
  std::string axis;
  std::vector<double> values;
  std::vector<AttractorSummary> summaries;
  std::vector<std::string> errors;  // per point, empty string when fine
  SweepDirection direction = SweepDirection::Up;
};

/// Values must be strictly monotone.  With inheritance the points run in
/// order; without it they are independent and run as a parallel batch.
BranchData sweep(const ModelParams& p0, const std::string& axis, const std::vector<double>& values, bool inherit,
                 const SimulationOptions& opts = {}, Exec exec = Exec::Parallel);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct HysteresisResult {
  BranchData up;
  BranchData down;  // stored in descending parameter order
  std::vector<Interval> windows;
  std::optional<double> fold_estimate;
};

/// Inherited sweeps in both directions; values must be increasing.
HysteresisResult hysteresis_scan(const ModelParams& p0, const std::string& axis, const std::vector<double>& values,
                                 const SimulationOptions& opts = {}, Exec exec = Exec::Parallel);

/// Maximal run of consecutive Periodic points along a branch, in sweep order,
/// with the kinds found just outside it (NonConverged at the grid ends).
struct PeriodicRun {
  std::size_t first = 0;
  std::size_t last = 0;
  AttractorKind before = AttractorKind::NonConverged;
  AttractorKind after = AttractorKind::NonConverged;
  bool at_start = false;
  bool at_end = false;
};
std::vector<PeriodicRun> periodic_runs(const BranchData& br);

/// Grid bracket of the first Periodic -> Quasiperiodic step in sweep order.
std::optional<Interval> torus_bracket(const BranchData& br);

enum class ProbeVerdict { Supercritical, Subcritical, Inconclusive };

std::string_view to_string(ProbeVerdict v);
Criticality to_criticality(ProbeVerdict v);

struct ProbeOptions {
  std::vector<double> deltas = {1e-4, 2e-4, 4e-4, 8e-4};  // scaled units of the probe axis
  double perturbation = 1e-4;                              // psu
  double growth_factor = 40.0;  // horizon = growth_factor / Re(lambda), clamped
  double min_horizon = 200000.0;
  double max_horizon = 2.0e7;
  double sqrt_tolerance = 0.3;   // allowed relative deviation from sqrt scaling
  double persist_ratio = 0.8;    // A(delta_min) / A(delta_max) marking a non-vanishing branch
  /// > 0: deltas are rescaled so the smallest one gives this growth rate, 1/yr.
  double target_growth = 0.0;
  ClassifyTolerances tols;
};

struct ProbeSample {
  double delta = 0.0;
  double growth_rate = 0.0;  // Re lambda on the probed side, 1/yr
  double horizon = 0.0;
  AttractorSummary summary;
};

struct ProbeResult {
  ProbeVerdict verdict = ProbeVerdict::Inconclusive;
  std::string axis;
  double side = 0.0;  // +1 / -1: direction of the unstable side
  std::vector<ProbeSample> samples;
  std::string note;
};

/// Simulation-based criticality test on the unstable side of a verified
/// Hopf point.  Throws HopfNotVerified.
ProbeResult criticality_probe(const HopfPoint& hopf, const std::string& axis, const ProbeOptions& opts = {},
                              Exec exec = Exec::Parallel);

/// Tagger for continue_hopf_2d / tag_curve probing along `axis`.
Tagger make_probe_tagger(const std::string& axis, const ProbeOptions& opts = {});

/// Axis among `axes` along which the Hopf pair crosses fastest per scaled unit.
std::string choose_probe_axis(const HopfPoint& hopf, const std::vector<std::string>& axes);

/// Tagger probing along choose_probe_axis at every point.
Tagger make_adaptive_probe_tagger(const std::vector<std::string>& axes, const ProbeOptions& opts = {});

/// R^2 of a least-squares line through (x, y).
double r_squared(const std::vector<double>& x, const std::vector<double>& y);

struct DecayFit {
  double rate = 0.0;  // 1/yr, slope of log peak height
  int n_peaks = 0;
};

/// Exponential rate of |s1 - s1_ref| peaks between t_from and t_to.
DecayFit decay_rate(const Trajectory& traj, double s1_ref, double t_from, double t_to);

/// Simulation-side stability verdict: integrate a 1e-6 psu perturbation and
/// compare early and late oscillation ranges.
Verdict simulated_verdict(const ModelParams& p, double horizon = 200000.0, double perturbation = 1e-6);

}  // namespace delaymoc
