#pragma once

// Linear stability of box-model equilibria under the delayed feedback:
// characteristic roots of det(lambda I - J0 - J1 exp(-lambda tau)) = 0,
// one-parameter Hopf location and two-parameter Hopf continuation.

#include "delaymoc/model.hpp"

#include <Eigen/Core>

#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace delaymoc {

using cplx = std::complex<double>;

struct Linearization {
  Eigen::Matrix2d j0 = Eigen::Matrix2d::Zero();  // 1/yr
  Eigen::Matrix2d j1 = Eigen::Matrix2d::Zero();  // 1/yr, only (0,0) nonzero
  double tau = 0.0;                              // yr

  /// |J0|_F^2 + |J1|_F^2, the normalization scale for char_fn residuals.
  double scale() const { return j0.squaredNorm() + j1.squaredNorm(); }
};

Linearization jacobians(const Equilibrium& eq, const ModelParams& p);
/// Linearization about the primary (m > 0) equilibrium.
Linearization linearize(const ModelParams& p);

struct CharValue {
  cplx value;
  cplx derivative;
};

CharValue char_fn(cplx lambda, const Linearization& lin);

/// |char_fn(lambda)| / (|lambda|^2 + lin.scale()).
double char_residual(cplx lambda, const Linearization& lin);

/// Eigenvalues of a Chebyshev collocation of the solution-operator generator
/// on [-tau, 0], sorted by descending real part.
std::vector<cplx> spectrum_estimate(const Linearization& lin, int n_nodes = 32);

enum class Verdict { Stable, Unstable, Marginal };

std::string_view to_string(Verdict v);

struct RootReport {
  std::vector<cplx> roots;  // refined, descending real part
  Verdict verdict = Verdict::Marginal;
  int dropped_seeds = 0;    // seeds whose Newton refinement diverged
  double max_real() const { return roots.empty() ? 0.0 : roots.front().real(); }
};

/// Newton-refines spectral seeds and returns the n_wanted rightmost roots.
RootReport rightmost_roots(const Linearization& lin, int n_wanted = 6, int n_nodes = 32);

/// Newton polish of one root; returns false if it diverges.
bool refine_root(cplx& lambda, const Linearization& lin);

/// Roots in the right half plane (conjugates counted separately).
int unstable_count(const RootReport& r);

enum class Criticality { Supercritical, Subcritical, Untagged };

std::string_view to_string(Criticality c);

struct HopfPoint {
  ModelParams params;
  double omega = 0.0;  // rad / yr
  Criticality criticality = Criticality::Untagged;
  bool degeneracy = false;  // criticality changes at this point
};

/// Normalized |char_fn(i omega)| at the point.
double hopf_residual(const HopfPoint& h);

struct HopfScan {
  std::vector<HopfPoint> hopf;
  std::vector<double> folds;  // parameter values of real-root crossings
};

/// Bisection on the real part of the root that crosses between lo and hi.
/// Throws NoCrossingInBracket or RealRootCrossing.
HopfPoint locate_hopf_1d(const ModelParams& p, const std::string& axis, double lo, double hi);

/// All crossings of the imaginary axis on a monotone grid.
HopfScan scan_hopf_1d(const ModelParams& p, const std::string& axis, const std::vector<double>& grid);

/// Newton on (axis value, omega) so that char_fn(i omega) = 0.
HopfPoint polish_hopf(const HopfPoint& start, const std::string& axis);

struct Plane {
  std::string a;  // e.g. "f1_sv" or "sigma_sv"
  std::string b;  // e.g. "sigma_sv" or "tau_yr"
};

using Tagger = std::function<Criticality(const HopfPoint&)>;

struct ContinuationOptions {
  double ds = 1e-2;      // initial step, scaled units
  double ds_min = 1e-4;
  double ds_max = 1e-1;
  int max_points = 4000;
  int direction = 1;     // +1 / -1 along the initial tangent
  double a_min = -1e300, a_max = 1e300;
  double b_min = -1e300, b_max = 1e300;
  double loop_tol = 0.0;  // 0: use 2 * ds_max
  double corrector_tol = 1e-13;
  Tagger tagger;          // empty: leave Untagged
  int probe_stride = 10;
  /// Tagger threads; <= 0 leaves the OpenMP default.
  int workers = 0;
};

struct HopfCurve {
  Plane plane;
  ModelParams fixed;  // parameters not on the plane
  std::vector<HopfPoint> points;
  std::vector<double> arclength;  // cumulative, scaled units
  std::string termination;        // "bounds", "loop", "step-failure", "max-points", "omega"
};

/// Scaled unit for an axis: Sv for fluxes, kyr for tau, else the user unit.
double axis_scale(const std::string& axis);

/// Pseudo-arclength continuation of a Hopf point in two parameters.
HopfCurve continue_hopf_2d(const HopfPoint& start, const Plane& plane, const ContinuationOptions& opts);

/// Continues in both directions from start and joins the halves into one
/// ordered curve; tagging (if requested) runs on the joined curve.
HopfCurve continue_hopf_both(const HopfPoint& start, const Plane& plane, const ContinuationOptions& opts);

/// Criticality tagging along a curve at a stride; tags between probes with
/// equal verdicts are interpolated, flips are resolved by probing every point
/// in between.  Degeneracy flags mark the first point after each flip.
void tag_curve(HopfCurve& curve, const Tagger& tagger, int stride, int workers = 0);

}  // namespace delaymoc
