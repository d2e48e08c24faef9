#include "delaymoc/stability.hpp"

#include "delaymoc/error.hpp"
#include "delaymoc/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace delaymoc {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Stable: return "Stable";
    case Verdict::Unstable: return "Unstable";
    case Verdict::Marginal: return "Marginal";
  }
  return "Unknown";
}

std::string_view to_string(Criticality c) {
  switch (c) {
    case Criticality::Supercritical: return "Supercritical";
    case Criticality::Subcritical: return "Subcritical";
    case Criticality::Untagged: return "Untagged";
  }
  return "Unknown";
}

Linearization jacobians(const Equilibrium& eq, const ModelParams& p) {
  const double kb = p.k * p.beta;
  const double s1 = eq.state.s1, s2 = eq.state.s2;
  const double ds = s2 - s1;
  const double g = 3.0 * p.s0 - s1 - 2.0 * s2;  // S3 - S2
  const double m = eq.m;
  Linearization lin;
  lin.j0 << (-kb * ds - m - p.sigma) / p.vol, (kb * ds + m) / p.vol,  //
      (-kb * g - m) / p.vol, (kb * g - 2.0 * m) / p.vol;
  lin.j1(0, 0) = p.sigma / p.vol;
  lin.tau = p.tau;
  return lin;
}

namespace {

// The equilibrium does not depend on sigma or tau, so those two may sit
// slightly outside their physical range during finite differencing.
Linearization linearize_unchecked(const ModelParams& p) {
  ModelParams base = p;
  base.sigma = 0.0;
  base.tau = 0.0;
  Linearization lin = jacobians(primary_equilibrium(base), p);
  return lin;
}

}  // namespace

Linearization linearize(const ModelParams& p) {
  validate(p);
  return jacobians(primary_equilibrium(p), p);
}

CharValue char_fn(cplx lambda, const Linearization& lin) {
  const double s = lin.j1(0, 0);
  const cplx e = std::exp(-lambda * lin.tau);
  const cplx a = lambda - lin.j0(0, 0) - s * e;
  const cplx d = lambda - lin.j0(1, 1);
  const cplx value = a * d - lin.j0(0, 1) * lin.j0(1, 0);
  const cplx da = 1.0 + s * lin.tau * e;
  return {value, da * d + a};
}

double char_residual(cplx lambda, const Linearization& lin) {
  return std::abs(char_fn(lambda, lin).value) / (std::norm(lambda) + lin.scale());
}

namespace {

// Trefethen's Chebyshev differentiation matrix on x_j = cos(pi j / n).
Eigen::MatrixXd cheb_matrix(int n, Eigen::VectorXd& x) {
  x.resize(n + 1);
  for (int j = 0; j <= n; ++j) x(j) = std::cos(std::numbers::pi * j / n);
  Eigen::VectorXd c(n + 1);
  for (int j = 0; j <= n; ++j) c(j) = ((j == 0 || j == n) ? 2.0 : 1.0) * ((j % 2) ? -1.0 : 1.0);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      if (i != j) d(i, j) = (c(i) / c(j)) / (x(i) - x(j));
  for (int i = 0; i <= n; ++i) d(i, i) = -d.row(i).sum();
  return d;
}

std::vector<cplx> sorted_eigenvalues(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::EigensolveFailure, "eigensolver did not converge");
  std::vector<cplx> ev(solver.eigenvalues().begin(), solver.eigenvalues().end());
  std::stable_sort(ev.begin(), ev.end(), [](cplx x, cplx y) {
    if (x.real() != y.real()) return x.real() > y.real();
    return x.imag() > y.imag();
  });
  return ev;
}

}  // namespace

std::vector<cplx> spectrum_estimate(const Linearization& lin, int n_nodes) {
  if (n_nodes < 8) throw Error(ErrorKind::InvalidValue, "spectrum_estimate needs n_nodes >= 8");
  if (lin.tau == 0.0) return sorted_eigenvalues(lin.j0 + lin.j1);

  // Nodes theta_j = tau (x_j - 1) / 2, so theta_0 = 0 and theta_n = -tau.
  const int n = n_nodes - 1;
  Eigen::VectorXd x;
  const Eigen::MatrixXd d = cheb_matrix(n, x) * (2.0 / lin.tau);
  const int dim = 2 * (n + 1);
  Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 1; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      gen(2 * i, 2 * j) = d(i, j);
      gen(2 * i + 1, 2 * j + 1) = d(i, j);
    }
  gen.block<2, 2>(0, 0) = lin.j0;
  gen.block<2, 2>(0, 2 * n) += lin.j1;
  return sorted_eigenvalues(gen);
}

bool refine_root(cplx& lambda, const Linearization& lin) {
  constexpr int kMaxIter = 60;
  cplx z = lambda;
  for (int it = 0; it < kMaxIter; ++it) {
    const CharValue f = char_fn(z, lin);
    if (f.derivative == cplx(0.0, 0.0)) return false;
    const cplx step = f.value / f.derivative;
    z -= step;
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    if (std::abs(step) <= 1e-15 * std::max(std::abs(z), 1e-6)) break;
  }
  if (char_residual(z, lin) > 1e-10) return false;
  if (std::abs(z.imag()) < 1e-14 * std::max(std::abs(z), 1e-12)) z.imag(0.0);
  lambda = z;
  return true;
}

RootReport rightmost_roots(const Linearization& lin, int n_wanted, int n_nodes) {
  RootReport rep;
  const auto seeds = spectrum_estimate(lin, n_nodes);
  const std::size_t n_try = std::min(seeds.size(), static_cast<std::size_t>(2 * n_wanted + 8));
  std::vector<cplx> found;
  for (std::size_t i = 0; i < n_try; ++i) {
    cplx z = seeds[i];
    if (!refine_root(z, lin)) {
      ++rep.dropped_seeds;
      continue;
    }
    const bool dup = std::any_of(found.begin(), found.end(), [&](cplx w) { return std::abs(w - z) < 1e-9; });
    if (!dup) found.push_back(z);
  }
  std::sort(found.begin(), found.end(), [](cplx x, cplx y) {
    if (x.real() != y.real()) return x.real() > y.real();
    return x.imag() > y.imag();
  });
  if (found.size() > static_cast<std::size_t>(n_wanted)) found.resize(static_cast<std::size_t>(n_wanted));
  rep.roots = std::move(found);
  const double mr = rep.max_real();
  rep.verdict = rep.roots.empty() ? Verdict::Marginal
                : mr < -1e-9      ? Verdict::Stable
                : mr > 1e-9       ? Verdict::Unstable
                                  : Verdict::Marginal;
  return rep;
}

int unstable_count(const RootReport& r) {
  return static_cast<int>(std::count_if(r.roots.begin(), r.roots.end(), [](cplx z) { return z.real() > 0.0; }));
}

double hopf_residual(const HopfPoint& h) {
  return char_residual(cplx(0.0, h.omega), linearize(h.params));
}

double axis_scale(const std::string& axis) {
  if (axis == "tau_yr") return 1000.0;
  return 1.0;
}

namespace {

constexpr int kScanRoots = 10;

RootReport roots_at(const ModelParams& p, const std::string& axis, double x) {
  return rightmost_roots(linearize(with_axis(p, axis, x)), kScanRoots);
}

// Newton on (x, omega) for char_fn(i omega) = 0 along one axis.
bool polish(ModelParams& p, const std::string& axis, double& omega) {
  const double sx = axis_scale(axis);
  const double fd = 1e-6;
  double x = get_axis(p, axis) / sx;
  for (int it = 0; it < 30; ++it) {
    const Linearization lin = linearize_unchecked(with_axis(p, axis, x * sx));
    const double norm = omega * omega + lin.scale();
    const CharValue f = char_fn(cplx(0.0, omega), lin);
    const cplx r = f.value / norm;
    if (std::abs(r) < 1e-15) break;
    const cplx dw = cplx(0.0, 1.0) * f.derivative / norm;
    const cplx fp = char_fn(cplx(0.0, omega), linearize_unchecked(with_axis(p, axis, (x + fd) * sx))).value;
    const cplx fm = char_fn(cplx(0.0, omega), linearize_unchecked(with_axis(p, axis, (x - fd) * sx))).value;
    const cplx dx = (fp - fm) / (2.0 * fd * norm);
    const double det = dx.real() * dw.imag() - dw.real() * dx.imag();
    if (det == 0.0 || !std::isfinite(det)) return false;
    const double step_x = (r.real() * dw.imag() - dw.real() * r.imag()) / det;
    const double step_w = (dx.real() * r.imag() - r.real() * dx.imag()) / det;
    x -= step_x;
    omega -= step_w;
    if (!std::isfinite(x) || !std::isfinite(omega)) return false;
    if (std::abs(step_x) < 1e-15 && std::abs(step_w) < 1e-18) break;
  }
  p = with_axis(p, axis, x * sx);
  return true;
}

}  // namespace

HopfPoint polish_hopf(const HopfPoint& start, const std::string& axis) {
  HopfPoint h = start;
  ModelParams p = start.params;
  double omega = start.omega;
  if (polish(p, axis, omega) && omega > 0.0) {
    HopfPoint trial = h;
    trial.params = p;
    trial.omega = omega;
    if (hopf_residual(trial) <= hopf_residual(h)) return trial;
  }
  return h;
}

HopfPoint locate_hopf_1d(const ModelParams& p, const std::string& axis, double lo, double hi) {
  RootReport r_lo = roots_at(p, axis, lo);
  RootReport r_hi = roots_at(p, axis, hi);
  const int n_lo = unstable_count(r_lo), n_hi = unstable_count(r_hi);
  if (n_lo == n_hi) throw Error(ErrorKind::NoCrossingInBracket, "no stability change in [" + std::to_string(lo) +
                                                                    ", " + std::to_string(hi) + "]");
  const auto j = static_cast<std::size_t>(std::min(n_lo, n_hi));
  const bool lo_more = n_lo > n_hi;  // root j unstable at lo
  double a = lo, b = hi;
  double x = 0.5 * (a + b);
  cplx root{};
  for (int it = 0; it < 200; ++it) {
    x = 0.5 * (a + b);
    const RootReport r = roots_at(p, axis, x);
    if (r.roots.size() <= j) break;
    root = r.roots[j];
    if (std::abs(root.real()) < 1e-12 || b - a < 1e-15 * std::max(1.0, std::abs(x))) break;
    const bool unstable = root.real() > 0.0;
    if (unstable == lo_more) a = x;
    else b = x;
  }
  if (std::abs(root.imag()) < 1e-9) {
    throw Error(ErrorKind::RealRootCrossing, "real root crosses at " + axis + " = " + std::to_string(x));
  }
  HopfPoint h;
  h.params = with_axis(p, axis, x);
  h.omega = std::abs(root.imag());
  return polish_hopf(h, axis);
}

HopfScan scan_hopf_1d(const ModelParams& p, const std::string& axis, const std::vector<double>& grid) {
  HopfScan scan;
  std::vector<int> counts(grid.size());
  for_each_index(grid.size(), [&](std::size_t i) { counts[i] = unstable_count(roots_at(p, axis, grid[i])); });
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (counts[i] == counts[i + 1]) continue;
    try {
      scan.hopf.push_back(locate_hopf_1d(p, axis, grid[i], grid[i + 1]));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::RealRootCrossing) throw;
      // Re-bracket to report the fold position.
      double a = grid[i], b = grid[i + 1];
      const int na = counts[i];
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (a + b);
        if (unstable_count(roots_at(p, axis, mid)) == na) a = mid;
        else b = mid;
      }
      scan.folds.push_back(0.5 * (a + b));
    }
  }
  return scan;
}

// ---------------------------------------------------------------------------
// Two-parameter continuation

namespace {

constexpr double kOmegaScale = 1000.0;  // rad/yr -> rad/kyr

// Unknowns u = (a / scale_a, b / scale_b, omega in rad/kyr).
class HopfSystem {
 public:
  HopfSystem(const ModelParams& fixed, const Plane& plane, double norm)
      : fixed_(fixed), plane_(plane), sa_(axis_scale(plane.a)), sb_(axis_scale(plane.b)), norm_(norm) {}

  ModelParams params(const Eigen::Vector3d& u) const {
    return with_axis(with_axis(fixed_, plane_.a, u(0) * sa_), plane_.b, u(1) * sb_);
  }

  Eigen::Vector2d residual(const Eigen::Vector3d& u) const {
    const cplx f = char_fn(cplx(0.0, u(2) / kOmegaScale), linearize_unchecked(params(u))).value / norm_;
    return {f.real(), f.imag()};
  }

  Eigen::Matrix<double, 2, 3> jacobian(const Eigen::Vector3d& u) const {
    Eigen::Matrix<double, 2, 3> j;
    const double fd = 1e-6;
    for (int c = 0; c < 2; ++c) {
      Eigen::Vector3d up = u, um = u;
      up(c) += fd;
      um(c) -= fd;
      j.col(c) = (residual(up) - residual(um)) / (2.0 * fd);
    }
    const Linearization lin = linearize_unchecked(params(u));
    const cplx d = cplx(0.0, 1.0) * char_fn(cplx(0.0, u(2) / kOmegaScale), lin).derivative / (norm_ * kOmegaScale);
    j(0, 2) = d.real();
    j(1, 2) = d.imag();
    return j;
  }

 private:
  ModelParams fixed_;
  Plane plane_;
  double sa_, sb_, norm_;
};

Eigen::Vector3d tangent(const Eigen::Matrix<double, 2, 3>& j) {
  Eigen::Vector3d t = Eigen::Vector3d(j.row(0)).cross(Eigen::Vector3d(j.row(1)));
  const double n = t.norm();
  if (!(n > 0.0)) throw Error(ErrorKind::CorrectorDivergence, "singular Hopf system, no tangent");
  return t / n;
}

}  // namespace

HopfCurve continue_hopf_2d(const HopfPoint& start, const Plane& plane, const ContinuationOptions& opts) {
  HopfCurve curve;
  curve.plane = plane;
  curve.fixed = start.params;

  const double sa = axis_scale(plane.a), sb = axis_scale(plane.b);
  Eigen::Vector3d u(get_axis(start.params, plane.a) / sa, get_axis(start.params, plane.b) / sb,
                    start.omega * kOmegaScale);
  const Linearization lin0 = linearize(start.params);
  const double norm = start.omega * start.omega + lin0.scale();
  const HopfSystem sys(start.params, plane, norm);

  if (sys.residual(u).norm() > 1e-8) throw Error(ErrorKind::StartNotOnCurve, "start point is not a Hopf point");

  auto make_point = [&](const Eigen::Vector3d& v) {
    HopfPoint h;
    h.params = sys.params(v);
    h.omega = v(2) / kOmegaScale;
    return h;
  };
  auto in_bounds = [&](const Eigen::Vector3d& v) {
    const double a = v(0) * sa, b = v(1) * sb;
    return a >= opts.a_min && a <= opts.a_max && b >= opts.b_min && b <= opts.b_max;
  };

  curve.points.push_back(make_point(u));
  curve.arclength.push_back(0.0);
  Eigen::Vector3d t = tangent(sys.jacobian(u)) * (opts.direction >= 0 ? 1.0 : -1.0);
  const Eigen::Vector3d u0 = u;
  const double loop_tol = opts.loop_tol > 0.0 ? opts.loop_tol : 2.0 * opts.ds_max;
  double ds = opts.ds;
  double s_total = 0.0;
  curve.termination = "max-points";

  while (static_cast<int>(curve.points.size()) < opts.max_points) {
    const Eigen::Vector3d pred = u + ds * t;
    Eigen::Vector3d v = pred;
    bool ok = false;
    int iters = 0;
    try {
      for (iters = 1; iters <= 10; ++iters) {
        const Eigen::Vector2d r = sys.residual(v);
        const Eigen::Matrix<double, 2, 3> j = sys.jacobian(v);
        Eigen::Matrix3d big;
        big.topRows<2>() = j;
        big.row(2) = t.transpose();
        Eigen::Vector3d rhs_vec(r(0), r(1), t.dot(v - pred));
        const Eigen::Vector3d dv = big.partialPivLu().solve(rhs_vec);
        v -= dv;
        if (!v.allFinite()) break;
        if (sys.residual(v).norm() < opts.corrector_tol && dv.norm() < 1e-9) {
          ok = true;
          break;
        }
      }
    } catch (const Error&) {
      ok = false;
    }
    if (ok && (v - u).norm() > 2.0 * ds) ok = false;
    if (!ok) {
      ds *= 0.5;
      if (ds < opts.ds_min) {
        curve.termination = "step-failure";
        break;
      }
      continue;
    }
    if (!in_bounds(v)) {
      curve.termination = "bounds";
      break;
    }
    if (v(2) <= 1e-6) {
      curve.termination = "omega";
      break;
    }
    Eigen::Vector3d t_new = tangent(sys.jacobian(v));
    if (t_new.dot(t) < 0.0) t_new = -t_new;
    s_total += (v - u).norm();
    u = v;
    t = t_new;
    curve.points.push_back(make_point(u));
    curve.arclength.push_back(s_total);
    if (s_total > 4.0 * loop_tol && (u - u0).norm() < loop_tol) {
      curve.points.push_back(make_point(u0));
      curve.arclength.push_back(s_total + (u - u0).norm());
      curve.termination = "loop";
      break;
    }
    if (iters <= 3) ds = std::min(ds * 1.5, opts.ds_max);
  }

  if (opts.tagger) tag_curve(curve, opts.tagger, opts.probe_stride, opts.workers);
  return curve;
}

HopfCurve continue_hopf_both(const HopfPoint& start, const Plane& plane, const ContinuationOptions& opts) {
  ContinuationOptions half = opts;
  half.tagger = nullptr;
  half.direction = -1;
  HopfCurve back = continue_hopf_2d(start, plane, half);
  HopfCurve curve;
  if (back.termination == "loop") {
    curve = std::move(back);
  } else {
    half.direction = 1;
    HopfCurve fwd = continue_hopf_2d(start, plane, half);
    curve.plane = plane;
    curve.fixed = start.params;
    const double total = back.arclength.back();
    for (std::size_t i = back.points.size(); i-- > 0;) {
      curve.points.push_back(back.points[i]);
      curve.arclength.push_back(total - back.arclength[i]);
    }
    for (std::size_t i = 1; i < fwd.points.size(); ++i) {
      curve.points.push_back(fwd.points[i]);
      curve.arclength.push_back(total + fwd.arclength[i]);
    }
    curve.termination = back.termination + "|" + fwd.termination;
  }
  if (opts.tagger) tag_curve(curve, opts.tagger, opts.probe_stride, opts.workers);
  return curve;
}

void tag_curve(HopfCurve& curve, const Tagger& tagger, int stride, int workers) {
  const std::size_t n = curve.points.size();
  if (n == 0 || !tagger) return;
  if (workers > 0) set_workers(workers);
  const auto st = static_cast<std::size_t>(std::max(1, stride));
  std::vector<std::size_t> probes;
  for (std::size_t i = 0; i < n; i += st) probes.push_back(i);
  if (probes.back() != n - 1) probes.push_back(n - 1);

  std::vector<int> probed(n, 0);
  std::vector<Criticality> tag(n, Criticality::Untagged);
  for_each_index(probes.size(), [&](std::size_t k) { tag[probes[k]] = tagger(curve.points[probes[k]]); });
  for (std::size_t i : probes) probed[i] = 1;

  std::vector<std::size_t> reprobe;
  for (std::size_t k = 0; k + 1 < probes.size(); ++k) {
    const std::size_t i = probes[k], j = probes[k + 1];
    if (tag[i] == tag[j]) {
      for (std::size_t q = i + 1; q < j; ++q) tag[q] = tag[i];
    } else {
      for (std::size_t q = i + 1; q < j; ++q) reprobe.push_back(q);
    }
  }
  for_each_index(reprobe.size(), [&](std::size_t k) { tag[reprobe[k]] = tagger(curve.points[reprobe[k]]); });

  Criticality last = Criticality::Untagged;
  for (std::size_t i = 0; i < n; ++i) {
    curve.points[i].criticality = tag[i];
    curve.points[i].degeneracy = false;
    if (tag[i] == Criticality::Untagged) continue;
    if (last != Criticality::Untagged && tag[i] != last) curve.points[i].degeneracy = true;
    last = tag[i];
  }
}

}  // namespace delaymoc
