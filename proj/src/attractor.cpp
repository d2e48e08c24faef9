#include "delaymoc/attractor.hpp"

#include "delaymoc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace delaymoc {

std::string_view to_string(AttractorKind k) {
  switch (k) {
    case AttractorKind::Steady: return "Steady";
    case AttractorKind::Periodic: return "Periodic";
    case AttractorKind::Quasiperiodic: return "Quasiperiodic";
    case AttractorKind::NonConverged: return "NonConverged";
    case AttractorKind::MSignViolated: return "MSignViolated";
  }
  return "Unknown";
}

std::string_view to_string(SweepDirection d) { return d == SweepDirection::Up ? "up" : "down"; }

std::string_view to_string(ProbeVerdict v) {
  switch (v) {
    case ProbeVerdict::Supercritical: return "Supercritical";
    case ProbeVerdict::Subcritical: return "Subcritical";
    case ProbeVerdict::Inconclusive: return "Inconclusive";
  }
  return "Unknown";
}

Criticality to_criticality(ProbeVerdict v) {
  switch (v) {
    case ProbeVerdict::Supercritical: return Criticality::Supercritical;
    case ProbeVerdict::Subcritical: return Criticality::Subcritical;
    case ProbeVerdict::Inconclusive: return Criticality::Untagged;
  }
  return Criticality::Untagged;
}

namespace {

double mean_of(const std::vector<double>& v, std::size_t from = 0) {
  if (v.size() <= from) return 0.0;
  return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(from), v.end(), 0.0) /
         static_cast<double>(v.size() - from);
}

double cv_of(const std::vector<double>& v, std::size_t from = 0) {
  const std::size_t n = v.size() - from;
  if (n < 2) return std::numeric_limits<double>::infinity();
  const double mu = mean_of(v, from);
  double ss = 0.0;
  for (std::size_t i = from; i < v.size(); ++i) ss += (v[i] - mu) * (v[i] - mu);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  return mu == 0.0 ? std::numeric_limits<double>::infinity() : sd / std::abs(mu);
}

// Least-squares slope and intercept.
std::pair<double, double> line_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return {slope, my - slope * mx};
}

}  // namespace

double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  const auto [slope, icept] = line_fit(x, y);
  const double my = mean_of(y);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = icept + slope * x[i];
    ss_res += (y[i] - f) * (y[i] - f);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
}

Peaks find_peaks(const std::vector<double>& t, const std::vector<double>& y) {
  Peaks pk;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
    const double ym = y[i - 1], y0 = y[i], yp = y[i + 1];
    const double den = ym - 2.0 * y0 + yp;
    double off = 0.0;
    if (den != 0.0) off = std::clamp(0.5 * (ym - yp) / den, -0.5, 0.5);
    const double dt = t[i + 1] - t[i];
    pk.t.push_back(t[i] + off * dt);
    pk.height.push_back(y0 - 0.25 * (ym - yp) * off);
  }
  return pk;
}

namespace {

// Relative change of the s1 range between the two halves of [t_from, t_end].
double range_change(const std::vector<double>& t, const std::vector<double>& s1, double t_from, double t_end) {
  const double mid = 0.5 * (t_from + t_end);
  double lo1 = 1e300, hi1 = -1e300, lo2 = 1e300, hi2 = -1e300;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_from) continue;
    const double v = s1[i];
    if (t[i] < mid) {
      lo1 = std::min(lo1, v);
      hi1 = std::max(hi1, v);
    } else {
      lo2 = std::min(lo2, v);
      hi2 = std::max(hi2, v);
    }
  }
  const double r1 = hi1 - lo1, r2 = hi2 - lo2;
  if (!(r1 > 0.0)) return r2 > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return std::abs(r2 / r1 - 1.0);
}

}  // namespace

AttractorSummary classify(const Trajectory& traj, double t_transient, const ClassifyTolerances& tols) {
  AttractorSummary out;
  const auto first = static_cast<std::size_t>(std::lower_bound(traj.t.begin(), traj.t.end(), t_transient) -
                                              traj.t.begin());
  const bool violated =
      std::any_of(traj.events.begin(), traj.events.end(),
                  [&](const Event& e) { return e.kind == EventKind::MSignCrossing && e.t >= t_transient; }) ||
      std::any_of(traj.m.begin() + static_cast<std::ptrdiff_t>(std::min(first, traj.m.size())), traj.m.end(),
                  [](double m) { return m < 0.0; });
  if (traj.terminated) {
    out.kind = traj.has_event(EventKind::MSignCrossing) ? AttractorKind::MSignViolated : AttractorKind::NonConverged;
    out.amplitude = std::numeric_limits<double>::quiet_NaN();
    out.s1_max = std::numeric_limits<double>::quiet_NaN();
    out.mean_state = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    return out;
  }
  if (traj.size() < first + 3) throw Error(ErrorKind::TooFewSamples, "fewer than 3 samples after the transient");

  const std::vector<double> t(traj.t.begin() + static_cast<std::ptrdiff_t>(first), traj.t.end());
  std::vector<double> s1(traj.s1.begin() + static_cast<std::ptrdiff_t>(first), traj.s1.end());
  const auto [lo, hi] = std::minmax_element(s1.begin(), s1.end());
  out.amplitude = *hi - *lo;
  out.s1_max = *hi;
  out.mean_state = {mean_of(s1), mean_of(std::vector<double>(traj.s2.begin() + static_cast<std::ptrdiff_t>(first),
                                                             traj.s2.end()))};
  if (violated) {
    out.kind = AttractorKind::MSignViolated;
    return out;
  }
  if (out.amplitude < tols.eps_amp) {
    out.kind = AttractorKind::Steady;
    return out;
  }

  for (double& v : s1) v -= out.mean_state.s1;
  const Peaks pk = find_peaks(t, s1);
  out.n_peaks = static_cast<int>(pk.t.size());
  const auto n_tail = static_cast<std::size_t>(tols.n_tail);
  if (pk.t.size() >= n_tail + 1) {
    std::vector<double> intervals(pk.t.size() - 1);
    for (std::size_t i = 0; i + 1 < pk.t.size(); ++i) intervals[i] = pk.t[i + 1] - pk.t[i];
    out.height_cv = cv_of(pk.height, pk.height.size() - n_tail);
    out.interval_cv = cv_of(intervals, intervals.size() - n_tail);
    if (out.height_cv < tols.tol_per && out.interval_cv < tols.tol_per) {
      out.kind = AttractorKind::Periodic;
      out.period = mean_of(intervals, intervals.size() - n_tail);
      return out;
    }
  }
  if (out.n_peaks >= tols.min_quasi_peaks) {
    const std::size_t half = pk.height.size() / 2;
    const double early = mean_of(std::vector<double>(pk.height.begin(), pk.height.begin() + static_cast<std::ptrdiff_t>(half)));
    const double late = mean_of(pk.height, half);
    const double mu = mean_of(pk.height);
    double ss = 0.0;
    for (double v : pk.height) ss += (v - mu) * (v - mu);
    const double sd = std::sqrt(ss / static_cast<double>(pk.height.size()));
    const bool no_drift = std::abs(late - early) <= tols.drift_limit * sd &&
                          range_change(t, s1, t.front(), t.back()) <= tols.drift_limit;
    if (cv_of(pk.height) >= 10.0 * tols.tol_per && no_drift) {
      out.kind = AttractorKind::Quasiperiodic;
      return out;
    }
  }
  out.kind = AttractorKind::NonConverged;
  return out;
}

PointResult simulate_point(const ModelParams& p, const SimulationOptions& opts, const std::vector<State>* inherited,
                           double inherited_step) {
  PointResult res;
  try {
    const double h = opts.h > 0.0 ? opts.h : default_step(p);
    IntegrateOptions io;
    io.record_from = opts.t_transient;
    State init;
    if (inherited && !inherited->empty()) {
      io.history = *inherited;
      io.history_step = inherited_step;
      init = inherited->back();
    } else {
      const Equilibrium eq = primary_equilibrium(p);
      init = {eq.state.s1 + opts.perturbation, eq.state.s2};
    }
    for (;;) {
      Trajectory tr = integrate(p, init, opts.horizon, h, io);
      res.elapsed += opts.horizon;
      res.h_used = tr.h_used;
      res.summary = classify(tr, opts.t_transient, opts.tols);
      const bool final_kind =
          res.summary.kind == AttractorKind::Steady || res.summary.kind == AttractorKind::MSignViolated;
      if (tr.terminated) break;
      res.final_history = std::move(tr.final_history);
      if (final_kind || res.summary.kind == AttractorKind::Quasiperiodic ||
          res.elapsed + opts.horizon > opts.max_horizon || range_change(tr.t, tr.s1, opts.t_transient, tr.horizon) <= opts.settle_tol)
        break;
      io.history = res.final_history;
      io.history_step = tr.h_used;
      init = res.final_history.back();
    }
  } catch (const Error& e) {
    res.error = e.what();
    res.final_history.clear();
    res.summary = AttractorSummary{};
    res.summary.amplitude = std::numeric_limits<double>::quiet_NaN();
    res.summary.s1_max = std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

namespace {

void check_monotone(const std::vector<double>& v) {
  if (v.empty()) throw Error(ErrorKind::InvalidValue, "empty parameter grid");
  if (v.size() < 2) return;
  const bool up = v[1] > v[0];
  for (std::size_t i = 1; i < v.size(); ++i)
    if (up ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1]))
      throw Error(ErrorKind::InvalidValue, "parameter grid is not strictly monotone");
}

}  // namespace

BranchData sweep(const ModelParams& p0, const std::string& axis, const std::vector<double>& values, bool inherit,
                 const SimulationOptions& opts, Exec exec) {
  check_monotone(values);
  if (!is_axis(axis)) throw Error(ErrorKind::UnknownKey, "unknown sweep axis '" + axis + "'");
  BranchData br;
  br.axis = axis;
  br.values = values;
  br.direction = values.size() < 2 || values[1] > values[0] ? SweepDirection::Up : SweepDirection::Down;
  br.summaries.resize(values.size());
  br.errors.resize(values.size());

  auto point_params = [&](std::size_t i) { return with_axis(p0, axis, values[i]); };
  if (inherit) {
    std::vector<State> history;
    double step = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      PointResult r;
      try {
        r = simulate_point(point_params(i), opts, history.empty() ? nullptr : &history, step);
      } catch (const Error& e) {
        r.error = e.what();
      }
      br.summaries[i] = r.summary;
      br.errors[i] = r.error;
      // Escaped or failed points hand no history on.
      history = r.summary.kind == AttractorKind::MSignViolated ? std::vector<State>{} : std::move(r.final_history);
      step = r.h_used;
    }
  } else {
    for_each_index(
        values.size(),
        [&](std::size_t i) {
          PointResult r;
          try {
            r = simulate_point(point_params(i), opts);
          } catch (const Error& e) {
            r.error = e.what();
          }
          br.summaries[i] = r.summary;
          br.errors[i] = r.error;
        },
        exec);
  }
  return br;
}

HysteresisResult hysteresis_scan(const ModelParams& p0, const std::string& axis, const std::vector<double>& values,
                                 const SimulationOptions& opts, Exec exec) {
  check_monotone(values);
  if (values.size() >= 2 && values[1] < values[0])
    throw Error(ErrorKind::InvalidValue, "hysteresis grid must be increasing");
  HysteresisResult res;
  const std::vector<double> reversed(values.rbegin(), values.rend());
  for_each_index(
      2,
      [&](std::size_t which) {
        if (which == 0) res.up = sweep(p0, axis, values, true, opts, Exec::Serial);
        else res.down = sweep(p0, axis, reversed, true, opts, Exec::Serial);
      },
      exec);

  const std::size_t n = values.size();
  std::vector<char> disagree(n, 0);
  const double amp_tol = 10.0 * opts.tols.eps_amp;
  for (std::size_t i = 0; i < n; ++i) {
    const AttractorSummary& u = res.up.summaries[i];
    const AttractorSummary& d = res.down.summaries[n - 1 - i];
    bool differ = u.kind != d.kind;
    // A quasiperiodic range depends on the sampled stretch of the torus.
    if (u.kind == AttractorKind::Quasiperiodic && !differ) {
      disagree[i] = 0;
      continue;
    }
    const bool nan_u = std::isnan(u.amplitude), nan_d = std::isnan(d.amplitude);
    if (nan_u != nan_d) differ = true;
    else if (!nan_u && std::abs(u.amplitude - d.amplitude) > amp_tol) differ = true;
    disagree[i] = differ ? 1 : 0;
  }
  for (std::size_t i = 0; i < n;) {
    if (!disagree[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && disagree[j + 1]) ++j;
    res.windows.push_back({values[i], values[j]});
    i = j + 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!disagree[i]) continue;
    const AttractorSummary& u = res.up.summaries[i];
    const AttractorSummary& d = res.down.summaries[n - 1 - i];
    if (d.kind == AttractorKind::Periodic && u.kind != AttractorKind::Periodic) {
      res.fold_estimate = values[i];
      break;
    }
  }
  return res;
}

std::vector<PeriodicRun> periodic_runs(const BranchData& br) {
  std::vector<PeriodicRun> runs;
  const std::size_t n = br.summaries.size();
  for (std::size_t i = 0; i < n;) {
    if (br.summaries[i].kind != AttractorKind::Periodic) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && br.summaries[j + 1].kind == AttractorKind::Periodic) ++j;
    PeriodicRun r;
    r.first = i;
    r.last = j;
    r.at_start = i == 0;
    r.at_end = j + 1 == n;
    if (!r.at_start) r.before = br.summaries[i - 1].kind;
    if (!r.at_end) r.after = br.summaries[j + 1].kind;
    runs.push_back(r);
    i = j + 1;
  }
  return runs;
}

std::optional<Interval> torus_bracket(const BranchData& br) {
  for (std::size_t i = 0; i + 1 < br.summaries.size(); ++i)
    if (br.summaries[i].kind == AttractorKind::Periodic && br.summaries[i + 1].kind == AttractorKind::Quasiperiodic)
      return Interval{std::min(br.values[i], br.values[i + 1]), std::max(br.values[i], br.values[i + 1])};
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Criticality probe

namespace {

// Real part of the root continued from i*omega at p; NaN when the root cannot
// be followed or p is outside the admissible domain.
double tracked_growth(const ModelParams& p, double omega) {
  try {
    const Linearization lin = linearize(p);
    cplx z(0.0, omega);
    if (!refine_root(z, lin)) return std::numeric_limits<double>::quiet_NaN();
    return z.real();
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

ProbeResult criticality_probe(const HopfPoint& hopf, const std::string& axis, const ProbeOptions& opts, Exec exec) {
  ProbeResult res;
  res.axis = axis;
  {
    const Linearization lin = linearize(hopf.params);
    cplx z(0.0, hopf.omega);
    if (!refine_root(z, lin) || std::abs(z.real()) >= 1e-8 || std::abs(z.imag() - hopf.omega) > 1e-3 * hopf.omega)
      throw Error(ErrorKind::HopfNotVerified, "no root at i*omega within 1e-8");
  }
  if (opts.deltas.empty()) throw Error(ErrorKind::InvalidValue, "no probe deltas");
  std::vector<double> deltas = opts.deltas;
  std::sort(deltas.begin(), deltas.end());

  const double x_h = get_axis(hopf.params, axis);
  const double unit = axis_scale(axis);
  double d_max = deltas.back();
  auto params_at = [&](double signed_delta) { return with_axis(hopf.params, axis, x_h + signed_delta * unit); };

  double g_plus = std::numeric_limits<double>::quiet_NaN(), g_minus = g_plus;
  try {
    g_plus = tracked_growth(params_at(d_max), hopf.omega);
  } catch (const Error&) {
  }
  try {
    g_minus = tracked_growth(params_at(-d_max), hopf.omega);
  } catch (const Error&) {
  }
  if (g_plus > 0.0 && !(g_minus > 0.0)) res.side = 1.0;
  else if (g_minus > 0.0 && !(g_plus > 0.0)) res.side = -1.0;
  else {
    res.note = "no unique unstable side along " + axis;
    return res;
  }

  if (opts.target_growth > 0.0) {
    const double slope = (res.side > 0.0 ? g_plus : g_minus) / d_max;
    const double factor = opts.target_growth / (slope * deltas.front());
    for (double& d : deltas) d *= factor;
    d_max = deltas.back();
  }

  // The small-amplitude orbit is only observable when the Hopf pair is the
  // sole unstable direction on that side and the equilibrium is stable on
  // the other.
  try {
    const RootReport unstable_side = rightmost_roots(linearize(params_at(res.side * d_max)), 8);
    const RootReport stable_side = rightmost_roots(linearize(params_at(-res.side * d_max)), 8);
    if (unstable_count(unstable_side) != 2 || stable_side.verdict != Verdict::Stable) {
      res.note = "other unstable roots present";
      return res;
    }
  } catch (const Error& e) {
    res.note = e.what();
    return res;
  }

  res.samples.resize(deltas.size());
  const double window = std::max(50000.0, 20.0 * 2.0 * std::numbers::pi / hopf.omega);
  for_each_index(
      deltas.size(),
      [&](std::size_t i) {
        ProbeSample& s = res.samples[i];
        s.delta = deltas[i];
        const ModelParams p = params_at(res.side * deltas[i]);
        s.growth_rate = tracked_growth(p, hopf.omega);
        const double g = s.growth_rate > 0.0 ? s.growth_rate : 1e-12;
        s.horizon = std::clamp(opts.growth_factor / g, opts.min_horizon, opts.max_horizon);
        SimulationOptions so;
        so.horizon = s.horizon;
        so.t_transient = s.horizon - window;
        so.perturbation = opts.perturbation;
        so.tols = opts.tols;
        const PointResult r = simulate_point(p, so);
        s.summary = r.summary;
      },
      exec);

  const auto& s = res.samples;
  auto escaped = [](const ProbeSample& x) { return x.summary.kind == AttractorKind::MSignViolated; };
  if (escaped(s.front())) {
    res.verdict = ProbeVerdict::Subcritical;
    res.note = "escape at the smallest offset";
    return res;
  }
  std::size_t prefix = 0;
  while (prefix < s.size() && s[prefix].summary.kind == AttractorKind::Periodic) ++prefix;
  if (prefix < 2) {
    res.note = "fewer than two periodic samples";
    return res;
  }
  bool sqrt_ok = true;
  for (std::size_t i = 0; i + 1 < prefix; ++i) {
    const double ratio = s[i].summary.amplitude / s[i + 1].summary.amplitude;
    const double expected = std::sqrt(s[i].delta / s[i + 1].delta);
    if (std::abs(ratio / expected - 1.0) > opts.sqrt_tolerance) sqrt_ok = false;
  }
  if (sqrt_ok) {
    res.verdict = ProbeVerdict::Supercritical;
    return res;
  }
  if (s.front().summary.amplitude >= opts.persist_ratio * s[prefix - 1].summary.amplitude) {
    res.verdict = ProbeVerdict::Subcritical;
    res.note = "amplitude does not vanish as the offset shrinks";
    return res;
  }
  res.note = "amplitudes follow neither scaling";
  return res;
}

Tagger make_probe_tagger(const std::string& axis, const ProbeOptions& opts) {
  return [axis, opts](const HopfPoint& h) {
    try {
      return to_criticality(criticality_probe(h, axis, opts, Exec::Serial).verdict);
    } catch (const Error&) {
      return Criticality::Untagged;
    }
  };
}

std::string choose_probe_axis(const HopfPoint& hopf, const std::vector<std::string>& axes) {
  std::string best;
  double best_slope = -1.0;
  for (const auto& axis : axes) {
    const double x = get_axis(hopf.params, axis);
    const double eps = 1e-5 * axis_scale(axis);
    double g_hi = std::numeric_limits<double>::quiet_NaN(), g_lo = g_hi;
    try {
      g_hi = tracked_growth(with_axis(hopf.params, axis, x + eps), hopf.omega);
      g_lo = tracked_growth(with_axis(hopf.params, axis, x - eps), hopf.omega);
    } catch (const Error&) {
      continue;
    }
    const double slope = std::abs(g_hi - g_lo);
    if (std::isfinite(slope) && slope > best_slope) {
      best_slope = slope;
      best = axis;
    }
  }
  if (best.empty()) throw Error(ErrorKind::HopfNotVerified, "no admissible probe axis");
  return best;
}

Tagger make_adaptive_probe_tagger(const std::vector<std::string>& axes, const ProbeOptions& opts) {
  return [axes, opts](const HopfPoint& h) {
    try {
      return to_criticality(criticality_probe(h, choose_probe_axis(h, axes), opts, Exec::Serial).verdict);
    } catch (const Error&) {
      return Criticality::Untagged;
    }
  };
}

DecayFit decay_rate(const Trajectory& traj, double s1_ref, double t_from, double t_to) {
  std::vector<double> t, y;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.t[i] < t_from || traj.t[i] > t_to) continue;
    t.push_back(traj.t[i]);
    y.push_back(traj.s1[i] - s1_ref);
  }
  DecayFit fit;
  const Peaks pk = find_peaks(t, y);
  std::vector<double> pt, lh;
  for (std::size_t i = 0; i < pk.t.size(); ++i)
    if (pk.height[i] > 0.0) {
      pt.push_back(pk.t[i]);
      lh.push_back(std::log(pk.height[i]));
    }
  if (pt.size() >= 3) {
    fit.rate = line_fit(pt, lh).first;
    fit.n_peaks = static_cast<int>(pt.size());
    return fit;
  }
  std::vector<double> tt, ly;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (y[i] != 0.0) {
      tt.push_back(t[i]);
      ly.push_back(std::log(std::abs(y[i])));
    }
  fit.rate = tt.size() >= 2 ? line_fit(tt, ly).first : 0.0;
  return fit;
}

Verdict simulated_verdict(const ModelParams& p, double horizon, double perturbation) {
  const Equilibrium eq = primary_equilibrium(p);
  const double window = 20000.0;
  const double early_from = std::max(2.0 * p.tau, 5000.0);
  const Trajectory tr = integrate(p, {eq.state.s1 + perturbation, eq.state.s2}, horizon, default_step(p));
  if (tr.terminated || tr.has_event(EventKind::MSignCrossing)) return Verdict::Unstable;
  double e_lo = 1e300, e_hi = -1e300, l_lo = 1e300, l_hi = -1e300;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double v = tr.s1[i];
    if (tr.t[i] >= early_from && tr.t[i] <= early_from + window) {
      e_lo = std::min(e_lo, v);
      e_hi = std::max(e_hi, v);
    }
    if (tr.t[i] >= tr.horizon - window) {
      l_lo = std::min(l_lo, v);
      l_hi = std::max(l_hi, v);
    }
  }
  const double early = e_hi - e_lo, late = l_hi - l_lo;
  if (late < 0.5 * early) return Verdict::Stable;
  if (late > 2.0 * early) return Verdict::Unstable;
  return Verdict::Marginal;
}

}  // namespace delaymoc
