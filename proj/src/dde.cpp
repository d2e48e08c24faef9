#include "delaymoc/dde.hpp"

#include "delaymoc/error.hpp"

#include <algorithm>
#include <cmath>

namespace delaymoc {

HistoryBuffer::HistoryBuffer(double h, std::size_t n_tau, const State& init, double t_now)
    : h_(h), n_tau_(n_tau), size_(n_tau + 1), ring_(n_tau + 1, init), head_(n_tau), t0_(t_now), t_now_(t_now) {}

HistoryBuffer::HistoryBuffer(double h, std::vector<State> samples, double t_now)
    : h_(h), n_tau_(samples.empty() ? 0 : samples.size() - 1), size_(samples.size()), ring_(std::move(samples)),
      head_(size_ - 1), t0_(t_now), t_now_(t_now) {
  if (ring_.empty()) throw Error(ErrorKind::InvalidValue, "history needs at least one sample");
}

void HistoryBuffer::push(const State& s) noexcept {
  head_ = head_ + 1 == size_ ? 0 : head_ + 1;
  ring_[head_] = s;
  ++n_pushed_;
  t_now_ = t0_ + static_cast<double>(n_pushed_) * h_;
}

std::vector<State> HistoryBuffer::window() const {
  std::vector<State> out(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = at_lag(n_tau_ - i);
  return out;
}

double delayed_lookup(const HistoryBuffer& buf, double t_query) {
  const double n = static_cast<double>(buf.delay_steps());
  const double u = (t_query - (buf.now() - buf.delay())) / buf.step();
  if (u < -1e-9 || u > n + 1e-9)
    throw Error(ErrorKind::QueryOutOfWindow, "delayed lookup outside [t - tau, t]");
  const double nearest = std::round(u);
  if (std::abs(u - nearest) < 1e-9) {
    return buf.at_lag(buf.delay_steps() - static_cast<std::size_t>(nearest)).s1;
  }
  const auto j = static_cast<std::size_t>(std::floor(u));
  const double frac = u - static_cast<double>(j);
  const double a = buf.at_lag(buf.delay_steps() - j).s1;
  const double b = buf.at_lag(buf.delay_steps() - j - 1).s1;
  return a + frac * (b - a);
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::MSignCrossing: return "MSignCrossing";
    case EventKind::NonFinite: return "NonFinite";
  }
  return "Unknown";
}

bool Trajectory::has_event(EventKind k) const {
  return std::any_of(events.begin(), events.end(), [k](const Event& e) { return e.kind == k; });
}

double default_step(const ModelParams& p) {
  return p.tau > 0.0 ? std::min(1.0, p.tau / 900.0) : 1.0;
}

double adjusted_step(double tau, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::InvalidStep, "step must be positive and finite");
  if (tau == 0.0) return h;
  const double ratio = tau / h;
  // Tolerate round-off in exact divisors such as 900 / 0.25.
  const double n = std::abs(ratio - std::round(ratio)) < 1e-9 * ratio ? std::round(ratio) : std::ceil(ratio);
  return tau / std::max(1.0, n);
}

std::vector<State> resample_history(const std::vector<State>& donor, double from_step, std::size_t n,
                                    double to_step) {
  if (donor.empty()) throw Error(ErrorKind::InvalidValue, "empty donor history");
  std::vector<State> out(n + 1);
  const double last = static_cast<double>(donor.size() - 1);
  for (std::size_t j = 0; j <= n; ++j) {
    const double age = static_cast<double>(n - j) * to_step;  // time before newest
    const double pos = last - age / from_step;              // donor index
    if (pos <= 0.0) {
      out[j] = donor.front();
      continue;
    }
    const double fl = std::floor(pos);
    const auto i = static_cast<std::size_t>(fl);
    const double frac = pos - fl;
    if (i + 1 >= donor.size() || frac < 1e-12) {
      out[j] = donor[std::min(i, donor.size() - 1)];
      continue;
    }
    out[j] = {donor[i].s1 + frac * (donor[i + 1].s1 - donor[i].s1),
              donor[i].s2 + frac * (donor[i + 1].s2 - donor[i].s2)};
  }
  return out;
}

Trajectory integrate(const ModelParams& p, const State& init, double horizon, double h,
                     const IntegrateOptions& opts) {
  validate(p);
  if (!(horizon >= p.tau)) throw Error(ErrorKind::HorizonTooShort, "horizon must be >= tau");
  if (opts.stride == 0) throw Error(ErrorKind::InvalidStep, "stride must be >= 1");

  Trajectory tr;
  tr.h_requested = h;
  tr.h_used = adjusted_step(p.tau, h);
  tr.h_adjusted = tr.h_used != h;
  const double hs = tr.h_used;
  const std::size_t n_tau = p.tau > 0.0 ? static_cast<std::size_t>(std::llround(p.tau / hs)) : 0;
  tr.n_tau = n_tau;
  const auto n_steps = static_cast<std::size_t>(std::llround(horizon / hs));
  tr.horizon = static_cast<double>(n_steps) * hs;

  HistoryBuffer buf = [&] {
    if (!opts.history) return HistoryBuffer(hs, n_tau, init);
    const double from = opts.history_step > 0.0 ? opts.history_step : hs;
    if (opts.history->size() == n_tau + 1 && from == hs) return HistoryBuffer(hs, *opts.history);
    return HistoryBuffer(hs, resample_history(*opts.history, from, n_tau, hs));
  }();

  const std::size_t first_recorded =
      opts.record_from <= 0.0 ? 0 : static_cast<std::size_t>(std::ceil(opts.record_from / hs - 1e-9));
  const std::size_t expected = n_steps >= first_recorded ? (n_steps - first_recorded) / opts.stride + 1 : 0;
  tr.t.reserve(expected);
  tr.s1.reserve(expected);
  tr.s2.reserve(expected);
  tr.m.reserve(expected);

  auto record = [&](std::size_t i, const State& s) {
    if (i < first_recorded || i % opts.stride != 0) return;
    tr.t.push_back(static_cast<double>(i) * hs);
    tr.s1.push_back(s.s1);
    tr.s2.push_back(s.s2);
    tr.m.push_back(transport_m(s, p));
  };

  State x = buf.newest();
  record(0, x);
  double m_prev = transport_m(x, p);
  const double half = 0.5 * hs;
  const bool cubic = opts.interpolation == DelayInterpolation::Cubic && n_tau >= 3;

  for (std::size_t i = 0; i < n_steps; ++i) {
    double d0 = 0.0, d1 = 0.0, dm = 0.0;  // unused when tau = 0
    if (n_tau > 0) {
      d0 = buf.at_lag(n_tau).s1;
      d1 = buf.at_lag(n_tau - 1).s1;
      // Constant initial histories are exact under the linear rule; the cubic
      // stencil must not straddle the junction at t = 0.
      dm = cubic && (opts.history || i >= n_tau)
               ? (5.0 * d0 + 15.0 * d1 - 5.0 * buf.at_lag(n_tau - 2).s1 + buf.at_lag(n_tau - 3).s1) / 16.0
               : 0.5 * (d0 + d1);
    }
    auto delayed = [&](double stage_s1, double v) { return n_tau > 0 ? v : stage_s1; };

    const Derivative k1 = rhs(x, delayed(x.s1, d0), p);
    const State x2{x.s1 + half * k1.ds1, x.s2 + half * k1.ds2};
    const Derivative k2 = rhs(x2, delayed(x2.s1, dm), p);
    const State x3{x.s1 + half * k2.ds1, x.s2 + half * k2.ds2};
    const Derivative k3 = rhs(x3, delayed(x3.s1, dm), p);
    const State x4{x.s1 + hs * k3.ds1, x.s2 + hs * k3.ds2};
    const Derivative k4 = rhs(x4, delayed(x4.s1, d1), p);

    const State next{x.s1 + hs / 6.0 * (k1.ds1 + 2.0 * k2.ds1 + 2.0 * k3.ds1 + k4.ds1),
                     x.s2 + hs / 6.0 * (k1.ds2 + 2.0 * k2.ds2 + 2.0 * k3.ds2 + k4.ds2)};
    const double t_next = static_cast<double>(i + 1) * hs;
    if (!std::isfinite(next.s1) || !std::isfinite(next.s2)) {
      tr.events.push_back({t_next, EventKind::NonFinite});
      tr.terminated = true;
      break;
    }
    const double m_next = transport_m(next, p);
    if ((m_prev > 0.0) != (m_next > 0.0)) tr.events.push_back({t_next, EventKind::MSignCrossing});
    m_prev = m_next;
    buf.push(next);
    x = next;
    record(i + 1, x);
  }
  tr.final_history = buf.window();
  return tr;
}

ConvergenceReport convergence_order(const ModelParams& p, const State& init, double horizon, double h,
                                    DelayInterpolation interpolation) {
  ConvergenceReport rep;
  const double h0 = adjusted_step(p.tau, h);
  // Every level ends at the same multiple of h0.
  const double end = std::max(1.0, std::round(horizon / h0)) * h0;
  State terminal[3];
  for (int level = 0; level < 3; ++level) {
    const double hl = h0 / static_cast<double>(1 << level);
    rep.steps[level] = hl;
    IntegrateOptions opts;
    opts.record_from = end;
    opts.interpolation = interpolation;
    const Trajectory tr = integrate(p, init, end, hl, opts);
    if (!tr.events.empty()) throw Error(ErrorKind::EventEncountered, "event during convergence run");
    terminal[level] = tr.final_history.back();
  }
  auto dist = [](const State& a, const State& b) { return std::max(std::abs(a.s1 - b.s1), std::abs(a.s2 - b.s2)); };
  rep.diff_coarse = dist(terminal[0], terminal[1]);
  rep.diff_fine = dist(terminal[1], terminal[2]);
  rep.order = std::log2(rep.diff_coarse / rep.diff_fine);
  return rep;
}

}  // namespace delaymoc
