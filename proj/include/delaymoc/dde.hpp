#pragma once

// Fixed-step method-of-steps RK4 for the constant-delay box model.

#include "delaymoc/model.hpp"

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace delaymoc {

/// Uniformly spaced trailing window [t - tau, t] of model states.
class HistoryBuffer {
 public:
  /// Constant history `init` on [t_now - n_tau * h, t_now].
  HistoryBuffer(double h, std::size_t n_tau, const State& init, double t_now = 0.0);
  /// History from samples ordered oldest to newest; size must be n_tau + 1.
  HistoryBuffer(double h, std::vector<State> samples, double t_now = 0.0);

  double step() const noexcept { return h_; }
  std::size_t delay_steps() const noexcept { return n_tau_; }
  double delay() const noexcept { return static_cast<double>(n_tau_) * h_; }
  double now() const noexcept { return t_now_; }

  /// Sample `lag` steps before now (lag 0 is the newest).
  const State& at_lag(std::size_t lag) const noexcept {
    std::size_t idx = head_ + size_ - lag;
    if (idx >= size_) idx -= size_;
    return ring_[idx];
  }
  const State& newest() const noexcept { return ring_[head_]; }

  /// Appends a sample at now() + h, dropping the oldest.
  void push(const State& s) noexcept;

  /// Samples oldest to newest.
  std::vector<State> window() const;

 private:
  double h_;
  std::size_t n_tau_;
  std::size_t size_;
  std::vector<State> ring_;
  std::size_t head_ = 0;  // index of newest
  double t0_;
  double t_now_;
  std::size_t n_pushed_ = 0;
};

/// Value of s1 at t_query; exact on grid, linear between samples.
double delayed_lookup(const HistoryBuffer& buf, double t_query);

enum class EventKind { MSignCrossing, NonFinite };

std::string_view to_string(EventKind k);

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::MSignCrossing;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<double> s1;
  std::vector<double> s2;
  std::vector<double> m;
  std::vector<Event> events;

  double h_requested = 0.0;
  double h_used = 0.0;
  bool h_adjusted = false;
  std::size_t n_tau = 0;
  double horizon = 0.0;
  bool terminated = false;  // stopped at a NonFinite event

  /// Trailing history window at the final time, oldest to newest.
  std::vector<State> final_history;

  std::size_t size() const noexcept { return t.size(); }
  bool has_event(EventKind k) const;
};

/// Reconstruction of the delayed s1 at half-step RK stages.
enum class DelayInterpolation {
  Linear,  // two bracketing samples, O(h^2)
  Cubic,   // four samples from the window, O(h^4); linear when tau / h < 3
};

struct IntegrateOptions {
  /// Samples before this time are not recorded.
  double record_from = 0.0;
  /// Record every `stride`-th step.
  std::size_t stride = 1;
  /// Inherited history (oldest to newest) replacing the constant one.
  /// Resampled onto the integration grid when its spacing or length differs.
  std::optional<std::vector<State>> history;
  /// Spacing of `history`; 0 means h_used.
  double history_step = 0.0;
  DelayInterpolation interpolation = DelayInterpolation::Cubic;
};

/// Default step: min(1 yr, tau / 900).
double default_step(const ModelParams& p);

/// Largest h_used <= h with tau / h_used integral (h itself when tau = 0).
double adjusted_step(double tau, double h);

Trajectory integrate(const ModelParams& p, const State& init, double horizon, double h,
                     const IntegrateOptions& opts = {});

/// Linear resampling of a window (oldest to newest, spacing `from_step`) onto
/// n + 1 samples at spacing `to_step`, aligned at the newest sample.  Times
/// older than the donor window take its oldest value.
std::vector<State> resample_history(const std::vector<State>& donor, double from_step, std::size_t n,
                                    double to_step);

struct ConvergenceReport {
  double order = 0.0;
  double steps[3] = {0.0, 0.0, 0.0};
  double diff_coarse = 0.0;  // |y(h) - y(h/2)|
  double diff_fine = 0.0;    // |y(h/2) - y(h/4)|
};

/// Richardson order estimate from terminal states at h, h/2, h/4.
ConvergenceReport convergence_order(const ModelParams& p, const State& init, double horizon, double h,
                                    DelayInterpolation interpolation = DelayInterpolation::Cubic);

}  // namespace delaymoc
