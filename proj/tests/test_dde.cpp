#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "delaymoc/attractor.hpp"
#include "delaymoc/dde.hpp"
#include "delaymoc/error.hpp"
#include "delaymoc/stability.hpp"
#include "test_support.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace delaymoc;
using delaymoc::test::at;

namespace {

State rk4_ode(const ModelParams& p, State s, double horizon, double h) {
  const auto f = [&](const State& x) { return rhs(x, x.s1, p); };
  const auto n = static_cast<long>(std::llround(horizon / h));
  for (long i = 0; i < n; ++i) {
    const Derivative k1 = f(s);
    const Derivative k2 = f({s.s1 + 0.5 * h * k1.ds1, s.s2 + 0.5 * h * k1.ds2});
    const Derivative k3 = f({s.s1 + 0.5 * h * k2.ds1, s.s2 + 0.5 * h * k2.ds2});
    const Derivative k4 = f({s.s1 + h * k3.ds1, s.s2 + h * k3.ds2});
    s.s1 += h / 6.0 * (k1.ds1 + 2.0 * k2.ds1 + 2.0 * k3.ds1 + k4.ds1);
    s.s2 += h / 6.0 * (k1.ds2 + 2.0 * k2.ds2 + 2.0 * k3.ds2 + k4.ds2);
  }
  return s;
}

}  // namespace

TEST_CASE("history buffer lookups") {
  SUBCASE("constant history") {
    const HistoryBuffer buf(2.0, 10, {34.5, 35.0}, 100.0);
    for (double t : {80.0, 81.3, 95.0, 100.0}) CHECK(delayed_lookup(buf, t) == 34.5);
  }
  SUBCASE("on-grid and mid-grid queries of a linear history") {
    std::vector<State> samples;
    for (int i = 0; i <= 10; ++i) samples.push_back({1.0 + 0.25 * i, 0.0});
    const HistoryBuffer buf(2.0, samples, 20.0);
    for (int i = 0; i <= 10; ++i) CHECK(delayed_lookup(buf, 2.0 * i) == samples[static_cast<std::size_t>(i)].s1);
    CHECK(delayed_lookup(buf, 3.0) == doctest::Approx(1.375).epsilon(1e-15));
    CHECK(delayed_lookup(buf, 17.5) == doctest::Approx(1.0 + 0.25 * 8.75).epsilon(1e-15));
  }
  SUBCASE("out of window") {
    const HistoryBuffer buf(1.0, 10, {34.5, 35.0}, 10.0);
    try {
      delayed_lookup(buf, -0.5);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::QueryOutOfWindow);
    }
    CHECK_THROWS_AS(delayed_lookup(buf, 10.5), Error);
  }
  SUBCASE("push keeps the window") {
    HistoryBuffer buf(1.0, 3, {0.0, 0.0});
    for (int i = 1; i <= 5; ++i) buf.push({static_cast<double>(i), 0.0});
    CHECK(buf.now() == 5.0);
    const auto w = buf.window();
    REQUIRE(w.size() == 4);
    CHECK(w.front().s1 == 2.0);
    CHECK(w.back().s1 == 5.0);
    CHECK(buf.at_lag(1).s1 == 4.0);
  }
}

TEST_CASE("step adjustment makes tau an integer multiple of h") {
  const double tau = 900.0, h = 0.7;
  const double hu = adjusted_step(tau, h);
  const double n = tau / hu;
  CHECK(std::abs(n - std::round(n)) < 1e-9);
  CHECK(hu <= h);
  CHECK((h - hu) / h < 1.0 / std::round(n));

  const ModelParams p = at(-0.208, 11.0, 900.0);
  const Trajectory tr = integrate(p, primary_equilibrium(p).state, 2000.0, h);
  CHECK(tr.h_adjusted);
  CHECK(tr.h_requested == h);
  CHECK(tr.h_used == hu);
  CHECK(tr.n_tau == static_cast<std::size_t>(std::round(n)));
  CHECK_FALSE(integrate(p, primary_equilibrium(p).state, 2000.0, 1.0).h_adjusted);
  CHECK(default_step(p) == 1.0);
  CHECK(default_step(at(-0.208, 11.0, 450.0)) == 0.5);
}

TEST_CASE("integrate rejects invalid input") {
  const ModelParams p = at(-0.208, 11.0, 900.0);
  const State s = primary_equilibrium(p).state;
  try {
    integrate(p, s, 500.0, 1.0);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::HorizonTooShort);
  }
  try {
    integrate(p, s, 1000.0, 0.0);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidStep);
  }
}

TEST_CASE("equilibrium initial condition stays put") {
  const ModelParams p = at(-0.208, 11.0, 900.0);
  const Equilibrium eq = primary_equilibrium(p);
  const Trajectory tr = integrate(p, eq.state, 1e5, 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i)
    worst = std::max({worst, std::abs(tr.s1[i] - eq.state.s1), std::abs(tr.s2[i] - eq.state.s2)});
  CHECK(worst < 1e-9);
  CHECK(tr.events.empty());
}

TEST_CASE("series are uniform and of equal length") {
  const ModelParams p = at(-0.208, 11.0, 900.0);
  IntegrateOptions o;
  o.stride = 7;
  o.record_from = 1000.0;
  const Trajectory tr = integrate(p, {34.2, 34.55}, 5000.0, 1.0, o);
  REQUIRE(tr.size() > 2);
  CHECK(tr.s1.size() == tr.size());
  CHECK(tr.s2.size() == tr.size());
  CHECK(tr.m.size() == tr.size());
  CHECK(tr.t.front() >= 1000.0);
  for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr.t[i] - tr.t[i - 1] == doctest::Approx(7.0));
}

TEST_CASE("undelayed decay matches the Jacobian eigenvalue") {
  const ModelParams p = at(-0.3, 0.0, 900.0);
  const Equilibrium eq = primary_equilibrium(p);
  const Linearization lin = linearize(p);
  const double lambda = Eigen::EigenSolver<Eigen::Matrix2d>(lin.j0).eigenvalues().real().maxCoeff();
  const Trajectory tr = integrate(p, {eq.state.s1 + 1e-4, eq.state.s2}, 20000.0, 1.0);
  const DecayFit fit = decay_rate(tr, eq.state.s1, 5000.0, 15000.0);
  CHECK(fit.n_peaks >= 3);
  CHECK(std::abs(fit.rate - lambda) <= 0.02 * std::abs(lambda));
}

TEST_CASE("sigma = 0 agrees with a plain ODE integration") {
  const ModelParams p = at(-0.3, 0.0, 900.0);
  const Equilibrium eq = primary_equilibrium(p);
  const State init{eq.state.s1 + 1e-2, eq.state.s2 - 5e-3};
  const Trajectory tr = integrate(p, init, 1e4, 1.0);
  const State ref = rk4_ode(p, init, 1e4, 1.0);
  CHECK(std::abs(tr.s1.back() - ref.s1) < 1e-8);
  CHECK(std::abs(tr.s2.back() - ref.s2) < 1e-8);
}

TEST_CASE("integration is deterministic") {
  const ModelParams p = at(-0.208, 11.0, 900.0);
  const Trajectory a = integrate(p, {34.2, 34.55}, 20000.0, 1.0);
  const Trajectory b = integrate(p, {34.2, 34.55}, 20000.0, 1.0);
  CHECK(a.s1 == b.s1);
  CHECK(a.s2 == b.s2);
  CHECK(a.t == b.t);
}

TEST_CASE("convergence order") {
  SUBCASE("undelayed") {
    const ModelParams p = at(-0.3, 0.0, 900.0);
    const Equilibrium eq = primary_equilibrium(p);
    const ConvergenceReport r = convergence_order(p, {eq.state.s1 + 0.05, eq.state.s2}, 5000.0, 20.0);
    CHECK(r.order == doctest::Approx(4.0).epsilon(0.075));
  }
  SUBCASE("delay active") {
    const ModelParams p = at(-0.208, 11.0, 900.0);
    const Equilibrium eq = primary_equilibrium(p);
    const ConvergenceReport r = convergence_order(p, {eq.state.s1 + 0.01, eq.state.s2}, 5000.0, 20.0);
    CHECK(r.order >= 2.0);
  }
  SUBCASE("linear stage interpolation is second order") {
    const ModelParams p = at(-0.208, 11.0, 900.0);
    const Equilibrium eq = primary_equilibrium(p);
    const ConvergenceReport r =
        convergence_order(p, {eq.state.s1 + 0.01, eq.state.s2}, 5000.0, 10.0, DelayInterpolation::Linear);
    CHECK(r.order == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("no events after the initial delay intervals for a smooth run") {
  const ModelParams p = at(-0.208, 11.0, 900.0);
  const Equilibrium eq = primary_equilibrium(p);
  const Trajectory tr = integrate(p, {eq.state.s1 + 1e-3, eq.state.s2}, 20000.0, 1.0);
  CHECK(tr.events.empty());
  CHECK_FALSE(tr.terminated);
}

TEST_CASE("m-sign crossings are logged without stopping the run") {
  const ModelParams p = at(-0.208, 11.0, 900.0);
  const Trajectory tr = integrate(p, {35.5, 34.6}, 2000.0, 1.0);
  CHECK(tr.has_event(EventKind::MSignCrossing));
  CHECK_FALSE(tr.terminated);
  CHECK(tr.t.back() == doctest::Approx(2000.0));
}

TEST_CASE("inherited history replaces the constant one") {
  const ModelParams p = at(-0.208, 11.0, 900.0);
  const Equilibrium eq = primary_equilibrium(p);
  const Trajectory first = integrate(p, {eq.state.s1 + 1e-3, eq.state.s2}, 4000.0, 1.0);
  IntegrateOptions o;
  o.history = first.final_history;
  const Trajectory second = integrate(p, first.final_history.back(), 2000.0, 1.0, o);
  const Trajectory whole = integrate(p, {eq.state.s1 + 1e-3, eq.state.s2}, 6000.0, 1.0);
  CHECK(second.s1.back() == doctest::Approx(whole.s1.back()).epsilon(1e-12));
  CHECK(second.s2.back() == doctest::Approx(whole.s2.back()).epsilon(1e-12));
}

TEST_CASE("history resampling preserves affine profiles") {
  std::vector<State> donor;
  for (int i = 0; i <= 100; ++i) donor.push_back({0.5 * i, -0.25 * i});
  const auto out = resample_history(donor, 1.0, 40, 2.0);
  REQUIRE(out.size() == 41);
  CHECK(out.back().s1 == doctest::Approx(50.0));
  CHECK(out.front().s1 == doctest::Approx(50.0 - 0.5 * 80.0));
  CHECK(out.front().s2 == doctest::Approx(-25.0 + 0.25 * 80.0));
}
