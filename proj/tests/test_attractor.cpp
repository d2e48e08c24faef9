#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "delaymoc/attractor.hpp"
#include "delaymoc/error.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>

using namespace delaymoc;
using delaymoc::test::at;

namespace {

Trajectory synthetic(double horizon, double dt, const std::function<double(double)>& s1, double m = 1e14) {
  Trajectory tr;
  for (double t = 0.0; t <= horizon + 1e-9; t += dt) {
    tr.t.push_back(t);
    tr.s1.push_back(s1(t));
    tr.s2.push_back(35.0);
    tr.m.push_back(m);
  }
  tr.horizon = horizon;
  tr.h_used = dt;
  return tr;
}

bool same(const AttractorSummary& a, const AttractorSummary& b) {
  auto eq = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  return a.kind == b.kind && eq(a.amplitude, b.amplitude) && eq(a.s1_max, b.s1_max) && eq(a.period, b.period) &&
         eq(a.mean_state.s1, b.mean_state.s1) && eq(a.mean_state.s2, b.mean_state.s2);
}

}  // namespace

TEST_CASE("peak refinement recovers the true maximum time") {
  std::vector<double> t, y;
  for (int i = 0; i < 200; ++i) {
    t.push_back(i);
    y.push_back(std::cos(2.0 * std::numbers::pi * (i - 0.3) / 50.0));
  }
  const Peaks pk = find_peaks(t, y);
  REQUIRE(pk.t.size() >= 3);
  CHECK(pk.t[0] == doctest::Approx(50.3).epsilon(1e-4));
  for (double h : pk.height) CHECK(h == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("classification of synthetic signals") {
  const ClassifyTolerances tol;
  SUBCASE("steady") {
    const auto s = classify(synthetic(1e5, 10.0, [](double) { return 34.2; }), 5e4, tol);
    CHECK(s.kind == AttractorKind::Steady);
    CHECK(s.amplitude < 1e-6);
  }
  SUBCASE("periodic") {
    const auto s = classify(
        synthetic(1e5, 5.0, [](double t) { return 34.2 + 0.05 * std::sin(2.0 * std::numbers::pi * t / 2100.0); }),
        5e4, tol);
    CHECK(s.kind == AttractorKind::Periodic);
    CHECK(s.period == doctest::Approx(2100.0).epsilon(1e-4));
    CHECK(s.amplitude == doctest::Approx(0.1).epsilon(1e-4));
    CHECK(s.s1_max == doctest::Approx(34.25).epsilon(1e-6));
  }
  SUBCASE("quasiperiodic") {
    const double g = (1.0 + std::sqrt(5.0)) / 2.0;
    const auto s = classify(synthetic(2e5, 5.0,
                                      [&](double t) {
                                        return 34.2 + 0.05 * std::sin(2.0 * std::numbers::pi * t / 2000.0) +
                                               0.02 * std::sin(2.0 * std::numbers::pi * t / (2000.0 * g * 3.0));
                                      }),
                            5e4, tol);
    CHECK(s.kind == AttractorKind::Quasiperiodic);
    CHECK(s.period == 0.0);
  }
  SUBCASE("growing oscillation is not converged") {
    const auto s = classify(synthetic(1e5, 5.0,
                                      [](double t) {
                                        return 34.2 + 1e-3 * std::exp(t / 3e4) *
                                                          std::sin(2.0 * std::numbers::pi * t / 2000.0);
                                      }),
                            5e4, tol);
    CHECK(s.kind == AttractorKind::NonConverged);
  }
  SUBCASE("m below zero after the transient") {
    auto tr = synthetic(1e5, 10.0, [](double) { return 34.2; }, -1e13);
    CHECK(classify(tr, 5e4, tol).kind == AttractorKind::MSignViolated);
    tr.m.assign(tr.m.size(), 1e13);
    tr.events.push_back({6e4, EventKind::MSignCrossing});
    CHECK(classify(tr, 5e4, tol).kind == AttractorKind::MSignViolated);
  }
  SUBCASE("crossing during the transient only") {
    auto tr = synthetic(1e5, 10.0, [](double) { return 34.2; });
    tr.events.push_back({1e3, EventKind::MSignCrossing});
    CHECK(classify(tr, 5e4, tol).kind == AttractorKind::Steady);
  }
  SUBCASE("terminated run") {
    auto tr = synthetic(1e4, 10.0, [](double) { return 34.2; });
    tr.terminated = true;
    tr.events.push_back({1e4, EventKind::NonFinite});
    const auto s = classify(tr, 5e3, tol);
    CHECK(s.kind == AttractorKind::NonConverged);
    CHECK(std::isnan(s.amplitude));
  }
  SUBCASE("too few samples") {
    try {
      classify(synthetic(1e4, 10.0, [](double) { return 34.2; }), 2e4, tol);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::TooFewSamples);
    }
  }
}

TEST_CASE("simulated attractors at reference points") {
  SUBCASE("stable equilibrium") {
    const PointResult r = simulate_point(at(-0.3, 11.0, 900.0), {});
    CHECK(r.summary.kind == AttractorKind::Steady);
    CHECK(r.summary.amplitude < 1e-6);
    CHECK(r.error.empty());
  }
  SUBCASE("time-series point is periodic on a millennial scale") {
    const PointResult r = simulate_point(at(-0.208, 11.0, 900.0), {});
    REQUIRE(r.summary.kind == AttractorKind::Periodic);
    CHECK(r.summary.period >= 1800.0);
    CHECK(r.summary.period <= 10000.0);
    CHECK(r.summary.amplitude == doctest::Approx(0.128287).epsilon(1e-4));
    CHECK(r.summary.period == doctest::Approx(2104.06).epsilon(1e-4));
    CHECK(r.final_history.size() == 901);
  }
}

TEST_CASE("classification is invariant under doubling the horizon") {
  for (auto [f1, s, t] : std::vector<std::tuple<double, double, double>>{{-0.3, 11.0, 900.0},
                                                                         {-0.208, 11.0, 900.0},
                                                                         {-0.21, 9.5, 1100.0},
                                                                         {-0.209, 9.0, 850.0},
                                                                         {-0.22, 10.0, 950.0}}) {
    SimulationOptions a, b;
    b.horizon = 2.0 * a.horizon;
    const auto ka = simulate_point(at(f1, s, t), a).summary;
    const auto kb = simulate_point(at(f1, s, t), b).summary;
    INFO("f1 = " << f1 << ", sigma = " << s << ", tau = " << t);
    CHECK(to_string(ka.kind) == to_string(kb.kind));
    if (ka.kind == AttractorKind::Periodic && kb.kind == AttractorKind::Periodic)
      CHECK(ka.period == doctest::Approx(kb.period).epsilon(1e-3));
  }
}

TEST_CASE("sweep contract") {
  const ModelParams p = at(-0.3, 11.0, 900.0);
  CHECK_THROWS_AS(sweep(p, "f1_sv", {-0.3, -0.29, -0.295}, false), Error);
  CHECK_THROWS_AS(sweep(p, "nope", {-0.3, -0.29}, false), Error);
  const std::vector<double> down{-0.28, -0.29, -0.3};
  const BranchData br = sweep(p, "f1_sv", down, true);
  CHECK(br.direction == SweepDirection::Down);
  CHECK(br.values == down);
  REQUIRE(br.summaries.size() == 3);
  for (const auto& s : br.summaries) CHECK(s.kind == AttractorKind::Steady);
  CHECK(br.errors == std::vector<std::string>(3));
}

TEST_CASE("sweep records per-point failures without aborting") {
  const ModelParams p = at(-0.3, 11.0, 900.0);
  const BranchData br = sweep(p, "f1_sv", {-0.3, 0.05}, false);
  REQUIRE(br.errors.size() == 2);
  CHECK(br.errors[0].empty());
  CHECK_FALSE(br.errors[1].empty());
  CHECK(std::isnan(br.summaries[1].amplitude));
}

TEST_CASE("serial and parallel sweeps are bit-identical") {
  const ModelParams p = at(-0.21, 11.0, 900.0);
  std::vector<double> grid;
  for (int i = 0; i < 6; ++i) grid.push_back(-0.212 + 0.001 * i);
  const BranchData a = sweep(p, "f1_sv", grid, false, {}, Exec::Serial);
  const BranchData b = sweep(p, "f1_sv", grid, false, {}, Exec::Parallel);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(same(a.summaries[i], b.summaries[i]));
}

TEST_CASE("monostable regime has no hysteresis window") {
  const ModelParams p = at(-0.3, 10.0, 950.0);
  const HysteresisResult h = hysteresis_scan(p, "f1_sv", {-0.32, -0.31, -0.30, -0.29});
  CHECK(h.windows.empty());
  CHECK_FALSE(h.fold_estimate);
  CHECK(h.down.values.front() == -0.29);
  CHECK_THROWS_AS(hysteresis_scan(p, "f1_sv", {-0.29, -0.3}), Error);
}

TEST_CASE("periodic runs and torus brackets") {
  BranchData br;
  br.axis = "f1_sv";
  const AttractorKind k[] = {AttractorKind::Steady, AttractorKind::Periodic, AttractorKind::Periodic,
                             AttractorKind::Quasiperiodic, AttractorKind::Periodic};
  for (int i = 0; i < 5; ++i) {
    br.values.push_back(0.1 * i);
    AttractorSummary s;
    s.kind = k[i];
    br.summaries.push_back(s);
  }
  const auto runs = periodic_runs(br);
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].first == 1);
  CHECK(runs[0].last == 2);
  CHECK(runs[0].before == AttractorKind::Steady);
  CHECK(runs[0].after == AttractorKind::Quasiperiodic);
  CHECK(runs[1].at_end);
  const auto tb = torus_bracket(br);
  REQUIRE(tb);
  CHECK(tb->lo == doctest::Approx(0.2));
  CHECK(tb->hi == doctest::Approx(0.3));
}

TEST_CASE("r squared of exact and noisy lines") {
  CHECK(r_squared({1, 2, 3, 4}, {2, 4, 6, 8}) == doctest::Approx(1.0));
  CHECK(r_squared({1, 2, 3, 4}, {1, -1, 1, -1}) < 0.5);
}

TEST_CASE("probe rejects a point that is not a Hopf point") {
  HopfPoint h;
  h.params = at(-0.3, 11.0, 900.0);
  h.omega = 3e-3;
  try {
    criticality_probe(h, "f1_sv");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::HopfNotVerified);
  }
}

TEST_CASE("probe verdicts at the undelayed and delayed Hopf points") {
  SUBCASE("undelayed Hopf is subcritical") {
    const HopfPoint h = locate_hopf_1d(at(-0.2, 0.0, 900.0), "f1_sv", -0.3, -0.2);
    CHECK(criticality_probe(h, "f1_sv").verdict == ProbeVerdict::Subcritical);
  }
  SUBCASE("delayed Hopf is supercritical with square-root amplitudes") {
    const HopfPoint h = locate_hopf_1d(at(-0.2, 11.0, 900.0), "f1_sv", -0.23, -0.208);
    const ProbeResult r = criticality_probe(h, "f1_sv");
    CHECK(r.verdict == ProbeVerdict::Supercritical);
    REQUIRE(r.samples.size() == 4);
    // delta and 4 delta.
    const double ratio = r.samples[0].summary.amplitude / r.samples[2].summary.amplitude;
    CHECK(ratio == doctest::Approx(0.5).epsilon(0.3));
  }
}

TEST_CASE("simulated verdict tracks the linear one away from the boundary") {
  CHECK(simulated_verdict(at(-0.3, 11.0, 900.0)) == Verdict::Stable);
  CHECK(simulated_verdict(at(-0.22, 0.0, 900.0)) == Verdict::Unstable);
}
