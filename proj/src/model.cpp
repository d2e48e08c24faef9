#include "delaymoc/model.hpp"

#include "delaymoc/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

namespace delaymoc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingKey: return "MissingKey";
    case ErrorKind::UnknownKey: return "UnknownKey";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::NegativeVolume: return "NegativeVolume";
    case ErrorKind::NegativeDelay: return "NegativeDelay";
    case ErrorKind::InvalidValue: return "InvalidValue";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NoEquilibrium: return "NoEquilibrium";
    case ErrorKind::InvalidStep: return "InvalidStep";
    case ErrorKind::HorizonTooShort: return "HorizonTooShort";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::QueryOutOfWindow: return "QueryOutOfWindow";
    case ErrorKind::EventEncountered: return "EventEncountered";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::EigensolveFailure: return "EigensolveFailure";
    case ErrorKind::NoCrossingInBracket: return "NoCrossingInBracket";
    case ErrorKind::RealRootCrossing: return "RealRootCrossing";
    case ErrorKind::HopfNotVerified: return "HopfNotVerified";
    case ErrorKind::StartNotOnCurve: return "StartNotOnCurve";
    case ErrorKind::CorrectorDivergence: return "CorrectorDivergence";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::PositiveM: return "PositiveM";
    case Branch::NegativeM: return "NegativeM";
    case Branch::Degenerate: return "Degenerate";
  }
  return "Unknown";
}

const std::vector<std::string>& param_keys() {
  static const std::vector<std::string> keys = {"k",      "alpha",  "beta",     "s0",      "vol",
                                                "f1_sv",  "f2_sv",  "t_star",   "sigma_sv", "tau_yr"};
  return keys;
}

namespace {

double& field(ModelParams& p, std::string_view axis, double& scale) {
  scale = 1.0;
  if (axis == "k") return p.k;
  if (axis == "alpha") return p.alpha;
  if (axis == "beta") return p.beta;
  if (axis == "s0") return p.s0;
  if (axis == "vol") return p.vol;
  if (axis == "t_star") return p.t_star;
  if (axis == "tau_yr") return p.tau;
  scale = kSverdrup;
  if (axis == "f1_sv") return p.f1;
  if (axis == "f2_sv") return p.f2;
  if (axis == "sigma_sv") return p.sigma;
  throw Error(ErrorKind::UnknownKey, "unknown parameter '" + std::string(axis) + "'");
}

}  // namespace

bool is_axis(std::string_view axis) {
  return std::find(param_keys().begin(), param_keys().end(), axis) != param_keys().end();
}

double get_axis(const ModelParams& p, std::string_view axis) {
  ModelParams copy = p;
  double scale = 1.0;
  const double v = field(copy, axis, scale);
  return v / scale;
}

ModelParams with_axis(ModelParams p, std::string_view axis, double value) {
  double scale = 1.0;
  double& slot = field(p, axis, scale);
  slot = value * scale;
  return p;
}

void validate(const ModelParams& p) {
  const std::array<double, 10> all = {p.k, p.alpha, p.beta, p.s0, p.vol, p.f1, p.f2, p.t_star, p.sigma, p.tau};
  for (double v : all)
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteValue, "parameter is not finite");
  if (!(p.vol > 0.0)) throw Error(ErrorKind::NegativeVolume, "vol must be > 0");
  if (p.tau < 0.0) throw Error(ErrorKind::NegativeDelay, "tau_yr must be >= 0");
  if (p.sigma < 0.0) throw Error(ErrorKind::InvalidValue, "sigma_sv must be >= 0");
  if (!(p.k > 0.0)) throw Error(ErrorKind::InvalidValue, "k must be > 0");
  if (!(p.beta > 0.0)) throw Error(ErrorKind::InvalidValue, "beta must be > 0");
}

ModelParams make_params(const nlohmann::json& config) {
  if (!config.is_object()) throw Error(ErrorKind::ConfigError, "params must be a JSON object");
  const std::set<std::string> known(param_keys().begin(), param_keys().end());
  for (const auto& item : config.items())
    if (!known.count(item.key())) throw Error(ErrorKind::UnknownKey, "unknown key '" + item.key() + "'");

  ModelParams p;
  for (const auto& key : param_keys()) {
    if (!config.contains(key)) throw Error(ErrorKind::MissingKey, "missing key '" + key + "'");
    const auto& v = config.at(key);
    if (!v.is_number()) throw Error(ErrorKind::NonFiniteValue, "key '" + key + "' is not a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw Error(ErrorKind::NonFiniteValue, "key '" + key + "' is not finite");
    p = with_axis(p, key, x);
  }
  validate(p);
  return p;
}

nlohmann::json params_to_json(const ModelParams& p) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& key : param_keys()) j[key] = get_axis(p, key);
  return j;
}

double steady_residual(const State& s, const ModelParams& p) {
  const Derivative d = rhs(s, s.s1, p);
  return std::max(std::abs(d.ds1), std::abs(d.ds2));
}

namespace {

constexpr double kResidualTol = 1e-12;  // psu / yr

Equilibrium make_equilibrium(const State& s, const ModelParams& p, Branch b) {
  return {s, salt_closure(s, p), transport_m(s, p), b};
}

// Second steady equation solved for S2 given the gradient dS = S2 - S1 and m:
// -S0 F2 + m (3 S0 - 2 S2 + dS - S2) = 0.
State state_from_gradient(double ds, double m, const ModelParams& p) {
  const double s2 = p.s0 + ds / 3.0 - p.s0 * p.f2 / (3.0 * m);
  return {s2 - ds, s2};
}

// Damped Newton on the undelayed steady system.
bool newton_steady(State& s, const ModelParams& p) {
  constexpr int kMaxIter = 100;
  const double kb = p.k * p.beta;
  auto residual = [&](const State& x) {
    const Derivative d = rhs(x, x.s1, p);
    return std::array<double, 2>{d.ds1 * p.vol, d.ds2 * p.vol};
  };
  auto norm = [](const std::array<double, 2>& r) { return std::hypot(r[0], r[1]); };
  const double scale = std::abs(p.s0 * p.f1) + std::abs(p.s0 * p.f2) + 1.0;

  auto r = residual(s);
  for (int it = 0; it < kMaxIter; ++it) {
    if (norm(r) / p.vol < 1e-3 * kResidualTol) return true;
    const double m = transport_m(s, p);
    const double ds = s.s2 - s.s1;
    const double g = salt_closure(s, p) - s.s2;
    const double a11 = -kb * ds - m, a12 = kb * ds + m;
    const double a21 = -kb * g - m, a22 = kb * g - 2.0 * m;
    const double det = a11 * a22 - a12 * a21;
    if (!std::isfinite(det) || det == 0.0) return false;
    const double dx1 = (-r[0] * a22 + r[1] * a12) / det;
    const double dx2 = (-r[1] * a11 + r[0] * a21) / det;
    double lambda = 1.0;
    bool improved = false;
    for (int b = 0; b < 40; ++b) {
      const State trial{s.s1 + lambda * dx1, s.s2 + lambda * dx2};
      const auto rt = residual(trial);
      if (norm(rt) < norm(r) || norm(rt) < 1e-14 * scale) {
        s = trial;
        r = rt;
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) return norm(r) / p.vol < kResidualTol;
  }
  return norm(r) / p.vol < kResidualTol;
}

}  // namespace

std::vector<Equilibrium> equilibria(const ModelParams& p) {
  validate(p);
  std::vector<Equilibrium> out;
  const double kb = p.k * p.beta;

  if (p.t_star == 0.0) {
    if (p.f1 > 0.0) return out;
    const double ds = std::sqrt(-p.s0 * p.f1 / kb);
    if (ds == 0.0) {
      out.push_back(make_equilibrium({p.s0, p.s0}, p, Branch::Degenerate));
      return out;
    }
    const double m = kb * ds;
    out.push_back(make_equilibrium(state_from_gradient(ds, m, p), p, Branch::PositiveM));
    return out;
  }

  const double base = std::sqrt(std::abs(p.s0 * p.f1 / kb));
  const double shift = p.alpha * p.t_star / p.beta;
  const std::array<double, 4> seeds = {base, -base, shift + 0.1, shift - 0.1};
  bool any_converged = false;
  for (double ds : seeds) {
    double m = p.k * (p.beta * ds - p.alpha * p.t_star);
    if (m == 0.0) continue;
    State s = state_from_gradient(ds, m, p);
    if (!newton_steady(s, p)) continue;
    any_converged = true;
    const double m_final = transport_m(s, p);
    if (!(m_final > 0.0)) continue;
    if (steady_residual(s, p) >= kResidualTol) continue;
    const bool duplicate = std::any_of(out.begin(), out.end(), [&](const Equilibrium& e) {
      return std::abs(e.state.s1 - s.s1) < 1e-9 && std::abs(e.state.s2 - s.s2) < 1e-9;
    });
    if (!duplicate) out.push_back(make_equilibrium(s, p, Branch::PositiveM));
  }
  if (!any_converged) throw Error(ErrorKind::NoConvergence, "Newton stagnated from every seed");
  std::sort(out.begin(), out.end(), [](const Equilibrium& a, const Equilibrium& b) { return a.m > b.m; });
  return out;
}

Equilibrium primary_equilibrium(const ModelParams& p) {
  const auto eqs = equilibria(p);
  for (const auto& e : eqs)
    if (e.branch == Branch::PositiveM) return e;
  throw Error(ErrorKind::NoEquilibrium, "no m>0 equilibrium for these parameters");
}

}  // namespace delaymoc
