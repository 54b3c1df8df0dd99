#ifndef TUNNEL_TIME_SCENARIO_HPP
#define TUNNEL_TIME_SCENARIO_HPP

// JSON scenario files for the command-line tool. See docs/scenario.md for
// the schema.

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "tunnel_time/kinematics.hpp"
#include "tunnel_time/perturbation.hpp"
#include "tunnel_time/phases.hpp"
#include "tunnel_time/potential.hpp"
#include "tunnel_time/tdse.hpp"

namespace tunnel_time {

using json = nlohmann::json;

/// Malformed or inconsistent configuration (exit code 2 in the CLI).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline json default_scenario() {
  return json::parse(R"({
    "potential": {"kind": "eckart", "height": 40.0, "width": 2.0},
    "energy": 20.0,
    "mass": 1.0,
    "arrival": {"t": 0.0},
    "perturbation": {
      "profile": {"kind": "step", "w0": 0.1, "region": "barrier"},
      "envelope": {"kind": "gaussian_train", "first": -3, "last": 3, "beta": 1.0,
                   "period": "auto", "width": "auto"}
    },
    "table1": {"first": -3, "last": 3, "width_ratio": 3.0, "w0": 0.1,
               "allowed": {"energy": 50.0, "region": [-2.0, 2.0]}},
    "adiabatic": {"omega_T": [0.001, 0.00177827941004, 0.00316227766017, 0.00562341325190, 0.01,
                              0.0177827941004, 0.0316227766017, 0.0562341325190, 0.1]},
    "trajectory": {"samples": 100},
    "tdse": {
      "grid": {"x_min": -330.0, "x_max": 150.0, "n_points": 8192, "dt": 0.004},
      "packet": {"x0": -90.0, "sigma_p_over_p0": 0.01},
      "x_end": 95.0,
      "x_probe": 60.0,
      "x_cut": 30.0,
      "record_stride": 100,
      "perturbation": {
        "profile": {"kind": "step", "w0": 0.2, "region": "barrier", "ramp": 0.5},
        "envelope": {"kind": "constant", "value": 1.0}
      }
    }
  })");
}

/// Applies "/json/pointer=value"; the value is parsed as JSON and taken as a
/// plain string when that fails.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like /path=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  try {
    doc[json::json_pointer(path)] = value;
  } catch (const json::exception& e) {
    throw ConfigError("bad override path " + path + ": " + e.what());
  }
}

/// Recursively overlays `patch` onto `base`.
inline void merge_into(json& base, const json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key())) {
      merge_into(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

inline json load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigError("cannot open scenario " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario parse error: ") + e.what());
  }
}

namespace detail {

inline double num(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  if (!j.at(key).is_number()) throw ConfigError(std::string("field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

inline double num_or(const json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string("field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

inline std::string str(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) throw ConfigError(std::string("field '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

}  // namespace detail

inline Potential parse_potential(const json& j) {
  const std::string kind = detail::str(j, "kind");
  try {
    if (kind == "eckart") return Potential::eckart(detail::num(j, "height"), detail::num(j, "width"));
    if (kind == "rectangular") {
      return Potential::rectangular(detail::num(j, "height"), detail::num(j, "left"), detail::num(j, "right"));
    }
    if (kind == "free") return Potential::free();
    if (kind == "tabulated") {
      if (j.contains("file")) return load_tabulated_csv(detail::str(j, "file"));
      return Potential::tabulated(j.at("x").get<std::vector<double>>(), j.at("v").get<std::vector<double>>());
    }
  } catch (const Error& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("potential: ") + e.what());
  }
  throw ConfigError("unknown potential kind '" + kind + "'");
}

/// Values the envelope and profile JSON may defer to the physics ("auto",
/// "barrier").
struct ScenarioContext {
  TurningPoints turning;
  std::optional<double> period;  // |T| or T_ab for "auto" trains
};

inline std::pair<double, double> parse_region(const json& j, const ScenarioContext& ctx) {
  if (j.is_string() && j.get<std::string>() == "barrier") {
    if (ctx.turning.regime != Regime::Forbidden) {
      throw ConfigError("region \"barrier\" needs a tunnelling energy");
    }
    return {ctx.turning.lower, ctx.turning.upper};
  }
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  throw ConfigError("region must be [a, b] or \"barrier\"");
}

/// Step with raised-cosine shoulders of width `ramp` outside [lo, hi].
inline SpatialProfile ramped_step(double w0, double lo, double hi, double ramp) {
  auto f = [=](double x) {
    const double s = x < lo ? lo - x : (x > hi ? x - hi : 0.0);
    if (s <= 0.0) return w0;
    return s < ramp ? w0 * 0.5 * (1.0 + std::cos(std::numbers::pi * s / ramp)) : 0.0;
  };
  auto df = [=](double x) {
    const double s = x < lo ? lo - x : (x > hi ? x - hi : 0.0);
    if (s <= 0.0 || s >= ramp) return 0.0;
    const double d = -w0 * 0.5 * std::numbers::pi / ramp * std::sin(std::numbers::pi * s / ramp);
    return x < lo ? -d : d;
  };
  return SpatialProfile(SmoothProfile{f, df}, lo - ramp, hi + ramp);
}

inline SpatialProfile parse_profile(const json& j, const ScenarioContext& ctx) {
  const std::string kind = detail::str(j, "kind");
  try {
    if (kind == "step") {
      const double w0 = detail::num(j, "w0");
      const auto [a, b] = parse_region(j.at("region"), ctx);
      const double ramp = detail::num_or(j, "ramp", 0.0);
      if (ramp < 0.0) throw ConfigError("ramp must be >= 0");
      return ramp > 0.0 ? ramped_step(w0, a, b, ramp) : SpatialProfile::step(w0, a, b);
    }
    if (kind == "gaussian") {
      const double w0 = detail::num(j, "w0"), c = detail::num(j, "center"), s = detail::num(j, "width");
      if (!(s > 0.0)) throw ConfigError("gaussian profile width must be > 0");
      auto f = [=](double x) { return w0 * std::exp(-(x - c) * (x - c) / (s * s)); };
      auto df = [=](double x) { return -2.0 * (x - c) / (s * s) * w0 * std::exp(-(x - c) * (x - c) / (s * s)); };
      double a = c - 4.0 * s, b = c + 4.0 * s;
      if (j.contains("region")) std::tie(a, b) = parse_region(j.at("region"), ctx);
      return SpatialProfile(SmoothProfile{f, df}, a, b);
    }
  } catch (const Error& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("profile: ") + e.what());
  }
  throw ConfigError("unknown profile kind '" + kind + "'");
}

inline Envelope parse_envelope(const json& j, const ScenarioContext& ctx) {
  const std::string kind = detail::str(j, "kind");
  Envelope env;
  if (kind == "constant") {
    env = ConstantEnvelope{detail::num_or(j, "value", 1.0)};
  } else if (kind == "harmonic") {
    env = HarmonicEnvelope{detail::num(j, "frequency"), detail::num_or(j, "phase", 0.0)};
  } else if (kind == "gaussian_train") {
    GaussianTrain train;
    if (j.contains("pulses")) {
      for (const auto& p : j.at("pulses")) {
        train.pulses.push_back({p.value("n", 0), detail::num_or(p, "beta", 1.0), detail::num(p, "center"),
                                detail::num(p, "width")});
      }
    } else {
      auto resolve = [&](const char* key, std::optional<double> fallback) -> double {
        if (j.contains(key) && j.at(key).is_number()) return j.at(key).get<double>();
        if (!fallback) throw ConfigError(std::string("cannot resolve \"auto\" for ") + key);
        return *fallback;
      };
      const double period = resolve("period", ctx.period);
      const double ratio = detail::num_or(j, "width_ratio", 3.0);
      const double width = resolve("width", period / ratio);
      train = GaussianTrain::uniform(j.value("first", -3), j.value("last", 3), detail::num_or(j, "beta", 1.0), period,
                                     width, detail::num_or(j, "offset", 0.0));
    }
    env = train;
  } else {
    throw ConfigError("unknown envelope kind '" + kind + "'");
  }
  try {
    validate(env);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return env;
}

struct TdseSettings {
  Grid grid;
  WavePacket packet;
  double x_probe;
  double x_cut;
  std::size_t record_stride;
  std::optional<Perturbation> perturbation;
};

struct Scenario {
  json doc;
  Potential potential;
  double energy;
  double mass;
  TurningPoints turning;
  ScatterSetup setup;  // arrival resolved
  std::optional<Perturbation> perturbation;

  /// Pulse-train schedule for the ratio table.
  PulseScenario table_allowed() const;
  PulseScenario table_forbidden() const;
  TdseSettings tdse() const;
};

namespace detail {

inline ScenarioContext context_for(const Potential& pot, double energy, double mass,
                                   std::optional<std::pair<double, double>> allowed_region) {
  ScenarioContext ctx;
  try {
    ctx.turning = turning_points(pot, energy, mass);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  ScatterSetup s{pot, energy, mass, {0.0, 0.0}, std::nullopt};
  if (ctx.turning.regime == Regime::Forbidden) {
    ctx.period = traversal_time_forbidden(s).value.imag();
  } else if (allowed_region) {
    try {
      ctx.period = traversal_time_allowed(s, allowed_region->first, allowed_region->second).value.real();
    } catch (const Error&) {
    }
  }
  return ctx;
}

inline std::optional<std::pair<double, double>> explicit_region(const json& pert) {
  if (!pert.is_object() || !pert.contains("profile")) return std::nullopt;
  const json& r = pert["profile"].value("region", json());
  if (r.is_array() && r.size() == 2 && r[0].is_number() && r[1].is_number()) {
    return std::make_pair(r[0].get<double>(), r[1].get<double>());
  }
  return std::nullopt;
}

inline std::optional<Perturbation> parse_perturbation(const json& j, const ScenarioContext& ctx) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_object() || !j.contains("profile") || !j.contains("envelope")) {
    throw ConfigError("perturbation needs 'profile' and 'envelope'");
  }
  SpatialProfile w = parse_profile(j["profile"], ctx);
  Envelope e = parse_envelope(j["envelope"], ctx);
  return Perturbation(std::move(w), std::move(e));
}

}  // namespace detail

inline Scenario parse_scenario(const json& doc) {
  if (!doc.is_object()) throw ConfigError("scenario must be a JSON object");
  Scenario sc{doc, Potential::free(), 0.0, 0.0, {}, {}, std::nullopt};
  sc.potential = parse_potential(doc.value("potential", json::object({{"kind", "free"}})));
  sc.energy = detail::num(doc, "energy");
  sc.mass = detail::num_or(doc, "mass", 1.0);
  if (!(sc.energy > 0.0) || !(sc.mass > 0.0)) throw ConfigError("energy and mass must be positive");
  const json pert_doc = doc.value("perturbation", json());
  const auto ctx = detail::context_for(sc.potential, sc.energy, sc.mass, detail::explicit_region(pert_doc));
  sc.turning = ctx.turning;
  sc.perturbation = detail::parse_perturbation(pert_doc, ctx);

  const json arrival = doc.value("arrival", json::object());
  double x;
  if (arrival.contains("x") && arrival["x"].is_number()) {
    x = arrival["x"].get<double>();
  } else {
    // Default arrival: the exit point or the far edge of the region, whichever
    // lies further downstream.
    x = sc.turning.regime == Regime::Forbidden ? sc.turning.upper : sc.potential.support().hi;
    if (sc.perturbation) {
      x = sc.turning.regime == Regime::Forbidden ? std::max(x, sc.perturbation->spatial().b())
                                                 : sc.perturbation->spatial().b();
    }
  }
  sc.setup = ScatterSetup{sc.potential, sc.energy, sc.mass, {x, detail::num_or(arrival, "t", 0.0)}, std::nullopt};
  if (doc.contains("x_min") && doc["x_min"].is_number()) sc.setup.x_min = doc["x_min"].get<double>();
  try {
    sc.setup.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (sc.turning.regime == Regime::Forbidden && x < sc.turning.upper) {
    throw ConfigError("arrival must lie downstream of the exit point x> = " + std::to_string(sc.turning.upper));
  }

  // Pulse-train constraints dt < T and T <= T_ab.
  if (sc.perturbation) {
    if (const auto* tr = std::get_if<GaussianTrain>(&sc.perturbation->temporal()); tr && tr->pulses.size() > 1) {
      const double T = tr->pulses[1].center - tr->pulses[0].center;
      for (const auto& p : tr->pulses) {
        if (!(p.width < T)) throw ConfigError("pulse width must be shorter than the pulse spacing");
      }
      if (ctx.period && T > *ctx.period * (1.0 + 1e-12)) {
        throw ConfigError("pulse spacing must not exceed the traversal time");
      }
    }
  }
  return sc;
}

inline PulseScenario Scenario::table_forbidden() const {
  const json t = doc.value("table1", json::object());
  try {
    return forbidden_pulse_scenario(potential, energy, mass, detail::num_or(t, "w0", 0.1), t.value("first", -3),
                                    t.value("last", 3), detail::num_or(t, "width_ratio", 3.0));
  } catch (const Error& e) {
    throw ConfigError(std::string("table1: ") + e.what());
  }
}

inline PulseScenario Scenario::table_allowed() const {
  const json t = doc.value("table1", json::object());
  const json a = t.value("allowed", json::object());
  const double e = detail::num_or(a, "energy", 2.5 * std::max(energy, potential.max_value() / 2.0));
  double lo = -2.0, hi = 2.0;
  if (a.contains("region")) {
    ScenarioContext ctx;
    std::tie(lo, hi) = parse_region(a["region"], ctx);
  }
  try {
    return allowed_pulse_scenario(potential, e, mass, lo, hi, detail::num_or(t, "w0", 0.1), t.value("first", -3),
                                  t.value("last", 3), detail::num_or(t, "width_ratio", 3.0));
  } catch (const Error& err) {
    throw ConfigError(std::string("table1 allowed column: ") + err.what());
  }
}

inline TdseSettings Scenario::tdse() const {
  const json t = doc.value("tdse", json::object());
  const json g = t.value("grid", json::object());
  const json p = t.value("packet", json::object());
  TdseSettings s{};
  const double p0 = std::sqrt(2.0 * mass * energy);
  s.packet.p0 = p0;
  s.packet.x0 = detail::num_or(p, "x0", -90.0);
  if (p.contains("sigma_x")) {
    s.packet.sigma_x = detail::num(p, "sigma_x");
  } else {
    s.packet.sigma_x = 1.0 / (2.0 * detail::num_or(p, "sigma_p_over_p0", 0.01) * p0);
  }
  s.grid.x_min = detail::num_or(g, "x_min", -330.0);
  s.grid.x_max = detail::num_or(g, "x_max", 150.0);
  s.grid.n_points = static_cast<std::size_t>(detail::num_or(g, "n_points", 8192));
  s.grid.dt = detail::num_or(g, "dt", 0.004);
  const double x_end = detail::num_or(t, "x_end", 95.0);
  s.grid.t_max = detail::num_or(g, "t_max", (x_end - s.packet.x0) * mass / p0);
  s.x_probe = detail::num_or(t, "x_probe", 60.0);
  s.x_cut = detail::num_or(t, "x_cut", 30.0);
  s.record_stride = static_cast<std::size_t>(detail::num_or(t, "record_stride", 100));
  if (t.contains("perturbation")) {
    const auto ctx = detail::context_for(potential, energy, mass, detail::explicit_region(t["perturbation"]));
    s.perturbation = detail::parse_perturbation(t["perturbation"], ctx);
  } else {
    s.perturbation = perturbation;
  }
  return s;
}

}  // namespace tunnel_time

#endif  // TUNNEL_TIME_SCENARIO_HPP
