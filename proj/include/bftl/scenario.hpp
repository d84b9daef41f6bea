#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "bftl/bounds.hpp"
#include "bftl/errors.hpp"
#include "bftl/format.hpp"
#include "bftl/leader.hpp"
#include "bftl/lyapunov.hpp"
#include "bftl/model.hpp"
#include "bftl/platoon.hpp"
#include "bftl/stability.hpp"

namespace bftl {

using ordered_json = nlohmann::ordered_json;

inline const std::vector<std::string>& output_kinds() {
  static const std::vector<std::string> kinds = {"trajectory", "energies",    "phase",
                                                 "certificate", "stability", "transitions"};
  return kinds;
}

// Headway interval handed to the assumption checks.
struct StabilityInterval {
  enum class Kind { Observed, Certified, Explicit } kind = Kind::Observed;
  double lo = 0.0;
  double hi = 0.0;
};

struct ScenarioConfig {
  ModelParams params;
  LeaderProfile leader;
  std::vector<double> headways;    // h_{2,0}..h_{N+1,0}
  std::vector<double> velocities;  // v_{2,0}..v_{N+1,0}
  double dt = 1e-3;
  double t_end = 25.0;
  std::optional<double> v_bar_max;
  std::optional<double> v_star;
  RecursionMode mode = RecursionMode::TheoremConsistent;
  std::vector<std::string> outputs = {"trajectory"};
  StabilityInterval interval;

  // Equilibrium velocity: explicit v_star, else the constant leader's velocity.
  std::optional<double> target_velocity() const { return v_star ? v_star : leader.constant_velocity(); }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

inline const nlohmann::json& field(const nlohmann::json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw ConfigError("missing key '" + std::string(key) + "' in " + where);
  return j.at(key);
}

inline double number(const nlohmann::json& j, const std::string& where, const char* key) {
  const auto& v = field(j, where, key);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  return v.get<double>();
}

inline std::vector<double> numbers(const nlohmann::json& j, const std::string& where, const char* key) {
  const auto& v = field(j, where, key);
  if (!v.is_array()) throw ConfigError(where + "." + key + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(where + "." + key + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::string text(const nlohmann::json& j, const std::string& where, const char* key) {
  const auto& v = field(j, where, key);
  if (!v.is_string()) throw ConfigError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

inline ModelParams parse_params(const nlohmann::json& j) {
  reject_unknown(j, "params", {"alpha", "beta", "length", "v_max", "v_min", "ov"});
  const auto& ov = field(j, "params", "ov");
  reject_unknown(ov, "params.ov", {"kind", "c", "d_s", "h", "v"});
  ModelParams p;
  p.alpha = number(j, "params", "alpha");
  p.beta = number(j, "params", "beta");
  p.length = number(j, "params", "length");
  p.v_max = number(j, "params", "v_max");
  p.v_min = number(j, "params", "v_min");
  const std::string kind = text(ov, "params.ov", "kind");
  try {
    if (kind == "tanh") {
      reject_unknown(ov, "params.ov (tanh)", {"kind", "c", "d_s"});
      p.ov = OptimalVelocity::tanh(number(ov, "params.ov", "c"), number(ov, "params.ov", "d_s"), p.v_max, p.length);
    } else if (kind == "tabulated") {
      reject_unknown(ov, "params.ov (tabulated)", {"kind", "h", "v"});
      p.ov = OptimalVelocity::tabulated(numbers(ov, "params.ov", "h"), numbers(ov, "params.ov", "v"));
    } else {
      throw ConfigError("params.ov.kind must be 'tanh' or 'tabulated'");
    }
    p.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }
  return p;
}

inline LeaderProfile parse_leader(const nlohmann::json& j) {
  const std::string kind = text(j, "leader", "kind");
  try {
    if (kind == "constant") {
      reject_unknown(j, "leader (constant)", {"kind", "v"});
      return ConstantVelocity{number(j, "leader", "v")};
    }
    if (kind == "sinusoid") {
      reject_unknown(j, "leader (sinusoid)", {"kind", "v0", "amplitude", "omega"});
      return SinusoidAcceleration{number(j, "leader", "v0"), number(j, "leader", "amplitude"),
                                  number(j, "leader", "omega")};
    }
    if (kind == "piecewise") {
      reject_unknown(j, "leader (piecewise)", {"kind", "segments"});
      PiecewiseConstantVelocity pw;
      const auto& segs = field(j, "leader", "segments");
      if (!segs.is_array()) throw ConfigError("leader.segments must be an array");
      for (const auto& s : segs) {
        reject_unknown(s, "leader.segments[]", {"t", "v"});
        pw.segments.push_back({number(s, "leader.segments[]", "t"), number(s, "leader.segments[]", "v")});
      }
      return pw;
    }
    if (kind == "sampled") {
      reject_unknown(j, "leader (sampled)", {"kind", "t", "v"});
      return SampledVelocity{numbers(j, "leader", "t"), numbers(j, "leader", "v")};
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("leader: ") + e.what());
  }
  throw ConfigError("leader.kind must be one of constant, sinusoid, piecewise, sampled");
}

inline ordered_json leader_to_json(const LeaderProfile& l) {
  return std::visit(
      [](const auto& k) -> ordered_json {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, ConstantVelocity>) {
          return {{"kind", "constant"}, {"v", k.v}};
        } else if constexpr (std::is_same_v<K, SinusoidAcceleration>) {
          return {{"kind", "sinusoid"}, {"v0", k.v0}, {"amplitude", k.amplitude}, {"omega", k.omega}};
        } else if constexpr (std::is_same_v<K, PiecewiseConstantVelocity>) {
          ordered_json segs = ordered_json::array();
          for (const auto& s : k.segments) segs.push_back({{"t", s.t_start}, {"v", s.v}});
          return {{"kind", "piecewise"}, {"segments", segs}};
        } else {
          return {{"kind", "sampled"}, {"t", k.t}, {"v", k.v}};
        }
      },
      l.kind());
}

// Smallest and largest velocity the leader attains.
inline std::pair<double, double> leader_range(const LeaderProfile& l) {
  return std::visit(
      [](const auto& k) -> std::pair<double, double> {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, ConstantVelocity>) {
          return {k.v, k.v};
        } else if constexpr (std::is_same_v<K, SinusoidAcceleration>) {
          const double other = k.v0 - 2.0 * k.amplitude / k.omega;
          return {std::min(k.v0, other), std::max(k.v0, other)};
        } else if constexpr (std::is_same_v<K, PiecewiseConstantVelocity>) {
          double lo = k.segments.front().v, hi = lo;
          for (const auto& s : k.segments) {
            lo = std::min(lo, s.v);
            hi = std::max(hi, s.v);
          }
          return {lo, hi};
        } else {
          return {*std::min_element(k.v.begin(), k.v.end()), *std::max_element(k.v.begin(), k.v.end())};
        }
      },
      l.kind());
}

}  // namespace detail

inline void validate(const ScenarioConfig& c) {
  try {
    c.params.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }
  const ModelParams& p = c.params;
  if (c.headways.empty()) throw ConfigError("initial.headways must name at least one follower");
  if (c.headways.size() != c.velocities.size()) {
    throw ConfigError("initial.headways and initial.velocities must have equal length");
  }
  for (double h : c.headways) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("initial headways must be finite and > 0");
  }
  for (double v : c.velocities) {
    if (!(v >= 0.0) || !(v <= p.v_max)) throw ConfigError("initial velocities must lie in [0, v_max]");
  }
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw ConfigError("dt must be finite and > 0");
  if (!(c.t_end >= 0.0) || !std::isfinite(c.t_end)) throw ConfigError("t_end must be finite and >= 0");
  const auto [lo, hi] = detail::leader_range(c.leader);
  if (lo < p.v_min || hi > p.v_max) {
    throw ConfigError("leader velocity range [" + format_number(lo) + ", " + format_number(hi) +
                      "] leaves the band [v_min, v_max]");
  }
  if (c.v_bar_max) {
    if (!(*c.v_bar_max >= p.v_min) || !(*c.v_bar_max < p.v_max)) {
      throw ConfigError("v_bar_max must lie in [v_min, v_max)");
    }
    if (hi > *c.v_bar_max) throw ConfigError("leader exceeds v_bar_max");
  }
  if (c.v_star && (!(*c.v_star > p.ov.at_zero()) || !(*c.v_star < p.v_max))) {
    throw ConfigError("v_star must lie in (V(0), v_max)");
  }
  std::set<std::string> seen;
  for (const auto& o : c.outputs) {
    if (std::find(output_kinds().begin(), output_kinds().end(), o) == output_kinds().end()) {
      throw ConfigError("unknown output '" + o + "'");
    }
    if (!seen.insert(o).second) throw ConfigError("output '" + o + "' listed twice");
  }
  const auto wants = [&](const char* k) { return seen.count(k) > 0; };
  const auto constant = c.leader.constant_velocity();
  if (wants("energies") || wants("transitions")) {
    if (!constant) throw ConfigError("energies and transitions need a constant-velocity leader");
    if (c.v_star && *c.v_star != *constant) throw ConfigError("v_star must equal the constant leader velocity");
    if (!(*constant > p.ov.at_zero()) || !(*constant < p.v_max)) {
      throw ConfigError("constant leader velocity must lie in (V(0), v_max) for energy analysis");
    }
  }
  if (wants("transitions") && c.headways.size() != 1) throw ConfigError("transitions need a two-vehicle platoon");
  if (wants("stability")) {
    if (!c.target_velocity()) throw ConfigError("stability output needs v_star or a constant leader");
    const double vs = *c.target_velocity();
    if (!(vs > p.ov.at_zero()) || !(vs < p.v_max)) throw ConfigError("v_star must lie in (V(0), v_max)");
    if (c.interval.kind == StabilityInterval::Kind::Certified && !(c.v_bar_max && c.headways.size() == 1)) {
      throw ConfigError("certified interval needs a two-vehicle platoon and v_bar_max");
    }
    if (c.interval.kind == StabilityInterval::Kind::Explicit && (!(c.interval.lo > 0.0) || !(c.interval.hi >= c.interval.lo))) {
      throw ConfigError("stability interval must satisfy 0 < lo <= hi");
    }
  }
}

inline ScenarioConfig parse_config(const nlohmann::json& j) {
  detail::reject_unknown(j, "config",
                         {"params", "leader", "initial", "dt", "t_end", "v_bar_max", "v_star", "mode", "outputs",
                          "interval"});
  ScenarioConfig c;
  c.params = detail::parse_params(detail::field(j, "config", "params"));
  c.leader = detail::parse_leader(detail::field(j, "config", "leader"));
  const auto& init = detail::field(j, "config", "initial");
  detail::reject_unknown(init, "initial", {"headways", "velocities"});
  c.headways = detail::numbers(init, "initial", "headways");
  c.velocities = detail::numbers(init, "initial", "velocities");
  if (j.contains("dt")) c.dt = detail::number(j, "config", "dt");
  c.t_end = detail::number(j, "config", "t_end");
  if (j.contains("v_bar_max")) c.v_bar_max = detail::number(j, "config", "v_bar_max");
  if (j.contains("v_star")) c.v_star = detail::number(j, "config", "v_star");
  if (j.contains("mode")) {
    try {
      c.mode = parse_recursion_mode(detail::text(j, "config", "mode"));
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("outputs")) {
    const auto& outs = j.at("outputs");
    if (!outs.is_array()) throw ConfigError("outputs must be an array of strings");
    c.outputs.clear();
    for (const auto& o : outs) {
      if (!o.is_string()) throw ConfigError("outputs must be an array of strings");
      c.outputs.push_back(o.get<std::string>());
    }
  }
  if (j.contains("interval")) {
    const auto& iv = j.at("interval");
    if (iv.is_string() && iv.get<std::string>() == "observed") {
      c.interval.kind = StabilityInterval::Kind::Observed;
    } else if (iv.is_string() && iv.get<std::string>() == "certified") {
      c.interval.kind = StabilityInterval::Kind::Certified;
    } else if (iv.is_array() && iv.size() == 2 && iv[0].is_number() && iv[1].is_number()) {
      c.interval = {StabilityInterval::Kind::Explicit, iv[0].get<double>(), iv[1].get<double>()};
    } else {
      throw ConfigError("interval must be \"observed\", \"certified\" or [lo, hi]");
    }
  }
  validate(c);
  return c;
}

inline ScenarioConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline ordered_json to_json(const ScenarioConfig& c) {
  ordered_json j;
  ordered_json p;
  p["alpha"] = c.params.alpha;
  p["beta"] = c.params.beta;
  p["length"] = c.params.length;
  p["v_max"] = c.params.v_max;
  p["v_min"] = c.params.v_min;
  if (const auto* t = c.params.ov.tanh_shape()) {
    p["ov"] = {{"kind", "tanh"}, {"c", t->c}, {"d_s", t->d_s}};
  } else {
    const auto* tab = c.params.ov.tabulated_shape();
    p["ov"] = {{"kind", "tabulated"},
               {"h", std::vector<double>(tab->headways().begin(), tab->headways().end())},
               {"v", std::vector<double>(tab->velocities().begin(), tab->velocities().end())}};
  }
  j["params"] = p;
  j["leader"] = detail::leader_to_json(c.leader);
  j["initial"] = {{"headways", c.headways}, {"velocities", c.velocities}};
  j["dt"] = c.dt;
  j["t_end"] = c.t_end;
  if (c.v_bar_max) j["v_bar_max"] = *c.v_bar_max;
  if (c.v_star) j["v_star"] = *c.v_star;
  j["mode"] = std::string(to_string(c.mode));
  j["outputs"] = c.outputs;
  switch (c.interval.kind) {
    case StabilityInterval::Kind::Observed: j["interval"] = "observed"; break;
    case StabilityInterval::Kind::Certified: j["interval"] = "certified"; break;
    case StabilityInterval::Kind::Explicit: j["interval"] = ordered_json::array({c.interval.lo, c.interval.hi}); break;
  }
  return j;
}

inline const std::vector<std::string>& preset_ids() {
  static const std::vector<std::string> ids = {"fig-lower",         "fig-upper",  "fig-five",  "fig-two-constant",
                                               "fig-five-constant", "fig-energy", "fig-phase"};
  return ids;
}

// Shared parameters alpha = 0.5, beta = 20, c = 1, l = 4.5, v_max = 30,
// v_min = 3, d_s = 2.5. Initial data of the constant-leader two-vehicle
// presets (fig-two-constant, fig-energy, fig-phase) are chosen here.
inline ScenarioConfig preset(const std::string& id) {
  ScenarioConfig c;
  c.params = ModelParams::reference();
  const SinusoidAcceleration slowing{10.5, 2.0, 1.0};
  if (id == "fig-lower") {
    c.leader = slowing;
    c.headways = {10.0};
    c.velocities = {30.0};
    c.t_end = 25.0;
    c.outputs = {"trajectory", "certificate"};
  } else if (id == "fig-upper") {
    c.leader = SinusoidAcceleration{29.7, 2.0, 1.0};
    c.headways = {2.0};
    c.velocities = {0.15};
    c.t_end = 20.0;
    c.v_bar_max = 29.7;
    c.outputs = {"trajectory", "certificate"};
  } else if (id == "fig-five") {
    c.leader = slowing;
    c.headways = {10.0, 8.0, 6.0, 5.0};
    c.velocities = {16.0, 22.0, 26.0, 30.0};
    c.t_end = 25.0;
    c.outputs = {"trajectory", "certificate"};
  } else if (id == "fig-two-constant") {
    c.leader = ConstantVelocity{15.0};
    c.headways = {10.0};
    c.velocities = {5.0};
    c.t_end = 7.0;
    c.outputs = {"trajectory", "energies", "phase", "certificate", "stability", "transitions"};
  } else if (id == "fig-five-constant") {
    c.leader = ConstantVelocity{15.0};
    c.headways = {10.0, 8.0, 6.0, 5.0};
    c.velocities = {16.0, 22.0, 26.0, 30.0};
    c.t_end = 8.0;
    c.outputs = {"trajectory", "energies", "certificate", "stability"};
  } else if (id == "fig-energy") {
    c.leader = ConstantVelocity{15.0};
    c.headways = {6.0};
    c.velocities = {10.0};
    c.t_end = 25.0;
    c.outputs = {"trajectory", "energies", "phase", "transitions"};
  } else if (id == "fig-phase") {
    c.leader = ConstantVelocity{15.0};
    c.headways = {4.0};
    c.velocities = {20.0};
    c.t_end = 7.0;
    c.outputs = {"trajectory", "phase", "energies", "transitions"};
  } else {
    throw ConfigError("unknown preset '" + id + "'");
  }
  validate(c);
  return c;
}

inline PlatoonState initial_state(const ScenarioConfig& c) {
  return make_state(c.headways, c.velocities, c.leader.velocity(0.0), c.params.length);
}

inline Trajectory simulate(const ScenarioConfig& c) {
  return simulate(initial_state(c), c.leader, c.params, c.dt, c.t_end);
}

// Smallest and largest headway over all followers.
inline std::pair<double, double> observed_range(const Trajectory& traj) {
  double lo = traj.headway_range(2).first, hi = traj.headway_range(2).second;
  for (std::size_t i = 3; i <= traj.vehicles(); ++i) {
    const auto [a, b] = traj.headway_range(i);
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  return {lo, hi};
}

inline std::pair<double, double> stability_interval(const ScenarioConfig& c, const Trajectory* traj) {
  switch (c.interval.kind) {
    case StabilityInterval::Kind::Explicit: return {c.interval.lo, c.interval.hi};
    case StabilityInterval::Kind::Certified: {
      const auto cert = make_certificate(c.params, c.headways, c.mode, c.v_bar_max);
      return {*std::min_element(cert.h_min.begin(), cert.h_min.end()), *cert.h_max};
    }
    case StabilityInterval::Kind::Observed: break;
  }
  if (!traj) throw ConfigError("observed interval needs a simulated trajectory");
  return observed_range(*traj);
}

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitNumerical = 3, kExitAssumption = 4 };

struct RunOptions {
  bool strict = false;
};

struct RunResult {
  int exit_code = kExitOk;
  std::vector<std::filesystem::path> files;
  std::string message;
  ordered_json summary;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace detail

// Simulates the scenario and writes the requested artifacts into out_dir.
// Nothing is written unless the configuration validates and the run
// completes; under strict, failed assumption or certificate checks return 4.
inline RunResult run(const ScenarioConfig& c, const std::filesystem::path& out_dir, const RunOptions& opt = {}) {
  RunResult res;
  try {
    validate(c);
  } catch (const ConfigError& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
    return res;
  }
  std::optional<Trajectory> traj;
  try {
    traj.emplace(simulate(c));
  } catch (const CollisionError& e) {
    res.exit_code = kExitNumerical;
    res.message = e.what();
    return res;
  } catch (const NumericalError& e) {
    res.exit_code = kExitNumerical;
    res.message = e.what();
    return res;
  } catch (const DomainError& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
    return res;
  }

  const auto wants = [&](const char* k) { return std::find(c.outputs.begin(), c.outputs.end(), k) != c.outputs.end(); };
  std::map<std::string, std::string> files;
  bool assumption_failed = false;
  ordered_json& s = res.summary;
  s["samples"] = traj->size();
  s["dt"] = traj->dt();
  s["stride"] = traj->stride();
  s["min_headway"] = ordered_json::array();
  s["max_headway"] = ordered_json::array();
  for (std::size_t i = 2; i <= traj->vehicles(); ++i) {
    s["min_headway"].push_back(traj->headway_range(i).first);
    s["max_headway"].push_back(traj->headway_range(i).second);
  }

  if (wants("trajectory")) {
    std::ostringstream os;
    write_trajectory_csv(os, *traj);
    files["trajectory.csv"] = os.str();
  }
  if (wants("certificate")) {
    const auto cert = make_certificate(c.params, c.headways, c.mode, c.v_bar_max);
    files["certificate.json"] = dump_json(to_json(cert));
    const auto check = verify_certificate(*traj, cert);
    files["certificate_check.json"] = dump_json(to_json(check));
    s["certificate"] = check.pass ? "PASS" : "FAIL";
    if (!check.pass) assumption_failed = true;
  }
  if (wants("stability")) {
    const auto [lo, hi] = stability_interval(c, &*traj);
    const auto rep = analyze_stability(c.params, *c.target_velocity(), lo, hi, c.headways.front());
    files["stability.json"] = dump_json(to_json(rep));
    s["beta"] = rep.beta.satisfied ? "Satisfied" : "Violated";
    s["alpha"] = rep.alpha.satisfied ? "Satisfied" : "Violated";
    if (!rep.beta.satisfied || !rep.alpha.satisfied) assumption_failed = true;
  }
  if (wants("energies")) {
    std::ostringstream os;
    write_energy_csv(os, *traj, *c.leader.constant_velocity());
    files["energies.csv"] = os.str();
  }
  if (wants("phase")) {
    std::ostringstream os;
    write_phase_csv(os, *traj);
    files["phase.csv"] = os.str();
  }
  if (wants("transitions")) {
    const double vs = *c.leader.constant_velocity();
    const auto audit = region_transition_audit(*traj, vs);
    files["transitions.json"] = dump_json(to_json(audit.transitions));
    s["transitions"] = to_string(audit.verdict);
    if (audit.verdict != Verdict::Pass) assumption_failed = true;
  }

  try {
    std::filesystem::create_directories(out_dir);
    for (const auto& [name, content] : files) {
      detail::write_file(out_dir / name, content);
      res.files.push_back(out_dir / name);
    }
  } catch (const std::exception& e) {
    res.exit_code = kExitFailure;
    res.message = e.what();
    return res;
  }
  if (opt.strict && assumption_failed) {
    res.exit_code = kExitAssumption;
    res.message = "assumption or certificate check failed";
  }
  return res;
}

// Parameters a sweep grid may vary.
inline const std::vector<std::string>& sweep_keys() {
  static const std::vector<std::string> keys = {"alpha", "beta", "c", "d_s", "v_min", "dt", "t_end", "h0", "v0"};
  return keys;
}

struct SweepGrid {
  std::vector<std::pair<std::string, std::vector<double>>> axes;  // sorted by key
};

inline SweepGrid parse_grid(const nlohmann::json& j) {
  if (!j.is_object() || j.empty()) throw ConfigError("sweep grid must be a nonempty JSON object");
  SweepGrid g;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(sweep_keys().begin(), sweep_keys().end(), it.key()) == sweep_keys().end()) {
      throw ConfigError("unknown sweep key '" + it.key() + "'");
    }
    if (!it.value().is_array() || it.value().empty()) throw ConfigError("sweep axis '" + it.key() + "' must be a nonempty array");
    std::vector<double> vals;
    for (const auto& x : it.value()) {
      if (!x.is_number()) throw ConfigError("sweep axis '" + it.key() + "' must hold numbers");
      vals.push_back(x.get<double>());
    }
    g.axes.emplace_back(it.key(), std::move(vals));
  }
  std::sort(g.axes.begin(), g.axes.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return g;
}

struct SweepRow {
  std::vector<double> coords;
  std::string status = "ok";  // ok, config, collision, numerical
  std::string message;
  std::vector<double> min_headway;
  std::vector<double> max_headway;
  std::string certificate = "-";
  std::string beta = "-";
  std::string alpha = "-";
  std::string decay_envelope = "-";
  double terminal_dv = std::nan("");
  double terminal_dh = std::nan("");
};

inline ScenarioConfig apply_coordinates(ScenarioConfig c, const SweepGrid& g, const std::vector<double>& x) {
  double cc = 0.0, ds = 0.0;
  const auto* t = c.params.ov.tanh_shape();
  if (t) {
    cc = t->c;
    ds = t->d_s;
  }
  for (std::size_t a = 0; a < g.axes.size(); ++a) {
    const auto& k = g.axes[a].first;
    if (k == "alpha") c.params.alpha = x[a];
    else if (k == "beta") c.params.beta = x[a];
    else if (k == "v_min") c.params.v_min = x[a];
    else if (k == "dt") c.dt = x[a];
    else if (k == "t_end") c.t_end = x[a];
    else if (k == "h0") c.headways.front() = x[a];
    else if (k == "v0") c.velocities.front() = x[a];
    else if (k == "c") cc = x[a];
    else if (k == "d_s") ds = x[a];
  }
  const bool shape_axis = std::any_of(g.axes.begin(), g.axes.end(), [](const auto& ax) { return ax.first == "c" || ax.first == "d_s"; });
  if (shape_axis) {
    if (!t) throw ConfigError("c and d_s can only be swept for the tanh optimal velocity");
    c.params.ov = OptimalVelocity::tanh(cc, ds, c.params.v_max, c.params.length);
  }
  return c;
}

inline SweepRow sweep_row(const ScenarioConfig& base, const SweepGrid& g, const std::vector<double>& x) {
  SweepRow row;
  row.coords = x;
  ScenarioConfig c;
  try {
    c = apply_coordinates(base, g, x);
    validate(c);
  } catch (const std::exception& e) {
    row.status = "config";
    row.message = e.what();
    return row;
  }
  try {
    const Trajectory traj = simulate(c);
    for (std::size_t i = 2; i <= traj.vehicles(); ++i) {
      row.min_headway.push_back(traj.headway_range(i).first);
      row.max_headway.push_back(traj.headway_range(i).second);
    }
    const auto cert = make_certificate(c.params, c.headways, c.mode, c.v_bar_max);
    row.certificate = verify_certificate(traj, cert).pass ? "PASS" : "FAIL";
    const auto [lo, hi] = observed_range(traj);
    row.beta = check_assumption_beta(c.params, lo, hi).satisfied ? "Satisfied" : "Violated";
    row.alpha = check_assumption_alpha(c.params, lo, hi).satisfied ? "Satisfied" : "Violated";
    if (const auto vs = c.leader.constant_velocity(); vs && *vs > c.params.ov.at_zero() && *vs < c.params.v_max) {
      const double h_star = c.params.V_inverse(*vs);
      double dv = 0.0, dh = 0.0;
      const std::size_t last = traj.size() - 1;
      for (std::size_t i = 2; i <= traj.vehicles(); ++i) {
        dv = std::max(dv, std::abs(traj.velocity(last, i) - *vs));
        dh = std::max(dh, std::abs(traj.headway(last, i) - h_star));
      }
      row.terminal_dv = dv;
      row.terminal_dh = dh;
      if (traj.vehicles() == 2) row.decay_envelope = to_string(decay_envelope_check(traj, *vs, lo).verdict);
    }
  } catch (const CollisionError& e) {
    row.status = "collision";
    row.message = e.what();
  } catch (const NumericalError& e) {
    row.status = "numerical";
    row.message = e.what();
  } catch (const std::exception& e) {
    row.status = "config";
    row.message = e.what();
  }
  return row;
}

// Evaluates every grid point of the Cartesian product on up to jobs threads.
// Rows come back in lexicographic grid order regardless of scheduling.
inline std::vector<SweepRow> sweep(const ScenarioConfig& base, const SweepGrid& g, unsigned jobs = 1) {
  std::vector<std::vector<double>> points{{}};
  for (const auto& [key, vals] : g.axes) {
    std::vector<std::vector<double>> next;
    for (const auto& p : points) {
      for (double v : vals) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  std::vector<SweepRow> rows(points.size());
  std::atomic<std::size_t> cursor{0};
  const auto worker = [&] {
    for (std::size_t k = cursor++; k < points.size(); k = cursor++) rows[k] = sweep_row(base, g, points[k]);
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(points.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return rows;
}

// One header row plus one row per grid point; per-vehicle minima and maxima
// are joined with ';'.
inline void write_sweep_csv(std::ostream& os, const SweepGrid& g, const std::vector<SweepRow>& rows) {
  for (const auto& [key, vals] : g.axes) os << key << ',';
  os << "status,min_headway,max_headway,certificate,beta_verdict,alpha_verdict,decay_envelope,terminal_dv,terminal_dh\n";
  const auto joined = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_number(v[i]);
    return s;
  };
  for (const auto& r : rows) {
    for (double x : r.coords) os << format_number(x) << ',';
    os << r.status << ',' << joined(r.min_headway) << ',' << joined(r.max_headway) << ',' << r.certificate << ','
       << r.beta << ',' << r.alpha << ',' << r.decay_envelope << ','
       << (std::isnan(r.terminal_dv) ? "" : format_number(r.terminal_dv)) << ','
       << (std::isnan(r.terminal_dh) ? "" : format_number(r.terminal_dh)) << '\n';
  }
}

}  // namespace bftl
