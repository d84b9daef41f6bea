#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bftl/errors.hpp"
#include "bftl/format.hpp"
#include "bftl/model.hpp"
#include "bftl/platoon.hpp"
#include "bftl/stability.hpp"

namespace bftl {

// Orderings of (v, V(h)) relative to v*:
//   A: v* > v > V   B: v* > V > v   C: V > v* > v
//   D: V > v > v*   E: v > V > v*   F: v > v* > V
enum class Region { A, B, C, D, E, F, Boundary, Equilibrium };

// Which defining equality holds on a Boundary label.
enum class BoundaryKind { None, VelocityAtTarget, OptimalAtTarget, VelocityAtOptimal };

struct RegionLabel {
  Region region = Region::Equilibrium;
  BoundaryKind boundary = BoundaryKind::None;

  bool operator==(const RegionLabel&) const = default;
};

inline std::string to_string(Region r) {
  switch (r) {
    case Region::A: return "A";
    case Region::B: return "B";
    case Region::C: return "C";
    case Region::D: return "D";
    case Region::E: return "E";
    case Region::F: return "F";
    case Region::Boundary: return "Boundary";
    case Region::Equilibrium: return "Equilibrium";
  }
  return "?";
}

inline std::string to_string(const RegionLabel& l) {
  if (l.region != Region::Boundary) return to_string(l.region);
  switch (l.boundary) {
    case BoundaryKind::VelocityAtTarget: return "Boundary(v=v*)";
    case BoundaryKind::OptimalAtTarget: return "Boundary(V=v*)";
    case BoundaryKind::VelocityAtOptimal: return "Boundary(v=V)";
    case BoundaryKind::None: break;
  }
  return "Boundary";
}

inline constexpr double kRegionEps = 1e-9;

inline RegionLabel classify(double v, double V, double v_star, double eps = kRegionEps) {
  const double dv = v - v_star;
  const double dV = V - v_star;
  const double dd = v - V;
  if (std::abs(dv) < eps && std::abs(dV) < eps) return {Region::Equilibrium, BoundaryKind::None};
  if (std::abs(dv) < eps) return {Region::Boundary, BoundaryKind::VelocityAtTarget};
  if (std::abs(dV) < eps) return {Region::Boundary, BoundaryKind::OptimalAtTarget};
  if (std::abs(dd) < eps) return {Region::Boundary, BoundaryKind::VelocityAtOptimal};
  if (dv < 0 && dV < 0) return {dd > 0 ? Region::A : Region::B, BoundaryKind::None};
  if (dv > 0 && dV > 0) return {dd < 0 ? Region::D : Region::E, BoundaryKind::None};
  return {dv < 0 ? Region::C : Region::F, BoundaryKind::None};
}

namespace detail {

inline void require_constant_leader(const Trajectory& traj, double v_star) {
  const auto c = traj.leader().constant_velocity();
  if (!c) throw DomainError("analysis requires a constant-velocity leader");
  if (*c != v_star) throw DomainError("v_star differs from the constant leader velocity");
}

inline void require_two_vehicles(const Trajectory& traj) {
  if (traj.vehicles() != 2) throw DomainError("analysis requires a two-vehicle trajectory");
}

inline double energy_terms(double V, double v, double v_star) {
  const double a = V - v_star;
  const double b = v - v_star;
  const double c = V - v;
  return 0.5 * (a * a + b * b + c * c);
}

}  // namespace detail

// Label of vehicle i at sample k.
inline RegionLabel label_at(const Trajectory& traj, std::size_t k, double v_star, double eps = kRegionEps,
                            std::size_t vehicle = 2) {
  return classify(traj.velocity(k, vehicle), traj.params().V(traj.headway(k, vehicle)), v_star, eps);
}

// E = (V(h) - v*)^2 / 2 per sample.
inline std::vector<double> energy_E(const Trajectory& traj, double v_star) {
  detail::require_two_vehicles(traj);
  std::vector<double> out(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double a = traj.params().V(traj.headway(k, 2)) - v_star;
    out[k] = 0.5 * a * a;
  }
  return out;
}

// F_i = ((V(h_i) - v*)^2 + (v_i - v*)^2 + (V(h_i) - v_i)^2) / 2 per sample.
inline std::vector<double> energy_F_vehicle(const Trajectory& traj, double v_star, std::size_t vehicle) {
  if (vehicle < 2 || vehicle > traj.vehicles()) throw DomainError("no follower " + std::to_string(vehicle));
  std::vector<double> out(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out[k] = detail::energy_terms(traj.params().V(traj.headway(k, vehicle)), traj.velocity(k, vehicle), v_star);
  }
  return out;
}

inline std::vector<double> energy_F(const Trajectory& traj, double v_star) {
  detail::require_two_vehicles(traj);
  return energy_F_vehicle(traj, v_star, 2);
}

// F_i for followers 2..N+1, outer index i - 2.
inline std::vector<std::vector<double>> energy_F_chain(const Trajectory& traj, double v_star) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 2; i <= traj.vehicles(); ++i) out.push_back(energy_F_vehicle(traj, v_star, i));
  return out;
}

struct GronwallResidual {
  double max_residual = 0.0;
  double t_at_max = 0.0;
};

// max over interior samples of dF_i/dt + p_i F_i - q_i, with
//   p_i = alpha - beta / h_i^2
//   q_i = ((2V - v* - v_i) V' + beta / h_i^2 (2 v_i - v* - V)) (v_{i-1} - v*)
// and dF_i/dt from centered differences on the stored grid.
inline GronwallResidual gronwall_residual(const Trajectory& traj, std::size_t vehicle, double v_star) {
  if (vehicle < 3 || vehicle > traj.vehicles()) {
    throw DomainError("Gronwall residual needs a follower index >= 3 with a follower predecessor");
  }
  detail::require_constant_leader(traj, v_star);
  const ModelParams& p = traj.params();
  const auto F = energy_F_vehicle(traj, v_star, vehicle);
  GronwallResidual out;
  if (traj.size() < 3) return out;
  bool first = true;
  for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
    const double dFdt = (F[k + 1] - F[k - 1]) / (traj.time(k + 1) - traj.time(k - 1));
    const double h = traj.headway(k, vehicle);
    const double v = traj.velocity(k, vehicle);
    const double V = p.V(h);
    const double g = p.beta / (h * h);
    const double sigma = traj.velocity(k, vehicle - 1) - v_star;
    const double q = ((2.0 * V - v_star - v) * p.V_prime(h) + g * (2.0 * v - v_star - V)) * sigma;
    const double r = dFdt + (p.alpha - g) * F[k] - q;
    if (first || r > out.max_residual) {
      out.max_residual = r;
      out.t_at_max = traj.time(k);
      first = false;
    }
  }
  return out;
}

enum class Verdict { Pass, Fail, Inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

struct Transition {
  double t = 0.0;
  Region from = Region::Equilibrium;
  Region to = Region::Equilibrium;
};

inline bool transition_allowed(Region from, Region to) {
  using R = Region;
  // Samples within eps of the fixed point cannot be told apart from it.
  if (from == R::Equilibrium) return true;
  return (from == R::B && (to == R::A || to == R::C)) || (from == R::C && to == R::D) ||
         (from == R::E && (to == R::D || to == R::F)) || (from == R::F && to == R::A) ||
         ((from == R::A || from == R::D) && to == R::Equilibrium);
}

// Region changes of vehicle 2 at the first sample carrying the new label.
// Boundary samples are merged into the region that follows them.
inline std::vector<Transition> region_transitions(const Trajectory& traj, double v_star, double eps = kRegionEps) {
  std::vector<Transition> log;
  std::optional<Region> current;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Region r = label_at(traj, k, v_star, eps).region;
    if (r == Region::Boundary) continue;
    if (!current) {
      current = r;
    } else if (r != *current) {
      log.push_back({traj.time(k), *current, r});
      current = r;
    }
  }
  return log;
}

// Bound on the time to leave region C (or F) starting from (h0, v0):
// (v* - v0) / (alpha (V(h0) - v*)).
inline double escape_time_bound(const ModelParams& p, double h0, double v0, double v_star, Region region) {
  const RegionLabel l = classify(v0, p.V(h0), v_star, 0.0);
  if (region != Region::C && region != Region::F) throw DomainError("escape bound exists only for regions C and F");
  if (l.region != region) {
    throw DomainError("start point lies in " + to_string(l) + ", not in " + to_string(region));
  }
  return (v_star - v0) / (p.alpha * (p.V(h0) - v_star));
}

struct EscapeObservation {
  Region region = Region::C;
  double bound = 0.0;
  std::optional<double> exit_time;  // first sample not labeled with the start region
};

struct TransitionAudit {
  Verdict verdict = Verdict::Inconclusive;
  RegionLabel initial;
  std::vector<Transition> transitions;
  std::vector<Transition> forbidden;
  BetaVerdict beta;
  std::optional<EscapeObservation> escape;
};

// Checks every logged transition against the allowed graph. Inconclusive
// when the beta assumption fails on the observed headway range.
inline TransitionAudit region_transition_audit(const Trajectory& traj, double v_star, double eps = kRegionEps) {
  detail::require_two_vehicles(traj);
  detail::require_constant_leader(traj, v_star);
  TransitionAudit a;
  const auto [lo, hi] = traj.headway_range(2);
  a.beta = check_assumption_beta(traj.params(), lo, hi);
  a.initial = label_at(traj, 0, v_star, eps);
  a.transitions = region_transitions(traj, v_star, eps);
  for (const auto& t : a.transitions) {
    if (!transition_allowed(t.from, t.to)) a.forbidden.push_back(t);
  }
  if (a.initial.region == Region::C || a.initial.region == Region::F) {
    EscapeObservation e;
    e.region = a.initial.region;
    e.bound = escape_time_bound(traj.params(), traj.headway(0, 2), traj.velocity(0, 2), v_star, e.region);
    for (std::size_t k = 1; k < traj.size(); ++k) {
      if (label_at(traj, k, v_star, eps).region != e.region) {
        e.exit_time = traj.time(k) - traj.time(0);
        break;
      }
    }
    a.escape = e;
  }
  if (!a.beta.satisfied) {
    a.verdict = Verdict::Inconclusive;
  } else {
    a.verdict = a.forbidden.empty() ? Verdict::Pass : Verdict::Fail;
  }
  return a;
}

struct EnvelopeReport {
  Verdict verdict = Verdict::Inconclusive;
  std::optional<Region> region;
  double t_start = 0.0;
  double rate = 0.0;
  std::optional<double> t_fail;
  std::string reason;
};

// Two-sided bound while the state stays in B (or E). With w = |v - v*| and
// the clock restarted at the first B/E sample (h0, v0):
//   B: w0 e^{-(alpha + beta/h0^2) t}  <= w <= w0 e^{-(beta/h*^2) t}
//   E: w0 e^{-(alpha + beta/h*^2) t}  <= w <= w0 e^{-(beta/h0^2) t}
// plus |v - v*| + |V - v*| <= 2 w0 e^{-lambda t} with lambda the upper rate.
inline EnvelopeReport envelope_check_BE(const Trajectory& traj, double v_star, double rel_slack = 1e-6,
                                        double eps = kRegionEps) {
  detail::require_two_vehicles(traj);
  detail::require_constant_leader(traj, v_star);
  const ModelParams& p = traj.params();
  EnvelopeReport rep;
  std::size_t k0 = traj.size();
  bool all_equilibrium = true;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Region r = label_at(traj, k, v_star, eps).region;
    if (r != Region::Equilibrium) all_equilibrium = false;
    if (r == Region::B || r == Region::E) {
      k0 = k;
      break;
    }
  }
  if (k0 == traj.size()) {
    if (all_equilibrium) {
      rep.verdict = Verdict::Pass;
      rep.reason = "trajectory rests at equilibrium";
    } else {
      rep.reason = "trajectory never enters region B or E";
    }
    return rep;
  }
  const Region region = label_at(traj, k0, v_star, eps).region;
  rep.region = region;
  rep.t_start = traj.time(k0);
  const double h0 = traj.headway(k0, 2);
  const double w0 = std::abs(traj.velocity(k0, 2) - v_star);
  const double h_star = equilibrium(p, v_star).h_star;
  const double g0 = p.beta / (h0 * h0);
  const double gs = p.beta / (h_star * h_star);
  const double fast = region == Region::B ? p.alpha + g0 : p.alpha + gs;
  const double slow = region == Region::B ? gs : g0;
  rep.rate = slow;
  const double floor = 1e-12 * std::max(1.0, std::abs(v_star));
  for (std::size_t k = k0; k < traj.size(); ++k) {
    const Region r = label_at(traj, k, v_star, eps).region;
    // Boundary and Equilibrium labels only mean the gaps dropped below eps.
    if (r != region && r != Region::Boundary && r != Region::Equilibrium) {
      rep.verdict = Verdict::Inconclusive;
      rep.reason = "trajectory leaves region " + to_string(region) + " at t=" + format_number(traj.time(k));
      return rep;
    }
  }
  for (std::size_t k = k0; k < traj.size(); ++k) {
    const double tau = traj.time(k) - rep.t_start;
    const double v = traj.velocity(k, 2);
    const double w = std::abs(v - v_star);
    const double lower = w0 * std::exp(-fast * tau);
    const double upper = w0 * std::exp(-slow * tau);
    const double sum = w + std::abs(p.V(traj.headway(k, 2)) - v_star);
    const bool ok = w >= lower * (1.0 - rel_slack) - floor && w <= upper * (1.0 + rel_slack) + floor &&
                    sum <= 2.0 * upper * (1.0 + rel_slack) + floor;
    if (!ok) {
      rep.verdict = Verdict::Fail;
      rep.t_fail = traj.time(k);
      rep.reason = "envelope violated at t=" + format_number(traj.time(k));
      return rep;
    }
  }
  rep.verdict = Verdict::Pass;
  return rep;
}

struct DecayEnvelopeReport {
  Verdict verdict = Verdict::Inconclusive;
  double rate = 0.0;  // alpha - beta / h_min^2
  double prefactor = 0.0;
  BetaVerdict beta;
  AlphaVerdict alpha;
  std::optional<double> t_fail;
  std::string reason;
};

// With S = |V(h0) - v*| + |v0 - v*| + |V(h0) - v0| and r = alpha - beta/h_min^2:
//   F(t) <= F(0) e^{-r t}
//   |v - v*| <= S e^{-r t / 2}
//   |h - h*| <= (2 S / r) e^{-r t / 2}
// Each side is relaxed by rel_slack. Inconclusive unless both assumptions
// hold on the observed headway range and r > 0.
inline DecayEnvelopeReport decay_envelope_check(const Trajectory& traj, double v_star, double h_min,
                                                double rel_slack = 0.05) {
  detail::require_two_vehicles(traj);
  detail::require_constant_leader(traj, v_star);
  const ModelParams& p = traj.params();
  DecayEnvelopeReport rep;
  const auto [lo, hi] = traj.headway_range(2);
  rep.beta = check_assumption_beta(p, lo, hi);
  rep.alpha = check_assumption_alpha(p, lo, hi);
  const auto r = decay_rate_F(p, h_min);
  if (!rep.beta.satisfied || !rep.alpha.satisfied || !r) {
    rep.reason = !rep.beta.satisfied ? "beta assumption violated on observed range"
                 : !rep.alpha.satisfied ? "alpha outside the feasible window on observed range"
                                        : "alpha <= beta / h_min^2";
    return rep;
  }
  if (lo < h_min) {
    rep.reason = "observed headway falls below h_min";
    return rep;
  }
  rep.rate = *r;
  const double h_star = equilibrium(p, v_star).h_star;
  const double V0 = p.V(traj.headway(0, 2));
  const double v0 = traj.velocity(0, 2);
  rep.prefactor = std::abs(V0 - v_star) + std::abs(v0 - v_star) + std::abs(V0 - v0);
  const double F0 = detail::energy_terms(V0, v0, v_star);
  const double floor = 1e-12 * std::max(1.0, std::abs(v_star));
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t = traj.time(k) - traj.time(0);
    const double h = traj.headway(k, 2);
    const double v = traj.velocity(k, 2);
    const double F = detail::energy_terms(p.V(h), v, v_star);
    const double half = std::exp(-0.5 * rep.rate * t);
    const bool ok = F <= F0 * std::exp(-rep.rate * t) * (1.0 + rel_slack) + floor &&
                    std::abs(v - v_star) <= rep.prefactor * half * (1.0 + rel_slack) + floor &&
                    std::abs(h - h_star) <= 2.0 * rep.prefactor / rep.rate * half * (1.0 + rel_slack) + floor;
    if (!ok) {
      rep.verdict = Verdict::Fail;
      rep.t_fail = traj.time(k);
      rep.reason = "decay envelope violated at t=" + format_number(traj.time(k));
      return rep;
    }
  }
  rep.verdict = Verdict::Pass;
  return rep;
}

struct EnergyTail {
  std::optional<double> entry_time;  // first sample after which labels stay in A, D or Equilibrium
  bool monotone = true;              // E nonincreasing from entry on, up to tol
  std::size_t early_increases = 0;   // increases of E before entry, recorded only
};

inline EnergyTail energy_tail_check(const Trajectory& traj, double v_star, double tol = 1e-12,
                                    double eps = kRegionEps) {
  const auto E = energy_E(traj, v_star);
  EnergyTail out;
  std::size_t entry = traj.size();
  for (std::size_t k = traj.size(); k-- > 0;) {
    const Region r = label_at(traj, k, v_star, eps).region;
    if (r == Region::A || r == Region::D || r == Region::Equilibrium || r == Region::Boundary) {
      entry = k;
    } else {
      break;
    }
  }
  if (entry < traj.size()) out.entry_time = traj.time(entry);
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const bool increase = E[k] > E[k - 1] + tol * std::max(1.0, E[k - 1]);
    if (!increase) continue;
    if (k > entry) {
      out.monotone = false;
    } else {
      ++out.early_increases;
    }
  }
  return out;
}

// Header t,E,F for two vehicles; t,E,F,F2,...,F{N+1} for longer platoons,
// where E and F refer to vehicle 2.
inline void write_energy_csv(std::ostream& os, const Trajectory& traj, double v_star) {
  const ModelParams& p = traj.params();
  const auto chain = energy_F_chain(traj, v_star);
  os << "t,E,F";
  if (traj.vehicles() > 2) {
    for (std::size_t i = 2; i <= traj.vehicles(); ++i) os << ",F" << i;
  }
  os << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double a = p.V(traj.headway(k, 2)) - v_star;
    os << format_number(traj.time(k)) << ',' << format_number(0.5 * a * a) << ',' << format_number(chain[0][k]);
    if (traj.vehicles() > 2) {
      for (const auto& Fi : chain) os << ',' << format_number(Fi[k]);
    }
    os << '\n';
  }
}

// Header V,v for vehicle 2.
inline void write_phase_csv(std::ostream& os, const Trajectory& traj) {
  os << "V,v\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    os << format_number(traj.params().V(traj.headway(k, 2))) << ',' << format_number(traj.velocity(k, 2)) << '\n';
  }
}

inline nlohmann::ordered_json to_json(const std::vector<Transition>& log) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& t : log) j.push_back({{"t", t.t}, {"from", to_string(t.from)}, {"to", to_string(t.to)}});
  return j;
}

}  // namespace bftl
