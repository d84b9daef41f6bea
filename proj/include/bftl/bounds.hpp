#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bftl/errors.hpp"
#include "bftl/format.hpp"
#include "bftl/model.hpp"
#include "bftl/platoon.hpp"

namespace bftl {

// Which initial headway feeds the quadratic term of h_{i+1,min}:
// TheoremConsistent uses the follower's own h_{i+1,0}, PaperLiteral uses
// the predecessor's h_{i,0}.
enum class RecursionMode { TheoremConsistent, PaperLiteral };

inline std::string_view to_string(RecursionMode m) {
  return m == RecursionMode::TheoremConsistent ? "theorem-consistent" : "paper-literal";
}

inline RecursionMode parse_recursion_mode(std::string_view s) {
  if (s == "theorem-consistent") return RecursionMode::TheoremConsistent;
  if (s == "paper-literal") return RecursionMode::PaperLiteral;
  throw DomainError("unknown recursion mode '" + std::string(s) + "'");
}

// Positive root of alpha r^2 - a r - beta = 0.
inline double quadratic_root(double alpha, double beta, double a) {
  const double disc = std::sqrt(a * a + 4.0 * alpha * beta);
  if (a < 0.0) return 2.0 * beta / (disc - a);
  return (a + disc) / (2.0 * alpha);
}

// A = -v_max + alpha h0 - beta / h0.
inline double lower_coefficient(const ModelParams& p, double h0) { return -p.v_max + p.alpha * h0 - p.beta / h0; }

// B = v_bar_max + alpha h0 - beta / h0.
inline double upper_coefficient(const ModelParams& p, double h0, double v_bar_max) {
  return v_bar_max + p.alpha * h0 - p.beta / h0;
}

inline double h_min_two_vehicle(const ModelParams& p, double h0, double v_min) {
  if (!(h0 > 0.0)) throw DomainError("initial headway must be > 0");
  if (!(v_min > p.ov.at_zero())) throw DomainError("v_min must exceed V(0)");
  if (!(v_min <= p.v_max)) throw DomainError("v_min must not exceed v_max");
  const double root = quadratic_root(p.alpha, p.beta, lower_coefficient(p, h0));
  double out = std::min(root, h0);
  // V^{-1}(v_max) is +inf, so the cap drops out when v_min = v_max.
  if (v_min < p.v_max) out = std::min(out, p.V_inverse(v_min));
  return out;
}

inline double h_max_two_vehicle(const ModelParams& p, double h0, double v_bar_max) {
  if (!(h0 > 0.0)) throw DomainError("initial headway must be > 0");
  if (!(v_bar_max < p.v_max)) throw DomainError("v_bar_max must be < v_max");
  if (!(v_bar_max >= p.v_min)) throw DomainError("v_bar_max must be >= v_min");
  const double root = quadratic_root(p.alpha, p.beta, upper_coefficient(p, h0, v_bar_max));
  return std::max({root, h0, p.V_inverse(v_bar_max)});
}

// h_{i,min} for vehicles 2..N+1 from initial headways h_{2,0}..h_{N+1,0}.
inline std::vector<double> h_min_sequence(const ModelParams& p, std::span<const double> initial_headways,
                                          double v_min, RecursionMode mode = RecursionMode::TheoremConsistent) {
  if (initial_headways.empty()) throw DomainError("need at least one initial headway");
  for (double h : initial_headways) {
    if (!(h > 0.0)) throw DomainError("initial headways must be > 0");
  }
  std::vector<double> out;
  out.reserve(initial_headways.size());
  out.push_back(h_min_two_vehicle(p, initial_headways[0], v_min));
  for (std::size_t k = 1; k < initial_headways.size(); ++k) {
    const double h0 = mode == RecursionMode::TheoremConsistent ? initial_headways[k] : initial_headways[k - 1];
    out.push_back(std::min(quadratic_root(p.alpha, p.beta, lower_coefficient(p, h0)), out.back()));
  }
  return out;
}

// Lower bound valid for every platoon whose initial headways are all >= h_lower0.
inline double h_min_uniform_fleet(const ModelParams& p, double h_lower0, double v_min) {
  if (!(h_lower0 > 0.0)) throw DomainError("lower initial headway must be > 0");
  if (!(v_min > p.ov.at_zero())) throw DomainError("v_min must exceed V(0)");
  double out = quadratic_root(p.alpha, p.beta, lower_coefficient(p, h_lower0));
  if (v_min < p.v_max) out = std::min(out, p.V_inverse(v_min));
  return out;
}

struct BoundsCertificate {
  std::vector<double> h_min;  // vehicles 2..N+1
  std::optional<double> h_max;
  std::vector<double> velocity_floor;
  std::vector<double> acc_bound;
  RecursionMode mode = RecursionMode::TheoremConsistent;
  std::string params_digest;
  std::vector<double> initial_headways;
  // The other recursion mode's sequence, present only when it differs.
  std::optional<std::vector<double>> h_min_alternate;
};

inline BoundsCertificate make_certificate(const ModelParams& p, std::span<const double> initial_headways,
                                          RecursionMode mode = RecursionMode::TheoremConsistent,
                                          std::optional<double> v_bar_max = std::nullopt) {
  BoundsCertificate cert;
  cert.mode = mode;
  cert.params_digest = params_digest(p);
  cert.initial_headways.assign(initial_headways.begin(), initial_headways.end());
  cert.h_min = h_min_sequence(p, initial_headways, p.v_min, mode);
  const auto other = mode == RecursionMode::TheoremConsistent ? RecursionMode::PaperLiteral
                                                               : RecursionMode::TheoremConsistent;
  auto alt = h_min_sequence(p, initial_headways, p.v_min, other);
  if (alt != cert.h_min) cert.h_min_alternate = std::move(alt);
  for (double h : cert.h_min) {
    cert.velocity_floor.push_back(p.V(h));
    cert.acc_bound.push_back(p.alpha * p.v_max + p.beta * p.v_max / (h * h));
  }
  if (v_bar_max && initial_headways.size() == 1) cert.h_max = h_max_two_vehicle(p, initial_headways[0], *v_bar_max);
  return cert;
}

inline nlohmann::ordered_json to_json(const BoundsCertificate& c) {
  nlohmann::ordered_json j;
  j["h_min"] = c.h_min;
  j["h_max"] = c.h_max ? nlohmann::ordered_json(*c.h_max) : nlohmann::ordered_json(nullptr);
  j["velocity_floor"] = c.velocity_floor;
  j["acc_bound"] = c.acc_bound;
  j["mode"] = std::string(to_string(c.mode));
  j["params_digest"] = c.params_digest;
  j["initial_headways"] = c.initial_headways;
  if (c.h_min_alternate) {
    const auto other = c.mode == RecursionMode::TheoremConsistent ? RecursionMode::PaperLiteral
                                                                  : RecursionMode::TheoremConsistent;
    j["h_min_alternate"] = {{"mode", std::string(to_string(other))}, {"h_min", *c.h_min_alternate}};
  }
  return j;
}

struct CertificateViolation {
  std::size_t vehicle = 0;
  double t = 0.0;
  std::string quantity;  // "headway", "headway_max", "velocity", "acceleration"
  double observed = 0.0;
  double bound = 0.0;
};

struct VehicleObservation {
  std::size_t vehicle = 0;
  double min_headway = 0.0;
  double t_min_headway = 0.0;
  double max_headway = 0.0;
  double max_abs_acc = 0.0;
  double v_lo = 0.0;
  double v_hi = 0.0;
  bool floor_applies = false;
};

struct CertificateReport {
  bool pass = true;
  std::vector<VehicleObservation> vehicles;
  std::vector<CertificateViolation> violations;
};

// Compares observed extrema of traj with cert. Every bound is relaxed by slack.
// The velocity floor is enforced only for followers starting at or above it.
inline CertificateReport verify_certificate(const Trajectory& traj, const BoundsCertificate& cert,
                                            double slack = 1e-6) {
  if (cert.h_min.size() != traj.followers()) {
    throw DomainError("certificate covers " + std::to_string(cert.h_min.size()) + " followers, trajectory has " +
                      std::to_string(traj.followers()));
  }
  if (cert.params_digest != params_digest(traj.params())) {
    throw DomainError("certificate and trajectory were produced from different parameters");
  }
  const ModelParams& p = traj.params();
  CertificateReport rep;
  for (std::size_t i = 2; i <= traj.vehicles(); ++i) {
    const std::size_t j = i - 2;
    VehicleObservation ob;
    ob.vehicle = i;
    ob.min_headway = traj.headway(0, i);
    ob.max_headway = ob.min_headway;
    ob.v_lo = traj.velocity(0, i);
    ob.v_hi = ob.v_lo;
    ob.floor_applies = traj.velocity(0, i) >= cert.velocity_floor[j];
    bool headway_flagged = false, hmax_flagged = false, v_flagged = false, a_flagged = false;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double t = traj.time(k);
      const double h = traj.headway(k, i);
      const double v = traj.velocity(k, i);
      const double a = std::abs(traj.acceleration(k, i));
      if (h < ob.min_headway) {
        ob.min_headway = h;
        ob.t_min_headway = t;
      }
      ob.max_headway = std::max(ob.max_headway, h);
      ob.max_abs_acc = std::max(ob.max_abs_acc, a);
      ob.v_lo = std::min(ob.v_lo, v);
      ob.v_hi = std::max(ob.v_hi, v);
      if (!headway_flagged && h < cert.h_min[j] - slack) {
        rep.violations.push_back({i, t, "headway", h, cert.h_min[j]});
        headway_flagged = true;
      }
      if (!hmax_flagged && cert.h_max && h > *cert.h_max + slack) {
        rep.violations.push_back({i, t, "headway_max", h, *cert.h_max});
        hmax_flagged = true;
      }
      const double floor = ob.floor_applies ? cert.velocity_floor[j] : 0.0;
      if (!v_flagged && (v < floor - slack || v > p.v_max + slack)) {
        rep.violations.push_back({i, t, "velocity", v, v < floor - slack ? floor : p.v_max});
        v_flagged = true;
      }
      if (!a_flagged && a > cert.acc_bound[j] + slack) {
        rep.violations.push_back({i, t, "acceleration", a, cert.acc_bound[j]});
        a_flagged = true;
      }
    }
    rep.vehicles.push_back(ob);
  }
  rep.pass = rep.violations.empty();
  return rep;
}

inline nlohmann::ordered_json to_json(const CertificateReport& r) {
  nlohmann::ordered_json j;
  j["verdict"] = r.pass ? "PASS" : "FAIL";
  j["vehicles"] = nlohmann::ordered_json::array();
  for (const auto& v : r.vehicles) {
    j["vehicles"].push_back({{"vehicle", v.vehicle},
                             {"min_headway", v.min_headway},
                             {"t_min_headway", v.t_min_headway},
                             {"max_headway", v.max_headway},
                             {"max_abs_acc", v.max_abs_acc},
                             {"v_lo", v.v_lo},
                             {"v_hi", v.v_hi}});
  }
  j["violations"] = nlohmann::ordered_json::array();
  for (const auto& v : r.violations) {
    j["violations"].push_back({{"vehicle", v.vehicle},
                               {"t", v.t},
                               {"quantity", v.quantity},
                               {"observed", v.observed},
                               {"bound", v.bound}});
  }
  return j;
}

}  // namespace bftl
