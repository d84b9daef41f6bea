#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <optional>

#include "bftl/errors.hpp"
#include "bftl/format.hpp"
#include "bftl/model.hpp"

namespace bftl {

struct Equilibrium {
  double h_star = 0.0;
  double v_star = 0.0;
};

inline Equilibrium equilibrium(const ModelParams& p, double v_star) {
  if (!(v_star > p.ov.at_zero()) || !(v_star < p.v_max)) {
    throw DomainError("equilibrium velocity must lie in (V(0), v_max)");
  }
  return {p.V_inverse(v_star), v_star};
}

struct Linearization {
  std::array<std::array<double, 2>, 2> jacobian{};
  std::array<std::complex<double>, 2> eigenvalues{};
  bool locally_stable = false;
};

// Roots of lambda^2 + b lambda + c for the Jacobian [[0, 1], [-c, -b]].
inline Linearization linearize_at(double alpha, double beta, double h_star, double v_prime) {
  Linearization lin;
  const double b = alpha + beta / (h_star * h_star);
  const double c = alpha * v_prime;
  lin.jacobian = {{{0.0, 1.0}, {-c, -b}}};
  const double disc = b * b - 4.0 * c;
  if (disc >= 0.0) {
    const double q = -0.5 * (b + std::sqrt(disc));
    lin.eigenvalues[0] = q;
    lin.eigenvalues[1] = q != 0.0 ? c / q : 0.0;
  } else {
    const double im = 0.5 * std::sqrt(-disc);
    lin.eigenvalues[0] = {-0.5 * b, im};
    lin.eigenvalues[1] = {-0.5 * b, -im};
  }
  lin.locally_stable = lin.eigenvalues[0].real() < 0.0 && lin.eigenvalues[1].real() < 0.0;
  return lin;
}

inline Linearization linearize(const ModelParams& p, double v_star) {
  const auto eq = equilibrium(p, v_star);
  return linearize_at(p.alpha, p.beta, eq.h_star, p.V_prime(eq.h_star));
}

namespace detail {

inline void check_interval(double lo, double hi) {
  if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi)) throw DomainError("interval must satisfy 0 < lo <= hi < inf");
}

// Golden-section search for the maximum of f on [a, b].
inline double golden_max(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - r * (b - a);
  double x2 = a + r * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

// Maximizer of f over [lo, hi]: grid scan, then golden section on the
// bracket around the best grid point. Endpoints are candidates as well.
inline double grid_argmax(const std::function<double(double)>& f, double lo, double hi, std::size_t points = 4096) {
  if (hi == lo) return lo;
  std::size_t best = 0;
  double best_val = f(lo);
  const auto at = [&](std::size_t k) {
    return k + 1 == points ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  };
  for (std::size_t k = 1; k < points; ++k) {
    const double val = f(at(k));
    if (val > best_val) {
      best_val = val;
      best = k;
    }
  }
  const double a = at(best == 0 ? 0 : best - 1);
  const double b = at(std::min(points - 1, best + 1));
  const double x = golden_max(f, a, b);
  return f(x) > best_val ? x : at(best);
}

}  // namespace detail

struct BetaVerdict {
  bool satisfied = false;
  double max_F = 0.0;
  double argmax = 0.0;
  double h_lo = 0.0;
  double h_hi = 0.0;
};

// F(h) = V'(h) h^2.
inline double headway_gain(const ModelParams& p, double h) { return p.V_prime(h) * h * h; }

// Interior critical point of F for the tanh shape: c h tanh(c h - d_s) = 1.
// The left side is negative below d_s / c and increasing above it, so the
// root is unique; F rises before it and falls after it.
inline double tanh_gain_critical_point(const TanhShape& s) {
  const auto g = [&](double h) { return s.c * h * std::tanh(s.c * h - s.d_s) - 1.0; };
  double a = s.d_s / s.c;
  double b = a + 1.0 / s.c;
  while (g(b) < 0.0) b += (b - a);
  for (int it = 0; it < 200 && b - a > 1e-15 * b; ++it) {
    const double m = 0.5 * (a + b);
    if (g(m) < 0.0) {
      a = m;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

inline BetaVerdict check_assumption_beta(const ModelParams& p, double h_lo, double h_hi) {
  detail::check_interval(h_lo, h_hi);
  BetaVerdict out;
  out.h_lo = h_lo;
  out.h_hi = h_hi;
  if (const auto* s = p.ov.tanh_shape()) {
    out.argmax = std::clamp(tanh_gain_critical_point(*s), h_lo, h_hi);
  } else {
    out.argmax = detail::grid_argmax([&](double h) { return headway_gain(p, h); }, h_lo, h_hi);
  }
  out.max_F = headway_gain(p, out.argmax);
  out.satisfied = p.beta >= out.max_F;
  return out;
}

struct AlphaVerdict {
  double lower = 0.0;  // sup over h of max{V'(h), beta / h^2}
  double upper = 0.0;  // inf over h of V'(h) / 2 + beta / h^2
  bool nonempty = false;
  bool satisfied = false;
  double h_lo = 0.0;
  double h_hi = 0.0;
};

inline AlphaVerdict check_assumption_alpha(const ModelParams& p, double h_lo, double h_hi) {
  detail::check_interval(h_lo, h_hi);
  AlphaVerdict out;
  out.h_lo = h_lo;
  out.h_hi = h_hi;
  const double vp_arg = detail::grid_argmax([&](double h) { return p.V_prime(h); }, h_lo, h_hi);
  out.lower = std::max(p.V_prime(vp_arg), p.beta / (h_lo * h_lo));
  const auto envelope = [&](double h) { return 0.5 * p.V_prime(h) + p.beta / (h * h); };
  const double env_arg = detail::grid_argmax([&](double h) { return -envelope(h); }, h_lo, h_hi);
  out.upper = envelope(env_arg);
  out.nonempty = out.lower < out.upper;
  out.satisfied = out.nonempty && p.alpha > out.lower && p.alpha < out.upper;
  return out;
}

// Exponential rate of the two-sided bound while the state stays in region B.
inline double decay_rate_BE(const ModelParams& p, double h0, double v_star) {
  const double h_star = equilibrium(p, v_star).h_star;
  return std::min(p.alpha + p.beta / (h0 * h0), p.beta / (h_star * h_star));
}

// Energy F decays at least at rate alpha - beta / h_min^2 when positive.
inline std::optional<double> decay_rate_F(const ModelParams& p, double h_min) {
  if (!(h_min > 0.0)) throw DomainError("h_min must be > 0");
  const double r = p.alpha - p.beta / (h_min * h_min);
  if (r > 0.0) return r;
  return std::nullopt;
}

struct StabilityReport {
  double v_star = 0.0;
  double h_star = 0.0;
  Linearization linearization;
  BetaVerdict beta;
  AlphaVerdict alpha;
  double decay_rate_BE = 0.0;
  std::optional<double> decay_rate_F;
};

// Assumption checks and the F-rate use [h_lo, h_hi]; the B/E rate uses h0.
inline StabilityReport analyze_stability(const ModelParams& p, double v_star, double h_lo, double h_hi, double h0) {
  StabilityReport r;
  const auto eq = equilibrium(p, v_star);
  r.v_star = eq.v_star;
  r.h_star = eq.h_star;
  r.linearization = linearize(p, v_star);
  r.beta = check_assumption_beta(p, h_lo, h_hi);
  r.alpha = check_assumption_alpha(p, h_lo, h_hi);
  r.decay_rate_BE = bftl::decay_rate_BE(p, h0, v_star);
  r.decay_rate_F = bftl::decay_rate_F(p, h_lo);
  return r;
}

inline nlohmann::ordered_json to_json(const StabilityReport& r) {
  using J = nlohmann::ordered_json;
  J j;
  j["v_star"] = r.v_star;
  j["h_star"] = r.h_star;
  const auto& m = r.linearization.jacobian;
  j["jacobian"] = J::array({J::array({m[0][0], m[0][1]}), J::array({m[1][0], m[1][1]})});
  j["eigenvalues"] = J::array();
  for (const auto& l : r.linearization.eigenvalues) j["eigenvalues"].push_back({{"re", l.real()}, {"im", l.imag()}});
  j["locally_stable"] = r.linearization.locally_stable;
  j["beta_verdict"] = {{"verdict", r.beta.satisfied ? "Satisfied" : "Violated"},
                       {"max_F", r.beta.max_F},
                       {"argmax", r.beta.argmax},
                       {"interval", J::array({r.beta.h_lo, r.beta.h_hi})}};
  j["alpha_interval"] = r.alpha.nonempty ? J::array({r.alpha.lower, r.alpha.upper}) : J(nullptr);
  j["alpha_verdict"] = r.alpha.satisfied ? "Satisfied" : "Violated";
  j["decay_rate_BE"] = r.decay_rate_BE;
  j["decay_rate_F"] = r.decay_rate_F ? J(*r.decay_rate_F) : J(nullptr);
  return j;
}

}  // namespace bftl
