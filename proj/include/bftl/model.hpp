#pragma once

#include <cmath>
#include <string>

#include "bftl/errors.hpp"
#include "bftl/format.hpp"
#include "bftl/optimal_velocity.hpp"

namespace bftl {

struct ModelParams {
  double alpha = 0.5;   // 1/s
  double beta = 20.0;   // m^2/s
  double length = 4.5;  // m
  double v_max = 30.0;  // m/s, supremum of V
  double v_min = 3.0;   // m/s, lower edge of the leader velocity band
  OptimalVelocity ov;

  static ModelParams with_tanh(double alpha, double beta, double length, double v_max, double v_min, double c,
                               double d_s) {
    return ModelParams{alpha, beta, length, v_max, v_min, OptimalVelocity::tanh(c, d_s, v_max, length)};
  }

  // Shared parameter set of the published two- and five-vehicle runs.
  static ModelParams reference() { return with_tanh(0.5, 20.0, 4.5, 30.0, 3.0, 1.0, 2.5); }

  double V(double h) const { return ov(h); }
  double V_prime(double h) const { return ov.derivative(h); }
  double V_inverse(double v) const { return ov.inverse(v); }

  void validate() const {
    if (!(alpha > 0)) throw DomainError("alpha must be > 0");
    if (!(beta > 0)) throw DomainError("beta must be > 0");
    if (!(length > 0)) throw DomainError("vehicle length must be > 0");
    if (!(v_max > 0)) throw DomainError("v_max must be > 0");
    if (std::abs(ov.supremum() - v_max) > 1e-12 * v_max) {
      throw DomainError("v_max must equal the supremum of the optimal velocity function");
    }
    if (const auto* t = ov.tanh_shape(); t && t->length != length) {
      throw DomainError("tanh optimal velocity must use the model's vehicle length");
    }
    if (!(v_min > ov.at_zero())) throw DomainError("v_min must exceed V(0)");
    if (!(v_min <= v_max)) throw DomainError("v_min must not exceed v_max");
  }
};

// Bando-FtL acceleration alpha (V(h) - v) + beta (v_lead - v) / h^2.
inline double acc(const ModelParams& p, double h, double v, double v_lead) {
  if (!(h > 0.0)) throw DomainError("acceleration undefined for headway " + std::to_string(h) + " <= 0");
  return p.alpha * (p.V(h) - v) + p.beta * (v_lead - v) / (h * h);
}

inline std::string canonical_params(const ModelParams& p) {
  std::string s = "alpha=" + format_number(p.alpha) + ";beta=" + format_number(p.beta) +
                  ";length=" + format_number(p.length) + ";v_max=" + format_number(p.v_max) +
                  ";v_min=" + format_number(p.v_min) + ";ov=";
  if (const auto* t = p.ov.tanh_shape()) {
    s += "tanh(c=" + format_number(t->c) + ",d_s=" + format_number(t->d_s) + ")";
  } else {
    const auto* tab = p.ov.tabulated_shape();
    s += "table(";
    for (std::size_t k = 0; k < tab->headways().size(); ++k) {
      s += format_number(tab->headways()[k]) + ":" + format_number(tab->velocities()[k]) + ",";
    }
    s += ")";
  }
  return s;
}

inline std::string params_digest(const ModelParams& p) { return hex64(fnv1a64(canonical_params(p))); }

}  // namespace bftl
