#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bftl/errors.hpp"

namespace bftl {

// V(h) = v_max (tanh(c h - d_s) + tanh(l + d_s)) / (1 + tanh(l + d_s)).
// c h, l and d_s are all used as dimensionless arguments; l is numerically the
// vehicle length in meters.
struct TanhShape {
  double c = 1.0;
  double d_s = 2.5;
  double v_max = 30.0;
  double length = 4.5;

  double offset() const { return std::tanh(length + d_s); }
  double scale() const { return v_max / (1.0 + offset()); }
};

// Strictly increasing samples (h_k, V_k) with h_0 = 0, joined by a monotone
// piecewise cubic Hermite interpolant. V is held at the last sample beyond the
// table, so the working interval is [0, h_last].
class TabulatedShape {
 public:
  TabulatedShape(std::vector<double> h, std::vector<double> v) : h_(std::move(h)), v_(std::move(v)) {
    if (h_.size() != v_.size() || h_.size() < 2) {
      throw DomainError("tabulated optimal velocity needs at least two (h, V) samples of equal count");
    }
    if (h_.front() != 0.0) throw DomainError("tabulated optimal velocity must start at h = 0");
    for (std::size_t k = 1; k < h_.size(); ++k) {
      if (!(h_[k] > h_[k - 1])) throw DomainError("tabulated headways must be strictly increasing");
      if (!(v_[k] > v_[k - 1])) throw DomainError("tabulated velocities must be strictly increasing");
    }
    if (!(v_.front() >= 0.0)) throw DomainError("tabulated velocities must be nonnegative");
    compute_slopes();
  }

  std::span<const double> headways() const { return h_; }
  std::span<const double> velocities() const { return v_; }
  double last_headway() const { return h_.back(); }
  double supremum() const { return v_.back(); }

  double value(double h) const {
    if (h >= h_.back()) return v_.back();
    const std::size_t k = interval(h);
    const double w = h_[k + 1] - h_[k];
    const double s = (h - h_[k]) / w;
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * v_[k] + (s3 - 2 * s2 + s) * w * m_[k] +
           (-2 * s3 + 3 * s2) * v_[k + 1] + (s3 - s2) * w * m_[k + 1];
  }

  double derivative(double h) const {
    if (h >= h_.back()) return 0.0;
    const std::size_t k = interval(h);
    const double w = h_[k + 1] - h_[k];
    const double s = (h - h_[k]) / w;
    const double s2 = s * s;
    return ((6 * s2 - 6 * s) * v_[k] + (6 * s - 6 * s2) * v_[k + 1]) / w +
           (3 * s2 - 4 * s + 1) * m_[k] + (3 * s2 - 2 * s) * m_[k + 1];
  }

 private:
  std::size_t interval(double h) const {
    const auto it = std::upper_bound(h_.begin(), h_.end(), h);
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - h_.begin()) - 1));
  }

  // Fritsch-Butland weighted harmonic mean at interior knots keeps every
  // knot slope within 3x of its neighbouring secants, which is the monotone
  // region of the Hermite cubic. End slopes equal the end secants.
  void compute_slopes() {
    const std::size_t n = h_.size();
    std::vector<double> secant(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) secant[k] = (v_[k + 1] - v_[k]) / (h_[k + 1] - h_[k]);
    m_.assign(n, 0.0);
    m_.front() = secant.front();
    m_.back() = secant.back();
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const double w1 = 2 * (h_[k + 1] - h_[k]) + (h_[k] - h_[k - 1]);
      const double w2 = (h_[k + 1] - h_[k]) + 2 * (h_[k] - h_[k - 1]);
      m_[k] = (w1 + w2) / (w1 / secant[k - 1] + w2 / secant[k]);
    }
  }

  std::vector<double> h_;
  std::vector<double> v_;
  std::vector<double> m_;
};

// The optimal velocity function V together with V' and V^{-1}.
class OptimalVelocity {
 public:
  OptimalVelocity() : shape_(TanhShape{}) {}
  explicit OptimalVelocity(TanhShape shape) : shape_(shape) {
    if (!(shape.c > 0) || !(shape.d_s > 0) || !(shape.v_max > 0) || !(shape.length > 0)) {
      throw DomainError("tanh optimal velocity needs c, d_s, v_max, length > 0");
    }
  }
  explicit OptimalVelocity(TabulatedShape shape) : shape_(std::move(shape)) {}

  static OptimalVelocity tanh(double c, double d_s, double v_max, double length) {
    return OptimalVelocity(TanhShape{c, d_s, v_max, length});
  }
  static OptimalVelocity tabulated(std::vector<double> h, std::vector<double> v) {
    return OptimalVelocity(TabulatedShape(std::move(h), std::move(v)));
  }

  const TanhShape* tanh_shape() const { return std::get_if<TanhShape>(&shape_); }
  const TabulatedShape* tabulated_shape() const { return std::get_if<TabulatedShape>(&shape_); }

  double operator()(double h) const {
    check_headway(h);
    if (const auto* t = tanh_shape()) {
      return t->scale() * (std::tanh(t->c * h - t->d_s) + t->offset());
    }
    return std::get<TabulatedShape>(shape_).value(h);
  }

  double derivative(double h) const {
    check_headway(h);
    if (const auto* t = tanh_shape()) {
      // sech^2 x = 4 e^{-2|x|} / (1 + e^{-2|x|})^2 stays accurate far into the tails.
      const double e = std::exp(-2.0 * std::abs(t->c * h - t->d_s));
      const double sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
      return t->c * t->scale() * sech2;
    }
    return std::get<TabulatedShape>(shape_).derivative(h);
  }

  double at_zero() const { return (*this)(0.0); }

  double supremum() const {
    if (const auto* t = tanh_shape()) return t->v_max;
    return std::get<TabulatedShape>(shape_).supremum();
  }

  // Upper end of the interval on which V' > 0 is enforced.
  double working_limit() const {
    if (tanh_shape()) return std::numeric_limits<double>::infinity();
    return std::get<TabulatedShape>(shape_).last_headway();
  }

  // V^{-1}(v), defined on the open range (V(0), v_max).
  double inverse(double v) const {
    const double lo = at_zero();
    const double hi = supremum();
    if (!(v > lo) || !(v < hi)) {
      throw DomainError("V^{-1}(" + std::to_string(v) + ") undefined outside (" + std::to_string(lo) + ", " +
                        std::to_string(hi) + ")");
    }
    if (const auto* t = tanh_shape()) {
      const double arg = v / t->scale() - t->offset();
      if (!(arg > -1.0) || !(arg < 1.0)) throw DomainError("V^{-1} argument saturated");
      return std::max(0.0, (t->d_s + std::atanh(arg)) / t->c);
    }
    const auto& tab = std::get<TabulatedShape>(shape_);
    double a = 0.0;
    double b = tab.last_headway();
    while (b - a > 1e-12) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      if (tab.value(mid) < v) {
        a = mid;
      } else {
        b = mid;
      }
    }
    return 0.5 * (a + b);
  }

  // L: grid maximum of V' over [lo, hi].
  double derivative_bound(double lo, double hi, std::size_t points = 4096) const {
    double best = 0.0;
    for (std::size_t k = 0; k < points; ++k) {
      const double h = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
      best = std::max(best, derivative(h));
    }
    return best;
  }

 private:
  static void check_headway(double h) {
    if (!(h >= 0.0)) throw DomainError("optimal velocity evaluated at negative headway " + std::to_string(h));
  }

  std::variant<TanhShape, TabulatedShape> shape_;
};

}  // namespace bftl
