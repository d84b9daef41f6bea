#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "bftl/errors.hpp"

namespace bftl {

struct ConstantVelocity {
  double v = 15.0;
};

// Leader acceleration -A sin(omega t); velocity and position in closed form.
struct SinusoidAcceleration {
  double v0 = 10.5;
  double amplitude = 2.0;
  double omega = 1.0;
};

struct VelocitySegment {
  double t_start = 0.0;
  double v = 0.0;
};

// Leader velocity as a step function; the first segment starts at t = 0.
struct PiecewiseConstantVelocity {
  std::vector<VelocitySegment> segments;
};

// Leader velocity linearly interpolated from samples, held after the last one.
struct SampledVelocity {
  std::vector<double> t;
  std::vector<double> v;
};

class LeaderProfile {
 public:
  using Kind = std::variant<ConstantVelocity, SinusoidAcceleration, PiecewiseConstantVelocity, SampledVelocity>;

  LeaderProfile() : kind_(ConstantVelocity{}) {}
  LeaderProfile(ConstantVelocity k) : kind_(k) {}
  LeaderProfile(SinusoidAcceleration k) : kind_(k) {
    if (!(k.omega > 0)) throw DomainError("sinusoid leader needs omega > 0");
  }
  LeaderProfile(PiecewiseConstantVelocity k) : kind_(std::move(k)) {
    const auto& s = std::get<PiecewiseConstantVelocity>(kind_).segments;
    if (s.empty() || s.front().t_start != 0.0) throw DomainError("piecewise leader must start at t = 0");
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (!(s[i].t_start > s[i - 1].t_start)) throw DomainError("piecewise leader breakpoints must increase");
    }
    cumulative_.assign(s.size(), 0.0);
    for (std::size_t i = 1; i < s.size(); ++i) {
      cumulative_[i] = cumulative_[i - 1] + s[i - 1].v * (s[i].t_start - s[i - 1].t_start);
    }
  }
  LeaderProfile(SampledVelocity k) : kind_(std::move(k)) {
    const auto& s = std::get<SampledVelocity>(kind_);
    if (s.t.size() != s.v.size() || s.t.empty() || s.t.front() != 0.0) {
      throw DomainError("sampled leader needs matching (t, v) samples starting at t = 0");
    }
    for (std::size_t i = 1; i < s.t.size(); ++i) {
      if (!(s.t[i] > s.t[i - 1])) throw DomainError("sampled leader times must increase");
    }
    cumulative_.assign(s.t.size(), 0.0);
    for (std::size_t i = 1; i < s.t.size(); ++i) {
      cumulative_[i] = cumulative_[i - 1] + 0.5 * (s.v[i] + s.v[i - 1]) * (s.t[i] - s.t[i - 1]);
    }
  }

  const Kind& kind() const { return kind_; }

  std::optional<double> constant_velocity() const {
    if (const auto* c = std::get_if<ConstantVelocity>(&kind_)) return c->v;
    return std::nullopt;
  }

  double velocity(double t) const {
    return std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ConstantVelocity>) {
            return k.v;
          } else if constexpr (std::is_same_v<K, SinusoidAcceleration>) {
            return k.v0 + (k.amplitude / k.omega) * (std::cos(k.omega * t) - 1.0);
          } else if constexpr (std::is_same_v<K, PiecewiseConstantVelocity>) {
            return k.segments[segment(k, t)].v;
          } else {
            if (t >= k.t.back()) return k.v.back();
            const std::size_t i = sample(k, t);
            const double w = (t - k.t[i]) / (k.t[i + 1] - k.t[i]);
            return k.v[i] + w * (k.v[i + 1] - k.v[i]);
          }
        },
        kind_);
  }

  // Displacement since t = 0.
  double displacement(double t) const {
    return std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ConstantVelocity>) {
            return k.v * t;
          } else if constexpr (std::is_same_v<K, SinusoidAcceleration>) {
            const double r = k.amplitude / k.omega;
            return k.v0 * t + r * (std::sin(k.omega * t) / k.omega - t);
          } else if constexpr (std::is_same_v<K, PiecewiseConstantVelocity>) {
            const std::size_t i = segment(k, t);
            return cumulative_[i] + k.segments[i].v * (t - k.segments[i].t_start);
          } else {
            if (t >= k.t.back()) return cumulative_.back() + k.v.back() * (t - k.t.back());
            const std::size_t i = sample(k, t);
            const double dt = t - k.t[i];
            const double slope = (k.v[i + 1] - k.v[i]) / (k.t[i + 1] - k.t[i]);
            return cumulative_[i] + k.v[i] * dt + 0.5 * slope * dt * dt;
          }
        },
        kind_);
  }

  double acceleration(double t) const {
    return std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, SinusoidAcceleration>) {
            return -k.amplitude * std::sin(k.omega * t);
          } else if constexpr (std::is_same_v<K, SampledVelocity>) {
            if (t >= k.t.back()) return 0.0;
            const std::size_t i = sample(k, t);
            return (k.v[i + 1] - k.v[i]) / (k.t[i + 1] - k.t[i]);
          } else {
            return 0.0;
          }
        },
        kind_);
  }

 private:
  static std::size_t segment(const PiecewiseConstantVelocity& k, double t) {
    const auto it = std::upper_bound(k.segments.begin(), k.segments.end(), t,
                                     [](double x, const VelocitySegment& s) { return x < s.t_start; });
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - k.segments.begin()) - 1));
  }
  static std::size_t sample(const SampledVelocity& k, double t) {
    const auto it = std::upper_bound(k.t.begin(), k.t.end(), t);
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - k.t.begin()) - 1));
  }

  Kind kind_;
  std::vector<double> cumulative_;
};

}  // namespace bftl
