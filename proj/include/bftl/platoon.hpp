#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bftl/errors.hpp"
#include "bftl/format.hpp"
#include "bftl/leader.hpp"
#include "bftl/model.hpp"

namespace bftl {

// Positions and velocities of vehicles 1..N+1 (index 0 is the leader).
struct PlatoonState {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> v;

  std::size_t vehicles() const { return x.size(); }
  std::size_t followers() const { return x.empty() ? 0 : x.size() - 1; }
};

// h_i = x_{i-1} - x_i - l for vehicles 2..N+1.
inline std::vector<double> headways(const PlatoonState& s, double length) {
  std::vector<double> h;
  h.reserve(s.followers());
  for (std::size_t i = 1; i < s.x.size(); ++i) h.push_back(s.x[i - 1] - s.x[i] - length);
  return h;
}

inline bool admissible(const PlatoonState& s, double length) {
  if (s.x.size() != s.v.size() || s.x.size() < 2) return false;
  for (double h : headways(s, length)) {
    if (!(h > 0.0)) return false;
  }
  return std::all_of(s.v.begin(), s.v.end(), [](double v) { return v >= 0.0; });
}

// Leader at leader_x; followers placed behind it from their headways.
inline PlatoonState make_state(std::span<const double> follower_headways, std::span<const double> follower_velocities,
                               double leader_velocity, double length, double leader_x = 0.0, double t = 0.0) {
  if (follower_headways.size() != follower_velocities.size()) {
    throw DomainError("need one velocity per follower headway");
  }
  PlatoonState s;
  s.t = t;
  s.x.push_back(leader_x);
  s.v.push_back(leader_velocity);
  for (std::size_t i = 0; i < follower_headways.size(); ++i) {
    s.x.push_back(s.x.back() - follower_headways[i] - length);
    s.v.push_back(follower_velocities[i]);
  }
  return s;
}

namespace detail {

inline void follower_accelerations(const ModelParams& p, double t, std::span<const double> x,
                                   std::span<const double> v, std::span<double> a, double h_guard) {
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double h = x[i - 1] - x[i] - p.length;
    if (!(h > h_guard)) throw CollisionError(i + 1, t, h);
    a[i] = acc(p, h, v[i], v[i - 1]);
  }
}

}  // namespace detail

// One classical RK4 step of the follower ODEs. The leader is advanced from
// its closed-form profile, so its position never carries integration error.
inline PlatoonState step(const PlatoonState& s, const LeaderProfile& leader, const ModelParams& p, double dt,
                         double h_guard = 1e-9) {
  if (!(dt > 0.0)) throw DomainError("dt must be > 0");
  const std::size_t n = s.vehicles();
  const double t0 = s.t;
  const double lead_x0 = s.x[0] - leader.displacement(t0);
  const double t_half = t0 + 0.5 * dt;
  const double t_end = t0 + dt;

  std::vector<double> xs(n), vs(n), k1x(n), k1v(n), k2x(n), k2v(n), k3x(n), k3v(n), k4x(n), k4v(n);

  detail::follower_accelerations(p, t0, s.x, s.v, k1v, h_guard);
  for (std::size_t i = 1; i < n; ++i) k1x[i] = s.v[i];

  const auto stage = [&](double t, double w, const std::vector<double>& kx, const std::vector<double>& kv,
                         std::vector<double>& ox, std::vector<double>& ov) {
    xs[0] = lead_x0 + leader.displacement(t);
    vs[0] = leader.velocity(t);
    for (std::size_t i = 1; i < n; ++i) {
      xs[i] = s.x[i] + w * kx[i];
      vs[i] = s.v[i] + w * kv[i];
    }
    detail::follower_accelerations(p, t, xs, vs, ov, h_guard);
    for (std::size_t i = 1; i < n; ++i) ox[i] = vs[i];
  };
  stage(t_half, 0.5 * dt, k1x, k1v, k2x, k2v);
  stage(t_half, 0.5 * dt, k2x, k2v, k3x, k3v);
  stage(t_end, dt, k3x, k3v, k4x, k4v);

  PlatoonState out;
  out.t = t_end;
  out.x.resize(n);
  out.v.resize(n);
  out.x[0] = lead_x0 + leader.displacement(t_end);
  out.v[0] = leader.velocity(t_end);
  for (std::size_t i = 1; i < n; ++i) {
    out.x[i] = s.x[i] + dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
    out.v[i] = s.v[i] + dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(out.x[i]) || !std::isfinite(out.v[i])) {
      throw NumericalError("nonfinite state for vehicle " + std::to_string(i + 1) + " at t=" + std::to_string(t_end));
    }
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double h = out.x[i - 1] - out.x[i] - p.length;
    if (!(h > h_guard)) throw CollisionError(i + 1, t_end, h);
    if (out.v[i] < -1e-9) {
      throw NumericalError("negative velocity for vehicle " + std::to_string(i + 1) + " at t=" +
                           std::to_string(t_end));
    }
  }
  return out;
}

// Time-sampled platoon states plus derived headways, relative velocities and
// accelerations, recomputed from (x, v) on construction.
class Trajectory {
 public:
  Trajectory(ModelParams params, LeaderProfile leader, double dt, std::size_t stride,
             std::vector<PlatoonState> samples)
      : params_(std::move(params)),
        leader_(std::move(leader)),
        dt_(dt),
        stride_(stride),
        samples_(std::move(samples)) {
    if (samples_.empty()) throw DomainError("trajectory needs at least one sample");
    const std::size_t n = samples_.front().vehicles();
    for (const auto& s : samples_) {
      if (s.vehicles() != n || s.v.size() != n) throw DomainError("inconsistent platoon size in trajectory");
    }
    const std::size_t m = n - 1;
    headway_.resize(samples_.size() * m);
    relative_velocity_.resize(samples_.size() * m);
    acceleration_.resize(samples_.size() * n);
    for (std::size_t k = 0; k < samples_.size(); ++k) {
      const auto& s = samples_[k];
      acceleration_[k * n] = leader_.acceleration(s.t);
      for (std::size_t i = 1; i < n; ++i) {
        const double h = s.x[i - 1] - s.x[i] - params_.length;
        headway_[k * m + i - 1] = h;
        relative_velocity_[k * m + i - 1] = s.v[i - 1] - s.v[i];
        acceleration_[k * n + i] = h > 0.0 ? acc(params_, h, s.v[i], s.v[i - 1]) : std::nan("");
      }
    }
  }

  const ModelParams& params() const { return params_; }
  const LeaderProfile& leader() const { return leader_; }
  double dt() const { return dt_; }
  std::size_t stride() const { return stride_; }
  double sample_interval() const { return dt_ * static_cast<double>(stride_); }
  std::span<const PlatoonState> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  std::size_t vehicles() const { return samples_.front().vehicles(); }
  std::size_t followers() const { return vehicles() - 1; }

  // Vehicles are numbered 1..N+1 with the leader as vehicle 1.
  double time(std::size_t k) const { return samples_[k].t; }
  double position(std::size_t k, std::size_t vehicle) const { return samples_[k].x[vehicle - 1]; }
  double velocity(std::size_t k, std::size_t vehicle) const { return samples_[k].v[vehicle - 1]; }
  double headway(std::size_t k, std::size_t vehicle) const { return headway_[k * followers() + vehicle - 2]; }
  double relative_velocity(std::size_t k, std::size_t vehicle) const {
    return relative_velocity_[k * followers() + vehicle - 2];
  }
  double acceleration(std::size_t k, std::size_t vehicle) const {
    return acceleration_[k * vehicles() + vehicle - 1];
  }

  // Smallest and largest headway of one follower over all samples.
  std::pair<double, double> headway_range(std::size_t vehicle) const {
    double lo = headway(0, vehicle);
    double hi = lo;
    for (std::size_t k = 1; k < size(); ++k) {
      lo = std::min(lo, headway(k, vehicle));
      hi = std::max(hi, headway(k, vehicle));
    }
    return {lo, hi};
  }

 private:
  ModelParams params_;
  LeaderProfile leader_;
  double dt_;
  std::size_t stride_;
  std::vector<PlatoonState> samples_;
  std::vector<double> headway_;
  std::vector<double> relative_velocity_;
  std::vector<double> acceleration_;
};

struct SimulationOptions {
  std::size_t max_samples = 20001;
  double h_guard = 1e-9;
  bool check_leader_band = true;
};

namespace detail {

// Smallest stride >= min_stride dividing steps, so the last step is stored.
inline std::size_t choose_stride(std::size_t steps, std::size_t max_samples) {
  if (steps == 0) return 1;
  const std::size_t intervals = std::max<std::size_t>(1, max_samples - 1);
  const std::size_t min_stride = std::max<std::size_t>(1, (steps + intervals - 1) / intervals);
  for (std::size_t s = min_stride; s <= 4 * min_stride && s <= steps; ++s) {
    if (steps % s == 0) return s;
  }
  return min_stride;
}

}  // namespace detail

// Integrates the platoon from init over [init.t, init.t + t_end] with fixed
// step dt. Samples sit on the grid t_k = init.t + k * stride * dt. When no
// stride near the sample budget divides the step count, the run is extended
// to the next multiple of the stride.
inline Trajectory simulate(const PlatoonState& init, const LeaderProfile& leader, const ModelParams& p, double dt,
                           double t_end, const SimulationOptions& opt = {}) {
  if (!(dt > 0.0)) throw DomainError("dt must be > 0");
  if (!(t_end >= 0.0)) throw DomainError("t_end must be >= 0");
  if (!admissible(init, p.length)) {
    throw DomainError("initial state inadmissible: headways must be > 0 and velocities >= 0");
  }
  if (std::abs(init.v[0] - leader.velocity(init.t)) > 1e-12 * std::max(1.0, std::abs(init.v[0]))) {
    throw DomainError("initial leader velocity disagrees with the leader profile");
  }
  const auto check_band = [&](double t, double v) {
    if (!opt.check_leader_band) return;
    const double tol = 1e-12 * p.v_max;
    if (v < p.v_min - tol || v > p.v_max + tol) {
      throw DomainError("leader velocity " + format_number(v) + " outside [v_min, v_max] at t=" + format_number(t));
    }
  };

  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  const std::size_t stride = detail::choose_stride(steps, opt.max_samples);
  const std::size_t total = ((steps + stride - 1) / stride) * stride;

  std::vector<PlatoonState> samples;
  samples.reserve(total / stride + 1);
  PlatoonState s = init;
  check_band(s.t, s.v[0]);
  samples.push_back(s);
  for (std::size_t k = 1; k <= total; ++k) {
    s = step(s, leader, p, dt, opt.h_guard);
    s.t = init.t + static_cast<double>(k) * dt;
    check_band(s.t, s.v[0]);
    if (k % stride == 0) samples.push_back(s);
  }
  return Trajectory(p, leader, dt, stride, std::move(samples));
}

// Header t,x1,v1,x2,v2,h2,...; one row per stored sample.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t";
  for (std::size_t i = 1; i <= traj.vehicles(); ++i) {
    os << ",x" << i << ",v" << i;
    if (i >= 2) os << ",h" << i;
  }
  os << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    os << format_number(traj.time(k));
    for (std::size_t i = 1; i <= traj.vehicles(); ++i) {
      os << ',' << format_number(traj.position(k, i)) << ',' << format_number(traj.velocity(k, i));
      if (i >= 2) os << ',' << format_number(traj.headway(k, i));
    }
    os << '\n';
  }
}

}  // namespace bftl
