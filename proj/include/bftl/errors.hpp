#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bftl {

// Argument outside the mathematical domain of an operation (negative headway,
// velocity outside the invertible range of V, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A follower's headway dropped to the collision guard during integration.
class CollisionError : public std::runtime_error {
 public:
  CollisionError(std::size_t vehicle, double time, double headway)
      : std::runtime_error("collision: vehicle " + std::to_string(vehicle) +
                           " headway " + std::to_string(headway) + " m at t=" +
                           std::to_string(time) + " s"),
        vehicle_(vehicle),
        time_(time),
        headway_(headway) {}

  // 1-based vehicle number, leader is vehicle 1.
  std::size_t vehicle() const noexcept { return vehicle_; }
  double time() const noexcept { return time_; }
  double headway() const noexcept { return headway_; }

 private:
  std::size_t vehicle_;
  double time_;
  double headway_;
};

// Nonfinite or otherwise invalid state produced by the integrator.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed scenario configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace bftl
