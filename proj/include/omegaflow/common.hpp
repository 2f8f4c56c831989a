#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace omegaflow {

using Vec2 = std::array<double, 2>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }
inline Vec2 operator+(const Vec2& a, const Vec2& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec2 operator-(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec2 operator*(double s, const Vec2& a) { return {s * a[0], s * a[1]}; }
inline double norm2(const Vec2& a) { return dot(a, a); }

// Bad input to a constructor or operation.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical routine could not produce a trustworthy answer.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flow time leaves the existence interval of the ODE.
class FlowWindowError : public ComputationError {
 public:
  FlowWindowError(const std::string& what, double window)
      : ComputationError(what), window_(window) {}
  double window() const { return window_; }

 private:
  double window_;
};

// Configuration does not match the schema; pointer names the offending key.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string pointer, const std::string& what)
      : std::runtime_error(pointer + ": " + what), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace omegaflow
