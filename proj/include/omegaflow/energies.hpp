#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "omegaflow/measures.hpp"
#include "omegaflow/moduli.hpp"
#include "omegaflow/transport.hpp"

namespace omegaflow {

enum class KernelKind { newtonian, riesz, log, smooth };

// Radial interaction kernel W(z) = w(|z|); the energy is (1/2) int int W(x - y).
class Kernel {
 public:
  // Positive multiple c of the fundamental solution of the Laplacian in
  // dimension d: c|x|/2 (d = 1), c log|x| / 2pi (d = 2), c|x|^{2-d}/(d(2-d)alpha_d).
  static Kernel newtonian(int d, double c = 1.0);
  // sign * c |x|^{alpha-d} with 2 <= alpha < d.
  static Kernel riesz(double alpha, int d, int sign, double c);
  // c log|x|.
  static Kernel log(double c);
  // Smooth profiles of r = |x|:
  //   regularized_log: (c/2) log(r^2 + eps^2)
  //   gaussian:        -c exp(-r^2 / (2 eps^2))
  //   quadratic:       c r^2 / 2
  static Kernel smooth(const std::string& profile, double c, double eps = 0.0);
  static Kernel custom(std::function<double(double)> w, std::function<double(double)> dw,
                       std::string name);

  KernelKind kind() const { return kind_; }
  const std::string& profile() const { return profile_; }
  int d() const { return d_; }
  double c() const { return c_; }
  double alpha() const { return alpha_; }
  double eps() const { return eps_; }
  // W(0) is infinite.
  bool singular() const;
  // Convex as a function on the line.
  bool convex_1d() const;

  double radial(double r) const;
  double radial_derivative(double r) const;
  double value(const Vec2& z) const { return radial(std::sqrt(norm2(z))); }
  // Gradient; 0 at the origin for non-singular kernels.
  Vec2 gradient(const Vec2& z) const;

  nlohmann::json to_json() const;

 private:
  KernelKind kind_ = KernelKind::newtonian;
  std::string profile_;
  int d_ = 1;
  double c_ = 1.0, alpha_ = 0.0, eps_ = 0.0, coef_ = 0.5, expo_ = 1.0;
  std::function<double(double)> w_, dw_;
};

// External potential V(x), optionally modulated in time by 1 + amplitude sin(frequency t).
struct Potential {
  enum class Kind { quadratic, power, linear, double_well, convolution, custom };
  Kind kind = Kind::quadratic;
  double coef = 1.0;
  double exponent = 2.0;  // power: coef |x - center|^exponent / exponent
  Vec2 center{0.0, 0.0};
  Vec2 slope{0.0, 0.0};   // linear: <slope, x>
  std::optional<Kernel> kernel;  // convolution: V = W * source
  AtomicMeasure source;
  double amplitude = 0.0, frequency = 1.0;
  std::function<double(const Vec2&)> custom_value;
  std::function<Vec2(const Vec2&)> custom_gradient;

  static Potential quadratic(double coef = 1.0, Vec2 center = {0.0, 0.0});
  static Potential power(double coef, double exponent);
  static Potential linear(Vec2 slope);
  static Potential convolution(const Kernel& k, AtomicMeasure source);

  double time_factor(double t) const;
  double value(const Vec2& x, double t = 0.0) const;
  Vec2 gradient(const Vec2& x, double t = 0.0) const;
  bool convex() const;
};

// U(rho) = coef rho log rho (entropy) or coef rho^m / (m - 1) (power). m = inf
// is the indicator of rho <= 1.
struct Internal {
  enum class Kind { entropy, power };
  Kind kind = Kind::entropy;
  double m = 2.0;
  double coef = 1.0;

  double density_value(double rho) const;
  // rho U'(rho) - U(rho).
  double pressure(double rho) const;
};

// ||rho||_p <= cap, +inf outside.
struct Constraint {
  double p = kInf;
  double cap = 1.0;
};

class Energy {
 public:
  std::optional<Potential> potential;
  std::optional<Kernel> kernel;
  std::optional<Internal> internal;
  std::optional<Constraint> constraint;
  double time = 0.0;

  Energy at_time(double t) const;
  bool empty() const { return !potential && !kernel && !internal; }
  bool time_dependent() const { return potential && potential->amplitude != 0.0; }
  // Displacement convex on the line.
  bool convex_1d() const;
  // Density bound M that the constraint (or an m = inf internal term) enforces; +inf if none.
  double density_cap() const;

  double eval(const Measure& mu) const;

  // Particle forms. Nodes x carry masses m; cells, when given, are the cell
  // masses of a quantile measure with nodes x (sorted) and activate the
  // density view for internal and constraint terms.
  double value_nodes(const std::vector<double>& x, const std::vector<double>& m,
                     const std::vector<double>* cells) const;
  void gradient_nodes(const std::vector<double>& x, const std::vector<double>& m,
                      const std::vector<double>* cells, std::vector<double>& g) const;
  // Terms without the constraint; used by solvers that enforce the cap themselves.
  double smooth_value_nodes(const std::vector<double>& x, const std::vector<double>& m,
                            const std::vector<double>* cells) const;
  double value_points(const std::vector<Vec2>& p, const std::vector<double>& m) const;
  void gradient_points(const std::vector<Vec2>& p, const std::vector<double>& m,
                       std::vector<Vec2>& g) const;

  nlohmann::json to_json() const;
};

Energy energy_from_json(const nlohmann::json& j, const std::string& pointer = "");
Kernel kernel_from_json(const nlohmann::json& j, const std::string& pointer = "");

// (grad W * mu)(x). For singular kernels atoms at x are skipped when exclude
// is set and rejected otherwise.
Vec2 kernel_gradient(const Kernel& k, const Measure& mu, const Vec2& x, bool exclude = false);

// d/dalpha E(mu_alpha) along the straight-line interpolants of the coupling.
double directional_derivative(const Energy& e, const Coupling& c, double alpha = 0.0);
double directional_derivative(const Energy& e, const TransportPlan& p, double alpha = 0.0);
double directional_derivative(const Energy& e, const GluedPlan& g, double alpha = 0.0);

// E(mu1) - E(mu0) - dE/dalpha(0) - (lambda/2) omega(cost), with mu0, mu1 the
// endpoints of the coupling and cost its squared displacement.
double above_tangent_slack(const Energy& e, const Coupling& c, const Modulus& m);

// max over samples nu of ((E(mu) - E(nu))/W + (lambda/2) omega(W^2)/W)^+.
double metric_slope_estimate(const Energy& e, const Measure& mu, const std::vector<Measure>& samples,
                             const Modulus& m);

}  // namespace omegaflow
