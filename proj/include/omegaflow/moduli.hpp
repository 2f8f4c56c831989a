#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "omegaflow/common.hpp"

namespace omegaflow {

enum class ModulusKind { lipschitz, polynomial, log_lipschitz, sqrt_psi, phi_derived };

inline constexpr double kLogJunction = 0.08943764840308469;  // exp(-1 - sqrt(2))

// psi(x) = x (log x)^2 below exp(-1-sqrt 2), continued tangentially by an affine function.
double psi(double x);

struct PhiTable;

// Osgood modulus of convexity omega with its modulus of continuity omega_tilde
// and the convexity constant lambda. Immutable value type.
class Modulus {
 public:
  static Modulus lipschitz(double lambda);
  static Modulus polynomial(double p, double lambda);
  static Modulus log_lipschitz(double lambda);
  static Modulus sqrt_psi(double lambda);

  ModulusKind kind() const { return kind_; }
  std::string name() const;
  double lambda() const { return lambda_; }
  double lambda_minus() const { return lambda_ < 0.0 ? -lambda_ : 0.0; }
  double lambda_plus() const { return lambda_ > 0.0 ? lambda_ : 0.0; }
  double p() const { return p_; }

  double omega(double x) const;
  double omega_tilde(double x) const;

  // G(x) = int_1^x dy / omega(y) and its inverse; G maps (0, inf) onto (G(0+), G(inf)).
  double antiderivative(double x) const;
  double antiderivative_inverse(double g) const;
  double antiderivative_sup() const;
  // Same for omega_tilde.
  double tilde_antiderivative(double x) const;
  double tilde_antiderivative_inverse(double g) const;

  nlohmann::json to_json() const;

 private:
  friend Modulus modulus_from_phi(const std::function<double(double)>&, double, int);
  Modulus(ModulusKind k, double lambda, double p) : kind_(k), lambda_(lambda), p_(p) {}
  ModulusKind kind_;
  double lambda_ = 0.0;
  double p_ = 0.0;
  std::shared_ptr<const PhiTable> table_;
};

// sqrt(x psi(x)) with lambda = -4C from a field constant C.
Modulus sqrt_psi_from_constant(double C);

// omega(x) = (2/lambda) int_0^sqrt(x) phi, lambda = sign of phi; capped beyond
// x = 1 when phi >= 0. sign = 0 infers it from the samples.
Modulus modulus_from_phi(const std::function<double(double)>& phi, double s_max, int sign = 0);
Modulus modulus_from_phi(const std::vector<double>& s, const std::vector<double>& phi, int sign = 0);

Modulus modulus_from_json(const nlohmann::json& j, const std::string& pointer = "");

// Solution of dF/dt = lambda omega(F), F_0 = x >= 0.
double flow_map(const Modulus& m, double t, double x);
// Time until the flow leaves the domain; +inf for every modulus of at most linear growth.
double existence_window(const Modulus& m, double x);
// Validity range in t of the single-branch closed form (polynomial below 1,
// log-Lipschitz below the junction); +inf when the branch is never left.
double closed_form_window(const Modulus& m, double x);
// Generic route: int_x^F dy / (lambda omega(y)) = t by adaptive quadrature and bisection.
double flow_map_quadrature(const std::function<double(double)>& omega, double lambda, double t, double x);

// Unit-rate growth flow of omega_tilde at signed time s.
double comparison_flow(const Modulus& m, double s, double y);
// dF/dt = -lambda_minus omega_tilde(F).
double tilde_flow_map(const Modulus& m, double t, double x);

double euler_step(const Modulus& m, double tau, double x);
double euler_iterate(const Modulus& m, double tau, int n, double x);
double tilde_step(const Modulus& m, double tau, double x);
double tilde_iterate(const Modulus& m, double tau, int n, double x);

// Upper bound on |F_t(x) - f_{t/n}^{(n)}(x)|.
double euler_error_bound(const Modulus& m, double t, double x, int n);

// max over [0, r] of omega_tilde(x)/sqrt(x).
double c_r(const Modulus& m, double r);

// int_eps^1 dx / omega_tilde(x).
double osgood_integral(const Modulus& m, double eps);

}  // namespace omegaflow
