#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "omegaflow/energies.hpp"
#include "omegaflow/jko.hpp"
#include "omegaflow/measures.hpp"
#include "omegaflow/moduli.hpp"

namespace omegaflow {

struct InequalityReport {
  std::string name;
  double lhs = 0.0, rhs = 0.0, slack = 0.0, tolerance = 0.0;
  bool pass = true;
  bool skipped = false;
  std::string skip_reason;
  // fixture id, tau, step index, solver residual flags and similar.
  nlohmann::json context = nlohmann::json::object();

  nlohmann::json to_json() const;
};

// slack = rhs - lhs; pass iff slack >= -tolerance.
InequalityReport make_report(std::string name, double lhs, double rhs, double tolerance,
                             nlohmann::json context = nlohmann::json::object());
InequalityReport skipped_report(std::string name, std::string reason,
                                nlohmann::json context = nlohmann::json::object());
nlohmann::json reports_to_json(const std::vector<InequalityReport>& reports);
// Nonzero count of non-skipped failures.
std::size_t count_failures(const std::vector<InequalityReport>& reports);

struct CheckOptions {
  double tol = 1e-6;
  JkoConfig cfg;
  // Rerun the inner solver at 10x tighter tolerance before reporting a failure.
  bool refine = true;
  double tau_star = kInf;
  std::string fixture;
};

// f_tau applied k times.
double f_tau_power(const Modulus& m, double tau, int k, double x);

// f_tau(W_{2,mu}^2(mu_tau, nu)) - W2^2(mu, nu) <= 2 tau (E(nu) - E(mu_tau)) - W2^2(mu, mu_tau).
// mu_tau, when given, is used instead of a fresh proximal step.
InequalityReport check_discrete_evi(const Energy& e, const Measure& mu, const Measure& nu, double tau,
                                    const Modulus& m, const CheckOptions& opt, const ProxResult* mu_tau = nullptr);

// One-step contraction with the explicit right-hand sides for lambda > 0 and lambda <= 0.
InequalityReport check_contraction(const Energy& e, const Measure& mu, const Measure& nu, double tau,
                                   const Modulus& m, const CheckOptions& opt);

enum class SemigroupBound {
  discrete,  // n-step bound with its explicit error terms
  rate       // W2(t) against the continuous-time rate, relative tolerance opt.tol
};
// W2 of the pair evolved by n steps of size t/n against the contraction bound.
InequalityReport check_semigroup_contraction(const Energy& e, const Measure& mu, const Measure& nu, double t,
                                             int n, const Modulus& m, const CheckOptions& opt,
                                             SemigroupBound kind = SemigroupBound::rate);
// Upper bound on W2(t) from W2(0) = w0: square root of F_{-2t}(w0^2).
double contraction_rate_bound(const Modulus& m, double t, double w0);

// E(mu0) - E(mu1) <= |dE|(mu0) W2(mu0, mu1) - (lambda/2) omega(W2^2). The slope
// is estimated from samples and refined by extra samples when the check fails.
InequalityReport check_hwi(const Energy& e, const Measure& mu0, const Measure& mu1, const Modulus& m,
                           const std::vector<Measure>& slope_samples, const CheckOptions& opt);
// Feasible probes around mu: proximal steps with small tau and, without caps,
// nodes moved against the energy gradient.
std::vector<Measure> slope_samples(const Energy& e, const Measure& mu, const JkoConfig& cfg, int count = 12);

enum class RateShape { lipschitz, polynomial, log_lipschitz };
RateShape rate_shape_for(const Modulus& m);
// n^{-1/4}, or [n^{-1/2} log n]^{1/(2 exp(2 lambda_minus t))}.
double rate_envelope(RateShape shape, double lambda_minus, double t, int n);

struct RateStudy {
  std::vector<int> n_list;
  std::vector<double> errors;
  int n_ref = 4096;
  double t = 1.0;
  RateShape shape = RateShape::lipschitz;
  double lambda_minus = 0.0;
  double fitted_slope = 0.0;  // least squares slope of log error against log n
  double c_star = 0.0;        // error(n_list[0]) / envelope(n_list[0]) unless supplied
  // Richardson consistency: W2(mu^{n_ref/4}, ref) / W2(mu^{n_ref/2}, ref).
  double richardson_ratio = 0.0;
  std::vector<bool> converged;

  double bound(std::size_t k) const;
  bool monotone() const;
  bool below_envelope(double rel_tol = 1e-9) const;
  nlohmann::json to_json() const;
};

// c_star > 0 is taken as frozen instead of fitted.
RateStudy rate_study(const Energy& e, const Measure& mu0, double t, const std::vector<int>& n_list, int n_ref,
                     const Modulus& m, const JkoConfig& cfg, double c_star = 0.0, bool richardson = true);

struct ConvexitySummary {
  std::string fixture;
  int trials = 0;
  double min_slack = kInf;
  double tolerance = 1e-6;
  int negative = 0;  // slacks below -tolerance
  nlohmann::json witness;  // the worst pair when any slack is below -tolerance
  bool pass() const { return negative == 0; }
  nlohmann::json to_json() const;
};

using PairSampler = std::function<std::pair<QuantileMeasure, QuantileMeasure>(std::mt19937_64&)>;
ConvexitySummary check_omega_convexity(const Energy& e, const PairSampler& sampler, const Modulus& m, int trials,
                                       std::uint64_t seed, double tol = 1e-6, const std::string& fixture = "");

// W2(J_h(nu), mu_tau) <= tol with nu the rescaled intermediate of mu and mu_tau.
InequalityReport check_large_small_step(const Energy& e, const Measure& mu, double tau, double h,
                                        const CheckOptions& opt);

// Distances d_k = W2(mu^{n_k}, mu^{n_{k+1}}) between successive halvings of a
// time-dependent flow to time t; ratios d_k / d_{k+1}.
struct CauchyStudy {
  std::vector<int> n_list;
  std::vector<double> distances, ratios;
  nlohmann::json to_json() const;
};
CauchyStudy time_dependent_cauchy(const Energy& e, const Measure& mu0, double t, const std::vector<int>& n_list,
                                  const JkoConfig& cfg);

// Named suites: ode, transport, evi, contraction, rates, convexity, appendix.
struct SuiteOptions {
  double tol = 1e-6;
  int threads = 1;
  std::uint64_t seed = 1;
  // Smaller instance counts for smoke runs.
  bool quick = false;
};
std::vector<std::string> suite_names();
std::vector<InequalityReport> run_suite(const std::string& name, const SuiteOptions& opt);

}  // namespace omegaflow
