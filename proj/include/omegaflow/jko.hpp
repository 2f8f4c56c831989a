#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "omegaflow/energies.hpp"
#include "omegaflow/measures.hpp"
#include "omegaflow/transport.hpp"

namespace omegaflow {

enum class Parametrization { quantile, grid };
enum class ConstraintMode { exact_spacing, penalty };

struct JkoConfig {
  double tau = 0.1;
  int steps = 1;
  double inner_tol = 1e-8;
  int inner_max_iter = 20000;
  // grid inputs are converted to quantile nodes, one per cell.
  Parametrization parametrization = Parametrization::quantile;
  // Finite-p caps use a quadratic penalty in either mode; the L-infinity cap
  // is always enforced through the node spacing.
  ConstraintMode constraint_mode = ConstraintMode::exact_spacing;
  double penalty_weight = 1e2;
  double penalty_growth = 1e2;
  int penalty_rounds = 4;
  // Extra starting points for energies that are not displacement convex.
  bool multistart = true;
  // 2D: rounds of plan updates in the block-coordinate scheme.
  int plan_rounds = 20;

  void validate() const;
};

JkoConfig jko_config_from_json(const nlohmann::json& j, const std::string& pointer = "");
nlohmann::json to_json(const JkoConfig& cfg);

struct StepDiagnostics {
  int iterations = 0;
  double residual = 0.0;
  bool converged = true;
  bool feasible = true;
  double constraint_violation = 0.0;
  int start = 0;  // index of the selected starting point
};

struct ProxResult {
  Measure measure;
  double objective = 0.0;  // W2^2 / (2 tau) + E
  double energy = 0.0;
  double distance = 0.0;   // W2 to the input
  StepDiagnostics diag;
};

// argmin_nu W2^2(mu, nu)/(2 tau) + E(nu). previous, when given, is the state
// before mu and seeds an extrapolated starting point.
ProxResult proximal_step(const Energy& e, const Measure& mu, double tau, const JkoConfig& cfg,
                         const Measure* previous = nullptr);

struct FlowTrajectory {
  double tau = 0.0;
  std::vector<Measure> states;
  std::vector<double> times, energies, step_distances;  // step_distances[0] = 0
  std::vector<double> constraint_violation;
  std::vector<StepDiagnostics> diagnostics;           // diagnostics[0] is empty

  const Measure& final_state() const { return states.back(); }
  std::size_t steps() const { return states.size() - 1; }
  bool all_converged() const;
  // step,time,energy,W2_step,constraint_violation,inner_iters
  std::string to_csv() const;
  nlohmann::json to_json(bool with_states = false) const;
};

FlowTrajectory flow(const Energy& e, const Measure& mu0, const JkoConfig& cfg);

// Energy used for step k = 1..n.
using EnergySchedule = std::function<Energy(int)>;
FlowTrajectory flow_time_dependent(const EnergySchedule& schedule, const Measure& mu0, const JkoConfig& cfg);
// k -> e at time k tau.
EnergySchedule time_schedule(const Energy& e, double tau);

// ((tau - h)/tau T + (h/tau) id)# mu with T the optimal map from mu to mu_tau.
// Quantile pairs of equal size use the index coupling; otherwise plan (or an
// optimal plan when null) supplies T.
Measure rescaled_intermediate(const Measure& mu, const Measure& mu_tau, const TransportPlan* plan, double h,
                              double tau);

// Weighted least-squares projection onto {u : u_{i+1} - u_i >= min_gaps_i}.
// Empty min_gaps means zero gaps.
std::vector<double> isotonic_project(const std::vector<double>& values, const std::vector<double>& weights,
                                     const std::vector<double>& min_gaps = {});

}  // namespace omegaflow
