#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "omegaflow/measures.hpp"

namespace omegaflow {

struct PlanEntry {
  std::size_t i, j;
  double mass;
};

// Sparse coupling between two atomic measures; entries index source/target atoms.
struct TransportPlan {
  int dim = 1;
  std::vector<Vec2> source, target;
  std::vector<double> source_weights, target_weights;
  std::vector<PlanEntry> entries;

  // Integral of |x - y|^2 against the plan.
  double cost() const;
  // Largest deviation of a plan marginal from the prescribed weights.
  double marginal_error() const;
};

struct W2Result {
  double distance = 0.0;
  double cost = 0.0;  // distance squared
  TransportPlan plan;
};

// Monotone rearrangement coupling of two 1D measures.
W2Result w2_1d(const AtomicMeasure& mu, const AtomicMeasure& nu);
// Exact discrete optimal transport by network simplex.
W2Result w2_exact(const AtomicMeasure& mu, const AtomicMeasure& nu, std::size_t max_support = 512);
// 1D closed form or exact LP depending on dimension.
W2Result w2(const AtomicMeasure& mu, const AtomicMeasure& nu);
double w2_distance(const Measure& mu, const Measure& nu);

// Solves min <C, P> over couplings of a and b (C row-major, a.size() x b.size()).
std::vector<PlanEntry> solve_transport(const std::vector<double>& a, const std::vector<double>& b,
                                       const std::vector<double>& cost);

AtomicMeasure geodesic(const AtomicMeasure& mu0, const AtomicMeasure& mu1, double alpha);
AtomicMeasure interpolate(const TransportPlan& plan, double alpha);

// Couplings of several measures with a common base, glued through the base
// by the product of conditional laws.
struct GluedPlan {
  int dim = 1;
  std::vector<std::vector<Vec2>> legs;  // legs[k][t]: coordinate k of tuple t
  std::vector<Vec2> base;
  std::vector<double> mass;

  std::size_t num_legs() const { return legs.size(); }
  std::size_t size() const { return mass.size(); }
};

// Each plan goes from some measure to the same base measure (its target).
GluedPlan glue(const std::vector<TransportPlan>& plans_to_base, double tol = 1e-10);
GluedPlan glue(const TransportPlan& to_base0, const TransportPlan& to_base1);

AtomicMeasure generalized_geodesic(const GluedPlan& g, double alpha);
double pseudo_distance_sq(const GluedPlan& g, std::size_t a = 0, std::size_t b = 1);
double pseudo_distance(const GluedPlan& g, std::size_t a = 0, std::size_t b = 1);
// Squared pseudo-distance between the alpha-interpolant of legs 0,1 and leg k.
double interpolant_distance_sq(const GluedPlan& g, double alpha, std::size_t k);
AtomicMeasure leg_marginal(const GluedPlan& g, std::size_t k);

// Pairs (x, y, mass) with straight-line interpolants. A Lagrangian coupling
// pairs the nodes of two quantile measures one to one, and its interpolants
// are quantile measures with a density view.
struct Coupling {
  int dim = 1;
  std::vector<Vec2> from, to;
  std::vector<double> mass;
  bool lagrangian = false;

  std::size_t size() const { return mass.size(); }
  double cost() const;
  Measure interpolant(double alpha) const;
};

Coupling coupling_from_plan(const TransportPlan& plan);
Coupling coupling_from_glued(const GluedPlan& g, std::size_t a = 0, std::size_t b = 1);
Coupling quantile_coupling(const QuantileMeasure& q0, const QuantileMeasure& q1);

std::string plan_to_csv(const TransportPlan& plan);
nlohmann::json plan_to_json(const TransportPlan& plan);

}  // namespace omegaflow
