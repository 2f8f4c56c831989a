#include "omegaflow/transport.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace omegaflow {

namespace {

TransportPlan empty_plan(const AtomicMeasure& mu, const AtomicMeasure& nu) {
  TransportPlan p;
  p.dim = mu.dim();
  p.source = mu.points();
  p.target = nu.points();
  p.source_weights = mu.weights();
  p.target_weights = nu.weights();
  return p;
}

W2Result finish(TransportPlan plan) {
  W2Result r;
  r.cost = plan.cost();
  r.distance = std::sqrt(std::max(0.0, r.cost));
  r.plan = std::move(plan);
  return r;
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("interpolation parameter must lie in [0, 1]");
}

}  // namespace

double TransportPlan::cost() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.mass * norm2(source[e.i] - target[e.j]);
  return s;
}

double TransportPlan::marginal_error() const {
  std::vector<double> rs(source.size(), 0.0), cs(target.size(), 0.0);
  for (const auto& e : entries) {
    rs[e.i] += e.mass;
    cs[e.j] += e.mass;
  }
  double err = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) err = std::max(err, std::abs(rs[i] - source_weights[i]));
  for (std::size_t j = 0; j < cs.size(); ++j) err = std::max(err, std::abs(cs[j] - target_weights[j]));
  return err;
}

W2Result w2_1d(const AtomicMeasure& mu, const AtomicMeasure& nu) {
  if (mu.dim() != 1 || nu.dim() != 1) throw InvalidArgument("w2_1d: both measures must be one-dimensional");
  TransportPlan plan = empty_plan(mu, nu);
  const auto& a = mu.weights();
  const auto& b = nu.weights();
  std::size_t i = 0, j = 0;
  double Fa = a[0], Fb = b[0], lo = 0.0;
  for (;;) {
    bool last_a = i + 1 == a.size(), last_b = j + 1 == b.size();
    if (last_a) Fa = 1.0;
    if (last_b) Fb = 1.0;
    double hi = std::min(Fa, Fb);
    if (hi > lo) plan.entries.push_back({i, j, hi - lo});
    lo = std::max(lo, hi);
    if (last_a && last_b) break;
    if (!last_a && (last_b || Fa <= Fb)) {
      if (!last_b && Fa == Fb) Fb += b[++j];
      Fa += a[++i];
    } else {
      Fb += b[++j];
    }
  }
  return finish(std::move(plan));
}

W2Result w2_exact(const AtomicMeasure& mu, const AtomicMeasure& nu, std::size_t max_support) {
  if (mu.dim() != nu.dim()) throw InvalidArgument("w2_exact: dimension mismatch");
  if (mu.size() > max_support || nu.size() > max_support)
    throw InvalidArgument("w2_exact: support larger than " + std::to_string(max_support) + " atoms");
  std::vector<double> C(mu.size() * nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j) C[i * nu.size() + j] = norm2(mu.points()[i] - nu.points()[j]);
  TransportPlan plan = empty_plan(mu, nu);
  plan.entries = solve_transport(mu.weights(), nu.weights(), C);
  return finish(std::move(plan));
}

W2Result w2(const AtomicMeasure& mu, const AtomicMeasure& nu) {
  if (mu.dim() != nu.dim()) throw InvalidArgument("w2: dimension mismatch");
  return mu.dim() == 1 ? w2_1d(mu, nu) : w2_exact(mu, nu);
}

double w2_distance(const Measure& mu, const Measure& nu) { return w2(to_atomic(mu), to_atomic(nu)).distance; }

AtomicMeasure interpolate(const TransportPlan& plan, double alpha) {
  check_alpha(alpha);
  std::vector<Vec2> pts;
  std::vector<double> w;
  for (const auto& e : plan.entries) {
    pts.push_back((1.0 - alpha) * plan.source[e.i] + alpha * plan.target[e.j]);
    w.push_back(e.mass);
  }
  return AtomicMeasure(plan.dim, std::move(pts), std::move(w));
}

AtomicMeasure geodesic(const AtomicMeasure& mu0, const AtomicMeasure& mu1, double alpha) {
  check_alpha(alpha);
  return interpolate(w2(mu0, mu1).plan, alpha);
}

GluedPlan glue(const std::vector<TransportPlan>& plans, double tol) {
  if (plans.size() < 2) throw InvalidArgument("glue: need at least two plans");
  const auto& ref = plans.front();
  for (const auto& p : plans) {
    if (p.dim != ref.dim) throw InvalidArgument("glue: dimension mismatch");
    if (p.target.size() != ref.target.size()) throw InvalidArgument("glue: base supports differ");
    for (std::size_t k = 0; k < p.target.size(); ++k) {
      if (norm2(p.target[k] - ref.target[k]) > 1e-24) throw InvalidArgument("glue: base supports differ");
      if (std::abs(p.target_weights[k] - ref.target_weights[k]) > tol)
        throw InvalidArgument("glue: base marginals differ");
    }
    if (p.marginal_error() > tol) throw InvalidArgument("glue: plan marginals do not match its measures");
  }
  const std::size_t K = plans.size(), nb = ref.target.size();
  // Conditional pieces per base atom.
  std::vector<std::vector<std::vector<PlanEntry>>> by_base(K, std::vector<std::vector<PlanEntry>>(nb));
  for (std::size_t k = 0; k < K; ++k)
    for (const auto& e : plans[k].entries) by_base[k][e.j].push_back(e);

  GluedPlan g;
  g.dim = ref.dim;
  g.legs.assign(K, {});
  for (std::size_t z = 0; z < nb; ++z) {
    double nu = ref.target_weights[z];
    if (!(nu > 0.0)) continue;
    std::vector<std::size_t> idx(K, 0);
    bool empty = false;
    for (std::size_t k = 0; k < K; ++k) empty = empty || by_base[k][z].empty();
    if (empty) continue;
    for (;;) {
      double mass = nu;
      for (std::size_t k = 0; k < K; ++k) mass *= by_base[k][z][idx[k]].mass / nu;
      if (mass > 0.0) {
        for (std::size_t k = 0; k < K; ++k) g.legs[k].push_back(plans[k].source[by_base[k][z][idx[k]].i]);
        g.base.push_back(ref.target[z]);
        g.mass.push_back(mass);
      }
      std::size_t k = 0;
      while (k < K && ++idx[k] == by_base[k][z].size()) idx[k++] = 0;
      if (k == K) break;
    }
  }
  return g;
}

GluedPlan glue(const TransportPlan& to_base0, const TransportPlan& to_base1) {
  return glue(std::vector<TransportPlan>{to_base0, to_base1});
}

AtomicMeasure generalized_geodesic(const GluedPlan& g, double alpha) {
  check_alpha(alpha);
  if (g.num_legs() < 2) throw InvalidArgument("generalized_geodesic: need two legs");
  std::vector<Vec2> pts(g.size());
  for (std::size_t t = 0; t < g.size(); ++t) pts[t] = (1.0 - alpha) * g.legs[0][t] + alpha * g.legs[1][t];
  return AtomicMeasure(g.dim, std::move(pts), g.mass);
}

double pseudo_distance_sq(const GluedPlan& g, std::size_t a, std::size_t b) {
  if (a >= g.num_legs() || b >= g.num_legs()) throw InvalidArgument("pseudo_distance: leg out of range");
  double s = 0.0;
  for (std::size_t t = 0; t < g.size(); ++t) s += g.mass[t] * norm2(g.legs[a][t] - g.legs[b][t]);
  return s;
}

double pseudo_distance(const GluedPlan& g, std::size_t a, std::size_t b) {
  return std::sqrt(pseudo_distance_sq(g, a, b));
}

double interpolant_distance_sq(const GluedPlan& g, double alpha, std::size_t k) {
  check_alpha(alpha);
  if (k >= g.num_legs() || g.num_legs() < 2) throw InvalidArgument("interpolant_distance_sq: leg out of range");
  double s = 0.0;
  for (std::size_t t = 0; t < g.size(); ++t)
    s += g.mass[t] * norm2((1.0 - alpha) * g.legs[0][t] + alpha * g.legs[1][t] - g.legs[k][t]);
  return s;
}

AtomicMeasure leg_marginal(const GluedPlan& g, std::size_t k) {
  if (k >= g.num_legs()) throw InvalidArgument("leg_marginal: leg out of range");
  return AtomicMeasure(g.dim, g.legs[k], g.mass);
}

double Coupling::cost() const {
  double s = 0.0;
  for (std::size_t t = 0; t < mass.size(); ++t) s += mass[t] * norm2(from[t] - to[t]);
  return s;
}

Measure Coupling::interpolant(double alpha) const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("interpolation parameter must lie in [0, 1]");
  std::vector<Vec2> pts(size());
  for (std::size_t t = 0; t < size(); ++t) pts[t] = (1.0 - alpha) * from[t] + alpha * to[t];
  if (lagrangian) {
    std::vector<double> x(size());
    for (std::size_t t = 0; t < size(); ++t) x[t] = pts[t][0];
    for (std::size_t t = 1; t < size(); ++t) x[t] = std::max(x[t], x[t - 1]);  // guard rounding
    return QuantileMeasure(std::move(x), mass);
  }
  return AtomicMeasure(dim, std::move(pts), mass);
}

Coupling coupling_from_plan(const TransportPlan& plan) {
  Coupling c;
  c.dim = plan.dim;
  for (const auto& e : plan.entries) {
    c.from.push_back(plan.source[e.i]);
    c.to.push_back(plan.target[e.j]);
    c.mass.push_back(e.mass);
  }
  return c;
}

Coupling coupling_from_glued(const GluedPlan& g, std::size_t a, std::size_t b) {
  Coupling c;
  c.dim = g.dim;
  c.from = g.legs.at(a);
  c.to = g.legs.at(b);
  c.mass = g.mass;
  return c;
}

Coupling quantile_coupling(const QuantileMeasure& q0, const QuantileMeasure& q1) {
  if (q0.size() != q1.size()) throw InvalidArgument("quantile_coupling: node counts differ");
  for (std::size_t i = 0; i < q0.size(); ++i)
    if (std::abs(q0.masses()[i] - q1.masses()[i]) > 1e-12) throw InvalidArgument("quantile_coupling: node masses differ");
  Coupling c;
  c.dim = 1;
  c.lagrangian = true;
  for (std::size_t i = 0; i < q0.size(); ++i) {
    c.from.push_back({q0.positions()[i], 0.0});
    c.to.push_back({q1.positions()[i], 0.0});
    c.mass.push_back(q0.masses()[i]);
  }
  return c;
}

std::string plan_to_csv(const TransportPlan& plan) {
  std::ostringstream os;
  os.precision(17);
  os << "# cost=squared_euclidean\n";
  if (plan.dim == 1) {
    os << "x,y,mass\n";
    for (const auto& e : plan.entries) os << plan.source[e.i][0] << ',' << plan.target[e.j][0] << ',' << e.mass << '\n';
  } else {
    os << "x0,x1,y0,y1,mass\n";
    for (const auto& e : plan.entries)
      os << plan.source[e.i][0] << ',' << plan.source[e.i][1] << ',' << plan.target[e.j][0] << ','
         << plan.target[e.j][1] << ',' << e.mass << '\n';
  }
  return os.str();
}

nlohmann::json plan_to_json(const TransportPlan& plan) {
  nlohmann::json j;
  j["cost_function"] = "squared_euclidean";
  j["dim"] = plan.dim;
  j["cost"] = plan.cost();
  j["entries"] = nlohmann::json::array();
  for (const auto& e : plan.entries) {
    nlohmann::json row;
    if (plan.dim == 1) {
      row["x"] = plan.source[e.i][0];
      row["y"] = plan.target[e.j][0];
    } else {
      row["x"] = {plan.source[e.i][0], plan.source[e.i][1]};
      row["y"] = {plan.target[e.j][0], plan.target[e.j][1]};
    }
    row["mass"] = e.mass;
    j["entries"].push_back(row);
  }
  return j;
}

}  // namespace omegaflow
