#include "omegaflow/jko.hpp"

#include <algorithm>
#include <sstream>

#include "omegaflow/format.hpp"
#include "omegaflow/json_util.hpp"

namespace omegaflow {

namespace {

using Vec = std::vector<double>;

struct SmoothProblem {
  std::function<double(const Vec&)> f;
  std::function<void(const Vec&, Vec&)> grad;
  std::function<void(Vec&)> project;
  const Vec* w = nullptr;  // metric weights per coordinate
};

struct FistaOut {
  Vec x;
  double fx = 0.0;
  int iters = 0;
  double residual = kInf;
  double L = 0.0;
};

// Norm, in the weighted metric, of the projected-gradient map at x.
double projected_residual(const SmoothProblem& p, const Vec& x, const Vec& gx, double L, Vec& tmp) {
  const Vec& w = *p.w;
  tmp.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] - gx[i] / (w[i] * L);
  p.project(tmp);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = L * (x[i] - tmp[i]);
    s += w[i] * d * d;
  }
  return std::sqrt(s);
}

// Accelerated projected gradient with backtracking and function restart.
// The objective never increases from the starting value.
FistaOut fista(const SmoothProblem& p, Vec x, double L, double L_min, double tol, int max_iter) {
  const Vec& w = *p.w;
  std::size_t n = x.size();
  p.project(x);
  FistaOut out;
  double fx = p.f(x);
  if (!std::isfinite(fx)) throw ComputationError("proximal step: no feasible starting point");
  const Vec x_start = x;
  const double f_start = fx;
  Vec gx, gy, gn, y = x, xprev = x, xn(n), tmp;
  p.grad(x, gx);
  double res = projected_residual(p, x, gx, L, tmp);
  double t = 1.0, fy = fx;
  bool y_is_x = true;
  // Once the residual meets tol, a few extra iterations polish the iterate.
  const double polish_tol = 1e-3 * tol;
  const int polish_iters = 30;
  int it = 0, polish = 0;
  while (res > polish_tol && it < max_iter && polish < polish_iters) {
    ++it;
    if (res <= tol) ++polish;
    if (y_is_x) gy = gx;
    else p.grad(y, gy);
    double fxn = kInf;
    bool ok = false;
    for (int bt = 0; bt < 100; ++bt) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = y[i] - gy[i] / (w[i] * L);
      p.project(xn);
      fxn = p.f(xn);
      if (std::isfinite(fxn)) {
        double lin = 0.0, quad = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          double d = xn[i] - y[i];
          lin += gy[i] * d;
          quad += w[i] * d * d;
        }
        if (fxn <= fy + lin + 0.5 * L * quad + 1e-15 * (1.0 + std::abs(fy))) {
          // The curvature along the step, from gradients, stays resolvable
          // where the function test is lost in roundoff.
          p.grad(xn, gn);
          double curv = 0.0;
          for (std::size_t i = 0; i < n; ++i) curv += (gn[i] - gy[i]) * (xn[i] - y[i]);
          if (curv <= L * quad * (1.0 + 1e-12)) {
            ok = true;
            break;
          }
        }
      }
      L *= 2.0;
    }
    if (!ok) break;
    // Function values stop resolving progress near the minimizer, so steps
    // within roundoff of fx are accepted and momentum uses a gradient restart.
    if (fxn > fx + 1e-14 * (1.0 + std::abs(fx))) {
      if (y_is_x) break;
      y = x;
      fy = fx;
      t = 1.0;
      y_is_x = true;
      continue;
    }
    double align = 0.0;
    for (std::size_t i = 0; i < n; ++i) align += w[i] * (y[i] - xn[i]) * (xn[i] - x[i]);
    xprev.swap(x);
    x = xn;
    fx = fxn;
    gx.swap(gn);
    res = projected_residual(p, x, gx, L, tmp);
    if (align > 0.0) t = 1.0;
    double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    double beta = (t - 1.0) / tn;
    t = tn;
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + beta * (x[i] - xprev[i]);
    y_is_x = beta == 0.0;
    fy = y_is_x ? fx : p.f(y);
    if (!std::isfinite(fy)) {
      y = x;
      fy = fx;
      t = 1.0;
      y_is_x = true;
    }
    L = std::max(0.9 * L, L_min);
  }
  if (fx > f_start) {
    x = x_start;
    fx = f_start;
    p.grad(x, gx);
    res = projected_residual(p, x, gx, L, tmp);
  }
  out.x = std::move(x);
  out.fx = fx;
  out.iters = it;
  out.residual = res;
  out.L = L;
  return out;
}

std::vector<double> cell_masses_of(const Vec& m) {
  Vec c(m.size() > 1 ? m.size() - 1 : 0);
  double s = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) s += c[j] = 0.5 * (m[j] + m[j + 1]);
  for (double& v : c) v /= s;
  return c;
}

double quantile_sq_distance(const Vec& x, const Vec& y, const Vec& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += m[i] * (x[i] - y[i]) * (x[i] - y[i]);
  return s;
}

// ||rho||_p^p for the density view of nodes x.
double lp_power(const Vec& x, const Vec& c, double p) {
  double s = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    double g = x[j + 1] - x[j];
    if (!(g > 0.0)) return kInf;
    s += c[j] * std::pow(c[j] / g, p - 1.0);
  }
  return s;
}

double constraint_violation_of(const Energy& e, const Measure& mu) {
  if (!e.constraint) return 0.0;
  double norm = lp_norm(mu, e.constraint->p);
  return std::max(0.0, norm - e.constraint->cap);
}

struct Result1D {
  Vec x;
  double objective;
  StepDiagnostics diag;
};

Result1D solve_1d(const Energy& e, const Vec& x0, const Vec& m, bool density, double tau, const JkoConfig& cfg,
                  const Vec* xprev) {
  std::size_t n = x0.size();
  Vec cells = density ? cell_masses_of(m) : Vec{};
  const Vec* cp = density ? &cells : nullptr;
  double cap = e.density_cap();
  Vec gaps;
  if (std::isfinite(cap)) {
    if (!density) throw ComputationError("proximal step: a density cap needs a quantile measure");
    gaps.resize(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) gaps[j] = cells[j] / cap;
  }
  bool penalized = e.constraint && std::isfinite(e.constraint->p) && e.constraint->p > 1.0;
  if (penalized && !density) throw ComputationError("proximal step: an Lp cap needs a quantile measure");
  double pen_w = 0.0, pp = penalized ? e.constraint->p : 0.0;
  double cap_p = penalized ? std::pow(e.constraint->cap, pp) : 0.0;

  SmoothProblem prob;
  prob.w = &m;
  prob.f = [&](const Vec& x) {
    double v = quantile_sq_distance(x, x0, m) / (2.0 * tau) + e.smooth_value_nodes(x, m, cp);
    if (pen_w > 0.0) {
      double s = lp_power(x, cells, pp);
      if (!std::isfinite(s)) return kInf;
      double viol = std::max(0.0, s - cap_p);
      v += pen_w * viol * viol;
    }
    return v;
  };
  prob.grad = [&](const Vec& x, Vec& g) {
    e.gradient_nodes(x, m, cp, g);
    for (std::size_t i = 0; i < n; ++i) g[i] += m[i] * (x[i] - x0[i]) / tau;
    if (pen_w > 0.0) {
      double viol = std::max(0.0, lp_power(x, cells, pp) - cap_p);
      if (viol > 0.0) {
        for (std::size_t j = 0; j < cells.size(); ++j) {
          double gap = x[j + 1] - x[j];
          double d = 2.0 * pen_w * viol * (1.0 - pp) * std::pow(cells[j] / gap, pp);
          g[j + 1] += d;
          g[j] -= d;
        }
      }
    }
  };
  // Sorted nodes keep the index coupling optimal.
  prob.project = [&](Vec& x) { x = isotonic_project(x, m, gaps); };

  std::vector<Vec> starts{x0};
  if (cfg.multistart && !e.convex_1d() && n > 1) {
    Vec moll = x0;
    for (std::size_t i = 1; i + 1 < n; ++i) moll[i] = 0.25 * (x0[i - 1] + 2.0 * x0[i] + x0[i + 1]);
    starts.push_back(moll);
    Vec ext(n);
    if (xprev && xprev->size() == n) {
      for (std::size_t i = 0; i < n; ++i) ext[i] = 2.0 * x0[i] - (*xprev)[i];
    } else {
      Vec g;
      e.gradient_nodes(x0, m, cp, g);
      for (std::size_t i = 0; i < n; ++i) ext[i] = x0[i] - tau * g[i] / m[i];
    }
    starts.push_back(ext);
  }

  Result1D best{{}, kInf, {}};
  double Lmin = 1.0 / tau;
  int rounds = penalized ? std::max(1, cfg.penalty_rounds) : 1;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    Vec x = starts[s];
    FistaOut out;
    int iters = 0;
    pen_w = penalized ? cfg.penalty_weight : 0.0;
    double L = Lmin;
    bool feasible_start = true;
    for (int r = 0; r < rounds; ++r) {
      try {
        out = fista(prob, x, L, Lmin, cfg.inner_tol, cfg.inner_max_iter);
      } catch (const ComputationError&) {
        if (s == 0) throw;
        feasible_start = false;
        break;
      }
      iters += out.iters;
      x = out.x;
      L = out.L;
      pen_w *= cfg.penalty_growth;
    }
    if (!feasible_start) continue;
    pen_w /= cfg.penalty_growth;
    if (out.fx < best.objective) {
      best.x = out.x;
      best.objective = out.fx;
      best.diag.iterations = iters;
      best.diag.residual = out.residual;
      best.diag.converged = out.residual <= cfg.inner_tol;
      best.diag.start = static_cast<int>(s);
    }
  }
  if (penalized) {
    double norm = std::pow(lp_power(best.x, cells, pp), 1.0 / pp);
    best.diag.constraint_violation = std::max(0.0, norm - e.constraint->cap);
    best.diag.feasible = best.diag.constraint_violation <= 1e-6;
  }
  return best;
}

ProxResult prox_quantile(const Energy& e, const QuantileMeasure& q, double tau, const JkoConfig& cfg,
                         const Measure* previous) {
  Vec xprev;
  const Vec* xp = nullptr;
  if (previous)
    if (auto* pq = std::get_if<QuantileMeasure>(previous); pq && pq->size() == q.size()) {
      xprev = pq->positions();
      xp = &xprev;
    }
  auto r = solve_1d(e, q.positions(), q.masses(), true, tau, cfg, xp);
  QuantileMeasure out(r.x, q.masses());
  ProxResult res;
  res.energy = e.eval(out);
  if (!std::isfinite(res.energy) && r.diag.feasible) res.energy = e.smooth_value_nodes(r.x, q.masses(), &out.cell_masses());
  res.distance = std::sqrt(quantile_sq_distance(r.x, q.positions(), q.masses()));
  res.objective = res.distance * res.distance / (2.0 * tau) + res.energy;
  res.diag = r.diag;
  res.measure = std::move(out);
  return res;
}

ProxResult prox_atomic_1d(const Energy& e, const AtomicMeasure& a, double tau, const JkoConfig& cfg,
                          const Measure* previous) {
  Vec xprev;
  const Vec* xp = nullptr;
  if (previous)
    if (auto* pa = std::get_if<AtomicMeasure>(previous); pa && pa->size() == a.size()) {
      xprev = pa->xs();
      xp = &xprev;
    }
  auto r = solve_1d(e, a.xs(), a.weights(), false, tau, cfg, xp);
  auto out = make_atomic(r.x, a.weights());
  ProxResult res;
  res.energy = e.eval(out);
  res.distance = w2_1d(a, out).distance;
  res.objective = res.distance * res.distance / (2.0 * tau) + res.energy;
  res.diag = r.diag;
  res.measure = std::move(out);
  return res;
}

ProxResult prox_atomic_2d(const Energy& e, const AtomicMeasure& a, double tau, const JkoConfig& cfg) {
  if (a.size() > 64) throw InvalidArgument("proximal step: 2D measures are limited to 64 atoms");
  if (e.internal || (e.constraint && e.constraint->p > 1.0))
    throw ComputationError("proximal step: 2D atomic measures carry no density");
  // Entries of a coupling between mu and nu: anchor atom, mass, free position.
  std::vector<Vec2> anchor = a.points(), y = a.points();
  Vec pi = a.weights();
  StepDiagnostics diag;
  double Lmin = 1.0 / tau;
  W2Result plan;
  for (int round = 0; round < std::max(1, cfg.plan_rounds); ++round) {
    std::size_t ne = pi.size();
    Vec w(2 * ne), z(2 * ne);
    for (std::size_t k = 0; k < ne; ++k) {
      w[2 * k] = w[2 * k + 1] = pi[k];
      z[2 * k] = y[k][0];
      z[2 * k + 1] = y[k][1];
    }
    std::vector<Vec2> pts(ne);
    auto unpack = [&](const Vec& v) {
      for (std::size_t k = 0; k < ne; ++k) pts[k] = {v[2 * k], v[2 * k + 1]};
    };
    SmoothProblem prob;
    prob.w = &w;
    prob.f = [&](const Vec& v) {
      unpack(v);
      double s = 0.0;
      for (std::size_t k = 0; k < ne; ++k) s += pi[k] * norm2(pts[k] - anchor[k]);
      return s / (2.0 * tau) + e.value_points(pts, pi);
    };
    prob.grad = [&](const Vec& v, Vec& g) {
      unpack(v);
      std::vector<Vec2> ge;
      e.gradient_points(pts, pi, ge);
      g.resize(v.size());
      for (std::size_t k = 0; k < ne; ++k) {
        Vec2 d = ge[k] + (pi[k] / tau) * (pts[k] - anchor[k]);
        g[2 * k] = d[0];
        g[2 * k + 1] = d[1];
      }
    };
    prob.project = [](Vec&) {};
    auto out = fista(prob, z, Lmin, Lmin, cfg.inner_tol, cfg.inner_max_iter);
    diag.iterations += out.iters;
    diag.residual = out.residual;
    diag.converged = out.residual <= cfg.inner_tol;
    unpack(out.x);
    y = pts;
    double lag = 0.0;
    for (std::size_t k = 0; k < ne; ++k) lag += pi[k] * norm2(y[k] - anchor[k]);
    AtomicMeasure nu(2, y, pi);
    plan = w2_exact(a, nu);
    if (!(plan.cost < lag - 1e-12 * (1.0 + lag))) break;
    std::vector<Vec2> na, ny;
    Vec npi;
    for (const auto& en : plan.plan.entries) {
      na.push_back(plan.plan.source[en.i]);
      ny.push_back(plan.plan.target[en.j]);
      npi.push_back(en.mass);
    }
    anchor = std::move(na);
    y = std::move(ny);
    pi = std::move(npi);
  }
  AtomicMeasure nu(2, y, pi);
  ProxResult res;
  res.energy = e.eval(nu);
  res.distance = w2_exact(a, nu).distance;
  res.objective = res.distance * res.distance / (2.0 * tau) + res.energy;
  res.diag = diag;
  res.measure = std::move(nu);
  return res;
}

}  // namespace

void JkoConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("jko config: tau must be positive");
  if (steps < 1) throw InvalidArgument("jko config: steps must be at least 1");
  if (!(inner_tol > 0.0)) throw InvalidArgument("jko config: inner_tol must be positive");
  if (inner_max_iter < 1) throw InvalidArgument("jko config: inner_max_iter must be at least 1");
  if (!(penalty_weight > 0.0) || !(penalty_growth >= 1.0) || penalty_rounds < 1)
    throw InvalidArgument("jko config: bad penalty schedule");
}

JkoConfig jko_config_from_json(const nlohmann::json& j, const std::string& ptr) {
  if (!j.is_object()) throw SchemaError(ptr, "expected an object");
  JkoConfig c;
  c.tau = jsonu::number(jsonu::require(j, "tau", ptr), ptr + "/tau");
  if (auto* v = jsonu::optional(j, "steps")) c.steps = jsonu::integer(*v, ptr + "/steps");
  c.inner_tol = jsonu::number_or(j, "inner_tol", c.inner_tol, ptr);
  if (auto* v = jsonu::optional(j, "inner_max_iter")) c.inner_max_iter = jsonu::integer(*v, ptr + "/inner_max_iter");
  if (auto* v = jsonu::optional(j, "parametrization")) {
    auto s = jsonu::string(*v, ptr + "/parametrization");
    if (s == "quantile") c.parametrization = Parametrization::quantile;
    else if (s == "grid") c.parametrization = Parametrization::grid;
    else throw SchemaError(ptr + "/parametrization", "expected \"quantile\" or \"grid\"");
  }
  if (auto* v = jsonu::optional(j, "constraint_mode")) {
    std::string p = ptr + "/constraint_mode";
    if (v->is_string()) {
      auto s = v->get<std::string>();
      if (s == "exact_spacing") c.constraint_mode = ConstraintMode::exact_spacing;
      else if (s == "penalty") c.constraint_mode = ConstraintMode::penalty;
      else throw SchemaError(p, "expected \"exact_spacing\" or \"penalty\"");
    } else {
      const auto& pen = jsonu::require(*v, "penalty", p);
      c.constraint_mode = ConstraintMode::penalty;
      c.penalty_weight = jsonu::number_or(pen, "weight", c.penalty_weight, p + "/penalty");
      c.penalty_growth = jsonu::number_or(pen, "growth", c.penalty_growth, p + "/penalty");
      if (auto* r = jsonu::optional(pen, "rounds")) c.penalty_rounds = jsonu::integer(*r, p + "/penalty/rounds");
    }
  }
  if (auto* v = jsonu::optional(j, "multistart")) {
    if (!v->is_boolean()) throw SchemaError(ptr + "/multistart", "expected a boolean");
    c.multistart = v->get<bool>();
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw SchemaError(ptr, e.what());
  }
  return c;
}

nlohmann::json to_json(const JkoConfig& c) {
  return {{"tau", c.tau},
          {"steps", c.steps},
          {"inner_tol", c.inner_tol},
          {"inner_max_iter", c.inner_max_iter},
          {"parametrization", c.parametrization == Parametrization::quantile ? "quantile" : "grid"},
          {"constraint_mode", c.constraint_mode == ConstraintMode::exact_spacing ? "exact_spacing" : "penalty"},
          {"multistart", c.multistart}};
}

std::vector<double> isotonic_project(const std::vector<double>& values, const std::vector<double>& weights,
                                     const std::vector<double>& min_gaps) {
  std::size_t n = values.size();
  if (weights.size() != n) throw InvalidArgument("isotonic_project: weights size mismatch");
  if (!min_gaps.empty() && min_gaps.size() + 1 != n) throw InvalidArgument("isotonic_project: gaps size mismatch");
  if (n == 0) return {};
  Vec offset(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    double g = min_gaps.empty() ? 0.0 : min_gaps[i - 1];
    if (!(g >= 0.0)) throw InvalidArgument("isotonic_project: gaps must be nonnegative");
    offset[i] = offset[i - 1] + g;
  }
  // Pool adjacent violators on z = u - offset.
  struct Block {
    double mean, weight;
    std::size_t count;
  };
  std::vector<Block> st;
  st.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weights[i] > 0.0)) throw InvalidArgument("isotonic_project: weights must be positive");
    Block b{values[i] - offset[i], weights[i], 1};
    while (!st.empty() && st.back().mean >= b.mean) {
      Block& top = st.back();
      double w = top.weight + b.weight;
      b.mean = (top.mean * top.weight + b.mean * b.weight) / w;
      b.weight = w;
      b.count += top.count;
      st.pop_back();
    }
    st.push_back(b);
  }
  Vec out(n);
  std::size_t i = 0;
  for (const auto& b : st)
    for (std::size_t k = 0; k < b.count; ++k, ++i) out[i] = b.mean + offset[i];
  return out;
}

ProxResult proximal_step(const Energy& e, const Measure& mu, double tau, const JkoConfig& cfg,
                         const Measure* previous) {
  if (!(tau >= 0.0)) throw InvalidArgument("proximal step: tau must be nonnegative");
  if (tau == 0.0) {
    ProxResult r;
    r.measure = mu;
    r.energy = e.eval(mu);
    r.objective = r.energy;
    return r;
  }
  if (auto* q = std::get_if<QuantileMeasure>(&mu)) return prox_quantile(e, *q, tau, cfg, previous);
  if (auto* g = std::get_if<GridDensity>(&mu)) {
    if (g->dim() != 1) throw InvalidArgument("proximal step: 2D grid densities are not supported");
    return prox_quantile(e, to_quantile(mu, g->size()), tau, cfg, nullptr);
  }
  const auto& a = std::get<AtomicMeasure>(mu);
  if (a.dim() == 1) return prox_atomic_1d(e, a, tau, cfg, previous);
  return prox_atomic_2d(e, a, tau, cfg);
}

bool FlowTrajectory::all_converged() const {
  for (std::size_t k = 1; k < diagnostics.size(); ++k)
    if (!diagnostics[k].converged) return false;
  return true;
}

std::string FlowTrajectory::to_csv() const {
  std::ostringstream os;
  os << "step,time,energy,W2_step,constraint_violation,inner_iters\n";
  for (std::size_t k = 0; k < states.size(); ++k)
    os << k << ',' << fmt_num(times[k]) << ',' << fmt_num(energies[k]) << ',' << fmt_num(step_distances[k]) << ','
       << fmt_num(constraint_violation[k]) << ',' << diagnostics[k].iterations << '\n';
  return os.str();
}

nlohmann::json FlowTrajectory::to_json(bool with_states) const {
  nlohmann::json j;
  j["tau"] = tau;
  j["times"] = times;
  nlohmann::json en = nlohmann::json::array();
  for (double v : energies) en.push_back(jsonu::number_to_json(v));
  j["energies"] = en;
  j["step_distances"] = step_distances;
  nlohmann::json diag = nlohmann::json::array();
  for (const auto& d : diagnostics)
    diag.push_back({{"iterations", d.iterations}, {"residual", jsonu::number_to_json(d.residual)},
                    {"converged", d.converged}, {"feasible", d.feasible}, {"start", d.start}});
  j["diagnostics"] = diag;
  if (with_states) {
    nlohmann::json s = nlohmann::json::array();
    for (const auto& m : states) s.push_back(measure_to_json(m));
    j["states"] = s;
  }
  return j;
}

EnergySchedule time_schedule(const Energy& e, double tau) {
  return [e, tau](int k) { return e.at_time(k * tau); };
}

FlowTrajectory flow_time_dependent(const EnergySchedule& schedule, const Measure& mu0, const JkoConfig& cfg) {
  cfg.validate();
  FlowTrajectory tr;
  tr.tau = cfg.tau;
  Measure start = mu0;
  if (auto* g = std::get_if<GridDensity>(&mu0)) {
    if (g->dim() != 1) throw InvalidArgument("flow: 2D grid densities are not supported");
    start = to_quantile(mu0, g->size());
  }
  Energy e0 = schedule(0);
  tr.states.push_back(start);
  tr.times.push_back(0.0);
  tr.energies.push_back(e0.eval(start));
  tr.step_distances.push_back(0.0);
  tr.constraint_violation.push_back(constraint_violation_of(e0, start));
  tr.diagnostics.emplace_back();
  for (int k = 1; k <= cfg.steps; ++k) {
    Energy ek = schedule(k);
    ProxResult r;
    try {
      r = proximal_step(ek, tr.states.back(), cfg.tau, cfg, k >= 2 ? &tr.states[tr.states.size() - 2] : nullptr);
    } catch (const ComputationError& ex) {
      throw ComputationError("step " + std::to_string(k) + ": " + ex.what());
    }
    tr.times.push_back(k * cfg.tau);
    tr.energies.push_back(r.energy);
    tr.step_distances.push_back(r.distance);
    tr.constraint_violation.push_back(constraint_violation_of(ek, r.measure));
    tr.diagnostics.push_back(r.diag);
    tr.states.push_back(std::move(r.measure));
  }
  return tr;
}

FlowTrajectory flow(const Energy& e, const Measure& mu0, const JkoConfig& cfg) {
  return flow_time_dependent([&e](int) { return e; }, mu0, cfg);
}

Measure rescaled_intermediate(const Measure& mu, const Measure& mu_tau, const TransportPlan* plan, double h,
                              double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("rescaled_intermediate: tau must be positive");
  if (!(h >= 0.0 && h <= tau)) throw InvalidArgument("rescaled_intermediate: need 0 <= h <= tau");
  double alpha = (tau - h) / tau;
  if (h == tau) return mu;
  if (h == 0.0) return mu_tau;
  auto* q0 = std::get_if<QuantileMeasure>(&mu);
  auto* q1 = std::get_if<QuantileMeasure>(&mu_tau);
  if (q0 && q1 && q0->size() == q1->size() && !plan) return quantile_coupling(*q0, *q1).interpolant(alpha);
  if (plan) return interpolate(*plan, alpha);
  return interpolate(w2(to_atomic(mu), to_atomic(mu_tau)).plan, alpha);
}

}  // namespace omegaflow
