#include "omegaflow/verify.hpp"

#include <algorithm>
#include <cmath>

#include "omegaflow/common.hpp"
#include "omegaflow/json_util.hpp"
#include "omegaflow/transport.hpp"

namespace omegaflow {

nlohmann::json InequalityReport::to_json() const {
  nlohmann::json j{{"name", name},
                   {"lhs", jsonu::number_to_json(lhs)},
                   {"rhs", jsonu::number_to_json(rhs)},
                   {"slack", jsonu::number_to_json(slack)},
                   {"tolerance", tolerance},
                   {"pass", pass},
                   {"skipped", skipped},
                   {"context", context}};
  if (skipped) j["skip_reason"] = skip_reason;
  return j;
}

InequalityReport make_report(std::string name, double lhs, double rhs, double tolerance, nlohmann::json context) {
  InequalityReport r;
  r.name = std::move(name);
  r.lhs = lhs;
  r.rhs = rhs;
  r.slack = rhs - lhs;
  r.tolerance = tolerance;
  r.pass = std::isfinite(r.slack) ? r.slack >= -tolerance : (std::isinf(rhs) && rhs > 0 && !std::isnan(lhs));
  r.context = std::move(context);
  return r;
}

InequalityReport skipped_report(std::string name, std::string reason, nlohmann::json context) {
  InequalityReport r;
  r.name = std::move(name);
  r.skipped = true;
  r.pass = true;
  r.lhs = r.rhs = r.slack = 0.0;
  r.skip_reason = std::move(reason);
  r.context = std::move(context);
  return r;
}

nlohmann::json reports_to_json(const std::vector<InequalityReport>& reports) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : reports) a.push_back(r.to_json());
  return a;
}

std::size_t count_failures(const std::vector<InequalityReport>& reports) {
  return static_cast<std::size_t>(
      std::count_if(reports.begin(), reports.end(), [](const auto& r) { return !r.skipped && !r.pass; }));
}

double f_tau_power(const Modulus& m, double tau, int k, double x) { return euler_iterate(m, tau, k, x); }

namespace {

double w2sq(const Measure& a, const Measure& b) {
  double d = w2_distance(a, b);
  return d * d;
}

// W_{2,base}^2(a, b): glued through optimal plans to the base; W2^2 in 1D.
double transport_metric_sq(const Measure& base, const Measure& a, const Measure& b) {
  if (dim_of(base) == 1) return w2sq(a, b);
  auto B = to_atomic(base);
  auto g = glue(w2(to_atomic(a), B).plan, w2(to_atomic(b), B).plan);
  return pseudo_distance_sq(g);
}

nlohmann::json solver_context(const StepDiagnostics& d) {
  return {{"residual", jsonu::number_to_json(d.residual)},
          {"converged", d.converged},
          {"feasible", d.feasible},
          {"iterations", d.iterations}};
}

JkoConfig tightened(const JkoConfig& cfg) {
  JkoConfig c = cfg;
  c.inner_tol = cfg.inner_tol / 10.0;
  c.inner_max_iter = cfg.inner_max_iter * 2;
  return c;
}

FlowTrajectory run_flow(const Energy& e, const Measure& mu0, double tau, int steps, const JkoConfig& base) {
  JkoConfig cfg = base;
  cfg.tau = tau;
  cfg.steps = steps;
  if (e.time_dependent()) return flow_time_dependent(time_schedule(e, tau), mu0, cfg);
  return flow(e, mu0, cfg);
}

InequalityReport evi_once(const Energy& e, const Measure& mu, const Measure& nu, double tau, const Modulus& m,
                          const CheckOptions& opt, const ProxResult& mt) {
  double wmnu = transport_metric_sq(mu, mt.measure, nu);
  double lhs = euler_step(m, tau, wmnu) - w2sq(mu, nu);
  double rhs = 2.0 * tau * (e.eval(nu) - e.eval(mt.measure)) - w2sq(mu, mt.measure);
  nlohmann::json ctx{{"fixture", opt.fixture}, {"tau", tau}, {"solver", solver_context(mt.diag)}};
  return make_report("discrete_evi", lhs, rhs, opt.tol, ctx);
}

}  // namespace

InequalityReport check_discrete_evi(const Energy& e, const Measure& mu, const Measure& nu, double tau,
                                    const Modulus& m, const CheckOptions& opt, const ProxResult* mu_tau) {
  if (!(tau < opt.tau_star)) return skipped_report("discrete_evi", "tau >= tau_star", {{"fixture", opt.fixture}});
  if (!std::isfinite(e.eval(mu)) || !std::isfinite(e.eval(nu)))
    return skipped_report("discrete_evi", "measure outside the energy domain", {{"fixture", opt.fixture}});
  ProxResult mt;
  try {
    mt = mu_tau ? *mu_tau : proximal_step(e, mu, tau, opt.cfg);
  } catch (const ComputationError& err) {
    throw ComputationError(std::string("discrete_evi: ") + err.what());
  }
  auto rep = evi_once(e, mu, nu, tau, m, opt, mt);
  if (!rep.pass && opt.refine) {
    auto fine = proximal_step(e, mu, tau, tightened(opt.cfg));
    rep = evi_once(e, mu, nu, tau, m, opt, fine);
    rep.context["refined"] = true;
  }
  return rep;
}

InequalityReport check_contraction(const Energy& e, const Measure& mu, const Measure& nu, double tau,
                                   const Modulus& m, const CheckOptions& opt) {
  nlohmann::json ctx{{"fixture", opt.fixture}, {"tau", tau}, {"lambda", m.lambda()}};
  auto attempt = [&](const JkoConfig& cfg) {
    auto mt = proximal_step(e, mu, tau, cfg);
    auto nt = proximal_step(e, nu, tau, cfg);
    double Emu = e.eval(mu), Enu = e.eval(nu), Emt = e.eval(mt.measure), Ent = e.eval(nt.measure);
    double w0sq = w2sq(mu, nu);
    double lhs = f_tau_power(m, tau, 2, w2sq(mt.measure, nt.measure));
    double lam = m.lambda();
    nlohmann::json c = ctx;
    c["solver_mu"] = solver_context(mt.diag);
    c["solver_nu"] = solver_context(nt.diag);
    if (lam > 0.0) {
      double rhs = w0sq + lam * tau * m.omega_tilde(std::max(0.0, 2.0 * tau * (Ent - Emt))) + 2.0 * tau * (Emu - Emt);
      c["branch"] = "lambda_positive";
      return make_report("contraction", lhs, rhs, opt.tol, c);
    }
    double R = std::max(std::sqrt(w0sq), 3.0);
    double r = 4.0 * (R * R + std::abs(lam) * m.omega_tilde(R * R));
    double cr = c_r(m, r);
    double cap = std::min({1.0, opt.tau_star, lam == 0.0 ? kInf : 1.0 / (cr * std::abs(lam)),
                           Emu > Emt ? 0.5 / (Emu - Emt) : kInf, Enu > Ent ? 0.5 / (Enu - Ent) : kInf});
    c["branch"] = "lambda_nonpositive";
    c["R"] = R;
    c["r"] = r;
    c["c_r"] = cr;
    c["tau_cap"] = jsonu::number_to_json(cap);
    if (!(tau < cap)) return skipped_report("contraction", "tau violates the step-size cap", c);
    double rhs = w0sq - lam * tau * m.omega_tilde(R * R * w2_distance(nu, nt.measure)) + 2.0 * tau * (Emu - Emt) +
                 3.0 * lam * lam * cr * cr * tau * tau;
    return make_report("contraction", lhs, rhs, opt.tol, c);
  };
  auto rep = attempt(opt.cfg);
  if (!rep.skipped && !rep.pass && opt.refine) {
    rep = attempt(tightened(opt.cfg));
    rep.context["refined"] = true;
  }
  return rep;
}

double contraction_rate_bound(const Modulus& m, double t, double w0) {
  if (t == 0.0 || w0 == 0.0) return w0;
  return std::sqrt(flow_map(m, -2.0 * t, w0 * w0));
}

InequalityReport check_semigroup_contraction(const Energy& e, const Measure& mu, const Measure& nu, double t,
                                             int n, const Modulus& m, const CheckOptions& opt, SemigroupBound kind) {
  double w0 = w2_distance(mu, nu);
  nlohmann::json ctx{{"fixture", opt.fixture}, {"t", t}, {"n", n}, {"W0", w0}, {"lambda", m.lambda()}};
  std::string name = kind == SemigroupBound::rate ? "contraction_rate" : "n_step_contraction";
  if (t == 0.0) return make_report(name, w0, w0, opt.tol, ctx);
  if (kind == SemigroupBound::rate && m.lambda() < 0.0 &&
      (m.kind() == ModulusKind::log_lipschitz || m.kind() == ModulusKind::sqrt_psi)) {
    if (!(w0 <= kLogJunction))
      return skipped_report(name, "W2(0) above exp(-1 - sqrt 2)", ctx);
    double window = std::log(std::log(w0 * w0) / (-1.0 - std::sqrt(2.0))) / (2.0 * m.lambda_minus());
    ctx["window"] = window;
    if (!(t < window)) return skipped_report(name, "t outside the contraction window", ctx);
  }
  if (kind == SemigroupBound::rate && m.kind() == ModulusKind::polynomial) {
    if (!(w0 <= 1.0)) return skipped_report(name, "W2(0) above 1", ctx);
    if (m.lambda() < 0.0) {
      double window = (std::pow(w0, -2.0 * m.p()) - 1.0) / (2.0 * m.lambda_minus() * m.p());
      ctx["window"] = window;
      if (!(t < window)) return skipped_report(name, "t outside the contraction window", ctx);
    }
  }
  auto a = run_flow(e, mu, t / n, n, opt.cfg);
  auto b = run_flow(e, nu, t / n, n, opt.cfg);
  double wt = w2_distance(a.final_state(), b.final_state());
  ctx["Wt"] = wt;
  ctx["converged"] = a.all_converged() && b.all_converged();
  if (kind == SemigroupBound::rate) {
    double bound = contraction_rate_bound(m, t, w0);
    return make_report(name, wt, bound, opt.tol * bound, ctx);
  }
  // lambda > 0 is used through the coarse lambda = 0 estimate.
  Modulus mm = m.lambda() > 0.0 ? Modulus::lipschitz(0.0) : m;
  double lam = std::abs(mm.lambda());
  double Cmu = std::max(0.0, e.eval(mu) - a.energies.back());
  double Cnu = std::max(0.0, e.eval(nu) - b.energies.back());
  double R = std::max(w0 + std::sqrt(2.0 * (t + 1.0)) * (std::sqrt(Cmu) + std::sqrt(Cnu)), 3.0);
  double r = 4.0 * (t + 1.0) * (R * R + lam * mm.omega_tilde(R * R));
  double cr = c_r(mm, r);
  double need = t * std::max({1.0, std::isfinite(opt.tau_star) ? 1.0 / opt.tau_star : 0.0, cr * cr * lam * lam, R * R});
  ctx["R"] = R;
  ctx["r"] = r;
  ctx["n_required"] = need;
  if (!(n > need)) return skipped_report(name, "n below the required discretization", ctx);
  double lhs = flow_map(mm, 2.0 * t, wt * wt);
  double rhs = w0 * w0 + 2.0 * R * t / n;
  if (lam > 0.0)
    rhs += lam * t * mm.omega_tilde(R * R * R * std::sqrt(t / n)) + 5.0 * lam * lam * cr * cr * t * t / n +
           comparison_flow(mm, 2.0 * lam * t, 2.0 * lam * t * mm.omega(R * R) / n);
  return make_report(name, lhs, rhs, opt.tol, ctx);
}

std::vector<Measure> slope_samples(const Energy& e, const Measure& mu, const JkoConfig& cfg, int count) {
  std::vector<Measure> out;
  int nprox = std::isfinite(e.density_cap()) ? count : count / 2;
  for (int k = 0; k < nprox; ++k) {
    double tau = std::pow(10.0, -1.0 - 4.0 * k / std::max(1, nprox - 1));
    out.push_back(proximal_step(e, mu, tau, cfg).measure);
  }
  if (std::isfinite(e.density_cap()) || dim_of(mu) != 1) return out;
  QuantileMeasure q = std::holds_alternative<QuantileMeasure>(mu) ? std::get<QuantileMeasure>(mu)
                                                                  : to_quantile(mu, to_atomic(mu).size());
  const auto& x = q.positions();
  const auto& m = q.masses();
  std::vector<double> g;
  e.gradient_nodes(x, m, &q.cell_masses(), g);
  for (int k = 0; k < count - nprox; ++k) {
    double s = std::pow(10.0, -2.0 - 4.0 * k / std::max(1, count - nprox - 1));
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - s * g[i] / m[i];
    if (std::is_sorted(y.begin(), y.end())) out.push_back(QuantileMeasure(y, m));
  }
  return out;
}

InequalityReport check_hwi(const Energy& e, const Measure& mu0, const Measure& mu1, const Modulus& m,
                           const std::vector<Measure>& samples, const CheckOptions& opt) {
  double w = w2_distance(mu0, mu1);
  double lhs = e.eval(mu0) - e.eval(mu1);
  nlohmann::json ctx{{"fixture", opt.fixture}, {"W2", w}};
  if (w == 0.0) return make_report("hwi", lhs, 0.0, opt.tol, ctx);
  double slope = metric_slope_estimate(e, mu0, samples, m);
  auto rhs_of = [&](double s) { return s * w - 0.5 * m.lambda() * m.omega(w * w); };
  ctx["slope"] = slope;
  auto rep = make_report("hwi", lhs, rhs_of(slope), opt.tol, ctx);
  if (!rep.pass && opt.refine) {
    auto more = samples;
    for (auto& s : slope_samples(e, mu0, tightened(opt.cfg), 40)) more.push_back(std::move(s));
    slope = std::max(slope, metric_slope_estimate(e, mu0, more, m));
    ctx["slope"] = slope;
    ctx["refined"] = true;
    rep = make_report("hwi", lhs, rhs_of(slope), opt.tol, ctx);
  }
  return rep;
}

RateShape rate_shape_for(const Modulus& m) {
  switch (m.kind()) {
    case ModulusKind::lipschitz: return RateShape::lipschitz;
    case ModulusKind::polynomial: return RateShape::polynomial;
    default: return RateShape::log_lipschitz;
  }
}

double rate_envelope(RateShape shape, double lambda_minus, double t, int n) {
  double dn = static_cast<double>(n);
  if (shape != RateShape::log_lipschitz) return std::pow(dn, -0.25);
  return std::pow(std::log(dn) / std::sqrt(dn), 1.0 / (2.0 * std::exp(2.0 * lambda_minus * t)));
}

double RateStudy::bound(std::size_t k) const { return c_star * rate_envelope(shape, lambda_minus, t, n_list[k]); }

bool RateStudy::monotone() const {
  for (std::size_t k = 1; k < errors.size(); ++k)
    if (errors[k] > errors[k - 1] + 1e-12) return false;
  return true;
}

bool RateStudy::below_envelope(double rel_tol) const {
  for (std::size_t k = 0; k < errors.size(); ++k)
    if (errors[k] > bound(k) * (1.0 + rel_tol) + 1e-14) return false;
  return true;
}

nlohmann::json RateStudy::to_json() const {
  const char* names[] = {"lipschitz", "polynomial", "log_lipschitz"};
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < n_list.size(); ++k)
    rows.push_back({{"n", n_list[k]}, {"error", errors[k]}, {"bound", bound(k)},
                    {"converged", k < converged.size() ? static_cast<bool>(converged[k]) : true}});
  return {{"t", t},
          {"n_ref", n_ref},
          {"shape", names[static_cast<int>(shape)]},
          {"lambda_minus", lambda_minus},
          {"fitted_slope", fitted_slope},
          {"c_star", c_star},
          {"richardson_ratio", jsonu::number_to_json(richardson_ratio)},
          {"monotone", monotone()},
          {"below_envelope", below_envelope()},
          {"rows", rows}};
}

RateStudy rate_study(const Energy& e, const Measure& mu0, double t, const std::vector<int>& n_list, int n_ref,
                     const Modulus& m, const JkoConfig& cfg, double c_star, bool richardson) {
  for (std::size_t k = 1; k < n_list.size(); ++k)
    if (n_list[k] <= n_list[k - 1]) throw InvalidArgument("rate_study: n_list must be strictly increasing");
  if (!n_list.empty() && n_list.front() < 1) throw InvalidArgument("rate_study: n must be positive");
  RateStudy s;
  s.n_list = n_list;
  s.n_ref = n_ref;
  s.t = t;
  s.shape = rate_shape_for(m);
  s.lambda_minus = m.lambda_minus();
  Measure ref;
  try {
    ref = run_flow(e, mu0, t / n_ref, n_ref, cfg).final_state();
  } catch (const ComputationError& err) {
    throw ComputationError(std::string("rate_study reference: ") + err.what());
  }
  for (int n : n_list) {
    auto traj = run_flow(e, mu0, t / n, n, cfg);
    s.errors.push_back(w2_distance(traj.final_state(), ref));
    s.converged.push_back(traj.all_converged());
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    if (!(s.errors[k] > 0.0)) continue;
    double lx = std::log(static_cast<double>(n_list[k])), ly = std::log(s.errors[k]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    ++cnt;
  }
  if (cnt >= 2) s.fitted_slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  if (c_star > 0.0)
    s.c_star = c_star;
  else if (!n_list.empty())
    s.c_star = s.errors.front() / rate_envelope(s.shape, s.lambda_minus, t, n_list.front());
  if (richardson && n_ref >= 4) {
    double e2 = w2_distance(run_flow(e, mu0, t / (n_ref / 2), n_ref / 2, cfg).final_state(), ref);
    double e4 = w2_distance(run_flow(e, mu0, t / (n_ref / 4), n_ref / 4, cfg).final_state(), ref);
    s.richardson_ratio = e2 > 0.0 ? e4 / e2 : kInf;
  }
  return s;
}

nlohmann::json ConvexitySummary::to_json() const {
  nlohmann::json j{{"fixture", fixture},
                   {"trials", trials},
                   {"min_slack", jsonu::number_to_json(min_slack)},
                   {"tolerance", tolerance},
                   {"negative", negative}};
  if (!witness.is_null()) j["witness"] = witness;
  return j;
}

ConvexitySummary check_omega_convexity(const Energy& e, const PairSampler& sampler, const Modulus& m, int trials,
                                       std::uint64_t seed, double tol, const std::string& fixture) {
  std::mt19937_64 rng(seed);
  ConvexitySummary s;
  s.fixture = fixture;
  s.trials = trials;
  s.tolerance = tol;
  for (int k = 0; k < trials; ++k) {
    auto [q0, q1] = sampler(rng);
    auto c = quantile_coupling(q0, q1);
    double slack = above_tangent_slack(e, c, m);
    if (slack < -tol) ++s.negative;
    if (slack < s.min_slack) {
      s.min_slack = slack;
      if (slack < -tol)
        s.witness = {{"trial", k}, {"slack", slack}, {"mu0", measure_to_json(q0)}, {"mu1", measure_to_json(q1)}};
    }
  }
  return s;
}

InequalityReport check_large_small_step(const Energy& e, const Measure& mu, double tau, double h,
                                        const CheckOptions& opt) {
  nlohmann::json ctx{{"fixture", opt.fixture}, {"tau", tau}, {"h", h}};
  if (!(0.0 <= h && h <= tau && tau < opt.tau_star))
    return skipped_report("large_small_step", "requires 0 <= h <= tau < tau_star", ctx);
  auto attempt = [&](const JkoConfig& cfg) {
    auto mt = proximal_step(e, mu, tau, cfg);
    auto nu = rescaled_intermediate(mu, mt.measure, nullptr, h, tau);
    auto jh = proximal_step(e, nu, h, cfg);
    nlohmann::json c = ctx;
    c["solver_tau"] = solver_context(mt.diag);
    c["solver_h"] = solver_context(jh.diag);
    return make_report("large_small_step", w2_distance(jh.measure, mt.measure), 0.0, opt.tol, c);
  };
  auto rep = attempt(opt.cfg);
  if (!rep.pass && opt.refine) {
    rep = attempt(tightened(opt.cfg));
    rep.context["refined"] = true;
  }
  return rep;
}

nlohmann::json CauchyStudy::to_json() const {
  return {{"n_list", n_list}, {"distances", distances}, {"ratios", ratios}};
}

CauchyStudy time_dependent_cauchy(const Energy& e, const Measure& mu0, double t, const std::vector<int>& n_list,
                                  const JkoConfig& cfg) {
  CauchyStudy s;
  s.n_list = n_list;
  std::vector<Measure> finals;
  for (int n : n_list) {
    JkoConfig c = cfg;
    c.tau = t / n;
    c.steps = n;
    finals.push_back(flow_time_dependent(time_schedule(e, c.tau), mu0, c).final_state());
  }
  for (std::size_t k = 0; k + 1 < finals.size(); ++k) s.distances.push_back(w2_distance(finals[k], finals[k + 1]));
  for (std::size_t k = 0; k + 1 < s.distances.size(); ++k)
    s.ratios.push_back(s.distances[k + 1] > 0.0 ? s.distances[k] / s.distances[k + 1] : kInf);
  return s;
}

}  // namespace omegaflow
