#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <random>
#include <thread>

#include "omegaflow/common.hpp"
#include "omegaflow/fixtures.hpp"
#include "omegaflow/transport.hpp"
#include "omegaflow/verify.hpp"

namespace omegaflow {

namespace {

using Reports = std::vector<InequalityReport>;
using Job = std::function<Reports()>;

// Runs jobs on up to `threads` workers; results keep job order.
Reports run_jobs(const std::vector<Job>& jobs, int threads) {
  std::vector<Reports> out(jobs.size());
  std::vector<std::exception_ptr> errs(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < jobs.size();) {
      try {
        out[k] = jobs[k]();
      } catch (...) {
        errs[k] = std::current_exception();
      }
    }
  };
  int nt = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < nt; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  Reports all;
  for (auto& r : out) all.insert(all.end(), r.begin(), r.end());
  return all;
}

CheckOptions options_for(const fixtures::Fixture& f, double tol) {
  CheckOptions o;
  o.tol = tol;
  o.fixture = f.id;
  return o;
}

QuantileMeasure random_like(std::mt19937_64& rng, const fixtures::Fixture& f) {
  return fixtures::random_constrained(rng, f.initial.size(), f.cap, 2.0, 1.0);
}

// ---------------------------------------------------------------- ode

Reports suite_ode(const SuiteOptions&) {
  Reports r;
  std::vector<Modulus> mods{Modulus::lipschitz(1.0),      Modulus::lipschitz(-1.0),   Modulus::polynomial(0.5, 1.0),
                            Modulus::polynomial(0.5, -1.0), Modulus::log_lipschitz(1.0), Modulus::log_lipschitz(-1.0)};
  for (const auto& m : mods)
    for (double x : {1e-3, 0.01, 0.03, 0.06, 0.085})
      for (double t : {0.5, 1.0})
        for (int n : {10, 100, 1000}) {
          double err = std::abs(flow_map(m, t, x) - euler_iterate(m, t / n, n, x));
          double bound = euler_error_bound(m, t, x, n);
          r.push_back(make_report("ode_error_bound", err, bound, 0.0,
                                  {{"modulus", m.to_json()}, {"x", x}, {"t", t}, {"n", n}}));
        }
  return r;
}

// ---------------------------------------------------------- transport

Reports suite_transport(const SuiteOptions& opt) {
  Reports r;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0), W(0.05, 1.0);
  std::uniform_int_distribution<int> Nat(1, 32);
  int count = opt.quick ? 100 : 1000;
  double worst = 0.0;
  for (int k = 0; k < count; ++k) {
    int na = Nat(rng), nb = Nat(rng);
    std::vector<double> xa(na), wa(na), xb(nb), wb(nb);
    for (int i = 0; i < na; ++i) xa[i] = 2.0 * U(rng), wa[i] = W(rng);
    for (int i = 0; i < nb; ++i) xb[i] = 2.0 * U(rng), wb[i] = W(rng);
    auto a = make_atomic(xa, wa), b = make_atomic(xb, wb);
    worst = std::max(worst, std::abs(w2_1d(a, b).distance - w2_exact(a, b).distance));
  }
  r.push_back(make_report("w2_1d_vs_exact", worst, 0.0, 1e-9, {{"instances", count}}));

  auto random_measure = [&](int dim, int atoms) {
    std::vector<Vec2> p(static_cast<std::size_t>(atoms));
    std::vector<double> w(p.size());
    for (auto& q : p) q = {U(rng), dim == 2 ? U(rng) : 0.0};
    for (auto& v : w) v = W(rng);
    return AtomicMeasure(dim, p, w);
  };
  double worst_id = 0.0;
  int glued = opt.quick ? 20 : 100;
  for (int k = 0; k < glued; ++k) {
    int dim = k % 2 ? 2 : 1;
    auto base = random_measure(dim, 3 + k % 4), m0 = random_measure(dim, 4), m1 = random_measure(dim, 3),
         rho = random_measure(dim, 5);
    auto g = glue(std::vector<TransportPlan>{w2(m0, base).plan, w2(m1, base).plan, w2(rho, base).plan});
    for (double alpha : {0.0, 0.25, 0.5, 0.9, 1.0}) {
      double lhs = interpolant_distance_sq(g, alpha, 2);
      double rhs = (1 - alpha) * pseudo_distance_sq(g, 0, 2) + alpha * pseudo_distance_sq(g, 1, 2) -
                   alpha * (1 - alpha) * pseudo_distance_sq(g, 0, 1);
      worst_id = std::max(worst_id, std::abs(lhs - rhs));
    }
  }
  r.push_back(make_report("glued_identity", worst_id, 0.0, 1e-10, {{"instances", glued}}));
  return r;
}

// ---------------------------------------------------------------- evi

Reports evi_fixture(const std::string& id, const SuiteOptions& opt) {
  auto f = fixtures::make_fixture(id, 32);
  int steps = opt.quick ? 6 : 25;
  JkoConfig cfg;
  cfg.tau = f.tau;
  cfg.steps = steps;
  auto traj = flow(f.energy, f.initial, cfg);
  std::mt19937_64 rng(opt.seed * 1000 + (id.size() * 131 + static_cast<unsigned char>(id[0])));
  auto o = options_for(f, opt.tol);
  Reports r;
  for (int k = 1; k <= steps; ++k) {
    ProxResult pr{traj.states[k], 0.0, traj.energies[k], traj.step_distances[k], traj.diagnostics[k]};
    const auto& cur = std::get<QuantileMeasure>(traj.states[k]);
    std::vector<Measure> nus{Measure(f.initial), Measure(random_like(rng, f)), Measure(random_like(rng, f)),
                             Measure(fixtures::perturbed(cur, 0.05, 1)),
                             traj.states[std::min(k + 1, steps)]};
    for (auto& nu : nus) {
      auto rep = check_discrete_evi(f.energy, traj.states[k - 1], nu, f.tau, f.modulus, o, &pr);
      rep.context["step"] = k;
      r.push_back(std::move(rep));
    }
  }
  return r;
}

// Long-time constrained aggregation: cap, descent and the collapsed block.
Reports aggregation_long_time(const SuiteOptions& opt) {
  auto f = fixtures::make_fixture("aggregation", 32);
  JkoConfig cfg;
  cfg.tau = 0.1;
  cfg.steps = opt.quick ? 40 : 100;
  auto traj = flow(f.energy, f.initial, cfg);
  double worst_density = 0.0, worst_increase = -kInf;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const auto& q = std::get<QuantileMeasure>(traj.states[k]);
    for (std::size_t j = 0; j < q.num_cells(); ++j) worst_density = std::max(worst_density, q.density(j));
    if (k > 0) worst_increase = std::max(worst_increase, traj.energies[k] - traj.energies[k - 1]);
  }
  Reports r;
  nlohmann::json ctx{{"fixture", f.id}, {"steps", cfg.steps}, {"tau", cfg.tau}};
  r.push_back(make_report("aggregation_cap", worst_density, f.cap + 1e-8, 0.0, ctx));
  double e0 = std::abs(traj.energies.front());
  r.push_back(make_report("aggregation_descent", worst_increase, 0.0, 1e-12 * std::max(1.0, e0), ctx));
  const auto& last = std::get<QuantileMeasure>(traj.final_state());
  double mean = 0.0;
  for (std::size_t i = 0; i < last.size(); ++i) mean += last.masses()[i] * last.positions()[i];
  // Uniform density M on an interval of length 1/M, resolved finely.
  auto target = fixtures::block(mean, 1.0 / f.cap, 2048);
  r.push_back(make_report("aggregation_block_limit", w2_distance(traj.final_state(), target), 0.05, 0.0, ctx));
  return r;
}

Reports suite_evi(const SuiteOptions& opt) {
  std::vector<Job> jobs;
  for (std::string id : {"quadratic", "entropy", "aggregation", "keller_segel", "quartic", "reglog", "drift_power"})
    jobs.push_back([id, &opt] { return evi_fixture(id, opt); });
  jobs.push_back([&opt] { return aggregation_long_time(opt); });
  return run_jobs(jobs, opt.threads);
}

// -------------------------------------------------------- contraction

Reports suite_contraction(const SuiteOptions& opt) {
  std::vector<Job> jobs;
  // One-step contraction with both right-hand sides.
  for (std::string id : {"quadratic", "entropy", "aggregation", "keller_segel", "reglog"}) {
    jobs.push_back([id, &opt] {
      auto f = fixtures::make_fixture(id, 24);
      std::mt19937_64 rng(opt.seed * 31 + id.size());
      double tau = f.modulus.lambda() < 0.0 ? 0.01 : 0.05;
      Reports r;
      for (int k = 0; k < (opt.quick ? 3 : 10); ++k) {
        QuantileMeasure mu = k == 0 ? f.initial : random_like(rng, f);
        QuantileMeasure nu = k % 3 == 2 ? fixtures::perturbed(mu, 0.1, 1) : random_like(rng, f);
        r.push_back(check_contraction(f.energy, mu, nu, tau, f.modulus, options_for(f, opt.tol)));
      }
      return r;
    });
  }
  // Lipschitz rate: Dirac pairs and quantile pairs under V = x^2/2.
  int pairs = opt.quick ? 4 : 20;
  int nsteps = opt.quick ? 512 : 2048;
  for (int k = 0; k < pairs; ++k) {
    jobs.push_back([k, nsteps, &opt] {
      auto f = fixtures::make_fixture("quadratic", 16);
      std::mt19937_64 rng(opt.seed * 7 + k);
      std::uniform_real_distribution<double> U(-2.0, 2.0);
      Measure mu, nu;
      if (k % 2 == 0) {
        mu = make_atomic({U(rng)});
        nu = make_atomic({U(rng)});
      } else {
        mu = fixtures::random_constrained(rng, 16, kInf, 2.0, 1.5);
        nu = fixtures::gaussian(U(rng), 0.3 + 0.2 * std::abs(U(rng)), 16);
      }
      auto o = options_for(f, 1e-3);
      Reports r;
      for (double t : {0.5, 1.0})
        r.push_back(check_semigroup_contraction(f.energy, mu, nu, t, nsteps, f.modulus, o));
      return r;
    });
  }
  // Polynomial rate: Dirac pairs under V = x^4/4.
  jobs.push_back([nsteps, &opt] {
    auto f = fixtures::make_fixture("quartic", 16);
    auto o = options_for(f, 1e-3);
    Reports r;
    for (auto [a, b] : std::vector<std::pair<double, double>>{{0.2, 0.9}, {-0.3, 0.4}, {0.5, 0.6}, {1.2, 0.4}})
      for (double t : {0.5, 1.0})
        r.push_back(check_semigroup_contraction(f.energy, make_atomic({a}), make_atomic({b}), t, nsteps, f.modulus, o));
    return r;
  });
  // Log-Lipschitz rate with W2(0) = e^{-3}, and the n-step bound.
  for (std::string id : {"keller_segel", "aggregation", "reglog"}) {
    jobs.push_back([id, &opt] {
      auto f = fixtures::make_fixture(id, 32);
      auto nu = fixtures::perturbed(f.initial, std::exp(-3.0), 1);
      auto o = options_for(f, 1e-2);
      Reports r;
      for (double t : {0.02, 0.05, 0.1})
        r.push_back(check_semigroup_contraction(f.energy, f.initial, nu, t, opt.quick ? 40 : 200, f.modulus, o));
      auto od = options_for(f, opt.tol);
      if (!opt.quick)
        r.push_back(check_semigroup_contraction(f.energy, f.initial, nu, 0.1, 400, f.modulus, od,
                                                SemigroupBound::discrete));
      return r;
    });
  }
  // Semigroup consistency: n + n steps against n steps restarted from the midpoint.
  jobs.push_back([&opt] {
    auto f = fixtures::make_fixture("keller_segel", 32);
    JkoConfig cfg;
    cfg.tau = 0.02;
    cfg.steps = 20;
    auto whole = flow(f.energy, f.initial, cfg);
    cfg.steps = 10;
    auto first = flow(f.energy, f.initial, cfg);
    auto second = flow(f.energy, first.final_state(), cfg);
    double d = w2_distance(whole.final_state(), second.final_state());
    return Reports{make_report("semigroup_consistency", d, 0.0, 1e-6, {{"fixture", f.id}, {"tau", cfg.tau}})};
  });
  return run_jobs(jobs, opt.threads);
}

// -------------------------------------------------------------- rates

struct RateFamily {
  std::string id;
  double t;
  bool dirac;
};

std::vector<RateFamily> rate_families() {
  return {{"quadratic", 1.0, true}, {"quartic", 1.0, false}, {"keller_segel", 0.5, false}, {"aggregation", 0.5, false}, {"reglog", 0.5, false}};
}

Reports rate_family_reports(const RateFamily& fam, const SuiteOptions& opt) {
  auto f = fixtures::make_fixture(fam.id, 32);
  Measure mu0 = fam.dirac ? Measure(make_atomic({1.0})) : Measure(f.initial);
  std::vector<int> ns;
  int top = opt.quick ? 64 : 512;
  for (int n = 8; n <= top; n *= 2) ns.push_back(n);
  int n_ref = opt.quick ? 512 : 4096;
  double frozen = 0.0;
  try {
    auto rates = fixtures::load_json("rates.json");
    if (!opt.quick && rates.contains(fam.id)) frozen = rates[fam.id]["c_star"].get<double>();
  } catch (const InvalidArgument&) {
  }
  auto study = rate_study(f.energy, mu0, fam.t, ns, n_ref, f.modulus, JkoConfig{}, 0.0, !opt.quick);
  double fitted = study.c_star;
  if (frozen > 0.0) study.c_star = frozen;
  nlohmann::json ctx{{"fixture", fam.id}, {"study", study.to_json()}};
  Reports r;
  double worst_increase = -kInf, worst_ratio = 0.0;
  for (std::size_t k = 0; k < ns.size(); ++k) {
    if (k > 0) worst_increase = std::max(worst_increase, study.errors[k] - study.errors[k - 1]);
    worst_ratio = std::max(worst_ratio, study.errors[k] / study.bound(k));
  }
  r.push_back(make_report("rate_monotone", worst_increase, 0.0, 1e-12, ctx));
  r.push_back(make_report("rate_envelope", worst_ratio, 1.0, 1e-9, ctx));
  if (frozen > 0.0)
    r.push_back(make_report("rate_constant_frozen", std::abs(fitted - frozen) / frozen, 0.05, 0.0,
                            {{"fixture", fam.id}, {"fitted", fitted}, {"frozen", frozen}}));
  else
    r.push_back(skipped_report("rate_constant_frozen", "no frozen constant for this run",
                               {{"fixture", fam.id}, {"fitted", fitted}}));
  return r;
}

Reports closed_form_reports(const SuiteOptions&) {
  Reports r;
  Energy e;
  e.potential = Potential::quadratic(1.0);
  JkoConfig cfg;
  double worst = 0.0;
  for (double a : {-2.0, 0.5, 3.0})
    for (double tau : {0.01, 0.1, 1.0}) {
      auto pr = proximal_step(e, make_atomic({a}), tau, cfg);
      worst = std::max(worst, std::abs(to_atomic(pr.measure).points()[0][0] - a / (1.0 + tau)));
    }
  r.push_back(make_report("jko_closed_form", worst, 0.0, 1e-10));
  std::vector<double> lx, ly;
  for (int n = 8; n <= 1024; n *= 2) {
    cfg.tau = 1.0 / n;
    cfg.steps = n;
    auto traj = flow(e, make_atomic({1.0}), cfg);
    double err = std::abs(to_atomic(traj.final_state()).points()[0][0] - std::exp(-1.0));
    lx.push_back(std::log(n));
    ly.push_back(std::log(err));
  }
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) mx += lx[k] / lx.size(), my += ly[k] / ly.size();
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) sxy += (lx[k] - mx) * (ly[k] - my), sxx += (lx[k] - mx) * (lx[k] - mx);
  double slope = sxy / sxx;
  r.push_back(make_report("closed_form_n_step_slope", std::abs(slope + 1.0), 0.05, 0.0, {{"slope", slope}}));
  return r;
}

Reports suite_rates(const SuiteOptions& opt) {
  std::vector<Job> jobs;
  jobs.push_back([&opt] { return closed_form_reports(opt); });
  for (const auto& fam : rate_families()) jobs.push_back([fam, &opt] { return rate_family_reports(fam, opt); });
  jobs.push_back([&opt] {
    Reports r;
    for (std::string id : {"quadratic", "entropy"}) {
      auto f = fixtures::make_fixture(id, 24);
      auto o = options_for(f, 1e-5);
      for (double h : {0.0, 0.05, 0.1, 0.2}) r.push_back(check_large_small_step(f.energy, f.initial, 0.2, h, o));
    }
    return r;
  });
  return run_jobs(jobs, opt.threads);
}

// ---------------------------------------------------------- convexity

Reports suite_convexity(const SuiteOptions& opt) {
  std::vector<Job> jobs;
  jobs.push_back([&opt] {
    Reports r;
    nlohmann::json frozen;
    try {
      frozen = fixtures::load_json("calibration.json");
    } catch (const InvalidArgument& e) {
      return Reports{skipped_report("calibration_frozen", e.what())};
    }
    auto fresh = fixtures::compute_calibration(frozen.value("seed", 7));
    for (std::string id : {"aggregation", "reglog", "drift_power"}) {
      double a = fresh[id]["C"].get<double>(), b = frozen[id]["C"].get<double>();
      r.push_back(make_report("calibration_frozen", std::abs(a - b) / b, 0.05, 0.0,
                              {{"fixture", id}, {"computed", a}, {"frozen", b}}));
    }
    (void)opt;
    return r;
  });
  int trials = opt.quick ? 40 : 200;
  for (std::string id : {"aggregation", "reglog", "drift_power"}) {
    jobs.push_back([id, trials, &opt] {
      auto f = fixtures::make_fixture(id, 24);
      double M = std::isfinite(f.cap) ? f.cap : kInf;
      PairSampler sampler = [M](std::mt19937_64& rng) {
        std::uniform_real_distribution<double> U(0.0, 1.0);
        auto a = fixtures::random_constrained(rng, 24, M, 3.0, 1.5);
        if (U(rng) < 0.3) return std::make_pair(a, fixtures::perturbed(a, 0.5 * U(rng), 1));
        return std::make_pair(a, fixtures::random_constrained(rng, 24, M, 3.0, 1.5));
      };
      auto s = check_omega_convexity(f.energy, sampler, f.modulus, trials, opt.seed + 11, opt.tol, id);
      return Reports{make_report("omega_convexity", -s.min_slack, 0.0, opt.tol,
                                 {{"fixture", id}, {"summary", s.to_json()}, {"modulus", f.modulus.to_json()}})};
    });
  }
  // Wrong modulus on the nonconvex capped kernel must produce a witness.
  jobs.push_back([trials, &opt] {
    auto f = fixtures::make_fixture("reglog", 24);
    PairSampler sampler = [](std::mt19937_64& rng) {
      return std::make_pair(fixtures::random_constrained(rng, 24, fixtures::kCapM, 3.0, 1.5),
                            fixtures::random_constrained(rng, 24, fixtures::kCapM, 3.0, 1.5));
    };
    auto s = check_omega_convexity(f.energy, sampler, Modulus::lipschitz(0.0), trials, opt.seed + 13, opt.tol,
                                   "reglog");
    return Reports{make_report("wrong_modulus_witness", s.min_slack, -opt.tol, 0.0,
                               {{"fixture", "reglog"}, {"summary", s.to_json()}})};
  });
  for (std::string id : {"quadratic", "entropy", "aggregation", "keller_segel", "reglog", "drift_power"}) {
    jobs.push_back([id, &opt] {
      auto f = fixtures::make_fixture(id, 24);
      std::mt19937_64 rng(opt.seed * 17 + id.size());
      auto o = options_for(f, 1e-5);
      JkoConfig cfg;
      auto samples = slope_samples(f.energy, f.initial, cfg);
      Reports r;
      std::vector<Measure> targets{Measure(random_like(rng, f)), Measure(random_like(rng, f)),
                                   Measure(fixtures::perturbed(f.initial, 0.2, 1)),
                                   proximal_step(f.energy, f.initial, 0.1, cfg).measure};
      for (auto& t : targets) r.push_back(check_hwi(f.energy, f.initial, t, f.modulus, samples, o));
      return r;
    });
  }
  jobs.push_back([&opt] {
    auto f = fixtures::make_fixture("quadratic", 2);
    auto o = options_for(f, 1e-6);
    Reports r;
    for (auto [a, b] : std::vector<std::pair<double, double>>{{1.0, -0.5}, {2.0, 1.9}, {-1.5, 0.7}}) {
      Measure mu0 = make_atomic({a});
      std::vector<Measure> samples{proximal_step(f.energy, mu0, 1e-3, JkoConfig{}).measure};
      r.push_back(check_hwi(f.energy, mu0, make_atomic({b}), f.modulus, samples, o));
    }
    (void)opt;
    return r;
  });
  return run_jobs(jobs, opt.threads);
}

// ----------------------------------------------------------- appendix

Reports suite_appendix(const SuiteOptions& opt) {
  Reports r;
  auto m = modulus_from_phi([](double s) { return s; }, 1.0);
  double worst = 0.0;
  for (int k = 0; k <= 1000; ++k) {
    double x = k / 1000.0;
    worst = std::max(worst, std::abs(m.omega(x) - x));
  }
  r.push_back(make_report("phi_modulus", worst, 0.0, 1e-8));
  auto f = fixtures::make_fixture("time_quadratic", 24);
  std::vector<int> ns = opt.quick ? std::vector<int>{8, 16, 32, 64} : std::vector<int>{16, 32, 64, 128, 256};
  auto s = time_dependent_cauchy(f.energy, f.initial, 1.0, ns, JkoConfig{});
  for (std::size_t k = 0; k < s.ratios.size(); ++k)
    r.push_back(make_report("time_dependent_cauchy", 1.2, s.ratios[k], 0.0,
                            {{"fixture", f.id}, {"n", ns[k]}, {"study", s.to_json()}}));
  return r;
}

}  // namespace

std::vector<std::string> suite_names() { return {"ode", "transport", "evi", "contraction", "rates", "convexity", "appendix"}; }

std::vector<InequalityReport> run_suite(const std::string& name, const SuiteOptions& opt) {
  if (name == "ode") return suite_ode(opt);
  if (name == "transport") return suite_transport(opt);
  if (name == "evi") return suite_evi(opt);
  if (name == "contraction") return suite_contraction(opt);
  if (name == "rates") return suite_rates(opt);
  if (name == "convexity") return suite_convexity(opt);
  if (name == "appendix") return suite_appendix(opt);
  throw InvalidArgument("unknown suite '" + name + "'");
}

}  // namespace omegaflow
