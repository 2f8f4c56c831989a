#include <doctest.h>

#include <random>

#include "omegaflow/jko.hpp"

using namespace omegaflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

Energy quadratic_energy() {
  Energy e;
  e.potential = Potential::quadratic();
  return e;
}

JkoConfig config(double tau, int steps) {
  JkoConfig c;
  c.tau = tau;
  c.steps = steps;
  return c;
}

double objective(const std::vector<double>& u, const std::vector<double>& v, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += w[i] * (u[i] - v[i]) * (u[i] - v[i]);
  return s;
}

// Exact projection by enumerating active constraint sets: each set splits the
// indices into runs tied at their minimal gaps, whose optimal shift is a
// weighted mean. The best feasible candidate is the projection.
std::vector<double> brute_force_project(const std::vector<double>& v, const std::vector<double>& w,
                                        const std::vector<double>& gaps) {
  std::size_t n = v.size();
  std::vector<double> best;
  double best_obj = kInf;
  for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<double> u(n);
    std::size_t start = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bool tied = i + 1 < n && (mask >> i) & 1u;
      if (tied) continue;
      // run [start, i]
      std::vector<double> off(i - start + 1, 0.0);
      for (std::size_t k = start + 1; k <= i; ++k) off[k - start] = off[k - start - 1] + gaps[k - 1];
      double num = 0.0, den = 0.0;
      for (std::size_t k = start; k <= i; ++k) {
        num += w[k] * (v[k] - off[k - start]);
        den += w[k];
      }
      for (std::size_t k = start; k <= i; ++k) u[k] = num / den + off[k - start];
      start = i + 1;
    }
    bool feasible = true;
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (u[i + 1] - u[i] < gaps[i] - 1e-12) feasible = false;
    double obj = objective(u, v, w);
    if (feasible && obj < best_obj) {
      best_obj = obj;
      best = u;
    }
  }
  return best;
}

QuantileMeasure spread_nodes(int n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.5, 1.5);
  std::vector<double> x(n);
  x[0] = lo;
  std::vector<double> steps(n - 1);
  double s = 0.0;
  for (auto& v : steps) s += v = U(rng);
  for (int i = 1; i < n; ++i) x[i] = x[i - 1] + (hi - lo) * steps[i - 1] / s;
  return QuantileMeasure(x);
}

}  // namespace

TEST_CASE("isotonic projection examples") {
  std::vector<double> feasible{0.0, 0.5, 2.0};
  CHECK(isotonic_project(feasible, {1, 1, 1}) == feasible);
  auto p = isotonic_project({1.0, 0.0}, {1.0, 1.0});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));
  auto q = isotonic_project({1.0, 0.0}, {1.0, 1.0}, {1.0});
  CHECK(q[0] == doctest::Approx(0.0));
  CHECK(q[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(isotonic_project({1.0, 0.0}, {1.0, 1.0}, {-1.0}), InvalidArgument);
}

TEST_CASE("isotonic projection matches the active-set oracle and KKT") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> V(-1.0, 1.0), W(0.1, 2.0), G(0.0, 0.4);
  for (int t = 0; t < 300; ++t) {
    std::size_t n = 2 + t % 6;
    std::vector<double> v(n), w(n), g(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = V(rng);
      w[i] = W(rng);
    }
    for (auto& x : g) x = t % 3 == 0 ? 0.0 : G(rng);
    auto u = isotonic_project(v, w, g);
    auto ref = brute_force_project(v, w, g);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(u[i] - ref[i]) < 1e-12);
    // KKT: the multiplier of constraint i is the prefix sum of w (v - u); it is
    // nonnegative and vanishes on inactive constraints.
    double lam = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      lam += w[i] * (v[i] - u[i]);
      double slack = u[i + 1] - u[i] - g[i];
      CHECK(slack >= -1e-12);
      CHECK(lam >= -1e-10);
      CHECK(std::abs(lam * slack) <= 1e-10);
    }
    lam += w[n - 1] * (v[n - 1] - u[n - 1]);
    CHECK(std::abs(lam) < 1e-10);
  }
}

TEST_CASE("proximal step closed forms") {
  auto e = quadratic_energy();
  JkoConfig cfg = config(0.3, 1);
  for (double a : {-2.0, 0.5, 3.0}) {
    auto r = proximal_step(e, make_atomic({a}), 0.3, cfg);
    CHECK(std::abs(to_atomic(r.measure).xs()[0] - a / 1.3) < 1e-10);
    auto same = proximal_step(e, make_atomic({a}), 0.0, cfg);
    CHECK(to_atomic(same.measure).xs()[0] == a);
  }
  // Quantile nodes move independently under a potential.
  QuantileMeasure q({-1.0, 0.0, 2.0});
  auto r = proximal_step(e, q, 0.5, cfg);
  auto& out = std::get<QuantileMeasure>(r.measure);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(out.positions()[i] - q.positions()[i] / 1.5) < 1e-10);
  CHECK(r.diag.converged);
}

TEST_CASE("flow of a Dirac under the quadratic potential") {
  auto e = quadratic_energy();
  double a = 2.0, t = 1.0;
  for (int n : {4, 16, 64}) {
    auto tr = flow(e, make_atomic({a}), config(t / n, n));
    CHECK(tr.states.size() == static_cast<std::size_t>(n + 1));
    double x = to_atomic(tr.final_state()).xs()[0];
    CHECK(std::abs(x - a * std::pow(1.0 + t / n, -n)) < 1e-10);
    CHECK(std::abs(x - a * std::exp(-t)) < 2.0 * a * t * t / n);
  }
}

TEST_CASE("zero energy gives a constant trajectory") {
  Energy zero;
  QuantileMeasure q({-1.0, 0.2, 0.3});
  auto tr = flow(zero, q, config(0.5, 5));
  for (const auto& s : tr.states) CHECK(std::get<QuantileMeasure>(s).positions() == q.positions());
}

TEST_CASE("capped aggregation respects the density bound and descends") {
  Energy e;
  e.kernel = Kernel::newtonian(1);
  e.constraint = Constraint{kInf, 1.0};
  std::mt19937_64 rng(3);
  auto q = spread_nodes(40, -2.0, 2.0, rng);
  auto tr = flow(e, q, config(0.1, 60));
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    CHECK(lp_norm(tr.states[k], kInf) <= 1.0 + 1e-8);
    if (k > 0) {
      CHECK(tr.energies[k] <= tr.energies[k - 1] + 1e-8 * 0.1);
      double d = tr.step_distances[k];
      CHECK(d * d <= 2 * 0.1 * (tr.energies[k - 1] - tr.energies[k]) + 1e-12);
    }
  }
  CHECK(tr.all_converged());
}

TEST_CASE("entropy flow spreads like the heat equation") {
  Energy e;
  e.internal = Internal{};
  std::vector<double> x(41);
  for (int i = 0; i <= 40; ++i) x[i] = -1.0 + i / 20.0;
  QuantileMeasure q(x);
  double tau = 0.01;
  auto tr = flow(e, q, config(tau, 20));
  // d/dt variance = 2 for the heat equation.
  double v0 = second_moment(tr.states.front()), v1 = second_moment(tr.final_state());
  CHECK((v1 - v0) / 0.2 == doctest::Approx(2.0).epsilon(0.05));
  for (std::size_t k = 1; k < tr.states.size(); ++k) {
    CHECK(tr.energies[k] <= tr.energies[k - 1]);
    double d = tr.step_distances[k];
    CHECK(d * d <= 2 * tau * (tr.energies[k - 1] - tr.energies[k]) + 1e-12);
  }
}

TEST_CASE("nonconvex kernels use several starts without losing descent") {
  Energy e;
  e.kernel = Kernel::smooth("regularized_log", 1.0 / (2 * kPi), 0.1);
  e.constraint = Constraint{kInf, 1.0};
  std::mt19937_64 rng(4);
  auto q = spread_nodes(30, -2.0, 2.0, rng);
  auto tr = flow(e, q, config(0.2, 10));
  for (std::size_t k = 1; k < tr.states.size(); ++k) {
    CHECK(tr.energies[k] <= tr.energies[k - 1]);
    CHECK(lp_norm(tr.states[k], kInf) <= 1.0 + 1e-8);
  }
}

TEST_CASE("finite-p caps via penalty") {
  Energy e;
  e.kernel = Kernel::newtonian(1);
  e.constraint = Constraint{2.0, 1.0};
  std::mt19937_64 rng(5);
  auto q = spread_nodes(20, -1.5, 1.5, rng);
  JkoConfig cfg = config(0.2, 5);
  cfg.constraint_mode = ConstraintMode::penalty;
  auto tr = flow(e, q, cfg);
  for (std::size_t k = 1; k < tr.states.size(); ++k) {
    CHECK(tr.diagnostics[k].feasible);
    CHECK(tr.constraint_violation[k] <= 1e-6);
  }
}

TEST_CASE("two-dimensional proximal steps") {
  auto e = quadratic_energy();
  auto mu = make_atomic_2d(std::vector<Vec2>{{1, 0}, {0, 2}, {-1, -1}});
  auto r = proximal_step(e, mu, 0.25, config(0.25, 1));
  const auto& out = std::get<AtomicMeasure>(r.measure);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(out.points()[i][0] - mu.points()[i][0] / 1.25) < 1e-9);
    CHECK(std::abs(out.points()[i][1] - mu.points()[i][1] / 1.25) < 1e-9);
  }
  // Attraction shrinks the cloud while the mean stays fixed.
  Energy agg;
  agg.kernel = Kernel::smooth("quadratic", 1.0);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<Vec2> p(10);
  for (auto& v : p) v = {U(rng), U(rng)};
  auto cloud = make_atomic_2d(p);
  auto s = proximal_step(agg, cloud, 0.5, config(0.5, 1));
  auto m0 = cloud.mean(), m1 = std::get<AtomicMeasure>(s.measure).mean();
  CHECK(std::abs(m0[0] - m1[0]) < 1e-9);
  CHECK(second_moment(s.measure) < second_moment(cloud));
  // W(x) = |x|^2/2 contracts toward the mean by the factor 1/(1 + tau).
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto pi = std::get<AtomicMeasure>(s.measure).points()[i];
    CHECK(std::abs(pi[0] - (m0[0] + (p[i][0] - m0[0]) / 1.5)) < 1e-8);
  }
  CHECK_THROWS_AS(proximal_step(agg, make_atomic_2d(std::vector<Vec2>(65, Vec2{0, 0})), 0.1, config(0.1, 1)),
                  InvalidArgument);
}

TEST_CASE("large versus small steps") {
  auto e = quadratic_energy();
  QuantileMeasure q({-1.0, 0.5, 1.0, 2.5});
  double tau = 0.4;
  auto mt = proximal_step(e, q, tau, config(tau, 1)).measure;
  CHECK(w2_distance(rescaled_intermediate(q, mt, nullptr, tau, tau), q) == 0.0);
  CHECK(w2_distance(rescaled_intermediate(q, mt, nullptr, 0.0, tau), mt) == 0.0);
  for (double h : {0.1, 0.2, 0.3}) {
    auto nu = rescaled_intermediate(q, mt, nullptr, h, tau);
    auto back = proximal_step(e, nu, h, config(h, 1)).measure;
    CHECK(w2_distance(back, mt) <= 1e-5);
  }
  CHECK_THROWS_AS(rescaled_intermediate(q, mt, nullptr, 0.5, tau), InvalidArgument);
}

TEST_CASE("time-dependent flows") {
  Energy e = quadratic_energy();
  e.potential->amplitude = 0.5;
  auto mu = make_atomic({1.5});
  JkoConfig cfg = config(0.05, 20);
  auto frozen = flow_time_dependent([&](int) { return e.at_time(0.0); }, mu, cfg);
  auto plain = flow(e.at_time(0.0), mu, cfg);
  for (std::size_t k = 0; k < plain.states.size(); ++k)
    CHECK(to_atomic(frozen.states[k]).xs() == to_atomic(plain.states[k]).xs());
  // The modulated Dirac flow has the closed form x_k = x_{k-1} / (1 + tau (1 + sin(t_k)/2)).
  auto tr = flow_time_dependent(time_schedule(e, cfg.tau), mu, cfg);
  double x = 1.5;
  for (int k = 1; k <= cfg.steps; ++k) {
    x /= 1.0 + cfg.tau * (1.0 + 0.5 * std::sin(k * cfg.tau));
    CHECK(std::abs(to_atomic(tr.states[k]).xs()[0] - x) < 1e-10);
  }
}

TEST_CASE("determinism and CSV output") {
  Energy e;
  e.kernel = Kernel::newtonian(1);
  e.internal = Internal{};
  e.constraint = Constraint{kInf, 2.0};
  std::mt19937_64 rng(7);
  auto q = spread_nodes(25, -1.0, 1.0, rng);
  auto a = flow(e, q, config(0.05, 8)), b = flow(e, q, config(0.05, 8));
  CHECK(a.to_csv() == b.to_csv());
  auto csv = a.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
  CHECK(csv.rfind("step,time,energy,W2_step,constraint_violation,inner_iters\n", 0) == 0);
}

TEST_CASE("config JSON") {
  auto c = jko_config_from_json(nlohmann::json::parse(R"({"tau":0.1,"steps":3,"constraint_mode":{"penalty":{"weight":10}}})"));
  CHECK(c.steps == 3);
  CHECK(c.constraint_mode == ConstraintMode::penalty);
  CHECK(c.penalty_weight == 10.0);
  try {
    jko_config_from_json(nlohmann::json::parse(R"({"tau":-1})"));
    FAIL("expected schema error");
  } catch (const SchemaError& err) {
    CHECK(err.pointer() == "");
  }
  CHECK_THROWS_AS(jko_config_from_json(nlohmann::json::parse(R"({"steps":3})")), SchemaError);
}
