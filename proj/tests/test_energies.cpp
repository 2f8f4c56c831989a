#include <doctest.h>

#include <random>

#include "omegaflow/energies.hpp"

using namespace omegaflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

Energy quadratic_energy() {
  Energy e;
  e.potential = Potential::quadratic();
  return e;
}

Energy aggregation_energy(double cap) {
  Energy e;
  e.kernel = Kernel::newtonian(1);
  e.constraint = Constraint{kInf, cap};
  return e;
}

Kernel reglog() { return Kernel::smooth("regularized_log", 1.0 / (2.0 * kPi), 0.1); }

QuantileMeasure random_quantile(std::mt19937_64& rng, int n, double spread) {
  std::uniform_real_distribution<double> U(0.2, 1.0);
  std::vector<double> x(n);
  double acc = -0.5 * spread;
  for (int i = 0; i < n; ++i) {
    x[i] = acc;
    acc += spread * U(rng) / n;
  }
  return QuantileMeasure(x);
}

// Centered finite difference of E along the interpolants of c.
double fd_derivative(const Energy& e, const Coupling& c, double alpha, double h) {
  double a = std::max(0.0, alpha - h), b = std::min(1.0, alpha + h);
  if (alpha - h < 0.0) {
    // one-sided second-order stencil at the left end
    return (-3.0 * e.eval(c.interpolant(alpha)) + 4.0 * e.eval(c.interpolant(alpha + h)) -
            e.eval(c.interpolant(alpha + 2 * h))) /
           (2 * h);
  }
  return (e.eval(c.interpolant(b)) - e.eval(c.interpolant(a))) / (b - a);
}

}  // namespace

TEST_CASE("potential energy of a Dirac") {
  auto e = quadratic_energy();
  for (double a : {-2.0, 0.0, 0.7, 3.0}) CHECK(e.eval(make_atomic({a})) == doctest::Approx(a * a / 2));
}

TEST_CASE("entropy of a uniform density") {
  Energy e;
  e.internal = Internal{};
  for (double L : {0.5, 1.0, 3.0}) {
    auto g = grid_from_function([](double) { return 1.0; }, 0.0, L, 1000);
    CHECK(std::abs(e.eval(g) - (-std::log(L))) < 1e-3);
    // Equally spaced equal-mass nodes give cell density exactly 1/L.
    std::vector<double> x(1000);
    for (int i = 0; i < 1000; ++i) x[i] = L * i / 999.0;
    CHECK(std::abs(e.eval(QuantileMeasure(x)) - (-std::log(L))) < 1e-3);
  }
  CHECK(std::isinf(e.eval(make_atomic({0.0, 1.0}))));
}

TEST_CASE("interaction energy against the direct double sum") {
  Energy e;
  e.kernel = Kernel::newtonian(1);
  CHECK(e.eval(make_atomic({0.0, 2.0})) == doctest::Approx(0.25));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-1.0, 1.0), W(0.1, 1.0);
  for (int t = 0; t < 10; ++t) {
    int n = 3 + t;
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
      x[i] = U(rng);
      w[i] = W(rng);
    }
    auto mu = make_atomic(x, w);
    double ref = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
      for (std::size_t j = 0; j < mu.size(); ++j)
        ref += 0.5 * mu.weights()[i] * mu.weights()[j] * std::abs(mu.xs()[i] - mu.xs()[j]) / 2;
    CHECK(e.eval(mu) == doctest::Approx(ref).epsilon(1e-13));
    Energy s;
    s.kernel = reglog();
    double sref = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
      for (std::size_t j = 0; j < mu.size(); ++j) {
        double d = mu.xs()[i] - mu.xs()[j];
        sref += 0.5 * mu.weights()[i] * mu.weights()[j] / (4 * kPi) * std::log(d * d + 0.01);
      }
    CHECK(s.eval(mu) == doctest::Approx(sref).epsilon(1e-13));
  }
}

TEST_CASE("one-dimensional Newtonian field is the signed mass difference") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-1.0, 1.0), W(0.1, 1.0);
  auto k = Kernel::newtonian(1);
  std::vector<double> x(9), w(9);
  for (int i = 0; i < 9; ++i) {
    x[i] = U(rng);
    w[i] = W(rng);
  }
  auto mu = make_atomic(x, w);
  for (double p : {-1.5, -0.3, 0.0, 0.4, 2.0}) {
    double left = 0.0, right = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) (mu.xs()[i] < p ? left : right) += mu.weights()[i];
    CHECK(kernel_gradient(k, mu, {p, 0.0})[0] == doctest::Approx((left - right) / 2).epsilon(1e-13));
  }
  // Symmetric measure about the evaluation point.
  CHECK(std::abs(kernel_gradient(reglog(), make_atomic({-1.0, 0.5, 2.0}, {1, 2, 1}), {0.5, 0.0})[0]) < 1e-15);
}

TEST_CASE("two-dimensional Newtonian field of a disc matches a point mass outside") {
  int n = 200;
  double R = 0.5, h = 2 * R / n;
  std::vector<double> v(static_cast<std::size_t>(n * n));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      double x = -R + (i + 0.5) * h, y = -R + (j + 0.5) * h;
      v[static_cast<std::size_t>(j * n + i)] = x * x + y * y <= R * R ? 1.0 : 0.0;
    }
  auto disc = make_grid_2d({-R, -R}, h, n, n, v, true);
  auto k = Kernel::newtonian(2);
  for (Vec2 x : {Vec2{1.5, 0.3}, Vec2{-0.2, 0.9}, Vec2{0.7, -0.7}}) {
    Vec2 f = kernel_gradient(k, disc, x);
    Vec2 ref = (1.0 / (2 * kPi * norm2(x))) * x;
    CHECK(std::sqrt(norm2(f - ref)) < 1e-3 * std::sqrt(norm2(ref)));
  }
  CHECK_THROWS_AS(kernel_gradient(k, make_atomic_2d(std::vector<Vec2>{{0, 0}}), {0.0, 0.0}), InvalidArgument);
  CHECK(kernel_gradient(k, make_atomic_2d(std::vector<Vec2>{{0, 0}}), {0.0, 0.0}, true)[0] == 0.0);
}

TEST_CASE("kernel constants") {
  CHECK(Kernel::newtonian(3).radial(1.0) == doctest::Approx(-1.0 / (4 * kPi)));
  CHECK(Kernel::newtonian(2).radial(std::exp(1.0)) == doctest::Approx(1.0 / (2 * kPi)));
  CHECK(Kernel::riesz(2.0, 3, -1, 2.0).radial(2.0) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(Kernel::riesz(1.0, 3, 1, 1.0), InvalidArgument);
  CHECK_THROWS_AS(Kernel::riesz(3.0, 3, 1, 1.0), InvalidArgument);
  CHECK(Kernel::newtonian(1).convex_1d());
  CHECK_FALSE(reglog().convex_1d());
  // Newtonian d = 3 is the fundamental solution: radial Laplacian vanishes.
  auto k = Kernel::newtonian(3);
  double r = 0.7, dr = 1e-4;
  double lap = (k.radial(r + dr) - 2 * k.radial(r) + k.radial(r - dr)) / (dr * dr) + 2.0 / r * k.radial_derivative(r);
  CHECK(std::abs(lap) < 1e-5);
}

TEST_CASE("singular kernels exclude the diagonal on atoms") {
  Energy e;
  e.kernel = Kernel::log(1.0);
  auto mu = make_atomic_2d(std::vector<Vec2>{{0, 0}, {1, 0}});
  CHECK(e.eval(mu) == doctest::Approx(0.25 * std::log(1.0)));
  auto nu = make_atomic_2d(std::vector<Vec2>{{0, 0}, {0, 2}});
  CHECK(e.eval(nu) == doctest::Approx(0.25 * std::log(2.0)));
}

TEST_CASE("directional derivative examples") {
  auto e = quadratic_energy();
  auto diag = quantile_coupling(QuantileMeasure({0.0, 1.0}), QuantileMeasure({0.0, 1.0}));
  CHECK(directional_derivative(e, diag) == 0.0);
  auto c = coupling_from_plan(w2(make_atomic({0.0}), make_atomic({1.0})).plan);
  CHECK(directional_derivative(e, c, 0.0) == 0.0);
  CHECK(directional_derivative(e, c, 0.5) == doctest::Approx(0.5));
  CHECK(fd_derivative(e, c, 0.0, 1e-4) == doctest::Approx(0.0).epsilon(1e-8));

  Energy agg;
  agg.kernel = Kernel::newtonian(1);
  auto p = w2(make_atomic({0.0, 2.0}), make_atomic({1.0, 3.0})).plan;
  auto cc = coupling_from_plan(p);
  CHECK(std::abs(directional_derivative(agg, p) - fd_derivative(agg, cc, 0.0, 1e-4)) < 1e-6);
  auto shrink = coupling_from_plan(w2(make_atomic({0.0, 2.0}), make_atomic({0.5, 1.5})).plan);
  CHECK(directional_derivative(agg, shrink, 0.3) == doctest::Approx(fd_derivative(agg, shrink, 0.3, 1e-4)));
}

TEST_CASE("directional derivatives match finite differences on smooth fixtures") {
  std::mt19937_64 rng(4);
  std::vector<Energy> fixtures;
  fixtures.push_back(quadratic_energy());
  Energy ent;
  ent.internal = Internal{};
  ent.potential = Potential::quadratic();
  fixtures.push_back(ent);
  Energy pm;
  pm.internal = Internal{Internal::Kind::power, 2.0, 1.0};
  fixtures.push_back(pm);
  Energy rl;
  rl.kernel = reglog();
  fixtures.push_back(rl);
  Energy ks;
  ks.internal = Internal{};
  ks.kernel = Kernel::newtonian(1);
  fixtures.push_back(ks);
  Energy vm;
  vm.potential = Potential::convolution(reglog(), make_atomic({-0.3, 0.0, 0.4}));
  vm.internal = Internal{Internal::Kind::power, 2.0, 1.0};
  fixtures.push_back(vm);
  for (const auto& e : fixtures)
    for (int t = 0; t < 5; ++t) {
      auto a = random_quantile(rng, 12, 2.0), b = random_quantile(rng, 12, 3.0);
      auto c = quantile_coupling(a, b);
      for (double al : {0.25, 0.5}) {
        double d = directional_derivative(e, c, al), fd = fd_derivative(e, c, al, 1e-4);
        CHECK(std::abs(d - fd) <= 1e-4 * std::max(1.0, std::abs(d)));
      }
    }
  // Two-dimensional atoms with a smooth kernel and a potential.
  Energy e2;
  e2.kernel = Kernel::smooth("gaussian", 1.0, 0.5);
  e2.potential = Potential::quadratic(1.0, {0.2, -0.1});
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int t = 0; t < 5; ++t) {
    std::vector<Vec2> p(6), q(6);
    for (int i = 0; i < 6; ++i) {
      p[i] = {U(rng), U(rng)};
      q[i] = {U(rng), U(rng)};
    }
    auto c = coupling_from_plan(w2(make_atomic_2d(p), make_atomic_2d(q)).plan);
    double d = directional_derivative(e2, c, 0.4), fd = fd_derivative(e2, c, 0.4, 1e-4);
    CHECK(std::abs(d - fd) <= 1e-4 * std::max(1.0, std::abs(d)));
  }
}

TEST_CASE("node gradients match finite differences") {
  std::mt19937_64 rng(5);
  Energy e;
  e.internal = Internal{Internal::Kind::power, 3.0, 0.5};
  e.kernel = Kernel::newtonian(1);
  e.potential = Potential::power(1.0, 3.0);
  auto q = random_quantile(rng, 10, 2.0);
  std::vector<double> x = q.positions(), g;
  e.gradient_nodes(x, q.masses(), &q.cell_masses(), g);
  for (std::size_t k = 0; k < x.size(); ++k) {
    double h = 1e-6;
    auto xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    double fd = (e.value_nodes(xp, q.masses(), &q.cell_masses()) - e.value_nodes(xm, q.masses(), &q.cell_masses())) / (2 * h);
    CHECK(g[k] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("above-tangent slack") {
  auto e = quadratic_energy();
  auto lip0 = Modulus::lipschitz(0.0);
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10; ++t) {
    auto c = quantile_coupling(random_quantile(rng, 8, 2.0), random_quantile(rng, 8, 1.0));
    CHECK(above_tangent_slack(e, c, lip0) >= -1e-12);
    // V = |x|^2/2 is 1-convex; the slack with lambda = 1 vanishes.
    CHECK(std::abs(above_tangent_slack(e, c, Modulus::lipschitz(1.0))) < 1e-12);
  }
  Energy lin;
  lin.potential = Potential::linear({2.0, 0.0});
  auto c = quantile_coupling(random_quantile(rng, 8, 2.0), random_quantile(rng, 8, 1.0));
  CHECK(std::abs(above_tangent_slack(lin, c, lip0)) < 1e-12);
  auto agg = aggregation_energy(0.1);
  CHECK_THROWS_AS(above_tangent_slack(agg, quantile_coupling(QuantileMeasure({0.0, 1.0}), QuantileMeasure({0.0, 1.0})), lip0),
                  ComputationError);
}

TEST_CASE("metric slope estimate") {
  auto e = quadratic_energy();
  auto lip0 = Modulus::lipschitz(0.0);
  double a = 1.3;
  std::vector<Measure> samples;
  double prev = 0.0;
  for (double b : {0.0, 2.0, 1.0, 1.2, 1.29, 1.299}) {
    samples.push_back(make_atomic({b}));
    double s = metric_slope_estimate(e, make_atomic({a}), samples, lip0);
    CHECK(s >= prev);
    CHECK(s <= a + 1e-12);
    prev = s;
  }
  CHECK(prev == doctest::Approx(a).epsilon(1e-3));
  Energy zero;
  CHECK(metric_slope_estimate(zero, make_atomic({a}), samples, lip0) == 0.0);
}

TEST_CASE("constraints and Lp interpolation") {
  auto agg = aggregation_energy(1.0);
  CHECK(std::isfinite(agg.eval(QuantileMeasure({0.0, 1.0}))));
  CHECK(std::isinf(agg.eval(QuantileMeasure({0.0, 0.9}))));
  CHECK(std::isinf(agg.eval(make_atomic({0.0, 3.0}))));
  Energy l2;
  l2.constraint = Constraint{2.0, 1.2};
  CHECK(std::isfinite(l2.eval(QuantileMeasure({0.0, 0.5, 1.0}))));
  CHECK(std::isinf(l2.eval(QuantileMeasure({0.0, 0.3, 0.6}))));
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    auto a = random_quantile(rng, 10, 1.0 + t * 0.1), b = random_quantile(rng, 10, 3.0);
    auto c = quantile_coupling(a, b);
    for (double p : {2.0, kInf}) {
      double bound = std::max(lp_norm(a, p), lp_norm(b, p));
      for (double al : {0.1, 0.5, 0.9}) CHECK(lp_norm(c.interpolant(al), p) <= bound * (1 + 1e-12));
    }
  }
}

TEST_CASE("lower semicontinuity along mollified sequences") {
  Energy e;
  e.kernel = Kernel::newtonian(1);
  e.potential = Potential::quadratic();
  auto target = make_atomic({-1.0, 1.0});
  double liminf = kInf;
  for (int n = 4; n <= 4096; n *= 4) {
    // two clusters of width 1/n around -1 and 1
    std::vector<double> x;
    for (int side : {-1, 1})
      for (int i = 0; i < 8; ++i) x.push_back(side + (i - 3.5) / (8.0 * n));
    liminf = std::min(liminf, e.eval(QuantileMeasure(x)));
  }
  CHECK(e.eval(target) <= liminf + 1e-6);
}

TEST_CASE("time-modulated potential") {
  Energy e;
  e.potential = Potential::quadratic();
  e.potential->amplitude = 0.5;
  CHECK(e.time_dependent());
  auto mu = make_atomic({2.0});
  CHECK(e.at_time(0.0).eval(mu) == doctest::Approx(2.0));
  CHECK(e.at_time(kPi / 2).eval(mu) == doctest::Approx(3.0));
}

TEST_CASE("energy JSON") {
  auto j = nlohmann::json::parse(
      R"({"potential":"quadratic","kernel":{"kind":"newtonian","d":1},"constraint":{"p":"inf","cap":1.0},"internal":{"power":2}})");
  auto e = energy_from_json(j);
  CHECK(e.potential.has_value());
  CHECK(e.kernel->kind() == KernelKind::newtonian);
  CHECK(std::isinf(e.constraint->p));
  CHECK(e.internal->m == 2.0);
  CHECK(e.density_cap() == 1.0);
  auto back = energy_from_json(e.to_json());
  auto q = QuantileMeasure({0.0, 0.6, 1.3});
  CHECK(back.eval(q) == doctest::Approx(e.eval(q)));
  try {
    energy_from_json(nlohmann::json::parse(R"({"kernel":{"kind":"riesz","alpha":1,"d":3}})"));
    FAIL("expected a schema error");
  } catch (const SchemaError& err) {
    CHECK(err.pointer() == "/kernel");
  }
  try {
    energy_from_json(nlohmann::json::parse(R"({"constraint":{"p":"inf"}})"));
    FAIL("expected a schema error");
  } catch (const SchemaError& err) {
    CHECK(err.pointer() == "/constraint/cap");
  }
  try {
    energy_from_json(nlohmann::json::parse(R"({"potentail":"quadratic"})"));
    FAIL("expected a schema error");
  } catch (const SchemaError& err) {
    CHECK(err.pointer() == "/potentail");
  }
}
