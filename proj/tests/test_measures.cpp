#include <doctest.h>

#include <random>

#include "omegaflow/measures.hpp"

using namespace omegaflow;

TEST_CASE("atomic measures normalize and sort") {
  auto mu = make_atomic({2.0, 0.0, 1.0}, {1.0, 2.0, 1.0});
  CHECK(mu.size() == 3);
  CHECK(mu.points()[0][0] == 0.0);
  CHECK(mu.points()[2][0] == 2.0);
  CHECK(mu.weights()[0] == doctest::Approx(0.5));
  CHECK(mu.weights()[2] == doctest::Approx(0.25));
  CHECK(second_moment(Measure(make_atomic({0.0, 2.0}))) == doctest::Approx(2.0));
}

TEST_CASE("atomic construction rejects bad input") {
  CHECK_THROWS_AS(make_atomic(std::vector<double>{}), InvalidArgument);
  CHECK_THROWS_AS(make_atomic({0.0, 1.0}, {1.0, -1.0}), InvalidArgument);
  CHECK_THROWS_AS(make_atomic({0.0, 1.0}, {0.0, 0.0}), InvalidArgument);
  CHECK_THROWS_AS(make_atomic({0.0, std::nan("")}), InvalidArgument);
  CHECK_THROWS_AS(make_atomic({0.0, 1.0}, {1.0}), InvalidArgument);
}

TEST_CASE("uniform grid density on the unit interval") {
  std::vector<double> v(1000, 1.0);
  auto g = make_grid_1d(0.0, 1e-3, v);
  Measure mu = g;
  // Midpoint rule for int_0^1 x^2 is exact up to h^2/12.
  CHECK(std::abs(second_moment(mu) - 1.0 / 3.0) < 1e-6);
  for (double p : {1.0, 1.5, 2.0, 7.0, kInf}) CHECK(lp_norm(mu, p) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(make_grid_1d(0.0, 1e-3, std::vector<double>(999, 1.0)), InvalidArgument);
  CHECK_THROWS_AS(lp_norm(mu, 0.5), InvalidArgument);
}

TEST_CASE("quantile view of the uniform density") {
  std::vector<double> v(100, 1.0);
  Measure g = make_grid_1d(0.0, 0.01, v);
  const std::size_t n = 64;
  auto q = to_quantile(g, n);
  for (std::size_t i = 0; i < n; ++i) CHECK(q.positions()[i] == doctest::Approx((i + 0.5) / n).epsilon(1e-12));
  for (std::size_t j = 0; j < q.num_cells(); ++j) CHECK(q.density(j) == doctest::Approx(double(n) / (n - 1)));
  CHECK(lp_norm(Measure(q), kInf) == doctest::Approx(double(n) / (n - 1)));
  double s = 0.0;
  for (double c : q.cell_masses()) s += c;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("quantile nodes follow the masses") {
  QuantileMeasure q({0.0, 1.0, 3.0}, {0.2, 0.3, 0.5});
  auto qn = q.q_nodes();
  CHECK(qn[0] == doctest::Approx(0.1));
  CHECK(qn[1] == doctest::Approx(0.35));
  CHECK(qn[2] == doctest::Approx(0.75));
  CHECK_THROWS_AS(QuantileMeasure({1.0, 0.0}), InvalidArgument);
}

TEST_CASE("atomic to quantile uses the generalized inverse") {
  Measure mu = make_atomic({0.0, 1.0}, {0.25, 0.75});
  auto q = to_quantile(mu, 4);
  CHECK(q.positions()[0] == 0.0);
  CHECK(q.positions()[1] == 1.0);
  CHECK(q.positions()[3] == 1.0);
}

TEST_CASE("densities are undefined for atoms") {
  Measure coincident = make_atomic({0.0, 0.0, 1.0});
  CHECK(std::isinf(lp_norm(coincident, 2.0)));
  CHECK(lp_norm(coincident, 1.0) == 1.0);
  Measure planar = make_atomic_2d(std::vector<Vec2>{{0, 0}, {1, 1}});
  CHECK(std::isinf(lp_norm(planar, kInf)));
}

TEST_CASE("lp norms increase with p toward the sup norm") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.05, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(50);
    for (auto& x : v) x = U(rng);
    Measure mu = make_grid_1d(0.0, 0.02, v, true);  // support of length one
    double prev = 0.0;
    for (double p : {1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0, 40.0}) {
      double n = lp_norm(mu, p);
      CHECK(n >= prev * (1.0 - 1e-14));
      prev = n;
    }
    double sup = lp_norm(mu, kInf);
    CHECK(prev <= sup * (1.0 + 1e-14));
    CHECK(lp_norm(mu, 400.0) == doctest::Approx(sup).epsilon(0.02));
  }
}

TEST_CASE("push forward") {
  auto mu = make_atomic({0.0, 1.0}, {0.3, 0.7});
  auto nu = push_forward(mu, std::function<double(double)>([](double x) { return 2.0 - x; }));
  CHECK(nu.points()[0][0] == 1.0);
  CHECK(nu.weights()[0] == doctest::Approx(0.7));
  CHECK_THROWS_AS(push_forward(mu, std::function<double(double)>([](double) { return std::nan(""); })),
                  InvalidArgument);
}

TEST_CASE("two-dimensional grids") {
  std::vector<double> v(16, 1.0);
  auto g = make_grid_2d({0.0, 0.0}, 0.25, 4, 4, v);
  CHECK(g.cell_center(5)[0] == doctest::Approx(0.375));
  CHECK(g.cell_center(5)[1] == doctest::Approx(0.375));
  // int over the unit square of x^2 + y^2 by midpoints
  CHECK(second_moment(Measure(g)) == doctest::Approx(2.0 * (1.0 / 3.0 - 0.25 * 0.25 / 12.0)));
  CHECK(lp_norm(Measure(g), 2.0) == doctest::Approx(1.0));
}

TEST_CASE("json round trip and schema pointers") {
  nlohmann::json j = {{"kind", "atomic"}, {"points", {0.0, 1.0, 2.0}}, {"weights", {1, 1, 2}}};
  auto mu = measure_from_json(j, "/mu");
  auto back = measure_to_json(mu);
  CHECK(back["weights"][2].get<double>() == doctest::Approx(0.5));
  auto again = std::get<AtomicMeasure>(measure_from_json(back));
  CHECK(again.weights()[2] == doctest::Approx(0.5));

  nlohmann::json g = {{"kind", "grid"}, {"origin", 0.0}, {"spacing", 0.5}, {"values", {1.0, 1.0}}};
  CHECK(std::holds_alternative<GridDensity>(measure_from_json(g)));

  try {
    measure_from_json({{"kind", "atomic"}}, "/experiment/initial");
    FAIL("expected schema error");
  } catch (const SchemaError& e) {
    CHECK(e.pointer() == "/experiment/initial/points");
  }
  try {
    measure_from_json({{"kind", "blob"}}, "/m");
    FAIL("expected schema error");
  } catch (const SchemaError& e) {
    CHECK(e.pointer() == "/m/kind");
  }
}
