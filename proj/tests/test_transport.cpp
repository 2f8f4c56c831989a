#include <doctest.h>

#include <random>

#include "omegaflow/transport.hpp"
#include "oracles.hpp"

using namespace omegaflow;

namespace {

AtomicMeasure random_1d(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> U(-2.0, 2.0), W(0.1, 1.0);
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    x[i] = U(rng);
    w[i] = W(rng);
  }
  return make_atomic(x, w);
}

AtomicMeasure random_2d(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> U(-1.0, 1.0), W(0.1, 1.0);
  std::vector<Vec2> p(n);
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    p[i] = {U(rng), U(rng)};
    w[i] = W(rng);
  }
  return make_atomic_2d(p, w);
}

}  // namespace

TEST_CASE("w2_1d closed-form examples") {
  CHECK(w2_1d(make_atomic({0.0}), make_atomic({1.0})).distance == doctest::Approx(1.0));
  CHECK(w2_1d(make_atomic({0.0, 1.0}), make_atomic({0.5})).distance == doctest::Approx(0.5));
  auto r = w2_1d(make_atomic({0.0, 1.0}, {0.25, 0.75}), make_atomic({0.0, 2.0}, {0.5, 0.5}));
  // quantile pieces: [0,.25] 0->0, [.25,.5] 1->0, [.5,1] 1->2
  CHECK(r.cost == doctest::Approx(0.25 * 1.0 + 0.5 * 1.0));
  CHECK(r.plan.marginal_error() < 1e-15);
}

TEST_CASE("w2_1d agrees with the quantile integral") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 5; ++t) {
    auto a = random_1d(rng, 5), b = random_1d(rng, 7);
    CHECK(w2_1d(a, b).cost == doctest::Approx(oracle::quantile_w2_sq(a, b, 400000)).epsilon(1e-4));
  }
}

TEST_CASE("w2_exact matches brute force enumeration") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 30; ++t) {
    int dim = t % 2 ? 2 : 1;
    int K = 6 + t % 3;
    auto a = oracle::random_counted(rng, dim, 2 + t % 4, K);
    auto b = oracle::random_counted(rng, dim, 1 + t % 6, K);
    double ref = oracle::brute_force_cost(a, b);
    auto r = w2_exact(a.measure(dim), b.measure(dim));
    CHECK(std::abs(r.cost - ref) < 1e-12);
    CHECK(r.plan.marginal_error() < 1e-14);
  }
}

TEST_CASE("w2_exact and w2_1d agree in one dimension") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    auto a = random_1d(rng, 1 + t % 20), b = random_1d(rng, 1 + (7 * t) % 25);
    CHECK(std::abs(w2_exact(a, b).distance - w2_1d(a, b).distance) < 1e-9);
  }
}

TEST_CASE("metric properties") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    auto a = random_2d(rng, 6), b = random_2d(rng, 5), c = random_2d(rng, 7);
    double ab = w2(a, b).distance, bc = w2(b, c).distance, ac = w2(a, c).distance;
    CHECK(ac <= ab + bc + 1e-12);
    CHECK(std::abs(w2(b, a).distance - ab) < 1e-12);
    CHECK(w2(a, a).distance < 1e-12);
    Vec2 shift{0.3, -0.4};
    auto moved = push_forward(a, std::function<Vec2(const Vec2&)>([&](const Vec2& p) { return p + shift; }));
    CHECK(w2(a, moved).distance == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("two-dimensional example") {
  auto mu = make_atomic_2d(std::vector<Vec2>{{0, 0}, {1, 0}});
  auto nu = make_atomic_2d(std::vector<Vec2>{{1, 1}, {0, 1}});
  CHECK(w2_exact(mu, nu).distance == doctest::Approx(1.0));
  auto big = make_atomic(std::vector<double>(513, 0.0));
  CHECK_THROWS_AS(w2_exact(big, make_atomic({0.0})), InvalidArgument);
}

TEST_CASE("geodesics have constant speed") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 10; ++t) {
    int dim = t % 2 ? 2 : 1;
    auto a = dim == 1 ? random_1d(rng, 6) : random_2d(rng, 6);
    auto b = dim == 1 ? random_1d(rng, 4) : random_2d(rng, 5);
    double d = w2(a, b).distance;
    for (double al : {0.0, 0.25, 0.5, 1.0}) {
      auto m = geodesic(a, b, al);
      CHECK(std::abs(w2(a, m).cost - al * al * d * d) < 1e-12);
      CHECK(std::abs(w2(m, b).cost - (1 - al) * (1 - al) * d * d) < 1e-12);
    }
  }
  CHECK_THROWS_AS(geodesic(make_atomic({0.0}), make_atomic({1.0}), 1.5), InvalidArgument);
}

TEST_CASE("glued plans reproduce marginals and bound W2") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 10; ++t) {
    auto base = random_2d(rng, 4), a = random_2d(rng, 5), b = random_2d(rng, 3);
    auto g = glue(w2(a, base).plan, w2(b, base).plan);
    CHECK(w2(leg_marginal(g, 0), a).distance < 1e-6);
    CHECK(w2(leg_marginal(g, 1), b).distance < 1e-6);
    CHECK(w2(AtomicMeasure(2, g.base, g.mass), base).distance < 1e-6);
    CHECK(pseudo_distance(g) >= w2(a, b).distance - 1e-12);
    auto ends = generalized_geodesic(g, 1.0);
    CHECK(w2(ends, b).distance < 1e-6);
  }
  // In 1D, with equal-mass nodes no conditional splits and W_{2,nu} = W2.
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> xb(8), xa(8), xc(8);
  for (int i = 0; i < 8; ++i) {
    xb[i] = U(rng);
    xa[i] = U(rng);
    xc[i] = U(rng);
  }
  auto base = make_atomic(xb), a = make_atomic(xa), b = make_atomic(xc);
  auto g = glue(w2(a, base).plan, w2(b, base).plan);
  CHECK(pseudo_distance(g) == doctest::Approx(w2(a, b).distance).epsilon(1e-12));
  // A base atom that splits mass gives a strict inequality in 1D as well.
  auto split = glue(w2(make_atomic({0.0, 1.0}), make_atomic({0.5})).plan,
                    w2(make_atomic({0.0, 1.0}), make_atomic({0.5})).plan);
  CHECK(pseudo_distance(split) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("two-atom base in the plane splits mass") {
  // Base atoms each carry half of mu0 and mu1; the product coupling mixes them.
  auto base = make_atomic_2d(std::vector<Vec2>{{0, 0}, {0, 1}});
  auto mu0 = make_atomic_2d(std::vector<Vec2>{{-1, 0}, {1, 0}, {-1, 1}, {1, 1}});
  auto mu1 = make_atomic_2d(std::vector<Vec2>{{0.9, 0.1}, {-0.9, -0.1}, {0.9, 1.1}, {-0.9, 0.9}});
  auto g = glue(w2(mu0, base).plan, w2(mu1, base).plan);
  CHECK(pseudo_distance(g) > w2(mu0, mu1).distance + 1e-3);
}

TEST_CASE("glue rejects mismatched bases") {
  auto a = make_atomic({0.0, 1.0}), b = make_atomic({2.0});
  auto p = w2(a, make_atomic({0.5})).plan, q = w2(b, make_atomic({0.7})).plan;
  CHECK_THROWS_AS(glue(p, q), InvalidArgument);
}

TEST_CASE("plan export") {
  auto r = w2_1d(make_atomic({0.0, 1.0}), make_atomic({0.5}));
  auto csv = plan_to_csv(r.plan);
  CHECK(csv.rfind("# cost=squared_euclidean\nx,y,mass\n", 0) == 0);
  CHECK(plan_to_json(r.plan)["entries"].size() == 2);
}

TEST_CASE("quantile couplings") {
  QuantileMeasure a({0.0, 1.0, 2.0}), b({1.0, 1.5, 4.0});
  auto c = quantile_coupling(a, b);
  CHECK(c.cost() == doctest::Approx(w2_1d(a.atomic(), b.atomic()).cost));
  auto mid = std::get<QuantileMeasure>(c.interpolant(0.5));
  CHECK(mid.positions()[2] == doctest::Approx(3.0));
  CHECK_THROWS_AS(quantile_coupling(a, QuantileMeasure({0.0, 1.0})), InvalidArgument);
}
