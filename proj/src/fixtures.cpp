#include "omegaflow/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>

#include "omegaflow/common.hpp"
#include "omegaflow/quadrature.hpp"
#include "omegaflow/transport.hpp"

#ifndef OMEGAFLOW_FIXTURE_DIR
#define OMEGAFLOW_FIXTURE_DIR "fixtures"
#endif

namespace omegaflow::fixtures {

std::string fixture_dir() {
  if (const char* env = std::getenv("OMEGAFLOW_FIXTURES"); env && *env) return env;
  return OMEGAFLOW_FIXTURE_DIR;
}

nlohmann::json load_json(const std::string& file) {
  std::string path = fixture_dir() + "/" + file;
  std::ifstream in(path);
  if (!in) throw InvalidArgument("fixture file not found: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("malformed fixture file " + path + ": " + e.what());
  }
}

QuantileMeasure block(double center, double width, std::size_t n) {
  if (n < 2 || !(width > 0.0)) throw InvalidArgument("block: need n >= 2 and width > 0");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = center - 0.5 * width + width * static_cast<double>(i) / static_cast<double>(n - 1);
  return QuantileMeasure(std::move(x));
}

QuantileMeasure gaussian(double mean, double sd, std::size_t n) {
  if (n < 2 || !(sd > 0.0)) throw InvalidArgument("gaussian: need n >= 2 and sd > 0");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double q = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    auto cdf = [q](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)) - q; };
    x[i] = mean + sd * bisect_increasing(cdf, -10.0, 10.0);
  }
  return QuantileMeasure(std::move(x));
}

QuantileMeasure random_constrained(std::mt19937_64& rng, std::size_t n, double M, double spread, double offset) {
  if (n < 2) throw InvalidArgument("random_constrained: need n >= 2");
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double cell = 1.0 / static_cast<double>(n - 1);
  double base = std::isfinite(M) ? cell / M : 0.5 * cell;
  std::vector<double> x(n);
  x[0] = offset * (2.0 * U(rng) - 1.0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    double f = U(rng) < 0.3 ? 1.0 : 1.0 + spread * U(rng);
    x[j + 1] = x[j] + base * f;
  }
  return QuantileMeasure(std::move(x));
}

QuantileMeasure perturbed(const QuantileMeasure& q, double distance, int mode) {
  const auto& x = q.positions();
  const auto& m = q.masses();
  double mean = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mean += m[i] * x[i];
  std::vector<double> phi(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) phi[i] = mode == 0 ? 1.0 : 0.5 + (x[i] - mean);
  if (mode != 0) {
    // Expansion about the mean never shrinks a gap, so caps stay satisfied.
    double lo = x.front(), hi = x.back();
    double span = std::max(hi - lo, 1e-12);
    for (double& p : phi) p = 0.5 + (p - 0.5) / span;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += m[i] * phi[i] * phi[i];
  double d = distance / std::sqrt(s);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + d * phi[i];
  return QuantileMeasure(std::move(y), m);
}

double density_field(const Kernel& k, const QuantileMeasure& q, double x) {
  const auto& p = q.positions();
  double f = 0.0;
  if (k.kind() == KernelKind::newtonian && k.d() == 1) {
    // c|z|/2 has derivative c sign(z)/2; the field is c (F(x) - 1/2).
    double F = 0.0;
    for (std::size_t j = 0; j < q.num_cells(); ++j) {
      double g = q.gap(j);
      double frac = g > 0.0 ? std::clamp((x - p[j]) / g, 0.0, 1.0) : (x >= p[j] ? 1.0 : 0.0);
      F += q.cell_mass(j) * frac;
    }
    return k.c() * (F - 0.5);
  }
  if (k.singular()) throw InvalidArgument("density_field: singular kernels other than the 1D Newtonian");
  constexpr int kSub = 16;
  for (std::size_t j = 0; j < q.num_cells(); ++j) {
    double g = q.gap(j), w = q.cell_mass(j) / kSub;
    for (int s = 0; s < kSub; ++s) {
      double z = x - (p[j] + g * (s + 0.5) / kSub);
      double r = std::abs(z);
      if (r > 0.0) f += w * (z > 0.0 ? 1.0 : -1.0) * k.radial_derivative(r);
    }
  }
  return f;
}

nlohmann::json KernelCalibration::to_json() const {
  return {{"M", M}, {"field_ratio", field_ratio}, {"loeper_ratio", loeper_ratio}, {"C", C}};
}

namespace {

double log_lip_ratio(double df, double r) {
  if (r <= 0.0) return 0.0;
  return std::abs(df) / std::sqrt(psi(r * r));
}

// Quadrature nodes and weights of the density view of q.
void density_quadrature(const QuantileMeasure& q, std::vector<double>& pts, std::vector<double>& wts) {
  constexpr int kSub = 8;
  pts.clear();
  wts.clear();
  for (std::size_t j = 0; j < q.num_cells(); ++j)
    for (int s = 0; s < kSub; ++s) {
      pts.push_back(q.positions()[j] + q.gap(j) * (s + 0.5) / kSub);
      wts.push_back(q.cell_mass(j) / kSub);
    }
}

}  // namespace

KernelCalibration calibrate_kernel(const Kernel& k, double M, std::uint64_t seed, int densities) {
  std::mt19937_64 rng(seed);
  KernelCalibration cal;
  cal.M = M;
  std::vector<QuantileMeasure> set;
  set.push_back(block(0.0, 1.0 / M, 48));
  for (int d = 1; d < densities; ++d) set.push_back(random_constrained(rng, 48, M, d % 2 ? 0.5 : 3.0));

  for (const auto& q : set) {
    double lo = q.positions().front() - 0.5, hi = q.positions().back() + 0.5;
    constexpr int N = 300;
    std::vector<double> xs(N), fs(N);
    for (int i = 0; i < N; ++i) {
      xs[i] = lo + (hi - lo) * i / (N - 1);
      fs[i] = density_field(k, q, xs[i]);
    }
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j)
        cal.field_ratio = std::max(cal.field_ratio, log_lip_ratio(fs[j] - fs[i], xs[j] - xs[i]));
    for (int i = 0; i < N; i += 10)
      for (double h = 1e-6; h < 0.05; h *= 10.0)
        cal.field_ratio =
            std::max(cal.field_ratio, log_lip_ratio(density_field(k, q, xs[i] + h) - fs[i], h));
  }

  std::vector<double> pts, wts;
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 3 * densities; ++t) {
    const auto& mu = set[static_cast<std::size_t>(t) % set.size()];
    QuantileMeasure nu = t % 3 == 0 ? random_constrained(rng, 48, M, 2.0)
                                    : perturbed(mu, std::pow(10.0, -3.0 * U(rng)), t % 3 == 1 ? 0 : 1);
    const auto& rho = set[static_cast<std::size_t>(t * 7 + 3) % set.size()];
    density_quadrature(rho, pts, wts);
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double d = density_field(k, mu, pts[i]) - density_field(k, nu, pts[i]);
      s += wts[i] * d * d;
    }
    double w = w2_distance(mu, nu);
    if (w > 0.0) cal.loeper_ratio = std::max(cal.loeper_ratio, std::sqrt(s) / w);
  }
  cal.C = 1.05 * std::max(cal.field_ratio, cal.loeper_ratio);
  return cal;
}

double calibrate_potential(const Potential& V, double lo, double hi, int points) {
  std::vector<double> xs(static_cast<std::size_t>(points)), gs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    gs[i] = V.gradient({xs[i], 0.0})[0];
  }
  double best = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) best = std::max(best, log_lip_ratio(gs[j] - gs[i], xs[j] - xs[i]));
  return 1.05 * 0.5 * best;
}

namespace {

Kernel reglog_kernel() { return Kernel::smooth("regularized_log", 1.0 / (2.0 * std::numbers::pi), kReglogEps); }

Potential drift_potential() {
  auto src = block(0.0, 1.0, 256);
  return Potential::convolution(reglog_kernel(), src.atomic());
}

}  // namespace

nlohmann::json compute_calibration(std::uint64_t seed) {
  nlohmann::json j;
  j["seed"] = seed;
  j["aggregation"] = calibrate_kernel(Kernel::newtonian(1, kAttractionChi), kCapM, seed).to_json();
  j["reglog"] = calibrate_kernel(reglog_kernel(), kCapM, seed).to_json();
  j["drift_power"] = {{"C", calibrate_potential(drift_potential(), -4.0, 4.0)}};
  return j;
}

double calibrated_constant(const std::string& id) {
  static std::mutex mu;
  static nlohmann::json cache;
  std::lock_guard<std::mutex> lock(mu);
  if (cache.is_null()) {
    try {
      cache = load_json("calibration.json");
    } catch (const InvalidArgument&) {
      cache = compute_calibration();
    }
  }
  std::string key = id == "keller_segel" ? "aggregation" : id;
  if (!cache.contains(key) || !cache[key].contains("C"))
    throw InvalidArgument("no calibrated constant for fixture '" + id + "'");
  return cache[key]["C"].get<double>();
}

std::vector<std::string> fixture_ids() {
  return {"quadratic", "quartic", "entropy", "aggregation", "keller_segel", "reglog", "drift_power", "time_quadratic"};
}

Fixture make_fixture(const std::string& id, std::size_t nodes) {
  Fixture f;
  f.id = id;
  Constraint cap{kInf, kCapM};
  if (id == "quadratic") {
    f.energy.potential = Potential::quadratic(1.0);
    f.modulus = Modulus::lipschitz(1.0);
    f.initial = gaussian(0.5, 0.5, nodes);
  } else if (id == "quartic") {
    // (y - x)^2 (6x^2 + 4xd + d^2)/4 >= d^4/12 with d = y - x.
    f.energy.potential = Potential::power(1.0, 4.0);
    f.modulus = Modulus::polynomial(1.0, 1.0 / 6.0);
    f.initial = gaussian(0.3, 0.6, nodes);
  } else if (id == "entropy") {
    f.energy.internal = Internal{Internal::Kind::entropy, 2.0, 1.0};
    f.modulus = Modulus::lipschitz(0.0);
    f.initial = block(0.0, 1.0, nodes);
  } else if (id == "aggregation") {
    f.energy.kernel = Kernel::newtonian(1, kAttractionChi);
    f.energy.constraint = cap;
    f.modulus = sqrt_psi_from_constant(calibrated_constant(id));
    f.initial = block(0.0, 3.0, nodes);
    f.cap = kCapM;
  } else if (id == "keller_segel") {
    f.energy.internal = Internal{Internal::Kind::entropy, 2.0, 0.1};
    f.energy.kernel = Kernel::newtonian(1, kAttractionChi);
    f.energy.constraint = cap;
    f.modulus = sqrt_psi_from_constant(calibrated_constant(id));
    f.initial = block(0.0, 3.0, nodes);
    f.cap = kCapM;
  } else if (id == "reglog") {
    f.energy.kernel = reglog_kernel();
    f.energy.constraint = cap;
    f.modulus = sqrt_psi_from_constant(calibrated_constant(id));
    f.initial = block(0.0, 3.0, nodes);
    f.cap = kCapM;
  } else if (id == "drift_power") {
    f.energy.potential = drift_potential();
    f.energy.internal = Internal{Internal::Kind::power, 2.0, 1.0};
    f.modulus = sqrt_psi_from_constant(calibrated_constant(id));
    f.initial = gaussian(0.8, 0.5, nodes);
  } else if (id == "time_quadratic") {
    auto v = Potential::quadratic(1.0);
    v.amplitude = 0.5;
    v.frequency = 2.0 * std::numbers::pi;
    f.energy.potential = v;
    f.energy.internal = Internal{Internal::Kind::entropy, 2.0, 0.1};
    f.modulus = Modulus::lipschitz(0.5);
    f.initial = gaussian(1.0, 0.3, nodes);
  } else {
    throw InvalidArgument("unknown fixture '" + id + "'");
  }
  return f;
}

}  // namespace omegaflow::fixtures
