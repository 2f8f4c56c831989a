#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "omegaflow/energies.hpp"
#include "omegaflow/measures.hpp"
#include "omegaflow/moduli.hpp"

namespace omegaflow::fixtures {

// OMEGAFLOW_FIXTURES if set, else the directory configured at build time.
std::string fixture_dir();
// Parses <fixture_dir>/<file>; throws InvalidArgument when missing or malformed.
nlohmann::json load_json(const std::string& file);

// n equal-mass nodes spread uniformly over [center - width/2, center + width/2].
QuantileMeasure block(double center, double width, std::size_t n);
// n equal-mass nodes at the normal quantiles of levels (i + 1/2)/n.
QuantileMeasure gaussian(double mean, double sd, std::size_t n);
// Equal-mass nodes whose cell densities stay at or below M (M = inf allowed).
// Gaps are the minimal c_j/M times a random factor in [1, 1 + spread]; a
// fraction of cells is pinned at the cap.
QuantileMeasure random_constrained(std::mt19937_64& rng, std::size_t n, double M, double spread = 3.0,
                                   double offset = 1.0);
// nodes[i] + shift + amplitude * sin-profile, scaled so that W2 to q is exactly distance.
QuantileMeasure perturbed(const QuantileMeasure& q, double distance, int mode = 1);

// Interaction field (W' * rho)(x) of the density view of a 1D quantile measure.
double density_field(const Kernel& k, const QuantileMeasure& q, double x);

struct KernelCalibration {
  double M = 1.0;
  double field_ratio = 0.0;   // sup |field(x) - field(y)| / sqrt(psi(|x - y|^2))
  double loeper_ratio = 0.0;  // sup ||field_mu - field_nu||_{L2(rho)} / W2(mu, nu)
  double C = 0.0;             // 1.05 * max of both ratios
  nlohmann::json to_json() const;
};
KernelCalibration calibrate_kernel(const Kernel& k, double M, std::uint64_t seed, int densities = 24);
// Half the sup of |V'(x) - V'(y)| / sqrt(psi(|x - y|^2)) over a grid on [lo, hi], times 1.05.
double calibrate_potential(const Potential& V, double lo, double hi, int points = 600);

// Fresh calibration of every calibrated fixture, keyed by fixture id.
nlohmann::json compute_calibration(std::uint64_t seed = 7);
// Frozen constant C for a calibrated fixture; computed when the file is absent.
double calibrated_constant(const std::string& id);

struct Fixture {
  std::string id;
  Energy energy;
  Modulus modulus = Modulus::lipschitz(0.0);
  QuantileMeasure initial;
  double tau = 0.05;
  double cap = kInf;  // density bound enforced by the energy
};

// quadratic, quartic, entropy, aggregation, keller_segel, reglog, drift_power, time_quadratic
std::vector<std::string> fixture_ids();
Fixture make_fixture(const std::string& id, std::size_t nodes = 32);

// Shared fixture parameters.
inline constexpr double kCapM = 1.0;
inline constexpr double kReglogEps = 0.1;
inline constexpr double kAttractionChi = 1.0;

}  // namespace omegaflow::fixtures
