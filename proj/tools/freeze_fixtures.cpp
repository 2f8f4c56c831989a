// Regenerates the frozen calibration and rate constants in the fixture directory
// (OMEGAFLOW_FIXTURES overrides the default).
#include <filesystem>
#include <iostream>

#include "omegaflow/cli.hpp"
#include "omegaflow/fixtures.hpp"
#include "omegaflow/verify.hpp"

int main() {
  using namespace omegaflow;
  std::filesystem::path dir = fixtures::fixture_dir();
  auto calibration = fixtures::compute_calibration(7);
  cli::write_atomic(dir / "calibration.json", calibration.dump(2) + "\n");
  std::cerr << "calibration: " << calibration.dump() << "\n";
  if (std::filesystem::exists(dir / "rates.json")) std::filesystem::remove(dir / "rates.json");
  SuiteOptions opt;
  opt.threads = 8;
  nlohmann::json rates = nlohmann::json::object();
  for (const auto& r : run_suite("rates", opt))
    if (r.name == "rate_constant_frozen") {
      auto id = r.context.at("fixture").get<std::string>();
      rates[id] = {{"c_star", r.context.at("fitted")}, {"n_fit", 8}};
    }
  cli::write_atomic(dir / "rates.json", rates.dump(2) + "\n");
  std::cerr << "rates: " << rates.dump() << "\n";
  return 0;
}
