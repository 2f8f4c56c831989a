#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "omegaflow/jko.hpp"
#include "omegaflow/verify.hpp"

namespace omegaflow::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum class JobKind { flow, verify, rates, ode_audit };

struct ExperimentConfig {
  JobKind job = JobKind::flow;
  nlohmann::json energy, initial, modulus, cfg;
  std::uint64_t seed = 1;
  std::filesystem::path dir = ".";
  std::string trajectory = "trajectory.csv", states, report = "report.json", study = "study.json", plot,
              manifest = "manifest.json";
  std::vector<std::string> suites;
  double tol = 1e-6;
  bool quick = false;
  double t = 1.0;
  std::vector<int> n_list;
  int n_ref = 4096;
  std::vector<double> ode_x, ode_t;
  std::vector<int> ode_n;
  nlohmann::json raw;
};

// Validates the whole document; SchemaError carries the offending pointer.
ExperimentConfig parse_experiment(const nlohmann::json& j);

struct GlobalOptions {
  int threads = 1;
  std::uint64_t seed = 1;
  bool seed_given = false;
  double tol = 1e-6;
  bool tol_given = false;
};

// Long-format series,x,y tables.
std::string emit_plot_table(const RateStudy& s);
std::string emit_plot_table(const FlowTrajectory& traj);

// Writes to a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

std::uint64_t fnv1a64(std::string_view data);
// FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

// Executes a parsed job and writes its artifacts and manifest. Returns the exit code.
int run_experiment(const ExperimentConfig& cfg, const GlobalOptions& g, std::ostream& log);
// ODE audit reports for the given modulus and grid.
std::vector<InequalityReport> ode_audit(const Modulus& m, const std::vector<double>& xs, const std::vector<double>& ts,
                                        const std::vector<int>& ns);

// Full command line entry point: flow | verify | rates | ode | transport | run.
int main_entry(int argc, char** argv);

}  // namespace omegaflow::cli
