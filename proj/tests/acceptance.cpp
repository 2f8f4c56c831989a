// Prints one PASS/FAIL line per acceptance criterion; exit code is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "omegaflow/transport.hpp"
#include "omegaflow/verify.hpp"
#include "oracles.hpp"

using namespace omegaflow;

namespace {

using Reports = std::vector<InequalityReport>;
using Clock = std::chrono::steady_clock;

struct Timed {
  Reports reports;
  double seconds = 0.0;
};

Timed timed_suite(const std::string& name, const SuiteOptions& opt) {
  auto start = Clock::now();
  Timed t;
  t.reports = run_suite(name, opt);
  t.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return t;
}

Reports select(const Reports& all, const std::set<std::string>& names) {
  Reports out;
  for (const auto& r : all)
    if (names.count(r.name)) out.push_back(r);
  return out;
}

struct Tally {
  int checked = 0, skipped = 0, failed = 0;
  double worst = kInf;
  std::string worst_name;
};

Tally tally(const Reports& rs) {
  Tally t;
  for (const auto& r : rs) {
    if (r.skipped) {
      ++t.skipped;
      continue;
    }
    ++t.checked;
    if (!r.pass) ++t.failed;
    double margin = r.slack + r.tolerance;
    if (margin < t.worst) {
      t.worst = margin;
      t.worst_name = r.name;
    }
  }
  return t;
}

int failures = 0;

void line(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string describe(const Tally& t) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d checks, %d failed, %d skipped, worst margin %.3g (%s)", t.checked, t.failed,
                t.skipped, t.worst, t.worst_name.c_str());
  return buf;
}

}  // namespace

int main() {
  SuiteOptions opt;
  opt.threads = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  opt.seed = 1;

  {
    auto t = timed_suite("ode", opt);
    auto s = tally(t.reports);
    std::set<std::string> moduli;
    for (const auto& r : t.reports) moduli.insert(r.context.value("modulus", nlohmann::json{}).value("kind", ""));
    bool ok = s.failed == 0 && s.checked >= 3 * 5 * 2 * 3 && moduli.size() >= 3 && t.seconds < 1.0;
    line(1, ok, describe(s) + ", moduli " + std::to_string(moduli.size()) + ", " + std::to_string(t.seconds) + " s");
  }

  Timed transport = timed_suite("transport", opt);
  {
    auto start = Clock::now();
    std::mt19937_64 rng(2024);
    int instances = 0, bad = 0;
    double worst = 0.0;
    for (; instances < 200; ++instances) {
      int dim = instances % 2 ? 2 : 1;
      int K = 6 + instances % 3;
      auto a = oracle::random_counted(rng, dim, 1 + instances % 6, K);
      auto b = oracle::random_counted(rng, dim, 1 + (instances / 6) % 6, K);
      double err = std::abs(w2_exact(a.measure(dim), b.measure(dim)).cost - oracle::brute_force_cost(a, b));
      worst = std::max(worst, err);
      if (!(err <= 1e-12)) ++bad;
    }
    double brute_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    auto s = tally(select(transport.reports, {"w2_1d_vs_exact"}));
    int exact_instances = 0;
    for (const auto& r : select(transport.reports, {"w2_1d_vs_exact"})) exact_instances += r.context.value("instances", 0);
    double total = transport.seconds + brute_seconds;
    bool ok = s.failed == 0 && exact_instances >= 1000 && bad == 0 && total < 30.0;
    char buf[256];
    std::snprintf(buf, sizeof buf, "1d vs exact: %d instances, %s; brute force: %d instances, worst %.2e; %.2f s",
                  exact_instances, s.failed ? "FAILED" : "agree", instances, worst, total);
    line(2, ok, buf);
  }

  {
    auto rs = select(transport.reports, {"glued_identity"});
    auto s = tally(rs);
    int instances = 0;
    for (const auto& r : rs) instances += r.context.value("instances", 0);
    line(3, s.failed == 0 && s.checked > 0 && instances >= 100,
         describe(s) + ", " + std::to_string(instances) + " glued fixtures");
  }

  Timed rates = timed_suite("rates", opt);
  {
    auto s = tally(select(rates.reports, {"jko_closed_form", "closed_form_n_step_slope"}));
    double slope = 0.0;
    for (const auto& r : rates.reports)
      if (r.name == "closed_form_n_step_slope") slope = r.context.value("slope", 0.0);
    line(4, s.failed == 0 && s.checked == 2, describe(s) + ", slope " + std::to_string(slope));
  }

  Timed evi = timed_suite("evi", opt);
  {
    auto rs = select(evi.reports, {"discrete_evi"});
    auto s = tally(rs);
    std::set<std::string> fixtures;
    for (const auto& r : rs)
      if (!r.skipped) fixtures.insert(r.context.value("fixture", ""));
    bool covers = fixtures.count("quadratic") && fixtures.count("entropy") && fixtures.count("aggregation") &&
                  fixtures.count("keller_segel");
    line(5, s.failed == 0 && s.checked >= 500 && covers,
         describe(s) + ", fixtures " + std::to_string(fixtures.size()));
  }

  Timed contraction = timed_suite("contraction", opt);
  {
    auto rs = select(contraction.reports, {"contraction_rate"});
    auto s = tally(rs);
    int quadratic = 0, log_lipschitz = 0;
    for (const auto& r : rs) {
      if (r.skipped) continue;
      auto f = r.context.value("fixture", "");
      if (f == "quadratic") ++quadratic;
      if (f == "keller_segel" || f == "aggregation" || f == "reglog") ++log_lipschitz;
    }
    line(6, s.failed == 0 && quadratic >= 40 && log_lipschitz > 0,
         describe(s) + ", quadratic " + std::to_string(quadratic) + ", log-Lipschitz " + std::to_string(log_lipschitz));
  }

  {
    double seconds = rates.seconds;
    auto rs = select(rates.reports, {"rate_monotone", "rate_envelope", "rate_constant_frozen"});
    auto s = tally(rs);
    std::set<std::string> families;
    for (const auto& r : rs) families.insert(r.context.value("fixture", ""));
    line(7, s.failed == 0 && families.size() >= 4 && seconds < 600.0,
         describe(s) + ", families " + std::to_string(families.size()) + ", " + std::to_string(seconds) + " s");
  }

  {
    auto s = tally(select(evi.reports, {"aggregation_cap", "aggregation_descent", "aggregation_block_limit"}));
    line(8, s.failed == 0 && s.checked == 3, describe(s));
  }

  {
    auto t = timed_suite("convexity", opt);
    auto cert = select(t.reports, {"omega_convexity"});
    auto witness = select(t.reports, {"wrong_modulus_witness"});
    auto calib = select(t.reports, {"calibration_frozen"});
    auto s = tally(cert);
    int pairs = 0;
    for (const auto& r : cert) pairs = std::min(pairs == 0 ? 1 << 30 : pairs, r.context["summary"].value("trials", 0));
    bool ok = s.failed == 0 && s.checked >= 2 && pairs >= 200 && tally(witness).failed == 0 &&
              tally(witness).checked == 1 && tally(calib).failed == 0;
    line(9, ok, describe(s) + ", pairs per fixture " + std::to_string(pairs) + ", witness " +
                    (tally(witness).failed == 0 ? "found" : "missing"));
  }

  {
    auto t = timed_suite("appendix", opt);
    auto phi = tally(select(t.reports, {"phi_modulus"}));
    auto cauchy = tally(select(t.reports, {"time_dependent_cauchy"}));
    line(10, phi.failed == 0 && phi.checked == 1 && cauchy.failed == 0 && cauchy.checked >= 1,
         "phi: " + describe(phi) + "; cauchy: " + describe(cauchy));
  }

  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
