#include "omegaflow/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>

#include "omegaflow/common.hpp"
#include "omegaflow/energies.hpp"
#include "omegaflow/format.hpp"
#include "omegaflow/json_util.hpp"
#include "omegaflow/measures.hpp"
#include "omegaflow/moduli.hpp"
#include "omegaflow/transport.hpp"

namespace omegaflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& ptr) {
  if (!j.is_object()) throw SchemaError(ptr.empty() ? "/" : ptr, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw SchemaError(ptr + "/" + it.key(), "unknown key");
}

std::vector<int> integers(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array of integers");
  std::vector<int> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(jsonu::integer(j[k], ptr + "/" + std::to_string(k)));
  return out;
}

std::string string_or(const json& j, const std::string& key, const std::string& dflt, const std::string& ptr) {
  if (auto* v = jsonu::optional(j, key)) return jsonu::string(*v, ptr + "/" + key);
  return dflt;
}

// Builders run during parsing so that a bad section fails before any work.
template <class F>
void validate_section(const json& j, const std::string& ptr, F&& build) {
  try {
    build(j, ptr);
  } catch (const InvalidArgument& e) {
    throw SchemaError(ptr, e.what());
  }
}

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw SchemaError("/", "cannot open '" + p.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("/", "malformed JSON in '" + p.string() + "': " + e.what());
  }
}

std::string iso_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_writable(const fs::path& file) {
  fs::path dir = file.parent_path().empty() ? fs::path(".") : file.parent_path();
  std::error_code ec;
  fs::create_directories(dir, ec);
  fs::path probe = dir / (".omegaflow_probe_" + std::to_string(::getpid()));
  std::ofstream out(probe);
  if (!out) throw SchemaError("/outputs", "output path not writable: " + file.string());
  out.close();
  fs::remove(probe, ec);
}

}  // namespace

ExperimentConfig parse_experiment(const json& j) {
  reject_unknown(j, {"job", "energy", "initial", "modulus", "cfg", "seed", "outputs", "verify", "rates", "ode"}, "");
  ExperimentConfig c;
  c.raw = j;
  auto job = jsonu::string(jsonu::require(j, "job", ""), "/job");
  if (job == "flow") c.job = JobKind::flow;
  else if (job == "verify") c.job = JobKind::verify;
  else if (job == "rates") c.job = JobKind::rates;
  else if (job == "ode-audit") c.job = JobKind::ode_audit;
  else throw SchemaError("/job", "expected one of flow, verify, rates, ode-audit");

  if (auto* s = jsonu::optional(j, "seed")) {
    if (!s->is_number_unsigned()) throw SchemaError("/seed", "expected a nonnegative integer");
    c.seed = s->get<std::uint64_t>();
  }
  bool needs_flow = c.job == JobKind::flow || c.job == JobKind::rates;
  if (needs_flow) {
    c.energy = jsonu::require(j, "energy", "");
    c.initial = jsonu::require(j, "initial", "");
    c.cfg = jsonu::require(j, "cfg", "");
    validate_section(c.energy, "/energy", [](const json& s, const std::string& p) { energy_from_json(s, p); });
    validate_section(c.initial, "/initial", [](const json& s, const std::string& p) { measure_from_json(s, p); });
    reject_unknown(c.cfg, {"tau", "steps", "inner_tol", "inner_max_iter", "parametrization", "constraint_mode", "multistart"},
                   "/cfg");
    validate_section(c.cfg, "/cfg", [](const json& s, const std::string& p) { jko_config_from_json(s, p).validate(); });
  }
  if (c.job == JobKind::rates || c.job == JobKind::ode_audit) {
    c.modulus = jsonu::require(j, "modulus", "");
    validate_section(c.modulus, "/modulus", [](const json& s, const std::string& p) { modulus_from_json(s, p); });
  }
  if (auto* o = jsonu::optional(j, "outputs")) {
    reject_unknown(*o, {"dir", "trajectory", "states", "report", "study", "plot", "manifest"}, "/outputs");
    c.dir = string_or(*o, "dir", ".", "/outputs");
    c.trajectory = string_or(*o, "trajectory", c.trajectory, "/outputs");
    c.states = string_or(*o, "states", "", "/outputs");
    c.report = string_or(*o, "report", c.report, "/outputs");
    c.study = string_or(*o, "study", c.study, "/outputs");
    c.plot = string_or(*o, "plot", "", "/outputs");
    c.manifest = string_or(*o, "manifest", c.manifest, "/outputs");
  }
  if (auto* v = jsonu::optional(j, "verify")) {
    reject_unknown(*v, {"suites", "tol", "quick"}, "/verify");
    if (auto* s = jsonu::optional(*v, "suites")) {
      if (!s->is_array()) throw SchemaError("/verify/suites", "expected an array of suite names");
      auto names = suite_names();
      for (std::size_t k = 0; k < s->size(); ++k) {
        auto n = jsonu::string((*s)[k], "/verify/suites/" + std::to_string(k));
        if (std::find(names.begin(), names.end(), n) == names.end())
          throw SchemaError("/verify/suites/" + std::to_string(k), "unknown suite '" + n + "'");
        c.suites.push_back(n);
      }
    }
    c.tol = jsonu::number_or(*v, "tol", c.tol, "/verify");
    if (auto* q = jsonu::optional(*v, "quick")) {
      if (!q->is_boolean()) throw SchemaError("/verify/quick", "expected a boolean");
      c.quick = q->get<bool>();
    }
  }
  if (c.job == JobKind::verify && c.suites.empty()) c.suites = suite_names();
  if (c.job == JobKind::rates) {
    const auto& r = jsonu::require(j, "rates", "");
    reject_unknown(r, {"t", "n_list", "n_ref"}, "/rates");
    c.t = jsonu::number(jsonu::require(r, "t", "/rates"), "/rates/t");
    c.n_list = integers(jsonu::require(r, "n_list", "/rates"), "/rates/n_list");
    for (std::size_t k = 0; k < c.n_list.size(); ++k)
      if (c.n_list[k] < 1 || (k > 0 && c.n_list[k] <= c.n_list[k - 1]))
        throw SchemaError("/rates/n_list/" + std::to_string(k), "n_list must be positive and strictly increasing");
    if (auto* n = jsonu::optional(r, "n_ref")) c.n_ref = jsonu::integer(*n, "/rates/n_ref");
    if (c.n_ref < 1) throw SchemaError("/rates/n_ref", "must be positive");
    if (!(c.t > 0.0)) throw SchemaError("/rates/t", "must be positive");
  }
  if (c.job == JobKind::ode_audit) {
    const auto& o = jsonu::require(j, "ode", "");
    reject_unknown(o, {"x", "t", "n"}, "/ode");
    c.ode_x = jsonu::numbers(jsonu::require(o, "x", "/ode"), "/ode/x");
    c.ode_t = jsonu::numbers(jsonu::require(o, "t", "/ode"), "/ode/t");
    c.ode_n = integers(jsonu::require(o, "n", "/ode"), "/ode/n");
    for (std::size_t k = 0; k < c.ode_x.size(); ++k)
      if (!(c.ode_x[k] >= 0.0)) throw SchemaError("/ode/x/" + std::to_string(k), "must be nonnegative");
    for (std::size_t k = 0; k < c.ode_n.size(); ++k)
      if (c.ode_n[k] < 1) throw SchemaError("/ode/n/" + std::to_string(k), "must be positive");
  }
  return c;
}

std::string emit_plot_table(const RateStudy& s) {
  std::string out = "series,x,y\n";
  for (std::size_t k = 0; k < s.n_list.size(); ++k)
    out += "measured," + std::to_string(s.n_list[k]) + "," + fmt_num(s.errors[k]) + "\n";
  for (std::size_t k = 0; k < s.n_list.size(); ++k)
    out += "bound," + std::to_string(s.n_list[k]) + "," + fmt_num(s.bound(k)) + "\n";
  return out;
}

std::string emit_plot_table(const FlowTrajectory& traj) {
  std::string out = "series,x,y\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    out += "energy," + fmt_num(traj.times[k]) + "," + fmt_num(traj.energies[k]) + "\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    out += "W2_step," + fmt_num(traj.times[k]) + "," + fmt_num(traj.step_distances[k]) + "\n";
  return out;
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ComputationError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ComputationError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash(const json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

std::vector<InequalityReport> ode_audit(const Modulus& m, const std::vector<double>& xs, const std::vector<double>& ts,
                                        const std::vector<int>& ns) {
  std::vector<InequalityReport> out;
  for (double x : xs)
    for (double t : ts)
      for (int n : ns) {
        json ctx{{"modulus", m.to_json()}, {"x", x}, {"t", t}, {"n", n}};
        try {
          double err = std::abs(flow_map(m, t, x) - euler_iterate(m, t / n, n, x));
          out.push_back(make_report("ode_error_bound", err, euler_error_bound(m, t, x, n), 0.0, ctx));
        } catch (const FlowWindowError& e) {
          out.push_back(skipped_report("ode_error_bound", e.what(), ctx));
        }
      }
  return out;
}

int run_experiment(const ExperimentConfig& c, const GlobalOptions& g, std::ostream& log) {
  auto start = std::chrono::steady_clock::now();
  std::string started = iso_now();
  std::uint64_t seed = g.seed_given ? g.seed : c.seed;
  double tol = g.tol_given ? g.tol : c.tol;
  std::vector<std::string> artifacts;
  auto out_path = [&](const std::string& name) { return c.dir / name; };
  std::vector<fs::path> planned;
  switch (c.job) {
    case JobKind::flow:
      planned.push_back(out_path(c.trajectory));
      if (!c.states.empty()) planned.push_back(out_path(c.states));
      break;
    case JobKind::verify:
    case JobKind::ode_audit: planned.push_back(out_path(c.report)); break;
    case JobKind::rates: planned.push_back(out_path(c.study)); break;
  }
  if (!c.plot.empty()) planned.push_back(out_path(c.plot));
  planned.push_back(out_path(c.manifest));
  for (const auto& p : planned) ensure_writable(p);

  int code = 0;
  json summary;
  auto emit = [&](const std::string& name, const std::string& content) {
    write_atomic(out_path(name), content);
    artifacts.push_back(out_path(name).string());
  };
  switch (c.job) {
    case JobKind::flow: {
      auto traj = flow(energy_from_json(c.energy, "/energy"), measure_from_json(c.initial, "/initial"),
                       jko_config_from_json(c.cfg, "/cfg"));
      emit(c.trajectory, traj.to_csv());
      if (!c.states.empty()) emit(c.states, traj.to_json(true).dump(2) + "\n");
      if (!c.plot.empty()) emit(c.plot, emit_plot_table(traj));
      summary = {{"steps", traj.steps()}, {"all_converged", traj.all_converged()}};
      log << "flow: " << traj.steps() << " steps, final energy " << fmt_num(traj.energies.back()) << "\n";
      break;
    }
    case JobKind::verify: {
      SuiteOptions so;
      so.tol = tol;
      so.threads = g.threads;
      so.seed = seed;
      so.quick = c.quick;
      std::vector<InequalityReport> all;
      for (const auto& s : c.suites) {
        auto r = run_suite(s, so);
        for (auto& x : r) x.context["suite"] = s;
        log << "suite " << s << ": " << r.size() << " checks, " << count_failures(r) << " failed\n";
        all.insert(all.end(), r.begin(), r.end());
      }
      emit(c.report, reports_to_json(all).dump(2) + "\n");
      std::size_t fails = count_failures(all);
      summary = {{"checks", all.size()}, {"failures", fails}};
      code = fails ? 1 : 0;
      break;
    }
    case JobKind::rates: {
      auto e = energy_from_json(c.energy, "/energy");
      auto mu = measure_from_json(c.initial, "/initial");
      auto m = modulus_from_json(c.modulus, "/modulus");
      auto study = rate_study(e, mu, c.t, c.n_list, c.n_ref, m, jko_config_from_json(c.cfg, "/cfg"));
      emit(c.study, study.to_json().dump(2) + "\n");
      if (!c.plot.empty()) emit(c.plot, emit_plot_table(study));
      summary = {{"monotone", study.monotone()}, {"fitted_slope", study.fitted_slope}, {"c_star", study.c_star}};
      log << "rates: slope " << fmt_num(study.fitted_slope) << ", C* " << fmt_num(study.c_star) << "\n";
      break;
    }
    case JobKind::ode_audit: {
      auto r = ode_audit(modulus_from_json(c.modulus, "/modulus"), c.ode_x, c.ode_t, c.ode_n);
      emit(c.report, reports_to_json(r).dump(2) + "\n");
      std::size_t fails = count_failures(r);
      summary = {{"checks", r.size()}, {"failures", fails}};
      code = fails ? 1 : 0;
      log << "ode-audit: " << r.size() << " checks, " << fails << " failed\n";
      break;
    }
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest{{"tool", "omegaflow"},
                {"version", kToolVersion},
                {"config_hash", config_hash(c.raw)},
                {"seed", seed},
                {"threads", g.threads},
                {"started", started},
                {"wall_clock_seconds", wall},
                {"artifacts", artifacts},
                {"summary", summary},
                {"exit_code", code}};
  write_atomic(out_path(c.manifest), manifest.dump(2) + "\n");
  return code;
}

namespace {

json load_or_inline(const std::string& arg) {
  if (!arg.empty() && (arg.front() == '{' || arg.front() == '[')) {
    try {
      return json::parse(arg);
    } catch (const json::parse_error& e) {
      throw SchemaError("/", std::string("malformed inline JSON: ") + e.what());
    }
  }
  return read_json_file(arg);
}

// Places output file names into an experiment document built from a subcommand.
ExperimentConfig with_outputs(json doc, const std::string& job, const json& outputs) {
  doc["job"] = job;
  auto& o = doc["outputs"];
  if (!o.is_object()) o = json::object();
  for (auto it = outputs.begin(); it != outputs.end(); ++it) o[it.key()] = it.value();
  return parse_experiment(doc);
}

json split_path(const std::string& path, const std::string& key) {
  fs::path p(path);
  json o{{key, p.filename().string()}, {"manifest", p.filename().string() + ".manifest.json"}};
  o["dir"] = p.parent_path().empty() ? std::string(".") : p.parent_path().string();
  return o;
}

}  // namespace

int main_entry(int argc, char** argv) {
  CLI::App app{"omegaflow: Wasserstein gradient flows of omega-convex energies"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--threads", g.threads, "Worker threads for independent jobs")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for samplers");
  auto* tol_opt = app.add_option("--tol", g.tol, "Check tolerance");

  auto* flow_cmd = app.add_subcommand("flow", "Run a JKO flow from {energy, initial, cfg}");
  std::string flow_config, flow_out = "trajectory.csv", flow_states, flow_plot;
  flow_cmd->add_option("--config", flow_config, "Experiment JSON")->required();
  flow_cmd->add_option("--out", flow_out, "Trajectory CSV");
  flow_cmd->add_option("--states", flow_states, "Per-step states JSON");
  flow_cmd->add_option("--plot", flow_plot, "Long-format plot table");

  auto* verify_cmd = app.add_subcommand("verify", "Run verification suites");
  std::vector<std::string> suites;
  std::string report = "report.json";
  bool quick = false;
  verify_cmd->add_option("--suite", suites, "Suite names")->check(CLI::IsMember(suite_names()));
  verify_cmd->add_option("--report", report, "Report JSON");
  verify_cmd->add_flag("--quick", quick, "Reduced instance counts");
  verify_cmd->add_option("--tol", g.tol, "Check tolerance");

  auto* rates_cmd = app.add_subcommand("rates", "Convergence-rate study");
  std::string rates_config, rates_out = "study.json", rates_plot;
  rates_cmd->add_option("--config", rates_config, "JSON with energy, initial, modulus, cfg, rates")->required();
  rates_cmd->add_option("--out", rates_out, "Study JSON");
  rates_cmd->add_option("--plot", rates_plot, "Long-format plot table");

  auto* ode_cmd = app.add_subcommand("ode", "Audit the Euler error bound of a modulus");
  std::string ode_modulus, ode_report = "ode_report.json";
  std::vector<double> ode_x{1e-3, 0.01, 0.03, 0.06, 0.085}, ode_t{0.5, 1.0};
  std::vector<int> ode_n{10, 100, 1000};
  ode_cmd->add_option("--modulus", ode_modulus, "Modulus JSON (file or inline)")->required();
  ode_cmd->add_option("--x", ode_x, "Initial values");
  ode_cmd->add_option("--t", ode_t, "Times");
  ode_cmd->add_option("--n", ode_n, "Step counts");
  ode_cmd->add_option("--report", ode_report, "Report JSON");

  auto* tr_cmd = app.add_subcommand("transport", "Exact W2 between two measures");
  std::string tr_mu, tr_nu, tr_plan;
  tr_cmd->add_option("--mu", tr_mu, "Measure JSON (file or inline)")->required();
  tr_cmd->add_option("--nu", tr_nu, "Measure JSON (file or inline)")->required();
  tr_cmd->add_option("--plan", tr_plan, "Optimal plan CSV");

  auto* run_cmd = app.add_subcommand("run", "Execute an experiment config");
  std::string run_config;
  run_cmd->add_option("config", run_config, "Experiment JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  g.seed_given = seed_opt->count() > 0;
  g.tol_given = tol_opt->count() > 0 || verify_cmd->count("--tol") > 0;

  try {
    if (*flow_cmd) {
      json o = split_path(flow_out, "trajectory");
      if (!flow_states.empty()) o["states"] = fs::relative(fs::absolute(flow_states), fs::absolute(o["dir"].get<std::string>())).string();
      if (!flow_plot.empty()) o["plot"] = fs::relative(fs::absolute(flow_plot), fs::absolute(o["dir"].get<std::string>())).string();
      return run_experiment(with_outputs(read_json_file(flow_config), "flow", o), g, std::cerr);
    }
    if (*verify_cmd) {
      json doc{{"job", "verify"}, {"verify", {{"quick", quick}}}};
      if (!suites.empty()) doc["verify"]["suites"] = suites;
      if (g.tol_given) doc["verify"]["tol"] = g.tol;
      return run_experiment(with_outputs(doc, "verify", split_path(report, "report")), g, std::cerr);
    }
    if (*rates_cmd) {
      json o = split_path(rates_out, "study");
      if (!rates_plot.empty()) o["plot"] = fs::relative(fs::absolute(rates_plot), fs::absolute(o["dir"].get<std::string>())).string();
      return run_experiment(with_outputs(read_json_file(rates_config), "rates", o), g, std::cerr);
    }
    if (*ode_cmd) {
      json doc{{"job", "ode-audit"},
               {"modulus", load_or_inline(ode_modulus)},
               {"ode", {{"x", ode_x}, {"t", ode_t}, {"n", ode_n}}}};
      return run_experiment(with_outputs(doc, "ode-audit", split_path(ode_report, "report")), g, std::cerr);
    }
    if (*tr_cmd) {
      auto mu = measure_from_json(load_or_inline(tr_mu), "/mu");
      auto nu = measure_from_json(load_or_inline(tr_nu), "/nu");
      auto res = w2(to_atomic(mu), to_atomic(nu));
      if (!tr_plan.empty()) write_atomic(tr_plan, plan_to_csv(res.plan));
      std::cout << json{{"distance", res.distance}, {"cost", res.cost}}.dump() << "\n";
      return 0;
    }
    if (*run_cmd) return run_experiment(parse_experiment(read_json_file(run_config)), g, std::cerr);
  } catch (const SchemaError& e) {
    std::cerr << "schema error " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace omegaflow::cli
