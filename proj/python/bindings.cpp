#include <pybind11/gil_safe_call_once.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "omegaflow/cli.hpp"
#include "omegaflow/energies.hpp"
#include "omegaflow/jko.hpp"
#include "omegaflow/measures.hpp"
#include "omegaflow/moduli.hpp"
#include "omegaflow/transport.hpp"
#include "omegaflow/verify.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace omegaflow;

// Structured values cross the boundary as JSON text; the Python package wraps them.
namespace {

json parse(const std::string& s) { return json::parse(s); }

std::string w2_json(const std::string& mu, const std::string& nu) {
  auto a = to_atomic(measure_from_json(parse(mu), "/mu"));
  auto b = to_atomic(measure_from_json(parse(nu), "/nu"));
  auto r = w2(a, b);
  return json{{"distance", r.distance}, {"cost", r.cost}, {"plan", plan_to_json(r.plan)}}.dump();
}

std::string proximal_json(const std::string& energy, const std::string& mu, double tau, const std::string& cfg) {
  auto c = jko_config_from_json(parse(cfg), "/cfg");
  auto r = proximal_step(energy_from_json(parse(energy), "/energy"), measure_from_json(parse(mu), "/initial"), tau, c);
  return json{{"measure", measure_to_json(r.measure)}, {"objective", r.objective}, {"energy", r.energy},
              {"distance", r.distance}, {"converged", r.diag.converged}, {"iterations", r.diag.iterations}}
      .dump();
}

std::string flow_json(const std::string& energy, const std::string& mu, const std::string& cfg) {
  auto traj = flow(energy_from_json(parse(energy), "/energy"), measure_from_json(parse(mu), "/initial"),
                   jko_config_from_json(parse(cfg), "/cfg"));
  return traj.to_json(true).dump();
}

double energy_json(const std::string& energy, const std::string& mu) {
  return energy_from_json(parse(energy), "/energy").eval(measure_from_json(parse(mu), "/mu"));
}

Modulus modulus(const std::string& m) { return modulus_from_json(parse(m), "/modulus"); }

std::string suite_json(const std::string& name, bool quick, std::uint64_t seed, double tol, int threads) {
  SuiteOptions o;
  o.quick = quick;
  o.seed = seed;
  o.tol = tol;
  o.threads = threads;
  return reports_to_json(run_suite(name, o)).dump();
}

std::string rate_study_json(const std::string& energy, const std::string& mu, double t, const std::vector<int>& ns,
                            int n_ref, const std::string& m, const std::string& cfg) {
  auto s = rate_study(energy_from_json(parse(energy), "/energy"), measure_from_json(parse(mu), "/initial"), t, ns,
                      n_ref, modulus(m), jko_config_from_json(parse(cfg), "/cfg"));
  return s.to_json().dump();
}

int run_config_json(const std::string& doc) {
  std::ostringstream log;
  return cli::run_experiment(cli::parse_experiment(parse(doc)), cli::GlobalOptions{}, log);
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.attr("__version__") = cli::kToolVersion;
  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> storage;
  storage.call_once_and_store_result(
      [&]() { return py::object(py::exception<SchemaError>(mod, "SchemaError", PyExc_ValueError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const SchemaError& e) {
      py::object cls = storage.get_stored();
      py::object exc = cls(e.what());
      exc.attr("pointer") = e.pointer();
      PyErr_SetObject(cls.ptr(), exc.ptr());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const InvalidArgument& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ComputationError& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  mod.def("w2", &w2_json, py::arg("mu"), py::arg("nu"));
  mod.def("energy", &energy_json, py::arg("energy"), py::arg("mu"));
  mod.def("proximal_step", &proximal_json, py::arg("energy"), py::arg("mu"), py::arg("tau"), py::arg("cfg"),
          py::call_guard<py::gil_scoped_release>());
  mod.def("flow", &flow_json, py::arg("energy"), py::arg("mu"), py::arg("cfg"),
          py::call_guard<py::gil_scoped_release>());
  mod.def("flow_map", [](const std::string& m, double t, double x) { return flow_map(modulus(m), t, x); });
  mod.def("euler_step", [](const std::string& m, double tau, double x) { return euler_step(modulus(m), tau, x); });
  mod.def("euler_iterate",
          [](const std::string& m, double tau, int n, double x) { return euler_iterate(modulus(m), tau, n, x); });
  mod.def("euler_error_bound",
          [](const std::string& m, double t, double x, int n) { return euler_error_bound(modulus(m), t, x, n); });
  mod.def("omega", [](const std::string& m, double x) { return modulus(m).omega(x); });
  mod.def("suite_names", &suite_names);
  mod.def("run_suite", &suite_json, py::arg("name"), py::arg("quick"), py::arg("seed"), py::arg("tol"),
          py::arg("threads"), py::call_guard<py::gil_scoped_release>());
  mod.def("rate_study", &rate_study_json, py::call_guard<py::gil_scoped_release>());
  mod.def("run_config", &run_config_json, py::call_guard<py::gil_scoped_release>());
}
