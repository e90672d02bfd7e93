#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qbal/analytic.hpp"
#include "qbal/errors.hpp"
#include "qbal/jump_log.hpp"
#include "qbal/scenario.hpp"
#include "qbal/verifier.hpp"

namespace py = pybind11;

namespace {

struct Overrides {
  std::optional<double> horizon;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replications;
  std::optional<std::uint64_t> events;
};

qbal::Scenario scenario_from(const std::string& text, bool is_path, const Overrides& o) {
  auto s = is_path ? qbal::load_scenario(text) : qbal::parse_scenario(nlohmann::json::parse(text));
  if (o.horizon) s.run.horizon = *o.horizon;
  if (o.seed) s.run.seed = *o.seed;
  if (o.replications) s.run.replications = *o.replications;
  if (o.events) s.run.max_events = *o.events;
  return s;
}

std::string verify_json(const std::string& text, bool is_path, std::size_t threads, std::optional<double> horizon,
                        std::optional<std::uint64_t> seed, std::optional<std::size_t> replications,
                        std::optional<std::uint64_t> events) {
  const auto s = scenario_from(text, is_path, {horizon, seed, replications, events});
  py::gil_scoped_release release;
  return qbal::dump_report(qbal::run_scenario(s, {threads}));
}

std::string estimate_json(const std::string& text, bool is_path, std::size_t threads, std::optional<double> horizon,
                          std::optional<std::uint64_t> seed, std::optional<std::size_t> replications) {
  const auto s = scenario_from(text, is_path, {horizon, seed, replications, std::nullopt});
  py::gil_scoped_release release;
  const auto runs = qbal::simulate(s, {threads});
  const auto est = qbal::build_estimates(runs, qbal::estimation_options(s));
  return qbal::estimates_document(qbal::summarize(est, s.evaluation_grid())).dump();
}

std::string replay_json(const std::string& path, std::optional<double> end_time) {
  const auto trace = qbal::read_jump_log_file(path);
  std::vector<qbal::RunResult> runs{
      qbal::replay_trace(trace, end_time.value_or(std::numeric_limits<double>::quiet_NaN()))};
  const auto est = qbal::build_estimates(runs, {});
  qbal::VerifyInput in;
  in.estimates = &est;
  in.runs = runs;
  in.grid = qbal::default_grid(trace.x0.size());
  qbal::BalanceReport report;
  report.scenario = path;
  report.horizon = runs.front().end_time;
  report.metadata["source"] = "jump log";
  report.checks = qbal::verify(in);
  return qbal::dump_report(report);
}

}  // namespace

PYBIND11_MODULE(_qbal, m) {
  m.doc() = "Simulation and balance-relation checks for multidimensional queues";

  // Translators run newest first, so the base class goes in before its subclasses.
  py::register_exception<qbal::Error>(m, "QbalError", PyExc_RuntimeError);
  py::register_exception<qbal::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<qbal::SimultaneityViolation>(m, "SimultaneityViolation", PyExc_RuntimeError);
  py::register_exception<qbal::IoError>(m, "IoError", PyExc_OSError);

  m.attr("REPORT_SCHEMA") = qbal::kReportSchema;
  m.attr("SCENARIO_SCHEMA") = qbal::kScenarioSchema;

  m.def("verify_json", &verify_json, py::arg("scenario"), py::arg("is_path"), py::arg("threads") = 1,
        py::arg("horizon") = py::none(), py::arg("seed") = py::none(), py::arg("replications") = py::none(),
        py::arg("events") = py::none());
  m.def("estimate_json", &estimate_json, py::arg("scenario"), py::arg("is_path"), py::arg("threads") = 1,
        py::arg("horizon") = py::none(), py::arg("seed") = py::none(), py::arg("replications") = py::none());
  m.def("replay_json", &replay_json, py::arg("path"), py::arg("end_time") = py::none());

  m.def("check_families", &qbal::check_families);
  m.def("scenario_files", &qbal::list_scenario_files, py::arg("directory"));

  m.def(
      "solve_traffic",
      [](const std::vector<double>& lambda, const std::vector<std::vector<double>>& p) {
        return qbal::solve_traffic(lambda, p);
      },
      py::arg("arrival_rates"), py::arg("routing"), "Throughputs solving Λ = λ + Λ P.");
  m.def(
      "traffic_residual",
      [](const std::vector<double>& lambda, const std::vector<std::vector<double>>& p,
         const std::vector<double>& throughput) { return qbal::traffic_residual(lambda, p, throughput); },
      py::arg("arrival_rates"), py::arg("routing"), py::arg("throughput"));
  m.def(
      "sigma",
      [](const std::vector<double>& lambda, const std::vector<double>& z) { return qbal::sigma(lambda, z); },
      py::arg("arrival_rates"), py::arg("z"), "Σ λ_j (1 − z_j).");
}
