#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "reinforce/config.hpp"
#include "reinforce/error.hpp"
#include "reinforce/graph_io.hpp"
#include "reinforce/mcmc.hpp"
#include "reinforce/measure.hpp"
#include "reinforce/phase.hpp"
#include "reinforce/process.hpp"
#include "reinforce/verify.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

reinforce::GraphSpec graph_from(const std::string& text) { return reinforce::parse_graph(json::parse(text)); }

reinforce::MeasureParams measure_from(const std::string& graph, reinforce::Vertex root) {
  auto spec = graph_from(graph);
  if (spec.pinning) return reinforce::MeasureParams::pinned(reinforce::PinnedGraph(spec.graph, *spec.pinning));
  return reinforce::MeasureParams::rooted(spec.graph, root);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Compiled core of reinforce_lab; graphs and configs travel as JSON text.";

  py::register_exception<reinforce::Error>(m, "ReinforceError", PyExc_RuntimeError);
  py::register_exception<reinforce::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<reinforce::InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  m.def("version", &reinforce::library_version);

  m.def("i_beta", &reinforce::i_beta, py::arg("beta"));
  m.def("beta_c", &reinforce::beta_c, py::arg("d"));
  m.def("a_c", &reinforce::a_c, py::arg("d"));
  m.def("i_hat", &reinforce::i_hat, py::arg("a"));
  m.def("j_hat", &reinforce::j_hat, py::arg("a"));
  m.def(
      "constants_json",
      [](int d, std::optional<double> beta, std::optional<double> a) {
        return reinforce::constants_json(d, beta, a).dump();
      },
      py::arg("d"), py::arg("beta") = py::none(), py::arg("a") = py::none());

  m.def(
      "log_density",
      [](const std::string& graph, const std::vector<double>& x, reinforce::Vertex root) {
        return measure_from(graph, root).log_density(x);
      },
      py::arg("graph"), py::arg("x"), py::arg("root") = 0);

  m.def(
      "sample_density",
      [](const std::string& graph, std::size_t n, std::uint64_t seed, std::size_t burn_in, reinforce::Vertex root) {
        const auto params = measure_from(graph, root);
        reinforce::McmcSettings s;
        s.burn_in = burn_in;
        py::gil_scoped_release release;
        auto out = reinforce::adapt_and_sample(params, n, s, seed);
        return std::make_pair(Eigen::MatrixXd(out.samples), reinforce::diagnostics_json(out.diagnostics).dump());
      },
      py::arg("graph"), py::arg("n"), py::arg("seed") = 0, py::arg("burn_in") = 10000, py::arg("root") = 0);

  m.def(
      "simulate",
      [](const std::string& graph, const std::string& process, std::uint64_t seed, std::optional<std::uint64_t> steps,
         std::optional<double> horizon, reinforce::Vertex start) {
        const auto spec = graph_from(graph);
        reinforce::RunOptions o;
        o.kind = reinforce::parse_process_kind(process);
        o.start = start;
        o.seed = seed;
        if (steps) o.max_steps = *steps;
        if (horizon) o.horizon = *horizon;
        const auto traj = reinforce::run_until(spec.graph, o);
        std::vector<std::tuple<double, reinforce::Vertex, reinforce::Vertex>> jumps;
        jumps.reserve(traj.jumps.size());
        for (const auto& j : traj.jumps) jumps.emplace_back(j.time, j.from, j.to);
        return jumps;
      },
      py::arg("graph"), py::arg("process"), py::arg("seed") = 0, py::arg("steps") = py::none(),
      py::arg("horizon") = py::none(), py::arg("start") = 0);

  m.def(
      "verify",
      [](const std::string& suite, const std::string& overrides, std::uint64_t seed, unsigned threads) {
        py::gil_scoped_release release;
        return reinforce::to_json(reinforce::verify_suite(suite, json::parse(overrides), seed, threads)).dump();
      },
      py::arg("suite"), py::arg("overrides") = "{}", py::arg("seed") = 0, py::arg("threads") = 1);

  m.def(
      "run_config",
      [](const std::string& config, unsigned threads) {
        const auto c = reinforce::validate_config(json::parse(config));
        std::ostringstream console;
        const auto r = reinforce::run_experiment(c, threads, console);
        return std::make_tuple(r.exit_code, console.str(), r.outputs, r.message);
      },
      py::arg("config"), py::arg("threads") = 1);
}
