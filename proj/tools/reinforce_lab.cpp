// reinforce-lab: batch front end for the reinforce library.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "reinforce/config.hpp"
#include "reinforce/error.hpp"
#include "reinforce/graph_io.hpp"
#include "reinforce/parallel.hpp"

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw reinforce::ConfigError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw reinforce::ConfigError(path + ": " + e.what());
  }
}

// Flags shared by every experiment subcommand.
struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::string format;
  std::string config_file;
  std::string lattice;
  std::string graph_file;
  std::vector<std::string> assignments;
};

void add_common(CLI::App* cmd, Common& c, bool graph) {
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--out", c.out, "Output path, '-' for standard output");
  cmd->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--config", c.config_file, "JSON experiment config; flags override it")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.assignments, "Parameter override KEY=JSON (repeatable)");
  if (graph) {
    cmd->add_option("--lattice", c.lattice, "Lattice box shorthand, e.g. d=2,n=3[,weight=w]");
    cmd->add_option("--graph", c.graph_file, "Graph JSON file")->check(CLI::ExistingFile);
  }
}

// Start from the config file (if any), then layer flags on top.
json assemble(const std::string& command, const Common& c, const CLI::App* cmd, json flags) {
  json doc = {{"command", command}, {"params", json::object()}};
  if (!c.config_file.empty()) {
    doc = read_json_file(c.config_file);
    if (!doc.is_object()) throw reinforce::ConfigError("config file must hold an object");
    if (doc.value("command", command) != command)
      throw reinforce::ConfigError("config file is for command '" + doc["command"].get<std::string>() + "'");
    doc["command"] = command;
    if (!doc.contains("params")) doc["params"] = json::object();
  }
  auto& params = doc["params"];
  if (!c.lattice.empty() && !c.graph_file.empty()) throw reinforce::ConfigError("give --lattice or --graph, not both");
  if (!c.lattice.empty()) params["graph"] = reinforce::lattice_shorthand(c.lattice);
  if (!c.graph_file.empty()) params["graph"] = read_json_file(c.graph_file);
  for (auto& [key, value] : flags.items()) params[key] = value;
  for (const auto& a : c.assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw reinforce::ConfigError("--set expects KEY=JSON, got '" + a + "'");
    const std::string key = a.substr(0, eq);
    const std::string text = a.substr(eq + 1);
    params[key] = json::accept(text) ? json::parse(text) : json(text);
  }
  if (cmd->count("--seed")) doc["seed"] = c.seed;
  if (!c.format.empty()) doc["format"] = c.format;
  if (!c.out.empty()) doc["out"] = c.out;
  return doc;
}

int execute(const reinforce::ExperimentConfig& config, unsigned threads) {
  const auto outcome = reinforce::run_experiment(config, threads, std::cout);
  std::cout.flush();
  if (!outcome.message.empty()) {
    std::cerr << outcome.message;
    if (outcome.message.back() != '\n') std::cerr << '\n';
  }
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforced random walks, VRJP and sigma-model experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", reinforce::library_version());
  unsigned threads_flag = 0;
  app.add_option("--threads", threads_flag, "Worker threads (REINFORCE_LAB_THREADS otherwise)")->check(CLI::PositiveNumber);

  Common common;
  std::function<json()> flags;
  std::string command;
  CLI::App* active = nullptr;

  // simulate PROCESS
  std::string process;
  std::uint64_t steps = 0;
  double horizon = 0;
  unsigned start = 0;
  std::vector<double> checkpoints;
  auto* simulate = app.add_subcommand("simulate", "Simulate one trajectory");
  simulate->add_option("process", process, "errw, errw-ct, vrjp, xproc or z")
      ->required()
      ->check(CLI::IsMember({"errw", "errw-ct", "vrjp", "xproc", "z"}));
  simulate->add_option("--steps", steps, "Jump budget");
  simulate->add_option("--horizon", horizon, "Time horizon in the process clock");
  simulate->add_option("--start", start, "Start vertex");
  simulate->add_option("--checkpoints", checkpoints, "Times at which to record local times")->delimiter(',');
  add_common(simulate, common, true);
  simulate->callback([&] {
    command = "simulate";
    active = simulate;
    flags = [&] {
      json f{{"process", process}};
      if (simulate->count("--steps")) f["steps"] = steps;
      if (simulate->count("--horizon")) f["horizon"] = horizon;
      if (simulate->count("--start")) f["start"] = start;
      if (simulate->count("--checkpoints")) f["checkpoints"] = checkpoints;
      return f;
    };
  });

  // sample-density
  std::size_t samples = 0, burn_in = 0, thinning = 0, chains = 0, draws = 0;
  unsigned root = 0;
  auto* sample = app.add_subcommand("sample-density", "MCMC samples of the limit or sigma-model density");
  sample->add_option("--samples", samples, "Number of retained samples");
  sample->add_option("--burn-in", burn_in, "Adaptation steps");
  sample->add_option("--thinning", thinning, "Keep every k-th state, 0 for automatic");
  sample->add_option("--chains", chains, "Independent chains");
  sample->add_option("--root", root, "Gauge vertex for the limit density");
  add_common(sample, common, true);
  sample->callback([&] {
    command = "sample-density";
    active = sample;
    flags = [&] {
      json f = json::object();
      if (sample->count("--samples")) f["samples"] = samples;
      if (sample->count("--burn-in")) f["burn_in"] = burn_in;
      if (sample->count("--thinning")) f["thinning"] = thinning;
      if (sample->count("--chains")) f["chains"] = chains;
      if (sample->count("--root")) f["root"] = root;
      return f;
    };
  });

  // constants
  int d = 0, n = 0;
  double beta = 0, a = 0, eta = 0;
  auto* constants = app.add_subcommand("constants", "Phase constants in dimension d");
  constants->add_option("--d", d, "Dimension")->required()->check(CLI::PositiveNumber);
  auto* beta_opt = constants->add_option("--beta", beta, "Fixed coupling");
  constants->add_option("--a", a, "Gamma shape")->excludes(beta_opt);
  add_common(constants, common, false);
  constants->callback([&] {
    command = "constants";
    active = constants;
    flags = [&] {
      json f{{"d", d}};
      if (constants->count("--beta")) f["beta"] = beta;
      if (constants->count("--a")) f["a"] = a;
      return f;
    };
  });

  // scan-decay
  auto* scan = app.add_subcommand("scan-decay", "Decay of the pinned field moments across a box");
  scan->add_option("--d", d, "Dimension");
  scan->add_option("--n", n, "Box radius");
  auto* scan_beta = scan->add_option("--beta", beta, "Fixed coupling");
  scan->add_option("--a", a, "Gamma shape for random couplings")->excludes(scan_beta);
  scan->add_option("--eta", eta, "Pinning at the origin");
  scan->add_option("--samples", samples, "MCMC samples per estimate");
  scan->add_option("--draws", draws, "Coupling draws in Gamma mode");
  scan->add_option("--burn-in", burn_in, "Adaptation steps");
  add_common(scan, common, false);
  scan->callback([&] {
    command = "scan-decay";
    active = scan;
    flags = [&] {
      json f = json::object();
      if (scan->count("--d")) f["d"] = d;
      if (scan->count("--n")) f["n"] = n;
      if (scan->count("--beta")) f["beta"] = beta;
      if (scan->count("--a")) f["a"] = a;
      if (scan->count("--eta")) f["eta"] = eta;
      if (scan->count("--samples")) f["samples"] = samples;
      if (scan->count("--draws")) f["draws"] = draws;
      if (scan->count("--burn-in")) f["burn_in"] = burn_in;
      return f;
    };
  });

  // resistance-check
  auto* resistance = app.add_subcommand("resistance-check", "Expected pinned resistance against the flow bound");
  resistance->add_option("--d", d, "Dimension");
  resistance->add_option("--n", n, "Box radius");
  resistance->add_option("--beta", beta, "Coupling");
  resistance->add_option("--samples", samples, "MCMC samples");
  resistance->add_option("--burn-in", burn_in, "Adaptation steps");
  add_common(resistance, common, false);
  resistance->callback([&] {
    command = "resistance-check";
    active = resistance;
    flags = [&] {
      json f = json::object();
      if (resistance->count("--d")) f["d"] = d;
      if (resistance->count("--n")) f["n"] = n;
      if (resistance->count("--beta")) f["beta"] = beta;
      if (resistance->count("--samples")) f["samples"] = samples;
      if (resistance->count("--burn-in")) f["burn_in"] = burn_in;
      return f;
    };
  });

  // verify SUITE
  std::string suite;
  std::vector<std::string> suite_settings;
  auto* verify = app.add_subcommand("verify", "Run a statistical verification suite");
  verify->add_option("suite", suite, "Suite name")->required();
  verify->add_option("--with", suite_settings, "Suite setting KEY=JSON (repeatable)");
  add_common(verify, common, false);
  verify->callback([&] {
    command = "verify";
    active = verify;
    flags = [&] {
      json settings = json::object();
      for (const auto& s : suite_settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw reinforce::ConfigError("--with expects KEY=JSON, got '" + s + "'");
        const std::string text = s.substr(eq + 1);
        settings[s.substr(0, eq)] = json::accept(text) ? json::parse(text) : json(text);
      }
      json f{{"suite", suite}};
      if (!settings.empty()) f["config"] = settings;
      return f;
    };
  });

  // rerun --manifest FILE
  std::string manifest_file, rerun_out;
  auto* rerun = app.add_subcommand("rerun", "Repeat a run recorded in a manifest");
  rerun->add_option("--manifest", manifest_file, "Manifest written by an earlier run")->required()->check(CLI::ExistingFile);
  rerun->add_option("--out", rerun_out, "Redirect the primary output");
  rerun->callback([&] {
    command = "rerun";
    active = rerun;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const unsigned threads =
        reinforce::resolve_threads(app.count("--threads") ? std::optional<unsigned>(threads_flag) : std::nullopt);
    reinforce::ExperimentConfig config;
    if (command == "rerun") {
      auto doc = read_json_file(manifest_file);
      if (!rerun_out.empty()) {
        if (!doc.contains("config") || !doc["config"].is_object()) throw reinforce::ConfigError("manifest has no config");
        doc["config"]["out"] = rerun_out;
      }
      config = reinforce::config_from_manifest(doc);
    } else {
      config = reinforce::validate_config(assemble(command, common, active, flags()));
    }
    return execute(config, threads);
  } catch (const reinforce::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 2;
}
