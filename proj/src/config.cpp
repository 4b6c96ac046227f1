#include "reinforce/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "reinforce/error.hpp"
#include "reinforce/graph_io.hpp"
#include "reinforce/mcmc.hpp"
#include "reinforce/measure.hpp"
#include "reinforce/phase.hpp"
#include "reinforce/process.hpp"
#include "reinforce/verify.hpp"

namespace reinforce {

using nlohmann::json;

OutputFormat parse_format(std::string_view s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "json") return OutputFormat::Json;
  throw ConfigError("format must be csv or json, got '" + std::string(s) + "'");
}

std::string_view to_string(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "json"; }

std::string library_version() { return REINFORCE_VERSION; }

namespace {

enum class Kind { Count, Number, String, Numbers, Graph, Object, MaybeCount, MaybeNumber, MaybeNumbers };

struct Field {
  const char* name;
  Kind kind;
  json fallback;
  bool required = false;
};

const std::vector<Field>& schema(std::string_view command) {
  static const std::vector<Field> simulate = {
      {"process", Kind::String, "errw"},       {"graph", Kind::Graph, nullptr, true},
      {"start", Kind::Count, 0},               {"steps", Kind::MaybeCount, nullptr},
      {"horizon", Kind::MaybeNumber, nullptr}, {"checkpoints", Kind::Numbers, json::array()},
      {"field", Kind::MaybeNumbers, nullptr},  {"overflow_bound", Kind::Number, kDefaultOverflowBound}};
  static const std::vector<Field> sample = {{"graph", Kind::Graph, nullptr, true}, {"root", Kind::Count, 0},
                                            {"samples", Kind::Count, 10'000},      {"burn_in", Kind::Count, 10'000},
                                            {"thinning", Kind::Count, 0},          {"chains", Kind::Count, 1}};
  static const std::vector<Field> constants = {
      {"d", Kind::Count, nullptr, true}, {"beta", Kind::MaybeNumber, nullptr}, {"a", Kind::MaybeNumber, nullptr}};
  static const std::vector<Field> scan = {{"d", Kind::Count, 2},          {"n", Kind::Count, 3},
                                          {"beta", Kind::MaybeNumber, nullptr}, {"a", Kind::MaybeNumber, nullptr},
                                          {"eta", Kind::Number, 1.0},     {"samples", Kind::Count, 20'000},
                                          {"draws", Kind::Count, 8},      {"burn_in", Kind::Count, 10'000}};
  static const std::vector<Field> resistance = {{"d", Kind::Count, 3},          {"n", Kind::Count, 2},
                                                {"beta", Kind::Number, 100.0},  {"samples", Kind::Count, 2'000},
                                                {"burn_in", Kind::Count, 10'000}};
  static const std::vector<Field> verify = {{"suite", Kind::String, nullptr, true},
                                            {"config", Kind::Object, json::object()}};
  if (command == "simulate") return simulate;
  if (command == "sample-density") return sample;
  if (command == "constants") return constants;
  if (command == "scan-decay") return scan;
  if (command == "resistance-check") return resistance;
  if (command == "verify") return verify;
  throw ConfigError("unknown command '" + std::string(command) + "'");
}

bool is_count(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

bool is_numbers(const json& v) {
  return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); });
}

bool accepts(Kind kind, const json& v) {
  switch (kind) {
    case Kind::Count: return is_count(v);
    case Kind::Number: return v.is_number();
    case Kind::String: return v.is_string();
    case Kind::Numbers: return is_numbers(v);
    case Kind::Graph: return v.is_object();
    case Kind::Object: return v.is_object();
    case Kind::MaybeCount: return v.is_null() || is_count(v);
    case Kind::MaybeNumber: return v.is_null() || v.is_number();
    case Kind::MaybeNumbers: return v.is_null() || is_numbers(v);
  }
  return false;
}

}  // namespace

json default_params(std::string_view command) {
  json out = json::object();
  for (const auto& f : schema(command)) out[f.name] = f.fallback;
  return out;
}

ExperimentConfig validate_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "command" && key != "params" && key != "seed" && key != "format" && key != "out")
      throw ConfigError("unknown config key '" + key + "'");
  }
  if (!doc.contains("command") || !doc["command"].is_string()) throw ConfigError("config needs a command");
  ExperimentConfig c;
  c.command = doc["command"].get<std::string>();
  const auto& fields = schema(c.command);
  const json params = doc.value("params", json::object());
  if (!params.is_object()) throw ConfigError("params must be an object");
  for (const auto& [key, value] : params.items()) {
    if (std::none_of(fields.begin(), fields.end(), [&](const Field& f) { return key == f.name; }))
      throw ConfigError("unknown parameter '" + key + "' for " + c.command);
  }
  c.params = json::object();
  for (const auto& f : fields) {
    const bool given = params.contains(f.name) && !(params[f.name].is_null() && f.required);
    const json value = given ? params[f.name] : f.fallback;
    if (f.required && value.is_null()) throw ConfigError(c.command + " needs '" + f.name + "'");
    if (!accepts(f.kind, value)) throw ConfigError("parameter '" + std::string(f.name) + "' has the wrong type");
    c.params[f.name] = value;
  }
  if (doc.contains("seed")) {
    if (!is_count(doc["seed"])) throw ConfigError("seed must be a non-negative integer");
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("format")) {
    if (!doc["format"].is_string()) throw ConfigError("format must be a string");
    c.format = parse_format(doc["format"].get<std::string>());
  } else if (c.command == "constants" || c.command == "resistance-check" || c.command == "verify") {
    c.format = OutputFormat::Json;
  }
  if (doc.contains("out")) {
    if (!doc["out"].is_string() || doc["out"].get<std::string>().empty()) throw ConfigError("out must be a path");
    c.out = doc["out"].get<std::string>();
  }

  // Cross-field checks, before any computation.
  const auto& p = c.params;
  if (c.command == "simulate") {
    const auto kind = parse_process_kind(p["process"].get<std::string>());
    if (p["steps"].is_null() && p["horizon"].is_null()) throw ConfigError("simulate needs steps or horizon");
    if (kind == ProcessKind::Errw && p["steps"].is_null()) throw ConfigError("the discrete walk needs steps");
    parse_graph(p["graph"]);
  } else if (c.command == "sample-density") {
    parse_graph(p["graph"]);
  } else if (c.command == "scan-decay") {
    if (p["beta"].is_null() == p["a"].is_null()) throw ConfigError("scan-decay needs exactly one of beta or a");
  } else if (c.command == "verify") {
    parse_suite(p["suite"].get<std::string>());
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  return {{"command", c.command}, {"params", c.params}, {"seed", c.seed},
          {"format", std::string(to_string(c.format))}, {"out", c.out}};
}

json make_manifest(const ExperimentConfig& c, const std::vector<std::string>& outputs) {
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION;
  return {{"config", to_json(c)},
          {"seed", c.seed},
          {"versions",
           {{"reinforce_lab", library_version()},
            {"eigen", eigen.str()},
            {"boost", BOOST_LIB_VERSION},
            {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                         "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__}}},
          {"outputs", outputs}};
}

ExperimentConfig config_from_manifest(const json& manifest) {
  if (!manifest.is_object() || !manifest.contains("config")) throw ConfigError("manifest has no config");
  return validate_config(manifest["config"]);
}

std::filesystem::path manifest_path(const std::filesystem::path& out) {
  return std::filesystem::path(out.string() + ".manifest.json");
}

namespace {

std::string number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Header and one row from the scalar members of an object.
void write_flat_csv(std::ostream& out, const json& j) {
  std::vector<std::string> keys, values;
  for (const auto& [key, value] : j.items()) {
    if (value.is_structured()) continue;
    keys.push_back(key);
    if (value.is_number_float()) values.push_back(number(value.get<double>()));
    else if (value.is_string()) values.push_back(value.get<std::string>());
    else values.push_back(value.dump());
  }
  for (std::size_t i = 0; i < keys.size(); ++i) out << (i ? "," : "") << keys[i];
  out << "\n";
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  out << "\n";
}

// Output sinks: console for "-", files otherwise.
class Sinks {
 public:
  Sinks(const std::string& out, std::ostream& console) : out_(out), console_(console) {}

  std::ostream& primary() {
    if (out_ == "-") return console_;
    open(out_);
    return *files_.back();
  }
  // Secondary output named out + suffix; null when writing to the console.
  std::ostream* secondary(const std::string& suffix) {
    if (out_ == "-") return nullptr;
    open(out_ + suffix);
    return files_.back().get();
  }
  std::vector<std::string> written() const { return names_; }
  void close() {
    for (auto& f : files_) {
      f->flush();
      if (!*f) throw Error("failed writing output files");
    }
    files_.clear();
  }

 private:
  void open(const std::string& name) {
    const std::filesystem::path path(name);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto f = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*f) throw Error("cannot open output file " + name);
    files_.push_back(std::move(f));
    names_.push_back(name);
  }
  std::string out_;
  std::ostream& console_;
  std::vector<std::unique_ptr<std::ofstream>> files_;
  std::vector<std::string> names_;
};

void write_json(std::ostream& out, const json& j) { out << j.dump(2) << "\n"; }

RunOutcome run_simulate(const ExperimentConfig& c, Sinks& sinks) {
  const auto& p = c.params;
  const auto spec = parse_graph(p["graph"]);
  RunOptions o;
  o.kind = parse_process_kind(p["process"].get<std::string>());
  o.start = p["start"].get<Vertex>();
  if (!p["horizon"].is_null()) o.horizon = p["horizon"].get<double>();
  if (!p["steps"].is_null()) o.max_steps = p["steps"].get<std::uint64_t>();
  o.checkpoints = p["checkpoints"].get<std::vector<double>>();
  o.seed = c.seed;
  o.overflow_bound = p["overflow_bound"].get<double>();
  if (o.kind == ProcessKind::Z) {
    if (!p["field"].is_null()) {
      o.field = p["field"].get<std::vector<double>>();
    } else {
      // One draw of the limit field rooted at the start vertex.
      const auto draw = adapt_and_sample(MeasureParams::rooted(spec.graph, o.start), 1, McmcSettings{}, c.seed);
      o.field.assign(draw.samples.data(), draw.samples.data() + draw.samples.cols());
    }
  }
  const auto traj = run_until(spec.graph, o);
  auto& out = sinks.primary();
  if (c.format == OutputFormat::Json) {
    write_jumps_jsonl(out, traj);
  } else if (!o.checkpoints.empty()) {
    write_checkpoints_csv(out, traj);
  } else {
    out << "t,from,to\n";
    for (const auto& j : traj.jumps) out << number(j.time) << "," << j.from << "," << j.to << "\n";
  }
  RunOutcome r;
  if (traj.aborted) {
    r.exit_code = 2;
    r.message = "trajectory aborted: " + traj.diagnostic;
  } else if (traj.incomplete) {
    r.message = "step budget reached before the horizon";
  }
  return r;
}

RunOutcome run_sample_density(const ExperimentConfig& c, Sinks& sinks, unsigned threads) {
  const auto& p = c.params;
  const auto spec = parse_graph(p["graph"]);
  const bool pinned = spec.pinning.has_value();
  const auto params = pinned ? MeasureParams::pinned(PinnedGraph(spec.graph, *spec.pinning))
                             : MeasureParams::rooted(spec.graph, p["root"].get<Vertex>());
  McmcSettings s;
  s.burn_in = p["burn_in"].get<std::size_t>();
  s.thinning = p["thinning"].get<std::size_t>();
  s.chains = std::max<std::size_t>(1, p["chains"].get<std::size_t>());
  s.threads = threads;
  const auto out = adapt_and_sample(params, p["samples"].get<std::size_t>(), s, c.seed);
  const auto diag = diagnostics_json(out.diagnostics);
  if (c.format == OutputFormat::Csv) {
    write_samples_csv(sinks.primary(), out.samples, pinned ? "t" : "u");
    if (auto* d = sinks.secondary(".diagnostics.json")) write_json(*d, diag);
  } else {
    json samples = json::array();
    for (Eigen::Index i = 0; i < out.samples.rows(); ++i) {
      std::vector<double> row(out.samples.cols());
      for (Eigen::Index j = 0; j < out.samples.cols(); ++j) row[static_cast<std::size_t>(j)] = out.samples(i, j);
      samples.push_back(row);
    }
    write_json(sinks.primary(), {{"diagnostics", diag}, {"samples", samples}});
  }
  RunOutcome r;
  if (out.diagnostics.flagged) {
    for (const auto& m : out.diagnostics.messages) r.message += "warning: " + m + "\n";
  }
  return r;
}

std::optional<double> maybe(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

RunOutcome run_constants(const ExperimentConfig& c, Sinks& sinks) {
  const auto& p = c.params;
  const auto j = constants_json(p["d"].get<int>(), maybe(p["beta"]), maybe(p["a"]));
  if (c.format == OutputFormat::Json) write_json(sinks.primary(), j);
  else write_flat_csv(sinks.primary(), j);
  return {};
}

RunOutcome run_scan_decay(const ExperimentConfig& c, Sinks& sinks, unsigned threads) {
  const auto& p = c.params;
  DecayScanOptions o;
  o.d = p["d"].get<int>();
  o.n = p["n"].get<int>();
  o.beta = maybe(p["beta"]);
  o.a = maybe(p["a"]);
  o.eta = p["eta"].get<double>();
  o.samples = p["samples"].get<std::size_t>();
  o.conductance_draws = p["draws"].get<std::size_t>();
  o.mcmc.burn_in = p["burn_in"].get<std::size_t>();
  o.seed = c.seed;
  o.threads = threads;
  const auto scan = decay_scan(o);
  if (c.format == OutputFormat::Csv) {
    write_decay_csv(sinks.primary(), scan);
  } else {
    json rows = json::array();
    for (const auto& r : scan.rows)
      rows.push_back({{"distance", r.distance},
                      {"vertex", r.vertex},
                      {"estimate", r.estimate},
                      {"stderr", r.stderr_estimate},
                      {"bound", r.bound},
                      {"jensen_floor", r.jensen_floor},
                      {"flagged", r.flagged}});
    json j{{"d", o.d},
           {"n", o.n},
           {scan.point.gamma ? "a" : "beta", scan.point.parameter},
           {"bound_base", scan.point.bound_base},
           {"pinning_constant", scan.pinning_constant},
           {"rows", rows},
           {"messages", scan.messages}};
    if (scan.rows.size() >= 2) j["log_slope"] = fitted_log_slope(scan.rows);
    write_json(sinks.primary(), j);
  }
  RunOutcome r;
  for (const auto& m : scan.messages) r.message += "warning: " + m + "\n";
  return r;
}

RunOutcome run_resistance(const ExperimentConfig& c, Sinks& sinks, unsigned threads) {
  const auto& p = c.params;
  ResistanceCheckOptions o;
  o.d = p["d"].get<int>();
  o.n = p["n"].get<int>();
  o.beta = p["beta"].get<double>();
  o.samples = p["samples"].get<std::size_t>();
  o.mcmc.burn_in = p["burn_in"].get<std::size_t>();
  o.seed = c.seed;
  o.threads = threads;
  const auto j = to_json(resistance_bound_check(o));
  if (c.format == OutputFormat::Json) write_json(sinks.primary(), j);
  else write_flat_csv(sinks.primary(), j);
  RunOutcome r;
  // The inequality is reported, never failed on.
  if (!j["holds"].get<bool>()) r.message = "note: the resistance inequality is not met at this beta";
  return r;
}

RunOutcome run_verify(const ExperimentConfig& c, Sinks& sinks, unsigned threads) {
  const auto report = verify_suite(c.params["suite"].get<std::string>(), c.params["config"], c.seed, threads);
  write_json(sinks.primary(), to_json(report));
  RunOutcome r;
  switch (report.status) {
    case VerifyStatus::Pass: r.exit_code = 0; break;
    case VerifyStatus::Reject:
      r.exit_code = 1;
      r.message = "statistical rejection in suite " + report.suite;
      break;
    case VerifyStatus::Error:
      r.exit_code = 2;
      r.message = "suite " + report.suite + " failed: " + report.error;
      break;
  }
  return r;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& c, unsigned threads, std::ostream& console) {
  Sinks sinks(c.out, console);
  RunOutcome r;
  if (c.command == "simulate") r = run_simulate(c, sinks);
  else if (c.command == "sample-density") r = run_sample_density(c, sinks, threads);
  else if (c.command == "constants") r = run_constants(c, sinks);
  else if (c.command == "scan-decay") r = run_scan_decay(c, sinks, threads);
  else if (c.command == "resistance-check") r = run_resistance(c, sinks, threads);
  else if (c.command == "verify") r = run_verify(c, sinks, threads);
  else throw ConfigError("unknown command '" + c.command + "'");
  sinks.close();
  r.outputs = sinks.written();
  if (c.out != "-") {
    const auto path = manifest_path(c.out);
    std::ofstream m(path, std::ios::binary);
    if (!m) throw Error("cannot write manifest " + path.string());
    m << make_manifest(c, r.outputs).dump(2) << "\n";
    r.outputs.push_back(path.string());
  }
  return r;
}

}  // namespace reinforce
