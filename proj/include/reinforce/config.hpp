#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace reinforce {

inline constexpr std::string_view kCommands[] = {"simulate", "sample-density", "constants",
                                                  "scan-decay", "resistance-check", "verify"};

enum class OutputFormat { Csv, Json };

OutputFormat parse_format(std::string_view s);
std::string_view to_string(OutputFormat f);

// A fully resolved experiment: every parameter of the command present,
// unknown keys rejected, types checked.
struct ExperimentConfig {
  std::string command;
  nlohmann::json params;
  std::uint64_t seed = 0;
  OutputFormat format = OutputFormat::Csv;
  std::string out = "-";  // "-" is standard output
};

// Validates {command, params, seed, format, out} and fills defaults.
ExperimentConfig validate_config(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& c);

// Defaults for one command's params.
nlohmann::json default_params(std::string_view command);

// Manifest: the resolved config, seed, library versions and output files.
nlohmann::json make_manifest(const ExperimentConfig& c, const std::vector<std::string>& outputs);
ExperimentConfig config_from_manifest(const nlohmann::json& manifest);
std::filesystem::path manifest_path(const std::filesystem::path& out);

struct RunOutcome {
  int exit_code = 0;                 // 0 ok, 1 statistical rejection, 2 failure
  std::vector<std::string> outputs;  // files written
  std::string message;               // for standard error
};

// Executes the experiment. With out == "-" the primary output goes to
// `console`; otherwise it goes to `out`, secondary files and the manifest
// are written alongside.
RunOutcome run_experiment(const ExperimentConfig& c, unsigned threads, std::ostream& console);

std::string library_version();

}  // namespace reinforce
