#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace reinforce {

enum class Suite {
  Rubin,
  GammaCoupling,
  Mixture,
  InverseGaussian,
  MartingaleQv,
  CdNormalization,
  DensityVsSimulation,
};

std::string_view to_string(Suite s);
Suite parse_suite(std::string_view name);
const std::vector<Suite>& all_suites();

enum class VerifyStatus { Pass, Reject, Error };

std::string_view to_string(VerifyStatus s);

struct VerifyReport {
  std::string suite;
  nlohmann::json config;      // defaults merged with overrides
  std::uint64_t seed = 0;
  nlohmann::json statistics;  // suite specific
  VerifyStatus status = VerifyStatus::Error;
  std::string error;          // infrastructure failure message

  bool pass() const { return status == VerifyStatus::Pass; }
};

// Defaults of a suite; overrides passed to verify_suite must use these keys.
nlohmann::json default_config(Suite s);

// Runs the named experiment. Statistical rejections give Reject; thrown
// library errors (bad config, numerical failure, capacity) give Error.
// Deterministic given (config, seed) and independent of `threads`.
VerifyReport verify_suite(std::string_view name, const nlohmann::json& overrides, std::uint64_t seed,
                          unsigned threads = 1);

// {suite, config, seed, statistics, pass, status[, error]}.
nlohmann::json to_json(const VerifyReport& r);

}  // namespace reinforce
