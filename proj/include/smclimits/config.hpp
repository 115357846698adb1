#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "smclimits/limit_harness.hpp"

namespace smclimits {

struct VerificationSettings {
  /// Used by the enumeration and variance-ordering suites.
  double tolerance = 1e-12;
  double ess_tolerance = 1e-10;
  double w_tolerance = 0.02;
  std::size_t cases = 200;
  std::size_t instances = 100;
  std::size_t ess_vectors = 1000;
  std::size_t w_m = 100000;
  std::uint64_t seed = 20240601;
};

struct CounterexampleSettings {
  std::size_t m = 100000;
  std::size_t replicates = 400;
  std::uint64_t seed = 20240602;
};

/// Overrides the particle count and replicate count for verify-clt.
struct CltSettings {
  std::size_t m = 0;
  std::size_t replicates = 0;
};

struct AppConfig {
  ExperimentConfig experiment;
  /// Observation record used to build the model (echoed into reports).
  nlohmann::json observations;
  std::optional<std::uint64_t> obs_seed;
  VerificationSettings verification;
  CounterexampleSettings counterexample;
  std::optional<CltSettings> clt;
};

/// Schema-validated parse; every problem becomes an Error with code kConfig.
AppConfig parse_config(const nlohmann::json& doc);
AppConfig load_config(const std::string& path);

/// Replaces every master seed (experiment, verification, counterexample).
void override_seed(AppConfig& config, std::uint64_t seed);

/// Built-in default: 2-state HMM, horizon 5, obs_seed 7.
nlohmann::json default_config_json();

double parse_kappa2(const nlohmann::json& value);

}  // namespace smclimits
