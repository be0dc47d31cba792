#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "spamfriction/classifier.hpp"
#include "spamfriction/policy.hpp"
#include "spamfriction/server_session.hpp"
#include "spamfriction/simulator.hpp"

namespace spamfriction::config {

// Invalid configuration. The message names the offending key as a dotted
// path, e.g. "policy.sinbin.window_seconds: expected a number".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A simulation grid with no points; the CLI treats it as a usage error.
class EmptyGridError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct AppConfig {
  std::string listen = "127.0.0.1:2525";
  std::string sink_dir = "mailboxes";
  protocol::ServerOptions server;
  policy::PolicyConfig policy;
  classifier::ScorerConfig scorer;
  std::size_t store_capacity = 100000;
  // Target solve time used to calibrate policy.base_difficulty when unset.
  double burden_seconds = 3600.0;
  std::optional<std::uint64_t> seed;  // jitter RNG; unset: random

  void validate() const;  // throws ConfigError
};

// JSON text with sections "policy", "scorer", "pow" and "legacy". Missing
// keys take defaults; unknown keys are errors.
AppConfig parse_app_config(std::string_view text);
AppConfig load_app_config(const std::filesystem::path& path);
// Every field, defaults included. parse_app_config(dump(c)) dumps identically.
std::string dump_app_config(const AppConfig& config);

// Simulation file: a SimConfig plus an optional "grid" of accuracies and
// burdens. A present but empty grid throws EmptyGridError.
struct SimulationFile {
  sim::SimConfig config;
  std::optional<sim::SweepGrid> grid;
};

SimulationFile parse_simulation(std::string_view text);
SimulationFile load_simulation(const std::filesystem::path& path);

}  // namespace spamfriction::config
