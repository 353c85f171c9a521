#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "athena/coordinator.h"
#include "athena/policies.h"
#include "athena/simulation.h"

namespace athena {

// Field-level configuration problem; what() starts with the key name.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& key, const std::string& msg)
      : std::invalid_argument(key + ": " + msg), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct RunConfig {
  std::string trace;
  std::string policy = "athena";
  uint64_t seed = 1;
  double bw_gbs = 3.2;

  SimulationConfig sim;
  AthenaConfig athena;
  double mab_discount = 0.99;
  double mab_exploration = 2.0;
  HpacThresholds hpac;

  void validate() const;
  // Simulation parameters with the bandwidth applied.
  SimulationConfig effective_sim() const;
};

// Policy ids accepted by make_coordinator.
bool is_known_policy(const std::string& policy);
std::unique_ptr<Coordinator> make_coordinator(const RunConfig& cfg);
// Action index a static policy id stands for, if it is one.
std::optional<uint32_t> static_action(const std::string& policy, uint32_t prefetchers);

void set_key(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_key(const RunConfig& cfg, const std::string& key);
std::vector<std::string> config_keys();

// Flat "key = value" text; '#' starts a comment.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});
// Each override is "key=value".
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

std::string trim(const std::string& s);
std::string read_text_file(const std::string& path);

}  // namespace athena
