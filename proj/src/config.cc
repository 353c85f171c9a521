#include "athena/config.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace athena {

namespace {

uint64_t to_u64(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  return out;
}

uint32_t to_u32(const std::string& key, const std::string& v) {
  const uint64_t x = to_u64(key, v);
  if (x > UINT32_MAX) throw ConfigError(key, "value out of range: " + v);
  return static_cast<uint32_t>(x);
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "on" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "off" || v == "false" || v == "no") return false;
  throw ConfigError(key, "expected on/off, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
std::string fmt(uint64_t v) { return std::to_string(v); }
std::string fmt(uint32_t v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "on" : "off"; }
std::string fmt(const std::string& v) { return v; }

template <typename T>
T convert(const std::string& key, const std::string& v);
template <> uint64_t convert(const std::string& k, const std::string& v) { return to_u64(k, v); }
template <> uint32_t convert(const std::string& k, const std::string& v) { return to_u32(k, v); }
template <> int convert(const std::string& k, const std::string& v) { return to_int(k, v); }
template <> double convert(const std::string& k, const std::string& v) { return to_double(k, v); }
template <> bool convert(const std::string& k, const std::string& v) { return to_bool(k, v); }
template <> std::string convert(const std::string&, const std::string& v) { return v; }

struct KeyAccess {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
KeyAccess field(const std::string& key, std::function<T&(RunConfig&)> ref) {
  return {[key, ref](RunConfig& c, const std::string& v) { ref(c) = convert<T>(key, v); },
          [ref](const RunConfig& c) { return fmt(ref(const_cast<RunConfig&>(c))); }};
}

#define ATHENA_KEY(name, type, expr) \
  {name, field<type>(name, [](RunConfig& c) -> type& { return c.expr; })}

const std::map<std::string, KeyAccess>& key_table() {
  static const std::map<std::string, KeyAccess> table = {
      ATHENA_KEY("trace", std::string, trace),
      ATHENA_KEY("policy", std::string, policy),
      ATHENA_KEY("seed", uint64_t, seed),
      ATHENA_KEY("bw_gbs", double, bw_gbs),
      ATHENA_KEY("warmup_instructions", uint64_t, sim.warmup_instructions),
      ATHENA_KEY("sim_instructions", uint64_t, sim.sim_instructions),
      ATHENA_KEY("retire_width", uint32_t, sim.core.retire_width),
      ATHENA_KEY("window_size", uint32_t, sim.core.window_size),
      ATHENA_KEY("max_outstanding_loads", uint32_t, sim.core.max_outstanding_loads),
      ATHENA_KEY("mispredict_penalty", uint32_t, sim.core.mispredict_penalty),
      ATHENA_KEY("l1d_size", uint64_t, sim.memory.l1d.capacity),
      ATHENA_KEY("l1d_ways", uint32_t, sim.memory.l1d.associativity),
      ATHENA_KEY("l1d_latency", uint32_t, sim.memory.l1d.round_trip_latency),
      ATHENA_KEY("l1d_mshr", uint32_t, sim.memory.l1d.mshr_count),
      ATHENA_KEY("l2c_size", uint64_t, sim.memory.l2c.capacity),
      ATHENA_KEY("l2c_ways", uint32_t, sim.memory.l2c.associativity),
      ATHENA_KEY("l2c_latency", uint32_t, sim.memory.l2c.round_trip_latency),
      ATHENA_KEY("l2c_mshr", uint32_t, sim.memory.l2c.mshr_count),
      ATHENA_KEY("llc_size", uint64_t, sim.memory.llc.capacity),
      ATHENA_KEY("llc_ways", uint32_t, sim.memory.llc.associativity),
      ATHENA_KEY("llc_latency", uint32_t, sim.memory.llc.round_trip_latency),
      ATHENA_KEY("llc_mshr", uint32_t, sim.memory.llc.mshr_count),
      ATHENA_KEY("dram_latency", uint32_t, sim.memory.dram.access_latency),
      ATHENA_KEY("dram_queue", uint32_t, sim.memory.dram.queue_capacity),
      ATHENA_KEY("l1d_pf", std::string, sim.speculators.l1d_pf),
      ATHENA_KEY("l2c_pf", std::string, sim.speculators.l2c_pf),
      ATHENA_KEY("ocp", std::string, sim.speculators.ocp),
      ATHENA_KEY("ocp_issue_latency", uint32_t, sim.speculators.ocp_issue_latency),
      ATHENA_KEY("ocp_activation_threshold", int, sim.speculators.ocp_activation_threshold),
      ATHENA_KEY("ocp_training_threshold", int, sim.speculators.ocp_training_threshold),
      ATHENA_KEY("ocp_history_bits", uint32_t, sim.speculators.ocp_history_bits),
      ATHENA_KEY("tlp_filter", bool, sim.speculators.tlp_filter),
      ATHENA_KEY("alpha", double, athena.alpha),
      ATHENA_KEY("gamma", double, athena.gamma),
      ATHENA_KEY("epsilon", double, athena.epsilon),
      ATHENA_KEY("tau", double, athena.tau),
      ATHENA_KEY("d_max", uint32_t, athena.d_max),
      ATHENA_KEY("q_init", double, athena.q_init),
      ATHENA_KEY("update_delay_cycles", uint64_t, athena.update_delay_cycles),
      ATHENA_KEY("lambda_cycle", double, athena.weights.cycle),
      ATHENA_KEY("lambda_llc_miss", double, athena.weights.llc_miss),
      ATHENA_KEY("lambda_llc_lat", double, athena.weights.llc_latency),
      ATHENA_KEY("lambda_load", double, athena.weights.load),
      ATHENA_KEY("lambda_mbr", double, athena.weights.mispredicted_branch),
      ATHENA_KEY("mab_discount", double, mab_discount),
      ATHENA_KEY("mab_exploration", double, mab_exploration),
      ATHENA_KEY("hpac_acc_pf_low", double, hpac.acc_pf_low),
      ATHENA_KEY("hpac_acc_pf_high", double, hpac.acc_pf_high),
      ATHENA_KEY("hpac_acc_ocp_low", double, hpac.acc_ocp_low),
      ATHENA_KEY("hpac_bw_high", double, hpac.bw_high),
      {"epoch_length",
       {[](RunConfig& c, const std::string& v) {
          c.sim.core.epoch_length = to_u64("epoch_length", v);
          c.athena.epoch_length = c.sim.core.epoch_length;
        },
        [](const RunConfig& c) { return fmt(c.sim.core.epoch_length); }}},
      {"feature_mask",
       {[](RunConfig& c, const std::string& v) {
          const uint32_t m = to_u32("feature_mask", v);
          if (m > kAllFeatures) throw ConfigError("feature_mask", "must be in 0..15");
          c.athena.feature_mask = static_cast<uint8_t>(m);
        },
        [](const RunConfig& c) { return fmt(uint32_t{c.athena.feature_mask}); }}},
  };
  return table;
}

#undef ATHENA_KEY

}  // namespace

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = key_table();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key, "unknown key");
  it->second.set(cfg, trim(value));
}

std::string get_key(const RunConfig& cfg, const std::string& key) {
  const auto& table = key_table();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key, "unknown key");
  return it->second.get(cfg);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : key_table()) keys.push_back(k);
  return keys;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    set_key(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  return parse_config(read_text_file(path), std::move(base));
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(o, "override must look like key=value");
    set_key(cfg, trim(o.substr(0, eq)), o.substr(eq + 1));
  }
}

void RunConfig::validate() const {
  if (sim.sim_instructions == 0) throw ConfigError("sim_instructions", "must be > 0");
  if (!(bw_gbs > 0.0)) throw ConfigError("bw_gbs", "must be positive");
  if (!is_known_policy(policy)) throw ConfigError("policy", "unknown policy '" + policy + "'");
  try {
    sim.speculators.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("speculators", e.what());
  }
  auto wrap = [](const char* key, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key, e.what());
    }
  };
  wrap("core", [&] { sim.core.validate(); });
  wrap("memory", [&] { effective_sim().memory.validate(); });
  wrap("athena", [&] { athena.validate(); });
  wrap("hpac", [&] { hpac.validate(); });
  if (!(mab_discount > 0.0 && mab_discount <= 1.0)) throw ConfigError("mab_discount", "must lie in (0, 1]");
  if (!(mab_exploration >= 0.0)) throw ConfigError("mab_exploration", "must be >= 0");
  if (athena.epoch_length != sim.core.epoch_length) throw ConfigError("epoch_length", "core and coordinator disagree");
  const uint32_t p = sim.speculators.prefetcher_count();
  if (auto a = static_action(policy, p); !a && policy.rfind("static-", 0) == 0)
    throw ConfigError("policy", "static action out of range for " + std::to_string(p) + " prefetcher(s)");
}

SimulationConfig RunConfig::effective_sim() const {
  SimulationConfig s = sim;
  s.memory.dram.bus_occupancy = occupancy_for_bandwidth(bw_gbs);
  s.core.epoch_length = athena.epoch_length;
  return s;
}

bool is_known_policy(const std::string& policy) {
  static const std::vector<std::string> known = {"naive", "athena", "mab", "hpac", "none", "off-only", "pf-only", "both"};
  if (std::find(known.begin(), known.end(), policy) != known.end()) return true;
  if (policy.rfind("static-", 0) == 0) {
    const std::string n = policy.substr(7);
    return !n.empty() && n.find_first_not_of("0123456789") == std::string::npos;
  }
  return false;
}

std::optional<uint32_t> static_action(const std::string& policy, uint32_t prefetchers) {
  const uint32_t all_pf = ((1u << prefetchers) - 1) << 1;
  if (policy == "none") return 0u;
  if (policy == "off-only") return 1u;
  if (policy == "pf-only") return all_pf;
  if (policy == "both") return all_pf | 1u;
  if (policy.rfind("static-", 0) == 0) {
    const uint32_t a = static_cast<uint32_t>(std::stoul(policy.substr(7)));
    if (a < num_actions(prefetchers)) return a;
  }
  return std::nullopt;
}

std::unique_ptr<Coordinator> make_coordinator(const RunConfig& cfg) {
  const uint32_t p = cfg.sim.speculators.prefetcher_count();
  const uint32_t d_max = cfg.athena.d_max;
  if (cfg.policy == "naive") return std::make_unique<NaiveCoordinator>(p, d_max);
  if (cfg.policy == "athena") {
    AthenaConfig a = cfg.athena;
    a.seed = cfg.seed;
    return std::make_unique<AthenaCoordinator>(a, p);
  }
  if (cfg.policy == "mab") return std::make_unique<MabCoordinator>(p, d_max, cfg.mab_discount, cfg.mab_exploration);
  if (cfg.policy == "hpac") return std::make_unique<HpacCoordinator>(p, d_max, cfg.hpac);
  if (auto a = static_action(cfg.policy, p)) return std::make_unique<StaticCoordinator>(p, d_max, *a);
  throw ConfigError("policy", "unknown policy '" + cfg.policy + "'");
}

}  // namespace athena
