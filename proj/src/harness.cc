#include "athena/harness.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace athena {

namespace {

std::string fmt_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

double safe_ratio(uint64_t num, uint64_t den) {
  return den ? std::clamp(static_cast<double>(num) / static_cast<double>(den), 0.0, 1.0) : 0.0;
}

// Identifies the paired baseline run of a cell.
std::string baseline_key(RunConfig cfg) {
  cfg.policy = "none";
  std::string key;
  for (const auto& k : config_keys()) key += k + "=" + get_key(cfg, k) + ";";
  return key;
}

void parallel_for(size_t n, unsigned workers, const std::function<void(size_t)>& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<size_t>(n, 1))));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

// Numeric values compare as numbers, everything else as text.
bool value_less(const std::string& a, const std::string& b) {
  char* ea = nullptr;
  char* eb = nullptr;
  const double x = std::strtod(a.c_str(), &ea);
  const double y = std::strtod(b.c_str(), &eb);
  if (!a.empty() && !b.empty() && *ea == '\0' && *eb == '\0') return x < y;
  return a < b;
}

bool assignment_less(const DseEntry& a, const DseEntry& b) {
  for (size_t i = 0; i < a.assignment.size() && i < b.assignment.size(); ++i) {
    if (value_less(a.assignment[i].second, b.assignment[i].second)) return true;
    if (value_less(b.assignment[i].second, a.assignment[i].second)) return false;
  }
  return false;
}

}  // namespace

SimulationResult simulate_policy(const RunConfig& cfg, std::span<const TraceRecord> trace) {
  cfg.validate();
  auto coordinator = make_coordinator(cfg);
  return simulate(cfg.effective_sim(), trace, *coordinator);
}

RunResult run_on(const RunConfig& cfg, std::span<const TraceRecord> trace, std::optional<double> baseline_ipc) {
  RunResult r;
  r.sim = simulate_policy(cfg, trace);
  if (cfg.policy == "none") {
    r.baseline_ipc = r.sim.ipc;
  } else if (baseline_ipc) {
    r.baseline_ipc = *baseline_ipc;
  } else {
    RunConfig base = cfg;
    base.policy = "none";
    r.baseline_ipc = simulate_policy(base, trace).ipc;
  }
  r.speedup = r.baseline_ipc > 0.0 ? r.sim.ipc / r.baseline_ipc : 0.0;
  return r;
}

RunResult run_one(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.trace.empty()) throw ConfigError("trace", "no trace given");
  const auto trace = read_trace(cfg.trace);
  return run_on(cfg, trace);
}

std::string trace_label(const std::string& path) { return std::filesystem::path(path).stem().string(); }

CsvRow make_row(const RunConfig& cfg, const RunResult& r) {
  CsvRow row;
  row.trace = trace_label(cfg.trace);
  row.policy = cfg.policy;
  row.pf = cfg.sim.speculators.pf_label();
  row.ocp = cfg.sim.speculators.ocp;
  row.bw_gbs = cfg.bw_gbs;
  row.seed = cfg.seed;
  row.ipc = r.sim.ipc;
  row.speedup = r.speedup;
  const EpochTelemetry& t = r.sim.totals;
  row.pf_acc = safe_ratio(t.prefetch_demand_hits, t.prefetches_issued);
  row.ocp_acc = safe_ratio(t.ocp_correct, t.ocp_predictions);
  row.bw_usage = safe_ratio(t.dram_busy_cycles, t.cycles);
  row.pollution = safe_ratio(t.pollution_hits, t.demand_llc_misses);
  row.action_hist = r.sim.action_hist;
  row.dram_demand = t.dram_requests_demand;
  row.dram_pf = t.dram_requests_prefetch;
  row.dram_ocp = t.dram_requests_ocp;
  return row;
}

CsvRow error_row(const RunConfig& cfg, const std::string& message) {
  CsvRow row;
  row.trace = trace_label(cfg.trace);
  row.policy = cfg.policy;
  row.pf = cfg.sim.speculators.pf_label();
  row.ocp = cfg.sim.speculators.ocp;
  row.bw_gbs = cfg.bw_gbs;
  row.seed = cfg.seed;
  row.action_hist.assign(num_actions(cfg.sim.speculators.prefetcher_count()), 0);
  std::string msg = message;
  std::replace(msg.begin(), msg.end(), ',', ';');
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  row.status = "error: " + msg;
  return row;
}

void write_csv(std::ostream& out, std::span<const CsvRow> rows) {
  size_t actions = 4;
  for (const auto& r : rows) actions = std::max(actions, r.action_hist.size());
  out << "# athena-sim results schema " << kCsvSchemaVersion << "\n";
  out << "trace,policy,pf,ocp,bw_gbs,seed,ipc,speedup,pf_acc,ocp_acc,bw_usage,pollution";
  for (size_t a = 0; a < actions; ++a) out << ",action_hist_" << a;
  out << ",dram_demand,dram_pf,dram_ocp,status\n";
  for (const auto& r : rows) {
    out << r.trace << ',' << r.policy << ',' << r.pf << ',' << r.ocp << ',' << fmt_double(r.bw_gbs) << ','
        << r.seed << ',' << fmt_double(r.ipc) << ',' << fmt_double(r.speedup) << ',' << fmt_double(r.pf_acc) << ','
        << fmt_double(r.ocp_acc) << ',' << fmt_double(r.bw_usage) << ',' << fmt_double(r.pollution);
    for (size_t a = 0; a < actions; ++a) out << ',' << (a < r.action_hist.size() ? r.action_hist[a] : 0);
    out << ',' << r.dram_demand << ',' << r.dram_pf << ',' << r.dram_ocp << ',' << r.status << '\n';
  }
}

std::string to_csv(std::span<const CsvRow> rows) {
  std::ostringstream ss;
  write_csv(ss, rows);
  return ss.str();
}

std::vector<CsvRow> read_csv(std::istream& in) {
  std::string line;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line, ',');
    if (header.empty()) {
      header = cells;
      continue;
    }
    if (cells.size() != header.size())
      throw std::runtime_error("csv row has " + std::to_string(cells.size()) + " cells, header has " +
                               std::to_string(header.size()));
    CsvRow r;
    r.action_hist.clear();
    for (size_t i = 0; i < header.size(); ++i) {
      const std::string& h = header[i];
      const std::string& v = cells[i];
      if (h == "trace") r.trace = v;
      else if (h == "policy") r.policy = v;
      else if (h == "pf") r.pf = v;
      else if (h == "ocp") r.ocp = v;
      else if (h == "bw_gbs") r.bw_gbs = std::stod(v);
      else if (h == "seed") r.seed = std::stoull(v);
      else if (h == "ipc") r.ipc = std::stod(v);
      else if (h == "speedup") r.speedup = std::stod(v);
      else if (h == "pf_acc") r.pf_acc = std::stod(v);
      else if (h == "ocp_acc") r.ocp_acc = std::stod(v);
      else if (h == "bw_usage") r.bw_usage = std::stod(v);
      else if (h == "pollution") r.pollution = std::stod(v);
      else if (h.rfind("action_hist_", 0) == 0) r.action_hist.push_back(std::stoull(v));
      else if (h == "dram_demand") r.dram_demand = std::stoull(v);
      else if (h == "dram_pf") r.dram_pf = std::stoull(v);
      else if (h == "dram_ocp") r.dram_ocp = std::stoull(v);
      else if (h == "status") r.status = v;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string epoch_csv(const SimulationResult& r) {
  std::ostringstream ss;
  ss << "epoch,action,cycles,ipc,loads,mispredicts,pf_acc,ocp_acc,bw_usage,pollution,prefetches,ocp_predictions\n";
  for (size_t i = 0; i < r.epochs.size(); ++i) {
    const EpochTelemetry& e = r.epochs[i];
    const FeatureSnapshot f = measure_features(e);
    ss << i << ',' << r.actions[i] << ',' << e.cycles << ',' << fmt_double(double(e.retired_instructions) / e.cycles)
       << ',' << e.loads << ',' << e.mispredicted_branches << ',' << fmt_double(f.pf_accuracy) << ','
       << fmt_double(f.ocp_accuracy) << ',' << fmt_double(f.bw_usage) << ',' << fmt_double(f.cache_pollution) << ','
       << e.prefetches_issued << ',' << e.ocp_predictions << '\n';
  }
  return ss.str();
}

Grid parse_grid(const std::string& text) {
  Grid grid;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "grid lines look like key = v1, v2");
    GridAxis axis{trim(line.substr(0, eq)), {}};
    for (const auto& v : split(line.substr(eq + 1), ','))
      if (!trim(v).empty()) axis.values.push_back(trim(v));
    if (axis.values.empty()) throw ConfigError(axis.key, "grid axis has no values");
    grid.push_back(std::move(axis));
  }
  return grid;
}

std::vector<RunConfig> expand_grid(const RunConfig& base, const Grid& grid) {
  if (grid.empty()) return {};
  std::vector<RunConfig> out{base};
  for (const auto& axis : grid) {
    std::vector<RunConfig> next;
    for (const auto& cfg : out)
      for (const auto& v : axis.values) {
        RunConfig c = cfg;
        set_key(c, axis.key, v);
        next.push_back(std::move(c));
      }
    out = std::move(next);
  }
  return out;
}

unsigned worker_count(unsigned requested) {
  unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ATHENA_SIM_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, n);
}

std::shared_ptr<const std::vector<TraceRecord>> TraceCache::get(const std::string& path) {
  auto it = traces_.find(path);
  if (it != traces_.end()) return it->second;
  auto t = std::make_shared<const std::vector<TraceRecord>>(read_trace(path));
  traces_.emplace(path, t);
  return t;
}

std::vector<CsvRow> run_configs(const std::vector<RunConfig>& cells, unsigned workers) {
  workers = worker_count(workers);

  // Load traces up front so workers share them read-only.
  TraceCache cache;
  std::map<std::string, std::string> trace_errors;
  for (const auto& c : cells) {
    if (trace_errors.count(c.trace)) continue;
    try {
      cache.get(c.trace);
    } catch (const std::exception& e) {
      trace_errors[c.trace] = e.what();
    }
  }

  std::map<std::string, size_t> baseline_index;
  std::vector<RunConfig> baselines;
  std::vector<std::string> cell_keys(cells.size());
  for (size_t i = 0; i < cells.size(); ++i) {
    if (trace_errors.count(cells[i].trace)) continue;
    cell_keys[i] = baseline_key(cells[i]);
    if (baseline_index.emplace(cell_keys[i], baselines.size()).second) {
      RunConfig b = cells[i];
      b.policy = "none";
      baselines.push_back(b);
    }
  }

  std::vector<std::optional<RunResult>> base_results(baselines.size());
  std::vector<std::string> base_errors(baselines.size());
  parallel_for(baselines.size(), workers, [&](size_t i) {
    try {
      base_results[i] = run_on(baselines[i], *cache.get(baselines[i].trace));
    } catch (const std::exception& e) {
      base_errors[i] = e.what();
    }
  });

  std::vector<CsvRow> rows(cells.size());
  parallel_for(cells.size(), workers, [&](size_t i) {
    const RunConfig& c = cells[i];
    if (auto it = trace_errors.find(c.trace); it != trace_errors.end()) {
      rows[i] = error_row(c, it->second);
      return;
    }
    const size_t b = baseline_index.at(cell_keys[i]);
    try {
      if (!base_results[b]) throw std::runtime_error(base_errors[b]);
      if (c.policy == "none") {
        rows[i] = make_row(c, *base_results[b]);
        return;
      }
      rows[i] = make_row(c, run_on(c, *cache.get(c.trace), base_results[b]->sim.ipc));
    } catch (const std::exception& e) {
      rows[i] = error_row(c, e.what());
    }
  });
  return rows;
}

std::vector<CsvRow> run_matrix(const RunConfig& base, const Grid& grid, unsigned workers) {
  return run_configs(expand_grid(base, grid), workers);
}

double geomean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += std::log(v);
  return std::exp(s / static_cast<double>(values.size()));
}

std::vector<GeomeanRow> geomean_speedup(std::span<const CsvRow> rows, const std::string& baseline_policy,
                                        const std::string& group_by) {
  auto pair_key = [](const CsvRow& r) {
    return r.trace + "|" + r.pf + "|" + r.ocp + "|" + fmt_double(r.bw_gbs) + "|" + std::to_string(r.seed);
  };
  auto group_of = [&](const CsvRow& r) -> std::string {
    if (group_by.empty()) return "all";
    if (group_by == "trace") return r.trace;
    if (group_by == "pf") return r.pf;
    if (group_by == "ocp") return r.ocp;
    if (group_by == "bw_gbs") return fmt_double(r.bw_gbs);
    if (group_by == "seed") return std::to_string(r.seed);
    throw std::invalid_argument("cannot group by '" + group_by + "'");
  };

  std::map<std::string, double> base;
  for (const auto& r : rows)
    if (r.policy == baseline_policy && r.status == "ok") base[pair_key(r)] = r.ipc;

  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  std::map<std::string, std::vector<double>> overall;
  std::vector<std::string> policy_order;
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    const auto it = base.find(pair_key(r));
    if (it == base.end())
      throw MissingBaseline("no '" + baseline_policy + "' row for trace " + r.trace + " (pf " + r.pf + ", ocp " +
                            r.ocp + ", bw " + fmt_double(r.bw_gbs) + ", seed " + std::to_string(r.seed) + ")");
    const double s = r.ipc / it->second;
    groups[{group_of(r), r.policy}].push_back(s);
    overall[r.policy].push_back(s);
    if (std::find(policy_order.begin(), policy_order.end(), r.policy) == policy_order.end())
      policy_order.push_back(r.policy);
  }

  std::vector<GeomeanRow> out;
  if (!group_by.empty())
    for (const auto& [k, v] : groups) out.push_back({k.first, k.second, v.size(), geomean(v)});
  for (const auto& p : policy_order) out.push_back({"all", p, overall[p].size(), geomean(overall[p])});
  return out;
}

std::string format_report(std::span<const GeomeanRow> table) {
  std::ostringstream ss;
  ss << "group,policy,n,geomean_speedup\n";
  for (const auto& r : table) ss << r.group << ',' << r.policy << ',' << r.n << ',' << fmt_double(r.geomean) << '\n';
  return ss.str();
}

namespace {

struct DseEvaluator {
  const RunConfig& base;
  const Grid& space;
  const std::vector<std::string>& traces;
  unsigned workers;
  std::map<std::vector<std::string>, double> memo;

  std::vector<double> evaluate(const std::vector<std::vector<std::string>>& points) {
    std::vector<std::vector<std::string>> todo;
    for (const auto& p : points)
      if (!memo.count(p) && std::find(todo.begin(), todo.end(), p) == todo.end()) todo.push_back(p);
    std::vector<RunConfig> cells;
    for (const auto& p : todo)
      for (const auto& t : traces) {
        RunConfig c = base;
        for (size_t i = 0; i < space.size(); ++i) set_key(c, space[i].key, p[i]);
        c.trace = t;
        cells.push_back(c);
      }
    const auto rows = run_configs(cells, workers);
    for (size_t i = 0; i < todo.size(); ++i) {
      std::vector<double> s;
      bool ok = true;
      for (size_t t = 0; t < traces.size(); ++t) {
        const CsvRow& r = rows[i * traces.size() + t];
        ok = ok && r.status == "ok" && r.speedup > 0.0;
        s.push_back(r.speedup);
      }
      memo[todo[i]] = ok ? geomean(s) : 0.0;
    }
    std::vector<double> out;
    for (const auto& p : points) out.push_back(memo.at(p));
    return out;
  }

  DseEntry entry(const std::vector<std::string>& p) const {
    DseEntry e;
    for (size_t i = 0; i < space.size(); ++i) e.assignment.emplace_back(space[i].key, p[i]);
    e.objective = memo.at(p);
    return e;
  }
};

bool better(const DseEntry& a, const DseEntry& b) {
  if (a.objective != b.objective) return a.objective > b.objective;
  return assignment_less(a, b);
}

}  // namespace

DseResult grid_search_dse(const RunConfig& base, const Grid& space, const std::vector<std::string>& tuning_traces,
                          unsigned workers, bool coordinate_descent) {
  if (tuning_traces.empty()) throw std::invalid_argument("dse needs at least one tuning trace");
  DseEvaluator ev{base, space, tuning_traces, workers, {}};
  DseResult out;

  std::vector<std::vector<std::string>> visited;
  if (!coordinate_descent) {
    std::vector<std::vector<std::string>> points{{}};
    for (const auto& axis : space) {
      std::vector<std::vector<std::string>> next;
      for (const auto& p : points)
        for (const auto& v : axis.values) {
          auto q = p;
          q.push_back(v);
          next.push_back(q);
        }
      points = std::move(next);
    }
    ev.evaluate(points);
    visited = points;
  } else {
    std::vector<std::string> current;
    for (const auto& axis : space) current.push_back(axis.values.front());
    ev.evaluate({current});
    visited.push_back(current);
    for (bool changed = true; changed;) {
      changed = false;
      for (size_t a = 0; a < space.size(); ++a) {
        std::vector<std::vector<std::string>> line;
        for (const auto& v : space[a].values) {
          auto q = current;
          q[a] = v;
          line.push_back(q);
        }
        ev.evaluate(line);
        DseEntry best = ev.entry(current);
        for (const auto& q : line) {
          if (std::find(visited.begin(), visited.end(), q) == visited.end()) visited.push_back(q);
          const DseEntry e = ev.entry(q);
          if (better(e, best)) {
            best = e;
            if (q != current) {
              current = q;
              changed = true;
            }
          }
        }
      }
    }
  }

  for (const auto& p : visited) out.scoreboard.push_back(ev.entry(p));
  out.best = out.scoreboard.front();
  for (const auto& e : out.scoreboard)
    if (better(e, out.best)) out.best = e;
  return out;
}

std::string dse_scoreboard_csv(const DseResult& r, const Grid& space) {
  std::ostringstream ss;
  for (const auto& axis : space) ss << axis.key << ',';
  ss << "objective\n";
  for (const auto& e : r.scoreboard) {
    for (const auto& [k, v] : e.assignment) ss << v << ',';
    ss << fmt_double(e.objective) << '\n';
  }
  return ss.str();
}

std::string feature_name(FeatureBit bit) {
  switch (bit) {
    case kFeaturePfAccuracy: return "pf_acc";
    case kFeatureOcpAccuracy: return "ocp_acc";
    case kFeatureBwUsage: return "bw_usage";
    case kFeaturePollution: return "pollution";
  }
  return "?";
}

FeatureBit parse_feature(const std::string& name) {
  for (FeatureBit b : {kFeaturePfAccuracy, kFeatureOcpAccuracy, kFeatureBwUsage, kFeaturePollution})
    if (feature_name(b) == name) return b;
  throw std::invalid_argument("unknown feature '" + name + "'");
}

std::vector<RunConfig> ablation_stages(const RunConfig& base, std::span<const FeatureBit> order) {
  std::vector<RunConfig> stages;
  RunConfig c = base;
  c.policy = "athena";
  c.athena.feature_mask = 0;
  c.athena.weights.llc_miss = 0.0;
  c.athena.weights.llc_latency = 0.0;
  c.athena.weights.load = 0.0;
  c.athena.weights.mispredicted_branch = 0.0;
  stages.push_back(c);
  for (FeatureBit b : order) {
    c.athena.feature_mask |= b;
    stages.push_back(c);
  }
  RunConfig full = base;
  full.policy = "athena";
  stages.push_back(full);
  return stages;
}

std::vector<CsvRow> ablation_run(const RunConfig& base, std::span<const FeatureBit> order, unsigned workers) {
  auto rows = run_configs(ablation_stages(base, order), workers);
  rows.front().policy = "athena:stateless";
  for (size_t i = 0; i < order.size(); ++i) rows[i + 1].policy = "athena:+" + feature_name(order[i]);
  rows.back().policy = "athena:+uncorrelated";
  return rows;
}

}  // namespace athena
