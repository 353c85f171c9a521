#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "athena/config.h"
#include "athena/simulation.h"

namespace athena {

inline constexpr int kCsvSchemaVersion = 1;

struct RunResult {
  SimulationResult sim;
  double baseline_ipc = 0.0;
  double speedup = 1.0;
};

// Runs cfg.policy and, unless it is "none", the paired none-policy run on the
// same trace, speculators, bandwidth and seed.
RunResult run_one(const RunConfig& cfg);
RunResult run_on(const RunConfig& cfg, std::span<const TraceRecord> trace,
                 std::optional<double> baseline_ipc = std::nullopt);
// Single simulation without the baseline pairing.
SimulationResult simulate_policy(const RunConfig& cfg, std::span<const TraceRecord> trace);

struct CsvRow {
  std::string trace;
  std::string policy;
  std::string pf;
  std::string ocp;
  double bw_gbs = 0.0;
  uint64_t seed = 0;
  double ipc = 0.0;
  double speedup = 0.0;
  double pf_acc = 0.0;
  double ocp_acc = 0.0;
  double bw_usage = 0.0;
  double pollution = 0.0;
  std::vector<uint64_t> action_hist;
  uint64_t dram_demand = 0;
  uint64_t dram_pf = 0;
  uint64_t dram_ocp = 0;
  std::string status = "ok";
};

std::string trace_label(const std::string& path);
CsvRow make_row(const RunConfig& cfg, const RunResult& r);
CsvRow error_row(const RunConfig& cfg, const std::string& message);

// Header width follows the widest action histogram among the rows.
void write_csv(std::ostream& out, std::span<const CsvRow> rows);
std::string to_csv(std::span<const CsvRow> rows);
std::vector<CsvRow> read_csv(std::istream& in);
// One line per measured epoch: action, cycles, ipc and the state features.
std::string epoch_csv(const SimulationResult& r);

// One axis of a run grid, values in declaration order.
struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};
using Grid = std::vector<GridAxis>;

// "key = v1, v2, ..." per line; '#' comments.
Grid parse_grid(const std::string& text);
// Cartesian product; the first axis varies slowest.
std::vector<RunConfig> expand_grid(const RunConfig& base, const Grid& grid);

// Worker count after applying the ATHENA_SIM_THREADS cap; 0 means "auto".
unsigned worker_count(unsigned requested);

class TraceCache {
 public:
  std::shared_ptr<const std::vector<TraceRecord>> get(const std::string& path);

 private:
  std::map<std::string, std::shared_ptr<const std::vector<TraceRecord>>> traces_;
};

// Rows are in expand_grid order regardless of scheduling. Failed cells become
// error rows.
std::vector<CsvRow> run_matrix(const RunConfig& base, const Grid& grid, unsigned workers);
std::vector<CsvRow> run_configs(const std::vector<RunConfig>& cells, unsigned workers);

class MissingBaseline : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeomeanRow {
  std::string group;  // value of the group-by column, "all" for the overall row
  std::string policy;
  size_t n = 0;
  double geomean = 0.0;
};

double geomean(std::span<const double> values);
// Pairs every row with the baseline row of the same trace, pf, ocp, bw_gbs
// and seed; speedup = ipc / baseline ipc.
std::vector<GeomeanRow> geomean_speedup(std::span<const CsvRow> rows, const std::string& baseline_policy,
                                        const std::string& group_by = "");
std::string format_report(std::span<const GeomeanRow> table);

struct DseEntry {
  std::vector<std::pair<std::string, std::string>> assignment;
  double objective = 0.0;
};

struct DseResult {
  std::vector<DseEntry> scoreboard;
  DseEntry best;
};

// Objective: geomean speedup of base.policy over "none" across the tuning
// traces. Ties keep the lexicographically smallest assignment.
DseResult grid_search_dse(const RunConfig& base, const Grid& space, const std::vector<std::string>& tuning_traces,
                          unsigned workers, bool coordinate_descent = false);
std::string dse_scoreboard_csv(const DseResult& r, const Grid& space);

// Stateless cycles-only stage, then one stage per added feature, then the
// full configuration with the uncorrelated reward.
std::vector<RunConfig> ablation_stages(const RunConfig& base, std::span<const FeatureBit> order);
std::vector<CsvRow> ablation_run(const RunConfig& base, std::span<const FeatureBit> order, unsigned workers);
std::string feature_name(FeatureBit bit);
FeatureBit parse_feature(const std::string& name);

}  // namespace athena
