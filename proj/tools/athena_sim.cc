// athena_sim: trace generation, single runs, run matrices, DSE, ablation and
// speedup reports.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "athena/harness.h"
#include "athena/trace.h"

using namespace athena;

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
  std::string trace, policy, l1d_pf, l2c_pf, ocp, tlp_filter;
  std::optional<uint32_t> ocp_issue_latency;
  std::optional<uint64_t> seed;
  std::optional<double> bw;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "flat key=value config file");
  app->add_option("--set", o.sets, "override a config key (key=value)")->take_all();
  app->add_option("--trace", o.trace, "trace file");
  app->add_option("--policy", o.policy, "naive|athena|mab|hpac|off-only|pf-only|both|none|static-N");
  app->add_option("--l1d-pf", o.l1d_pf, "none|stride");
  app->add_option("--l2c-pf", o.l2c_pf, "none|stream");
  app->add_option("--ocp", o.ocp, "none|perceptron|history");
  app->add_option("--ocp-issue-latency", o.ocp_issue_latency, "cycles from prediction to the memory controller");
  app->add_option("--tlp-filter", o.tlp_filter, "on|off");
  app->add_option("--seed", o.seed);
  app->add_option("--bw", o.bw, "per-core DRAM bandwidth in GB/s");
}

RunConfig build_config(const CommonOptions& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config_file(o.config);
  if (!o.trace.empty()) cfg.trace = o.trace;
  if (!o.policy.empty()) cfg.policy = o.policy;
  if (!o.l1d_pf.empty()) cfg.sim.speculators.l1d_pf = o.l1d_pf;
  if (!o.l2c_pf.empty()) cfg.sim.speculators.l2c_pf = o.l2c_pf;
  if (!o.ocp.empty()) cfg.sim.speculators.ocp = o.ocp;
  if (!o.tlp_filter.empty()) set_key(cfg, "tlp_filter", o.tlp_filter);
  if (o.ocp_issue_latency) cfg.sim.speculators.ocp_issue_latency = *o.ocp_issue_latency;
  if (o.seed) cfg.seed = *o.seed;
  if (o.bw) cfg.bw_gbs = *o.bw;
  apply_overrides(cfg, o.sets);
  return cfg;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

bool any_error(const std::vector<CsvRow>& rows) {
  for (const auto& r : rows)
    if (r.status != "ok") return true;
  return false;
}

std::vector<Segment> parse_segments(const std::string& text) {
  std::vector<Segment> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::vector<std::string> f;
    std::stringstream is(item);
    for (std::string x; std::getline(is, x, ':');) f.push_back(x);
    if (f.size() < 2 || f.size() > 4)
      throw ArgumentError("segment '" + item + "' should look like kind:count[:density[:r]]");
    Segment s;
    s.kind = parse_segment_kind(f[0]);
    s.n = std::stoull(f[1]);
    if (f.size() > 2 && !f[2].empty()) s.load_density = std::stod(f[2]);
    s.random_branches = f.size() > 3 && f[3] == "r";
    out.push_back(s);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven memory hierarchy simulator with RL speculation coordination"};
  app.require_subcommand(1);

  // gen-trace
  auto* gen = app.add_subcommand("gen-trace", "generate a synthetic trace");
  std::string kind = "stream", out_path, segments;
  uint64_t n = 1000000, stride = 8, footprint = uint64_t{16} << 20, nodes = uint64_t{1} << 20, gen_seed = 1;
  double density = 0.25;
  bool random_branches = false;
  gen->add_option("--kind", kind, "stream|chase|mix")->check(CLI::IsMember({"stream", "chase", "mix"}));
  gen->add_option("--n", n, "records");
  gen->add_option("--stride", stride, "stream stride in bytes");
  gen->add_option("--footprint", footprint, "stream footprint in bytes");
  gen->add_option("--nodes", nodes, "pointer-chase nodes");
  gen->add_option("--seed", gen_seed);
  gen->add_option("--density", density, "fraction of records that are loads");
  gen->add_flag("--random-branches", random_branches);
  gen->add_option("--segments", segments, "mix only: kind:count[:density[:r]],... (r = random branches)");
  gen->add_option("--out", out_path, "output trace file")->required();

  // run
  auto* run = app.add_subcommand("run", "run one configuration");
  CommonOptions run_opts;
  std::string run_out, epochs_out;
  add_common(run, run_opts);
  run->add_option("--out", run_out, "CSV output (default stdout)");
  run->add_option("--epochs", epochs_out, "per-epoch telemetry CSV of the measured window");

  // matrix
  auto* matrix = app.add_subcommand("matrix", "run the Cartesian product of a grid");
  CommonOptions matrix_opts;
  std::string grid_path, matrix_out;
  unsigned workers = 0;
  add_common(matrix, matrix_opts);
  matrix->add_option("--grid", grid_path, "grid file: key = v1, v2, ...")->required();
  matrix->add_option("--workers", workers, "worker threads (0 = auto)");
  matrix->add_option("--out", matrix_out, "CSV output (default stdout)");

  // dse
  auto* dse = app.add_subcommand("dse", "grid-search design-space exploration");
  CommonOptions dse_opts;
  std::string space_path, scoreboard_out;
  std::vector<std::string> tuning;
  bool coord = false;
  add_common(dse, dse_opts);
  dse->add_option("--space", space_path, "search space file: key = v1, v2, ...")->required();
  dse->add_option("--tuning-traces", tuning, "tuning trace files")->required();
  dse->add_option("--workers", workers);
  dse->add_flag("--coordinate-descent", coord, "search one axis at a time");
  dse->add_option("--scoreboard", scoreboard_out, "scoreboard CSV output");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "add-one-feature ablation");
  CommonOptions ablate_opts;
  std::string order = "pf_acc,ocp_acc,bw_usage,pollution", ablate_out;
  add_common(ablate, ablate_opts);
  ablate->add_option("--order", order, "comma-separated feature order");
  ablate->add_option("--workers", workers);
  ablate->add_option("--out", ablate_out);

  // report
  auto* report = app.add_subcommand("report", "geomean speedups from a results CSV");
  std::string csv_path, baseline = "none", group_by;
  report->add_option("--csv", csv_path)->required();
  report->add_option("--baseline", baseline);
  report->add_option("--group-by", group_by);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      GeneratorOptions opt;
      opt.load_density = density;
      opt.random_branches = random_branches;
      if (kind == "stream") {
        write_trace(out_path, generate_stream_trace(n, stride, footprint, gen_seed, opt));
      } else if (kind == "chase") {
        opt.base = kChaseBase;
        write_trace(out_path, generate_pointer_chase_trace(n, nodes, gen_seed, opt));
      } else {
        if (segments.empty()) throw ArgumentError("--segments is required for --kind mix");
        const auto mix = generate_phase_mix_trace(parse_segments(segments), gen_seed, {stride, footprint, nodes});
        write_trace(out_path, mix.records);
        write_manifest(out_path + ".manifest", mix.manifest);
      }
      return 0;
    }
    if (run->parsed()) {
      const RunConfig cfg = build_config(run_opts);
      if (!epochs_out.empty()) {
        const auto trace = read_trace(cfg.trace);
        emit(epochs_out, epoch_csv(simulate_policy(cfg, trace)));
      }
      const std::vector<CsvRow> rows = run_configs({cfg}, 1);
      emit(run_out, to_csv(rows));
      if (any_error(rows)) std::cerr << rows.front().status << "\n";
      return any_error(rows) ? 1 : 0;
    }
    if (matrix->parsed()) {
      const RunConfig base = build_config(matrix_opts);
      const auto rows = run_matrix(base, parse_grid(read_text_file(grid_path)), workers);
      emit(matrix_out, to_csv(rows));
      return any_error(rows) ? 1 : 0;
    }
    if (dse->parsed()) {
      const RunConfig base = build_config(dse_opts);
      const Grid space = parse_grid(read_text_file(space_path));
      const DseResult r = grid_search_dse(base, space, tuning, workers, coord);
      if (!scoreboard_out.empty()) emit(scoreboard_out, dse_scoreboard_csv(r, space));
      for (const auto& [k, v] : r.best.assignment) std::cout << k << " = " << v << "\n";
      std::cout << "# objective " << r.best.objective << "\n";
      return 0;
    }
    if (ablate->parsed()) {
      const RunConfig base = build_config(ablate_opts);
      std::vector<FeatureBit> features;
      std::stringstream ss(order);
      for (std::string f; std::getline(ss, f, ',');) features.push_back(parse_feature(trim(f)));
      const auto rows = ablation_run(base, features, workers);
      emit(ablate_out, to_csv(rows));
      return any_error(rows) ? 1 : 0;
    }
    if (report->parsed()) {
      std::ifstream in(csv_path);
      if (!in) throw std::runtime_error("cannot open " + csv_path);
      const auto rows = read_csv(in);
      std::cout << format_report(geomean_speedup(rows, baseline, group_by));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
