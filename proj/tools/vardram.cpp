#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <zlib.h>

#include "vardram/vardram.hpp"

namespace fs = std::filesystem;
using namespace vardram;

namespace {

void write_text_file(const std::string& path, const std::string& text)
{
  if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
    gzFile f = gzopen(path.c_str(), "wb9");
    if (!f) throw ParseError("cannot open " + path + " for writing");
    if (gzwrite(f, text.data(), unsigned(text.size())) != int(text.size())) {
      gzclose(f);
      throw ParseError("short write on " + path);
    }
    gzclose(f);
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open " + path + " for writing");
  os << text;
}

int cmd_run(const std::string& config_path, const std::string& scenario,
            const std::string& trace_path, std::int64_t seed, int lp,
            int multiplier, int weak, const std::string& gating,
            std::int64_t trigger, std::int64_t victims, std::int64_t run_length,
            const std::string& out_dir)
{
  ScenarioConfig cfg = ScenarioConfig::from_file(config_path);
  if (!scenario.empty()) cfg.scenario = scenario_from_string(scenario);
  if (!trace_path.empty()) cfg.trace_path = trace_path;
  if (seed >= 0) cfg.seed = std::uint64_t(seed);
  if (lp >= 0) cfg.lp_mode = lp != 0;
  if (multiplier >= 0) cfg.refresh_multiplier = std::uint32_t(multiplier);
  if (weak >= 0) cfg.weak_row_remap = weak != 0;
  if (!gating.empty()) cfg.gating_mode = gating_mode_from_string(gating);
  if (trigger >= 0) cfg.gating_trigger_cycle = std::uint64_t(trigger);
  if (victims >= 0) cfg.victim_count = std::uint32_t(victims);
  if (run_length >= 0) cfg.run_length_cycles = std::uint64_t(run_length);
  if (cfg.trace_path.empty())
    throw ConfigError("run: no trace given (config run.trace or --trace)");

  std::vector<MemoryRequest> trace = read_trace_file(cfg.trace_path);
  Simulator sim(cfg);
  RunReport report = sim.run(trace, cfg.trace_path);

  fs::create_directories(out_dir);
  write_text_file((fs::path(out_dir) / "report.json").string(),
                  report.to_json_text());
  write_text_file((fs::path(out_dir) / "report.csv").string(), report.to_csv());
  std::cout << report.scenario << " " << cfg.trace_path << ": total "
            << report.totals.total_nj() << " nJ, avg latency "
            << report.avg_latency_ns << " ns, " << report.requests
            << " requests, refresh " << report.refresh_count << "\n";
  return 0;
}

int cmd_compare(const std::string& baseline, const std::string& candidate,
                const std::string& out_path)
{
  RunReport b = RunReport::from_file(baseline);
  RunReport c = RunReport::from_file(candidate);
  ComparisonReport cmp = compare(b, c);
  std::cout << cmp.to_text();
  if (!out_path.empty()) {
    std::ostringstream os;
    os << cmp.to_json().dump(2) << "\n";
    write_text_file(out_path, os.str());
  }
  return 0;
}

int cmd_gen_trace(const std::string& kind_s, const std::string& config_path,
                  std::uint64_t seed, std::uint64_t count, double write_fraction,
                  std::uint64_t gap, std::uint64_t burst, std::uint64_t idle_gap,
                  const std::string& out_path)
{
  TraceGenParams p;
  if (!config_path.empty())
    p.geometry = ScenarioConfig::from_file(config_path).geometry;
  p.request_count = count;
  p.write_fraction = write_fraction;
  p.mean_gap_cycles = gap;
  p.burst_length = burst;
  p.idle_gap_cycles = idle_gap;
  TraceKind kind = trace_kind_from_string(kind_s);
  std::vector<MemoryRequest> trace = generate_synthetic(kind, p, seed);
  std::ostringstream os;
  emit_trace(trace, os);
  write_text_file(out_path, os.str());
  std::cout << trace_kind_name(kind) << ": " << trace.size() << " requests -> "
            << out_path << "\n";
  return 0;
}

int cmd_gen_map(const std::string& config_path, std::int64_t seed,
                const std::string& out_path)
{
  ScenarioConfig cfg = config_path.empty() ? ScenarioConfig{}
                                           : ScenarioConfig::from_file(config_path);
  if (seed >= 0) cfg.variation.seed = std::uint64_t(seed);
  VariationMap map = generate_variation_map(
      cfg.variation, cfg.grid_rows, cfg.grid_cols,
      std::uint32_t(cfg.geometry.total_ranks()), cfg.geometry.banks_per_rank);
  std::ostringstream os;
  write_variation_map(map, os);
  write_text_file(out_path, os.str());
  std::cout << "map " << cfg.grid_rows << "x" << cfg.grid_cols << " -> "
            << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"trace-driven DRAM subsystem simulator with victim-bank remapping"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "simulate one scenario over a trace");
  std::string config_path, scenario, trace_path, gating, out_dir = "out";
  std::int64_t seed = -1, trigger = -1, victims = -1, run_length = -1;
  int lp = -1, multiplier = -1, weak = -1;
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--scenario", scenario, "IDEAL | PV | VAR");
  run->add_option("--trace", trace_path, "trace file (.gz or text)");
  run->add_option("--seed", seed, "run seed override");
  run->add_option("--lp", lp, "low-power idle mode (0/1)");
  run->add_option("--refresh-multiplier", multiplier, "1 or 4");
  run->add_option("--weak-row-remap", weak, "weak-row remapping (0/1)");
  run->add_option("--gating-mode", gating, "static_close | dynamic_close");
  run->add_option("--gating-trigger-cycle", trigger, "dynamic_close start cycle");
  run->add_option("--victims", victims, "victim bank count override");
  run->add_option("--run-length", run_length, "horizon in cycles (0 = trace end)");
  run->add_option("--out", out_dir, "output directory");

  auto* cmp = app.add_subcommand("compare", "diff two run reports");
  std::string baseline, candidate, cmp_out;
  cmp->add_option("--baseline", baseline, "baseline report.json")->required();
  cmp->add_option("--candidate", candidate, "candidate report.json")->required();
  cmp->add_option("--out", cmp_out, "write the comparison as JSON");

  auto* gtrace = app.add_subcommand("gen-trace", "emit a synthetic trace");
  std::string kind, gt_config, gt_out;
  std::uint64_t gt_seed = 1, gt_count = 20000, gt_gap = 4, gt_burst = 64,
                gt_idle = 20000;
  double gt_wf = 0.3;
  gtrace->add_option("--kind", kind, "uniform | hotspot | collision_stress | idle_heavy")
      ->required();
  gtrace->add_option("--config", gt_config, "config supplying the geometry");
  gtrace->add_option("--seed", gt_seed, "generator seed");
  gtrace->add_option("--count", gt_count, "request count");
  gtrace->add_option("--write-fraction", gt_wf, "fraction of writes");
  gtrace->add_option("--gap", gt_gap, "mean inter-request gap in cycles");
  gtrace->add_option("--burst", gt_burst, "idle_heavy: requests per burst");
  gtrace->add_option("--idle-gap", gt_idle, "idle_heavy: quiet cycles between bursts");
  gtrace->add_option("--out", gt_out, "output path (.gz compresses)")->required();

  auto* gmap = app.add_subcommand("gen-map", "emit a variation map");
  std::string gm_config, gm_out;
  std::int64_t gm_seed = -1;
  gmap->add_option("--config", gm_config, "config supplying geometry and knobs");
  gmap->add_option("--seed", gm_seed, "map seed override");
  gmap->add_option("--out", gm_out, "output path")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed())
      return cmd_run(config_path, scenario, trace_path, seed, lp, multiplier,
                     weak, gating, trigger, victims, run_length, out_dir);
    if (cmp->parsed()) return cmd_compare(baseline, candidate, cmp_out);
    if (gtrace->parsed())
      return cmd_gen_trace(kind, gt_config, gt_seed, gt_count, gt_wf, gt_gap,
                           gt_burst, gt_idle, gt_out);
    if (gmap->parsed()) return cmd_gen_map(gm_config, gm_seed, gm_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
