#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "energy.hpp"
#include "refresh.hpp"
#include "remap.hpp"
#include "types.hpp"
#include "variation.hpp"

namespace vardram {

enum class Scenario : std::uint8_t { Ideal, Pv, Var };

inline const char* scenario_name(Scenario s)
{
  switch (s) {
    case Scenario::Ideal: return "IDEAL";
    case Scenario::Pv: return "PV";
    case Scenario::Var: return "VAR";
  }
  return "?";
}

inline Scenario scenario_from_string(const std::string& s)
{
  if (s == "IDEAL" || s == "ideal") return Scenario::Ideal;
  if (s == "PV" || s == "pv") return Scenario::Pv;
  if (s == "VAR" || s == "var") return Scenario::Var;
  throw ConfigError("config: unknown scenario '" + s + "'");
}

enum class GatingMode : std::uint8_t { StaticClose, DynamicClose };

inline const char* gating_mode_name(GatingMode m)
{
  return m == GatingMode::StaticClose ? "static_close" : "dynamic_close";
}

inline GatingMode gating_mode_from_string(const std::string& s)
{
  if (s == "static_close") return GatingMode::StaticClose;
  if (s == "dynamic_close") return GatingMode::DynamicClose;
  throw ConfigError("config: unknown gating_mode '" + s + "'");
}

// Sectioned key=value text. '#' and ';' start comments; keys are unique per
// section; unknown sections or keys are hard errors so typos cannot silently
// fall back to defaults.
class ConfigParser {
public:
  void parse_text(const std::string& text, const std::string& origin)
  {
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string s = strip(line);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw ParseError(origin + ":" + std::to_string(line_no) +
                           ": unterminated section header");
        section = strip(s.substr(1, s.size() - 2));
        if (section.empty())
          throw ParseError(origin + ":" + std::to_string(line_no) +
                           ": empty section name");
        sections_.insert(section);
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw ParseError(origin + ":" + std::to_string(line_no) +
                         ": expected key = value");
      std::string key = strip(s.substr(0, eq));
      std::string value = strip(s.substr(eq + 1));
      if (key.empty())
        throw ParseError(origin + ":" + std::to_string(line_no) + ": empty key");
      if (section.empty())
        throw ParseError(origin + ":" + std::to_string(line_no) +
                         ": key outside any [section]");
      std::string full = section + "." + key;
      if (values_.count(full))
        throw ParseError(origin + ":" + std::to_string(line_no) +
                         ": duplicate key '" + full + "'");
      values_[full] = value;
    }
  }

  static ConfigParser from_file(const std::string& path)
  {
    std::ifstream in(path);
    if (!in) throw ParseError("config: cannot open '" + path + "'");
    std::ostringstream body;
    body << in.rdbuf();
    ConfigParser p;
    p.parse_text(body.str(), path);
    return p;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback)
  {
    consumed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback)
  {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::size_t pos = 0;
    double v;
    try {
      v = std::stod(it->second, &pos);
    } catch (const std::exception&) {
      throw ParseError("config: key '" + key + "' is not a number: '" +
                       it->second + "'");
    }
    if (pos != it->second.size())
      throw ParseError("config: trailing junk in '" + key + "'");
    return v;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback)
  {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::size_t pos = 0;
    std::uint64_t v;
    try {
      v = std::stoull(it->second, &pos, 10);
    } catch (const std::exception&) {
      throw ParseError("config: key '" + key + "' is not an integer: '" +
                       it->second + "'");
    }
    if (pos != it->second.size())
      throw ParseError("config: trailing junk in '" + key + "'");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback)
  {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ParseError("config: key '" + key + "' is not a boolean: '" + v + "'");
  }

  // Call after reading everything; leftover keys are typos or stale settings.
  void reject_unknown() const
  {
    for (const auto& [key, value] : values_)
      if (!consumed_.count(key))
        throw ConfigError("config: unknown key '" + key + "'");
  }

private:
  static std::string strip(const std::string& s)
  {
    std::size_t b = 0, e = s.size();
    auto cut = s.find_first_of("#;");
    if (cut != std::string::npos) e = cut;
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> sections_;
  std::set<std::string> consumed_;
};

// Everything one run needs; the CLI may override scenario, trace and seed.
struct ScenarioConfig {
  Scenario scenario = Scenario::Var;
  bool lp_mode = false;
  std::uint32_t refresh_multiplier = 1;
  bool weak_row_remap = false;
  GatingMode gating_mode = GatingMode::StaticClose;
  std::uint64_t gating_trigger_cycle = 0;
  std::uint32_t victim_count = 4;
  std::uint64_t run_length_cycles = 0;  // 0 = run until the last completion
  std::uint64_t seed = 1;
  std::string trace_path;

  Geometry geometry;
  TimingParams timing;
  DeviceEnergyProfile energy;
  VariationParams variation;
  std::uint32_t grid_rows = 64;
  std::uint32_t grid_cols = 64;
  double victim_threshold = 0.05;
  DerateParams derate;
  std::string map_path;  // pre-generated variation map, optional

  double ber = 4e-9;
  std::string weak_rows_path;  // manufacturer weak-row profile, optional

  EngineParams engine;
  time_ps copy_cost_override_ps = 0;  // 0 = tRC + 2 bursts
  std::uint64_t lp_idle_threshold_cycles = 100;

  void validate() const
  {
    geometry.validate();
    timing.validate();
    energy.validate();
    variation.validate();
    if (refresh_multiplier != 1 && refresh_multiplier != 4)
      throw ConfigError("config: refresh_multiplier must be 1 or 4");
    if (scenario == Scenario::Var && victim_count < 1)
      throw ConfigError("config: VAR needs victim_count >= 1");
    if (victim_threshold < 0)
      throw ConfigError("config: victim_threshold must be >= 0");
    if (ber < 0 || ber > 1) throw ConfigError("config: ber out of [0,1]");
    if (engine.trie_capacity_fraction <= 0 || engine.trie_capacity_fraction > 1)
      throw ConfigError("config: trie_capacity_fraction out of (0,1]");
    if (grid_rows == 0 || grid_cols == 0)
      throw ConfigError("config: variation grid must be non-empty");
  }

  // IDEAL carries no variation at all; PV keeps the derated victims but never
  // gates; VAR runs the full mechanism.
  bool variation_enabled() const { return scenario != Scenario::Ideal; }
  bool gating_enabled() const { return scenario == Scenario::Var; }

  RefreshConfig refresh_config() const
  {
    RefreshConfig rc;
    rc.trefw = timing.trefw;
    rc.trefi = timing.trefi;
    rc.multiplier = refresh_multiplier;
    rc.ber = ber;
    rc.cells_per_row = cells_per_row_of(geometry);
    return rc;
  }

  time_ps copy_cost_ps() const
  {
    if (copy_cost_override_ps != 0) return copy_cost_override_ps;
    return timing.trc + timing.read_burst_ps() + timing.write_burst_ps();
  }

  static ScenarioConfig from_parser(ConfigParser& p)
  {
    ScenarioConfig c;
    c.scenario = scenario_from_string(p.get_string("run.scenario", "VAR"));
    c.lp_mode = p.get_bool("run.lp_mode", false);
    c.refresh_multiplier =
        std::uint32_t(p.get_u64("run.refresh_multiplier", 1));
    c.weak_row_remap = p.get_bool("run.weak_row_remap", false);
    c.gating_mode =
        gating_mode_from_string(p.get_string("run.gating_mode", "static_close"));
    c.gating_trigger_cycle = p.get_u64("run.gating_trigger_cycle", 0);
    c.victim_count = std::uint32_t(p.get_u64("run.victim_count", 4));
    c.run_length_cycles = p.get_u64("run.run_length_cycles", 0);
    c.seed = p.get_u64("run.seed", 1);
    c.trace_path = p.get_string("run.trace", "");

    c.geometry.channels = std::uint32_t(p.get_u64("geometry.channels", 1));
    c.geometry.ranks_per_channel =
        std::uint32_t(p.get_u64("geometry.ranks_per_channel", 4));
    c.geometry.banks_per_rank =
        std::uint32_t(p.get_u64("geometry.banks_per_rank", 8));
    c.geometry.rows_per_bank =
        std::uint32_t(p.get_u64("geometry.rows_per_bank", 4096));
    c.geometry.cols_per_row =
        std::uint32_t(p.get_u64("geometry.cols_per_row", 1024));
    c.geometry.bytes_per_column =
        std::uint32_t(p.get_u64("geometry.bytes_per_column", 8));

    c.timing = TimingParams::from_ns(
        p.get_double("timing.tras_ns", 32.0), p.get_double("timing.trp_ns", 13.75),
        p.get_double("timing.tck_ns", 1.25), p.get_double("timing.trefi_ns", 7812.5),
        p.get_double("timing.trefw_ms", 64.0) * 1e6,
        p.get_double("timing.trfc_ns", 260.0),
        std::uint32_t(p.get_u64("timing.read_burst_cycles", 4)),
        std::uint32_t(p.get_u64("timing.write_burst_cycles", 4)));

    DeviceEnergyProfile& e = c.energy;
    e.vdd = p.get_double("energy.vdd", e.vdd);
    e.idd_active_standby_ma =
        p.get_double("energy.idd_active_standby_ma", e.idd_active_standby_ma);
    e.idd_precharge_standby_ma = p.get_double("energy.idd_precharge_standby_ma",
                                              e.idd_precharge_standby_ma);
    e.idd_powerdown_ma =
        p.get_double("energy.idd_powerdown_ma", e.idd_powerdown_ma);
    e.act_pre_energy_nj =
        p.get_double("energy.act_pre_energy_nj", e.act_pre_energy_nj);
    e.read_burst_energy_nj =
        p.get_double("energy.read_burst_energy_nj", e.read_burst_energy_nj);
    e.write_burst_energy_nj =
        p.get_double("energy.write_burst_energy_nj", e.write_burst_energy_nj);
    e.refresh_energy_nj =
        p.get_double("energy.refresh_energy_nj", e.refresh_energy_nj);
    e.odt_energy_per_burst_nj =
        p.get_double("energy.odt_energy_per_burst_nj", e.odt_energy_per_burst_nj);
    e.sleep_leakage_nw = p.get_double("energy.sleep_leakage_nw", e.sleep_leakage_nw);
    e.controller_power_uw =
        p.get_double("energy.controller_power_uw", e.controller_power_uw);
    e.wake_transient_pj =
        p.get_double("energy.wake_transient_pj", e.wake_transient_pj);

    VariationParams& v = c.variation;
    v.mean = p.get_double("variation.mean", v.mean);
    v.sigma_over_mean = p.get_double("variation.sigma_over_mean", v.sigma_over_mean);
    v.systematic_fraction =
        p.get_double("variation.systematic_fraction", v.systematic_fraction);
    v.phi = p.get_double("variation.phi", v.phi);
    v.seed = p.get_u64("variation.seed", 1);
    c.grid_rows = std::uint32_t(p.get_u64("variation.grid_rows", 64));
    c.grid_cols = std::uint32_t(p.get_u64("variation.grid_cols", 64));
    c.victim_threshold = p.get_double("variation.victim_threshold", 0.05);
    c.derate.delta_tras_max =
        ns_to_ps(p.get_double("variation.delta_tras_ns", 18.0));
    c.derate.severity_max = p.get_double("variation.severity_max", 0.15);
    c.map_path = p.get_string("variation.map_file", "");

    c.ber = p.get_double("refresh.ber", 4e-9);
    c.weak_rows_path = p.get_string("refresh.weak_rows_file", "");

    EngineParams& ep = c.engine;
    ep.trie_capacity_fraction =
        p.get_double("remap.trie_capacity_fraction", ep.trie_capacity_fraction);
    ep.node_footprint_bytes = std::uint32_t(
        p.get_u64("remap.node_footprint_bytes", ep.node_footprint_bytes));
    ep.occupancy_reopen_fraction = p.get_double("remap.occupancy_reopen_fraction",
                                                ep.occupancy_reopen_fraction);
    ep.trie_reopen_fraction =
        p.get_double("remap.trie_reopen_fraction", ep.trie_reopen_fraction);
    ep.interrupt_stall_cycles = std::uint32_t(
        p.get_u64("remap.interrupt_stall_cycles", ep.interrupt_stall_cycles));
    ep.log_search_cycles =
        std::uint32_t(p.get_u64("remap.log_search_cycles", ep.log_search_cycles));
    ep.occupancy_check_interval_cycles =
        p.get_u64("remap.occupancy_check_interval_cycles",
                  ep.occupancy_check_interval_cycles);
    ep.trie_capacity_bytes_override = p.get_u64(
        "remap.trie_capacity_bytes_override", ep.trie_capacity_bytes_override);
    c.copy_cost_override_ps =
        ns_to_ps(p.get_double("remap.copy_cost_override_ns", 0.0));

    c.lp_idle_threshold_cycles = p.get_u64("lp.idle_threshold_cycles", 100);

    p.reject_unknown();
    c.validate();
    return c;
  }

  static ScenarioConfig from_file(const std::string& path)
  {
    ConfigParser p = ConfigParser::from_file(path);
    return from_parser(p);
  }
};

}  // namespace vardram
