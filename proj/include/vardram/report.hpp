#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "energy.hpp"
#include "types.hpp"

namespace vardram {

constexpr int report_schema_version = 1;

struct BankEnergyRow {
  std::uint32_t channel = 0;
  std::uint32_t rank = 0;
  std::uint32_t bank = 0;
  EnergyBreakdown energy;
};

struct RunReport {
  int schema_version = report_schema_version;
  std::string scenario;
  std::string trace_file;
  std::uint64_t seed = 0;
  std::string geometry_fingerprint;
  std::string trace_fingerprint;

  std::uint64_t requests = 0;
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t span_cycles = 0;
  std::uint64_t span_ps = 0;
  double avg_latency_ns = 0.0;
  double max_latency_ns = 0.0;
  std::uint64_t row_hits = 0;
  std::uint64_t row_misses = 0;

  std::uint64_t refresh_count = 0;
  std::uint64_t refresh_skipped_gated = 0;

  EnergyBreakdown totals;
  double controller_nj = 0.0;
  std::vector<BankEnergyRow> banks;

  std::uint64_t trie_peak_bytes = 0;
  std::uint64_t occupancy_trie_peak_bytes = 0;
  std::uint64_t migration_copies = 0;
  std::uint64_t migration_bytes = 0;
  double migration_bandwidth_fraction = 0.0;
  std::uint64_t interrupts = 0;
  std::uint64_t collisions = 0;
  std::uint64_t log_hits = 0;
  std::uint64_t weak_redirect_hits = 0;
  std::uint64_t translation_stall_cycles = 0;
  std::uint64_t migration_stall_cycles = 0;
  std::uint64_t weak_rows_installed = 0;
  double weak_remap_upfront_ns = 0.0;
  std::uint64_t gate_transitions = 0;
  std::uint64_t gated_time_ps = 0;
  std::uint64_t reverse_migrations = 0;
  std::uint64_t reopen_events = 0;
  std::string flag_final = "00";

  double total_nj() const { return totals.total_nj(); }

  nlohmann::json to_json() const
  {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["scenario"] = scenario;
    j["trace_file"] = trace_file;
    j["seed"] = seed;
    j["geometry_fingerprint"] = geometry_fingerprint;
    j["trace_fingerprint"] = trace_fingerprint;
    j["requests"] = requests;
    j["reads"] = reads;
    j["writes"] = writes;
    j["span_cycles"] = span_cycles;
    j["span_ps"] = span_ps;
    j["avg_latency_ns"] = avg_latency_ns;
    j["max_latency_ns"] = max_latency_ns;
    j["row_hits"] = row_hits;
    j["row_misses"] = row_misses;
    j["refresh_count"] = refresh_count;
    j["refresh_skipped_gated"] = refresh_skipped_gated;
    j["energy"] = energy_json(totals);
    j["energy"]["total_nj"] = totals.total_nj();
    j["controller_nj"] = controller_nj;
    nlohmann::json rows = nlohmann::json::array();
    for (const BankEnergyRow& r : banks) {
      nlohmann::json b = energy_json(r.energy);
      b["channel"] = r.channel;
      b["rank"] = r.rank;
      b["bank"] = r.bank;
      b["total_nj"] = r.energy.total_nj();
      rows.push_back(b);
    }
    j["banks"] = rows;
    j["trie_peak_bytes"] = trie_peak_bytes;
    j["occupancy_trie_peak_bytes"] = occupancy_trie_peak_bytes;
    j["migration_copies"] = migration_copies;
    j["migration_bytes"] = migration_bytes;
    j["migration_bandwidth_fraction"] = migration_bandwidth_fraction;
    j["interrupts"] = interrupts;
    j["collisions"] = collisions;
    j["log_hits"] = log_hits;
    j["weak_redirect_hits"] = weak_redirect_hits;
    j["translation_stall_cycles"] = translation_stall_cycles;
    j["migration_stall_cycles"] = migration_stall_cycles;
    j["weak_rows_installed"] = weak_rows_installed;
    j["weak_remap_upfront_ns"] = weak_remap_upfront_ns;
    j["gate_transitions"] = gate_transitions;
    j["gated_time_ps"] = gated_time_ps;
    j["reverse_migrations"] = reverse_migrations;
    j["reopen_events"] = reopen_events;
    j["flag_final"] = flag_final;
    return j;
  }

  std::string to_json_text() const { return to_json().dump(2) + "\n"; }

  static RunReport from_json(const nlohmann::json& j)
  {
    RunReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != report_schema_version)
      throw ParseError("report: unsupported schema_version " +
                       std::to_string(r.schema_version));
    r.scenario = j.at("scenario").get<std::string>();
    r.trace_file = j.at("trace_file").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.geometry_fingerprint = j.at("geometry_fingerprint").get<std::string>();
    r.trace_fingerprint = j.at("trace_fingerprint").get<std::string>();
    r.requests = j.at("requests").get<std::uint64_t>();
    r.reads = j.at("reads").get<std::uint64_t>();
    r.writes = j.at("writes").get<std::uint64_t>();
    r.span_cycles = j.at("span_cycles").get<std::uint64_t>();
    r.span_ps = j.at("span_ps").get<std::uint64_t>();
    r.avg_latency_ns = j.at("avg_latency_ns").get<double>();
    r.max_latency_ns = j.at("max_latency_ns").get<double>();
    r.row_hits = j.at("row_hits").get<std::uint64_t>();
    r.row_misses = j.at("row_misses").get<std::uint64_t>();
    r.refresh_count = j.at("refresh_count").get<std::uint64_t>();
    r.refresh_skipped_gated = j.at("refresh_skipped_gated").get<std::uint64_t>();
    r.totals = energy_from_json(j.at("energy"));
    r.controller_nj = j.at("controller_nj").get<double>();
    for (const auto& b : j.at("banks")) {
      BankEnergyRow row;
      row.channel = b.at("channel").get<std::uint32_t>();
      row.rank = b.at("rank").get<std::uint32_t>();
      row.bank = b.at("bank").get<std::uint32_t>();
      row.energy = energy_from_json(b);
      r.banks.push_back(row);
    }
    r.trie_peak_bytes = j.at("trie_peak_bytes").get<std::uint64_t>();
    r.occupancy_trie_peak_bytes =
        j.at("occupancy_trie_peak_bytes").get<std::uint64_t>();
    r.migration_copies = j.at("migration_copies").get<std::uint64_t>();
    r.migration_bytes = j.at("migration_bytes").get<std::uint64_t>();
    r.migration_bandwidth_fraction =
        j.at("migration_bandwidth_fraction").get<double>();
    r.interrupts = j.at("interrupts").get<std::uint64_t>();
    r.collisions = j.at("collisions").get<std::uint64_t>();
    r.log_hits = j.at("log_hits").get<std::uint64_t>();
    r.weak_redirect_hits = j.at("weak_redirect_hits").get<std::uint64_t>();
    r.translation_stall_cycles =
        j.at("translation_stall_cycles").get<std::uint64_t>();
    r.migration_stall_cycles = j.at("migration_stall_cycles").get<std::uint64_t>();
    r.weak_rows_installed = j.at("weak_rows_installed").get<std::uint64_t>();
    r.weak_remap_upfront_ns = j.at("weak_remap_upfront_ns").get<double>();
    r.gate_transitions = j.at("gate_transitions").get<std::uint64_t>();
    r.gated_time_ps = j.at("gated_time_ps").get<std::uint64_t>();
    r.reverse_migrations = j.at("reverse_migrations").get<std::uint64_t>();
    r.reopen_events = j.at("reopen_events").get<std::uint64_t>();
    r.flag_final = j.at("flag_final").get<std::string>();
    return r;
  }

  static RunReport from_file(const std::string& path)
  {
    std::ifstream in(path);
    if (!in) throw ParseError("report: cannot open '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("report: bad JSON in '" + path + "': " + e.what());
    }
    return from_json(j);
  }

  // One row per bank, totals last.
  std::string to_csv() const
  {
    std::ostringstream out;
    out << "channel,rank,bank,background_nj,act_pre_nj,burst_nj,refresh_nj,"
           "odt_nj,overhead_nj,total_nj\n";
    for (const BankEnergyRow& r : banks) {
      out << r.channel << ',' << r.rank << ',' << r.bank << ','
          << fmt(r.energy.background_nj) << ',' << fmt(r.energy.act_pre_nj) << ','
          << fmt(r.energy.burst_nj) << ',' << fmt(r.energy.refresh_nj) << ','
          << fmt(r.energy.odt_nj) << ',' << fmt(r.energy.overhead_nj) << ','
          << fmt(r.energy.total_nj()) << '\n';
    }
    out << "total,," << ',' << fmt(totals.background_nj) << ','
        << fmt(totals.act_pre_nj) << ',' << fmt(totals.burst_nj) << ','
        << fmt(totals.refresh_nj) << ',' << fmt(totals.odt_nj) << ','
        << fmt(totals.overhead_nj) << ',' << fmt(totals.total_nj()) << '\n';
    return out.str();
  }

private:
  static std::string fmt(double v)
  {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  static nlohmann::json energy_json(const EnergyBreakdown& e)
  {
    nlohmann::json j;
    j["background_nj"] = e.background_nj;
    j["act_pre_nj"] = e.act_pre_nj;
    j["burst_nj"] = e.burst_nj;
    j["refresh_nj"] = e.refresh_nj;
    j["odt_nj"] = e.odt_nj;
    j["overhead_nj"] = e.overhead_nj;
    return j;
  }

  static EnergyBreakdown energy_from_json(const nlohmann::json& j)
  {
    EnergyBreakdown e;
    e.background_nj = j.at("background_nj").get<double>();
    e.act_pre_nj = j.at("act_pre_nj").get<double>();
    e.burst_nj = j.at("burst_nj").get<double>();
    e.refresh_nj = j.at("refresh_nj").get<double>();
    e.odt_nj = j.at("odt_nj").get<double>();
    e.overhead_nj = j.at("overhead_nj").get<double>();
    return e;
  }
};

struct CompareRow {
  std::string metric;
  double baseline = 0.0;
  double candidate = 0.0;
  double saved_pct = 0.0;  // (baseline - candidate) / baseline * 100
};

struct ComparisonReport {
  std::vector<CompareRow> rows;

  const CompareRow* find(const std::string& metric) const
  {
    for (const CompareRow& r : rows)
      if (r.metric == metric) return &r;
    return nullptr;
  }

  nlohmann::json to_json() const
  {
    nlohmann::json arr = nlohmann::json::array();
    for (const CompareRow& r : rows) {
      nlohmann::json j;
      j["metric"] = r.metric;
      j["baseline"] = r.baseline;
      j["candidate"] = r.candidate;
      j["saved_pct"] = r.saved_pct;
      arr.push_back(j);
    }
    nlohmann::json out;
    out["schema_version"] = report_schema_version;
    out["rows"] = arr;
    return out;
  }

  std::string to_text() const
  {
    std::ostringstream out;
    out << "metric                         baseline        candidate       saved%\n";
    for (const CompareRow& r : rows) {
      char line[160];
      std::snprintf(line, sizeof line, "%-28s %15.6g %15.6g %9.3f\n",
                    r.metric.c_str(), r.baseline, r.candidate, r.saved_pct);
      out << line;
    }
    return out.str();
  }
};

inline double saved_pct(double baseline, double candidate)
{
  if (baseline == 0.0) return candidate == 0.0 ? 0.0 : -100.0;
  return (baseline - candidate) / baseline * 100.0;
}

// Percentage deltas make sense only against the same workload on the same
// device, so the fingerprints must match.
inline ComparisonReport compare(const RunReport& baseline,
                                const RunReport& candidate)
{
  if (baseline.trace_fingerprint != candidate.trace_fingerprint)
    throw ConfigError("compare: trace fingerprints differ");
  if (baseline.geometry_fingerprint != candidate.geometry_fingerprint)
    throw ConfigError("compare: geometry fingerprints differ");
  ComparisonReport c;
  auto add = [&](const std::string& name, double b, double k) {
    c.rows.push_back({name, b, k, saved_pct(b, k)});
  };
  add("total_nj", baseline.total_nj(), candidate.total_nj());
  add("background_nj", baseline.totals.background_nj, candidate.totals.background_nj);
  add("act_pre_nj", baseline.totals.act_pre_nj, candidate.totals.act_pre_nj);
  add("burst_nj", baseline.totals.burst_nj, candidate.totals.burst_nj);
  add("refresh_nj", baseline.totals.refresh_nj, candidate.totals.refresh_nj);
  add("odt_nj", baseline.totals.odt_nj, candidate.totals.odt_nj);
  add("overhead_nj", baseline.totals.overhead_nj, candidate.totals.overhead_nj);
  add("avg_latency_ns", baseline.avg_latency_ns, candidate.avg_latency_ns);
  add("max_latency_ns", baseline.max_latency_ns, candidate.max_latency_ns);
  add("refresh_count", double(baseline.refresh_count), double(candidate.refresh_count));
  add("span_cycles", double(baseline.span_cycles), double(candidate.span_cycles));
  return c;
}

}  // namespace vardram
