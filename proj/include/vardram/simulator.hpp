#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "address.hpp"
#include "bank.hpp"
#include "config.hpp"
#include "energy.hpp"
#include "refresh.hpp"
#include "remap.hpp"
#include "report.hpp"
#include "trace.hpp"
#include "types.hpp"
#include "variation.hpp"

namespace vardram {

inline std::string fingerprint_hex(std::uint64_t h)
{
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

inline std::string geometry_fingerprint(const Geometry& g)
{
  std::uint64_t h = 0x9ae16a3b2f90404full;
  for (std::uint64_t v : {std::uint64_t(g.channels), std::uint64_t(g.ranks_per_channel),
                          std::uint64_t(g.banks_per_rank), std::uint64_t(g.rows_per_bank),
                          std::uint64_t(g.cols_per_row), std::uint64_t(g.bytes_per_column)})
    h = splitmix64(h ^ v);
  return fingerprint_hex(h);
}

inline std::string trace_fingerprint(const std::vector<MemoryRequest>& reqs)
{
  std::uint64_t h = 0xc2b2ae3d27d4eb4full;
  for (const MemoryRequest& r : reqs) {
    h = splitmix64(h ^ r.issue_cycle);
    h = splitmix64(h ^ std::uint64_t(r.op == MemOp::Write));
    h = splitmix64(h ^ r.address);
    h = splitmix64(h ^ r.payload_tag);
  }
  return fingerprint_hex(h);
}

// Trace-driven controller model over the bank/energy/remap primitives. One
// instance runs one trace; the remapper and bank states carry history, so a
// second run would not start from silicon reset.
class Simulator {
public:
  explicit Simulator(const ScenarioConfig& cfg) : cfg_(cfg), g_(cfg.geometry)
  {
    cfg_.validate();
    check_key_width(g_);
    if (cfg_.weak_row_remap && cfg_.scenario != Scenario::Var)
      throw ConfigError("sim: weak-row remapping needs the translation hardware");
    if (cfg_.refresh_multiplier > 1 && !cfg_.weak_row_remap)
      throw ConfigError("sim: the extended refresh window needs weak-row remapping");

    if (cfg_.variation_enabled()) {
      VariationMap map = load_map();
      matrix_ = classify_banks(map, cfg_.victim_threshold, cfg_.victim_count,
                               cfg_.timing, cfg_.derate);
    } else {
      matrix_.ranks = std::uint32_t(g_.total_ranks());
      matrix_.banks = g_.banks_per_rank;
      matrix_.severity.assign(std::size_t(matrix_.ranks) * matrix_.banks, 0.0);
    }

    const std::size_t nbanks =
        std::size_t(g_.channels) * g_.ranks_per_channel * g_.banks_per_rank;
    banks_.assign(nbanks, BankState{});
    for (BankState& b : banks_) b.timing = cfg_.timing;
    for (std::size_t i = 0; i < matrix_.pairs.size(); ++i) {
      const PairEntry& p = matrix_.pairs[i];
      std::uint32_t ch = p.victim_rank / g_.ranks_per_channel;
      banks_[bank_idx(ch, p.victim_rank % g_.ranks_per_channel, p.victim_bank)]
          .timing = matrix_.victim_timing[i];
    }

    counters_ = EnergyCounters(cfg_.energy, g_.banks_per_rank, nbanks);
    copy_ps_ = cfg_.copy_cost_ps();
    copy_energy_nj_ =
        cfg_.energy.read_burst_energy_nj + cfg_.energy.write_burst_energy_nj;

    if (cfg_.gating_enabled()) {
      EngineParams ep = cfg_.engine;
      ep.copy_stall_cycles =
          std::uint32_t((copy_ps_ + cfg_.timing.tck - 1) / cfg_.timing.tck);
      engine_.emplace(g_, matrix_, ep);
      if (cfg_.weak_row_remap) {
        std::vector<std::uint64_t> rows = load_weak_rows();
        weak_installed_ = engine_->install_weak_rows(rows);
        weak_upfront_ns_ = double(weak_installed_) * ps_to_ns(copy_ps_);
      }
    }
  }

  const RemapEngine* engine() const { return engine_ ? &*engine_ : nullptr; }
  RemapEngine* engine() { return engine_ ? &*engine_ : nullptr; }
  const VariationMatrix& matrix() const { return matrix_; }
  const BankState& bank(std::uint32_t ch, std::uint32_t rank, std::uint32_t b) const
  {
    return banks_[bank_idx(ch, rank, b)];
  }
  std::uint64_t weak_rows_installed() const { return weak_installed_; }

  RunReport run(const std::vector<MemoryRequest>& trace,
                const std::string& trace_label)
  {
    if (ran_) throw OrderError("sim: one run per simulator instance");
    ran_ = true;
    check_trace_addresses(trace, g_);
    trace_ = &trace;
    init_run_state();

    if (engine_ && cfg_.gating_mode == GatingMode::StaticClose &&
        !matrix_.pairs.empty()) {
      // Manufacturer-programmed close: nothing is resident yet, so the
      // migration queue is empty and the victims gate at time zero.
      engine_->begin_forward_migration();
      finish_migration(0);
      gating_started_ = true;
    }

    time_ps now = 0;
    while (true) {
      pump(now);
      maybe_start_gating(now);
      bool progress = refresh_due(now);
      if (engine_) {
        MigrationPhase ph = engine_->phase();
        if (ph != MigrationPhase::None && !staged_)
          staged_ = engine_->next_copy();
        if (engine_->phase() != MigrationPhase::None && !staged_ &&
            engine_->pending_copies() == 0) {
          finish_migration(now);
          progress = true;
        }
      }
      for (std::uint32_t ch = 0; ch < g_.channels; ++ch)
        progress = issue_channel(ch, now) || progress;
      if (cfg_.lp_mode) progress = lp_attempt(now) || progress;
      if (engine_ && now >= next_occ_tick_) {
        while (next_occ_tick_ <= now) next_occ_tick_ += occ_step_;
        handle_occupancy(now);
      }
      if (!progress) {
        time_ps nxt = next_event(now);
        if (nxt == no_event) break;
        if (nxt <= now) throw OrderError("sim: event loop failed to advance");
        now = nxt;
      }
    }
    if (engine_ && engine_->phase() != MigrationPhase::None)
      throw OrderError("sim: migration still pending at end of run");

    if (horizon_ps_ > span_) span_ = horizon_ps_;
    for (std::size_t b = 0; b < banks_.size(); ++b) accrue_to(b, span_);
    counters_.set_run_span(span_, cfg_.scenario == Scenario::Var);
    final_verify();
    return build_report(trace, trace_label);
  }

private:
  static constexpr time_ps no_event = std::numeric_limits<time_ps>::max();

  // ---- construction helpers ----------------------------------------------

  VariationMap load_map() const
  {
    if (!cfg_.map_path.empty()) {
      std::ifstream in(cfg_.map_path);
      if (!in) throw ParseError("sim: cannot open map file " + cfg_.map_path);
      VariationMap map = read_variation_map(in);
      if (map.ranks != g_.total_ranks() || map.banks != g_.banks_per_rank)
        throw ConfigError("sim: variation map floorplan does not match geometry");
      return map;
    }
    return generate_variation_map(cfg_.variation, cfg_.grid_rows, cfg_.grid_cols,
                                  std::uint32_t(g_.total_ranks()),
                                  g_.banks_per_rank);
  }

  std::vector<std::uint64_t> load_weak_rows() const
  {
    if (!cfg_.weak_rows_path.empty()) {
      std::ifstream in(cfg_.weak_rows_path);
      if (!in)
        throw ParseError("sim: cannot open weak-row file " + cfg_.weak_rows_path);
      std::vector<std::uint64_t> rows = read_weak_rows(in);
      std::uint64_t total =
          g_.total_ranks() * g_.banks_per_rank * g_.rows_per_bank;
      for (std::uint64_t id : rows)
        if (id >= total) throw ConfigError("sim: weak row id beyond geometry");
      return rows;
    }
    double p = weak_row_probability(cfg_.ber, cells_per_row_of(g_));
    return sample_weak_rows(g_, p, cfg_.seed);
  }

  // ---- indexing ------------------------------------------------------------

  std::size_t bank_idx(std::uint32_t ch, std::uint32_t rank, std::uint32_t bank) const
  {
    return (std::size_t(ch) * g_.ranks_per_channel + rank) * g_.banks_per_rank +
           bank;
  }

  std::size_t rank_idx(std::uint32_t ch, std::uint32_t rank) const
  {
    return std::size_t(ch) * g_.ranks_per_channel + rank;
  }

  std::uint64_t slot_id(const DecodedAddress& d) const
  {
    return (std::uint64_t(d.channel) << 32) | pack_addr_key(d, g_);
  }

  time_ps tck() const { return cfg_.timing.tck; }

  time_ps arrival_ps(const MemoryRequest& r) const
  {
    return time_ps(r.issue_cycle) * tck();
  }

  void note_span(time_ps t)
  {
    if (t > span_) span_ = t;
  }

  void accrue_to(std::size_t b, time_ps t)
  {
    if (t <= accrued_[b]) return;
    counters_.accrue_background(b, banks_[b].power, t - accrued_[b]);
    accrued_[b] = t;
  }

  void init_run_state()
  {
    queues_.assign(banks_.size(), {});
    qcount_.assign(std::size_t(g_.channels) * g_.ranks_per_channel, 0);
    queued_total_ = 0;
    bus_free_.assign(g_.channels, 0);
    rr_.assign(g_.channels, 0);
    accrued_.assign(banks_.size(), 0);
    rank_lp_.assign(qcount_.size(), false);
    rank_idle_since_.assign(qcount_.size(), 0);
    trace_idx_ = 0;
    horizon_ps_ = time_ps(cfg_.run_length_cycles) * tck();
    period_ = cfg_.refresh_config().period();
    next_ref_tick_ = period_;
    occ_step_ =
        engine_ ? time_ps(engine_->params().occupancy_check_interval_cycles) * tck()
                : 0;
    next_occ_tick_ = occ_step_ == 0 ? no_event : occ_step_;
    span_ = 0;
  }

  // ---- arrivals -------------------------------------------------------------

  void pump(time_ps now)
  {
    const std::vector<MemoryRequest>& trace = *trace_;
    while (trace_idx_ < trace.size() && arrival_ps(trace[trace_idx_]) <= now) {
      const MemoryRequest& r = trace[trace_idx_++];
      DecodedAddress d = decode_address(r.address, g_);
      queues_[bank_idx(d.channel, d.rank, d.bank)].push_back(&r);
      ++qcount_[rank_idx(d.channel, d.rank)];
      ++queued_total_;
      wake_rank_if_lp(d.channel, d.rank, now);
    }
  }

  void wake_rank_if_lp(std::uint32_t ch, std::uint32_t rank, time_ps now)
  {
    std::size_t r = rank_idx(ch, rank);
    if (!rank_lp_[r]) return;
    rank_lp_[r] = false;
    for (std::uint32_t b = 0; b < g_.banks_per_rank; ++b) {
      std::size_t bi = bank_idx(ch, rank, b);
      if (banks_[bi].power != BankPower::PoweredDownLp) continue;
      accrue_to(bi, now);
      banks_[bi].set_power_state(BankPower::ActiveIdle, now);
    }
  }

  // ---- gating lifecycle -------------------------------------------------

  void maybe_start_gating(time_ps now)
  {
    if (!engine_ || gating_started_ || matrix_.pairs.empty()) return;
    if (engine_->gating_suppressed()) {
      gating_started_ = true;
      return;
    }
    if (cfg_.gating_mode == GatingMode::DynamicClose &&
        now < time_ps(cfg_.gating_trigger_cycle) * tck())
      return;
    engine_->begin_forward_migration();
    gating_started_ = true;
  }

  void finish_migration(time_ps now)
  {
    std::vector<DecodedAddress> victims = engine_->complete_migration();
    for (const DecodedAddress& v : victims) gate_bank(v, now);
    handle_occupancy(now);
  }

  void gate_bank(const DecodedAddress& a, time_ps now)
  {
    std::size_t bi = bank_idx(a.channel, a.rank, a.bank);
    BankState& b = banks_[bi];
    time_ps t = std::max(now, b.busy_until);
    if (b.power == BankPower::RowOpen) {
      accrue_to(bi, t);
      t = b.apply(CmdType::Pre, 0, t);
      bus_free_[a.channel] = std::max(bus_free_[a.channel], t) + tck();
    }
    t = std::max(t, b.busy_until);
    accrue_to(bi, t);
    b.set_power_state(BankPower::GatedOff, t);
    counters_.accrue_event(bi, EnergyEvent::GateTransient);
    note_span(t);
  }

  void wake_bank(const DecodedAddress& a, time_ps now)
  {
    std::size_t bi = bank_idx(a.channel, a.rank, a.bank);
    BankState& b = banks_[bi];
    if (b.power != BankPower::GatedOff)
      throw OrderError("sim: waking a bank that is not gated");
    accrue_to(bi, now);
    b.set_power_state(BankPower::ActiveIdle, now);
    counters_.accrue_event(bi, EnergyEvent::GateTransient);
    rank_lp_[rank_idx(a.channel, a.rank)] = false;
  }

  void handle_occupancy(time_ps now)
  {
    OccupancyDecision d = engine_->occupancy_check();
    if (d.action == OccupancyAction::ReverseMigrate) {
      for (const DecodedAddress& a : engine_->begin_reverse_migration(d.pair_index))
        wake_bank(a, now);
      ++reverse_migrations_;
    } else if (d.action == OccupancyAction::ReopenAll) {
      if (engine_->any_pair_gated() || engine_->phase() == MigrationPhase::Forward) {
        for (const DecodedAddress& a : engine_->begin_reopen_all())
          wake_bank(a, now);
      } else {
        engine_->suppress_gating();
      }
      ++reopen_events_;
    }
  }

  // ---- refresh --------------------------------------------------------------

  bool refresh_allowed(time_ps tick) const
  {
    if (horizon_ps_ > 0) return tick <= horizon_ps_;
    return other_work();
  }

  bool other_work() const
  {
    return trace_idx_ < trace_->size() || queued_total_ > 0 ||
           (engine_ && engine_->phase() != MigrationPhase::None);
  }

  bool refresh_due(time_ps now)
  {
    bool any = false;
    while (next_ref_tick_ <= now && refresh_allowed(next_ref_tick_)) {
      time_ps tick = next_ref_tick_;
      next_ref_tick_ += period_;
      for (std::uint32_t ch = 0; ch < g_.channels; ++ch)
        for (std::uint32_t rank = 0; rank < g_.ranks_per_channel; ++rank)
          refresh_rank(ch, rank, tick);
      any = true;
    }
    return any;
  }

  void refresh_rank(std::uint32_t ch, std::uint32_t rank, time_ps tick)
  {
    std::uint32_t bus_slots = 1;  // the all-bank refresh command itself
    bool refreshed = false;
    for (std::uint32_t b = 0; b < g_.banks_per_rank; ++b) {
      std::size_t bi = bank_idx(ch, rank, b);
      BankState& bank = banks_[bi];
      if (bank.power == BankPower::GatedOff) {
        ++refresh_skipped_gated_;
        continue;
      }
      time_ps t = std::max(tick, bank.busy_until);
      if (bank.power == BankPower::PoweredDownLp) {
        // Woken for the refresh burst; the idle timer keeps running, so the
        // rank drops back to LP as soon as tRFC is over.
        accrue_to(bi, t);
        bank.set_power_state(BankPower::ActiveIdle, t);
        rank_lp_[rank_idx(ch, rank)] = false;
      }
      if (bank.power == BankPower::RowOpen) {
        accrue_to(bi, t);
        t = bank.apply(CmdType::Pre, 0, t);
        ++bus_slots;
      }
      t = std::max(t, bank.busy_until);
      bank.apply(CmdType::Refresh, 0, t);
      counters_.accrue_event(bi, EnergyEvent::Refresh);
      note_span(bank.busy_until);
      refreshed = true;
    }
    if (refreshed) {
      ++refresh_count_;
      bus_free_[ch] =
          std::max(bus_free_[ch], tick) + time_ps(bus_slots) * tck();
    }
  }

  // ---- issue path -------------------------------------------------------

  bool issue_channel(std::uint32_t ch, time_ps now)
  {
    const std::size_t per_ch = std::size_t(g_.ranks_per_channel) * g_.banks_per_rank;
    const std::size_t base = std::size_t(ch) * per_ch;
    for (std::size_t off = 0; off < per_ch; ++off) {
      std::size_t pos = (rr_[ch] + off) % per_ch;
      std::deque<const MemoryRequest*>& q = queues_[base + pos];
      if (q.empty()) continue;
      const MemoryRequest* req = q.front();
      q.pop_front();
      --qcount_[rank_idx(ch, std::uint32_t(pos / g_.banks_per_rank))];
      --queued_total_;
      rr_[ch] = (pos + 1) % per_ch;
      serve(*req, ch, now);
      return true;
    }
    if (staged_ && staged_->channel == ch) {
      CopyJob job = *staged_;
      staged_.reset();
      execute_copy(job, now);
      return true;
    }
    return false;
  }

  void serve(const MemoryRequest& req, std::uint32_t ch, time_ps now)
  {
    DecodedAddress logical = decode_address(req.address, g_);
    AccessPlan plan;
    if (engine_)
      plan = engine_->plan_access(ch, req.op, logical);
    else
      plan.physical = logical;
    total_stall_cycles_ += plan.stall_cycles;
    if (plan.relocation) {
      execute_copy(*plan.relocation, now);
      ++relocations_;
    }

    wake_rank_if_lp(ch, plan.physical.rank, now);
    std::size_t bi = bank_idx(ch, plan.physical.rank, plan.physical.bank);
    BankState& bank = banks_[bi];
    if (bank.power == BankPower::GatedOff)
      throw TranslationError("sim: request routed to a gated bank");
    if (cfg_.refresh_multiplier > 1 && engine_ &&
        engine_->is_weak_row(ch, plan.physical.rank, plan.physical.bank,
                             plan.physical.row))
      throw TranslationError("sim: weak row touched under the extended window");

    time_ps t0 =
        std::max(now, bus_free_[ch]) + time_ps(plan.stall_cycles) * tck();
    bool hit = bank.power == BankPower::RowOpen && bank.open_row &&
               *bank.open_row == plan.physical.row;
    std::uint32_t cmds =
        hit ? 1 : (bank.power == BankPower::RowOpen ? 3 : 2);
    bus_free_[ch] = t0 + time_ps(cmds) * tck();
    if (hit)
      ++row_hits_;
    else
      ++row_misses_;

    time_ps t = std::max(t0, bank.busy_until);
    if (bank.power == BankPower::RowOpen && *bank.open_row != plan.physical.row) {
      accrue_to(bi, t);
      t = bank.apply(CmdType::Pre, 0, t);
    }
    if (bank.power == BankPower::ActiveIdle) {
      accrue_to(bi, t);
      t = bank.apply(CmdType::Act, plan.physical.row, t);
      counters_.accrue_event(bi, EnergyEvent::ActPre);
    }
    time_ps done = bank.apply(
        req.op == MemOp::Read ? CmdType::Read : CmdType::Write,
        plan.physical.col, t);
    counters_.accrue_event(bi, req.op == MemOp::Read ? EnergyEvent::ReadBurst
                                                     : EnergyEvent::WriteBurst);
    note_span(done);

    double lat_ns = ps_to_ns(done - arrival_ps(req));
    latency_sum_ns_ += lat_ns;
    if (lat_ns > latency_max_ns_) latency_max_ns_ = lat_ns;
    if (req.op == MemOp::Read)
      ++reads_;
    else
      ++writes_;

    std::size_t ri = rank_idx(ch, plan.physical.rank);
    rank_idle_since_[ri] = std::max(rank_idle_since_[ri], done);
    std::size_t rl = rank_idx(ch, logical.rank);
    rank_idle_since_[rl] = std::max(rank_idle_since_[rl], done);

    if (req.op == MemOp::Write) {
      content_[slot_id(logical)] = req.payload_tag;
      phys_[slot_id(plan.physical)] = req.payload_tag;
    } else {
      auto want = content_.find(slot_id(logical));
      if (want != content_.end()) {
        auto got = phys_.find(slot_id(plan.physical));
        if (got == phys_.end() || got->second != want->second)
          throw TranslationError("sim: read returned the wrong payload");
      }
    }

    if (engine_) {
      sample_tries();
      if (plan.new_occupancy) handle_occupancy(now);
    }
  }

  // Copies are a row-buffer-to-row-buffer primitive, not ACT/RD/WR commands:
  // both banks block for the copy cost and the energy lands in the gating
  // overhead bucket so burst counters stay comparable across scenarios.
  void execute_copy(const CopyJob& job, time_ps now)
  {
    std::uint32_t ch = job.from.channel;
    wake_rank_if_lp(ch, job.from.rank, now);
    wake_rank_if_lp(ch, job.to.rank, now);
    std::size_t fi = bank_idx(ch, job.from.rank, job.from.bank);
    std::size_t ti = bank_idx(ch, job.to.rank, job.to.bank);
    if (banks_[fi].power == BankPower::GatedOff ||
        banks_[ti].power == BankPower::GatedOff)
      throw TranslationError("sim: migration copy against a gated bank");
    time_ps t = std::max(std::max(now, bus_free_[ch]),
                         std::max(banks_[fi].busy_until, banks_[ti].busy_until));
    bus_free_[ch] = t + 2 * tck();
    banks_[fi].busy_until = t + copy_ps_;
    banks_[ti].busy_until = t + copy_ps_;
    counters_.accrue_copy_overhead(ti, copy_energy_nj_);
    note_span(t + copy_ps_);

    auto it = phys_.find(slot_id(job.from));
    if (it == phys_.end())
      throw TranslationError("sim: copy from a slot never written");
    phys_[slot_id(job.to)] = it->second;

    time_ps end = t + copy_ps_;
    std::size_t rf = rank_idx(ch, job.from.rank);
    std::size_t rt = rank_idx(ch, job.to.rank);
    rank_idle_since_[rf] = std::max(rank_idle_since_[rf], end);
    rank_idle_since_[rt] = std::max(rank_idle_since_[rt], end);
    sample_tries();
  }

  // ---- low-power mode -----------------------------------------------------

  bool lp_attempt(time_ps now)
  {
    bool progress = false;
    for (std::uint32_t ch = 0; ch < g_.channels; ++ch)
      for (std::uint32_t rank = 0; rank < g_.ranks_per_channel; ++rank) {
        std::size_t r = rank_idx(ch, rank);
        if (rank_lp_[r] || qcount_[r] != 0) continue;
        if (now < rank_idle_since_[r] + lp_threshold_ps()) continue;
        bool ready = true;
        bool any_active = false;
        for (std::uint32_t b = 0; b < g_.banks_per_rank; ++b) {
          std::size_t bi = bank_idx(ch, rank, b);
          BankState& bank = banks_[bi];
          if (bank.power == BankPower::GatedOff) continue;
          any_active = true;
          if (bank.busy_until > now) {
            ready = false;
            continue;
          }
          if (bank.power == BankPower::RowOpen) {
            accrue_to(bi, now);
            bank.apply(CmdType::Pre, 0, now);
            bus_free_[ch] = std::max(bus_free_[ch], now) + tck();
            ready = false;
            progress = true;
          }
        }
        if (!ready || !any_active) continue;
        for (std::uint32_t b = 0; b < g_.banks_per_rank; ++b) {
          std::size_t bi = bank_idx(ch, rank, b);
          if (banks_[bi].power != BankPower::ActiveIdle) continue;
          accrue_to(bi, now);
          banks_[bi].set_power_state(BankPower::PoweredDownLp, now);
        }
        rank_lp_[r] = true;
        progress = true;
      }
    return progress;
  }

  time_ps lp_threshold_ps() const
  {
    return time_ps(cfg_.lp_idle_threshold_cycles) * tck();
  }

  // ---- time advance ---------------------------------------------------------

  time_ps next_event(time_ps now) const
  {
    time_ps best = no_event;
    auto cand = [&](time_ps t) {
      if (t > now && t < best) best = t;
    };
    if (trace_idx_ < trace_->size()) cand(arrival_ps((*trace_)[trace_idx_]));
    if (refresh_allowed(next_ref_tick_)) cand(next_ref_tick_);
    if (engine_ && other_work() &&
        (engine_->any_pair_gated() || engine_->phase() != MigrationPhase::None))
      cand(next_occ_tick_);
    if (cfg_.lp_mode) {
      for (std::uint32_t ch = 0; ch < g_.channels; ++ch)
        for (std::uint32_t rank = 0; rank < g_.ranks_per_channel; ++rank) {
          std::size_t r = rank_idx(ch, rank);
          if (rank_lp_[r] || qcount_[r] != 0) continue;
          time_ps c = rank_idle_since_[r] + lp_threshold_ps();
          bool any_active = false;
          for (std::uint32_t b = 0; b < g_.banks_per_rank; ++b) {
            const BankState& bank = banks_[bank_idx(ch, rank, b)];
            if (bank.power == BankPower::GatedOff) continue;
            any_active = true;
            c = std::max(c, bank.busy_until);
          }
          if (!any_active) continue;
          if (other_work() || (horizon_ps_ > 0 && c <= horizon_ps_)) cand(c);
        }
    }
    return best;
  }

  // ---- verification ---------------------------------------------------------

  void sample_tries()
  {
    std::uint64_t tp = 0, op = 0;
    for (std::uint32_t ch = 0; ch < g_.channels; ++ch) {
      tp += engine_->trie(ch).footprint_bytes();
      op += engine_->occupancy_trie(ch).footprint_bytes();
    }
    if (tp > trie_peak_) trie_peak_ = tp;
    if (op > occ_trie_peak_) occ_trie_peak_ = op;
  }

  void final_verify() const
  {
    for (const auto& [lslot, tag] : content_) {
      DecodedAddress d = unpack_addr_key(std::uint32_t(lslot & 0xffffffffu), g_);
      d.channel = std::uint32_t(lslot >> 32);
      DecodedAddress phys = engine_ ? engine_->locate(d.channel, d) : d;
      phys.channel = d.channel;
      auto it = phys_.find(slot_id(phys));
      if (it == phys_.end() || it->second != tag)
        throw TranslationError("sim: final read-back found a lost write");
    }
  }

  // ---- report ---------------------------------------------------------------

  RunReport build_report(const std::vector<MemoryRequest>& trace,
                         const std::string& trace_label) const
  {
    RunReport r;
    r.scenario = scenario_name(cfg_.scenario);
    r.trace_file = trace_label;
    r.seed = cfg_.seed;
    r.geometry_fingerprint = geometry_fingerprint(g_);
    r.trace_fingerprint = trace_fingerprint(trace);
    r.requests = reads_ + writes_;
    r.reads = reads_;
    r.writes = writes_;
    r.span_ps = span_;
    r.span_cycles = (span_ + tck() - 1) / tck();
    r.avg_latency_ns = r.requests ? latency_sum_ns_ / double(r.requests) : 0.0;
    r.max_latency_ns = latency_max_ns_;
    r.row_hits = row_hits_;
    r.row_misses = row_misses_;
    r.refresh_count = refresh_count_;
    r.refresh_skipped_gated = refresh_skipped_gated_;
    r.totals = counters_.totals();
    r.controller_nj = counters_.controller_nj();
    for (std::uint32_t ch = 0; ch < g_.channels; ++ch)
      for (std::uint32_t rank = 0; rank < g_.ranks_per_channel; ++rank)
        for (std::uint32_t b = 0; b < g_.banks_per_rank; ++b) {
          BankEnergyRow row;
          row.channel = ch;
          row.rank = rank;
          row.bank = b;
          row.energy = counters_.bank_breakdown(bank_idx(ch, rank, b));
          r.banks.push_back(row);
        }
    r.trie_peak_bytes = trie_peak_;
    r.occupancy_trie_peak_bytes = occ_trie_peak_;
    std::uint64_t copies = relocations_;
    if (engine_) copies += engine_->copies_executed();
    r.migration_copies = copies;
    r.migration_bytes = copies * g_.bytes_per_column;
    std::uint32_t burst = std::max(cfg_.timing.read_burst, 1u);
    double chan_bytes = double(g_.channels) * (double(r.span_cycles) / burst) *
                        g_.bytes_per_column;
    r.migration_bandwidth_fraction =
        chan_bytes > 0.0 ? double(r.migration_bytes) / chan_bytes : 0.0;
    if (engine_) {
      r.interrupts = engine_->interrupts();
      r.collisions = engine_->collisions();
      r.log_hits = engine_->log_hits();
      r.weak_redirect_hits = engine_->weak_redirect_hits();
      r.translation_stall_cycles =
          std::uint64_t(engine_->params().interrupt_stall_cycles) *
          (engine_->interrupts() + engine_->weak_redirect_hits());
      r.migration_stall_cycles = total_stall_cycles_ - r.translation_stall_cycles;
      r.flag_final = flag_name(engine_->flag_value());
    }
    r.weak_rows_installed = weak_installed_;
    r.weak_remap_upfront_ns = weak_upfront_ns_;
    std::uint64_t transients = 0;
    for (const BankState& b : banks_) transients += b.gate_transient_count;
    r.gate_transitions = transients;
    std::uint64_t gated = 0;
    for (std::size_t i = 0; i < banks_.size(); ++i) gated += counters_.gated_ps(i);
    r.gated_time_ps = gated;
    r.reverse_migrations = reverse_migrations_;
    r.reopen_events = reopen_events_;
    return r;
  }

  ScenarioConfig cfg_;
  Geometry g_;
  VariationMatrix matrix_;
  std::optional<RemapEngine> engine_;
  std::vector<BankState> banks_;
  EnergyCounters counters_;
  time_ps copy_ps_ = 0;
  double copy_energy_nj_ = 0.0;
  std::uint64_t weak_installed_ = 0;
  double weak_upfront_ns_ = 0.0;
  bool ran_ = false;

  const std::vector<MemoryRequest>* trace_ = nullptr;
  std::vector<std::deque<const MemoryRequest*>> queues_;
  std::vector<std::uint64_t> qcount_;
  std::uint64_t queued_total_ = 0;
  std::vector<time_ps> bus_free_;
  std::vector<std::size_t> rr_;
  std::vector<time_ps> accrued_;
  std::vector<bool> rank_lp_;
  std::vector<time_ps> rank_idle_since_;
  std::unordered_map<std::uint64_t, std::uint64_t> content_;
  std::unordered_map<std::uint64_t, std::uint64_t> phys_;
  std::size_t trace_idx_ = 0;
  time_ps horizon_ps_ = 0;
  time_ps period_ = 0;
  time_ps next_ref_tick_ = 0;
  time_ps occ_step_ = 0;
  time_ps next_occ_tick_ = 0;
  time_ps span_ = 0;
  std::optional<CopyJob> staged_;
  bool gating_started_ = false;

  std::uint64_t reads_ = 0;
  std::uint64_t writes_ = 0;
  std::uint64_t row_hits_ = 0;
  std::uint64_t row_misses_ = 0;
  std::uint64_t refresh_count_ = 0;
  std::uint64_t refresh_skipped_gated_ = 0;
  std::uint64_t relocations_ = 0;
  std::uint64_t total_stall_cycles_ = 0;
  std::uint64_t reverse_migrations_ = 0;
  std::uint64_t reopen_events_ = 0;
  double latency_sum_ns_ = 0.0;
  double latency_max_ns_ = 0.0;
  std::uint64_t trie_peak_ = 0;
  std::uint64_t occ_trie_peak_ = 0;
};

}  // namespace vardram
