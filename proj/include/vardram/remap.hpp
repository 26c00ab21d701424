#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "address.hpp"
#include "trie.hpp"
#include "types.hpp"
#include "variation.hpp"

namespace vardram {

// Two-bit protocol state. Translation hardware keys off the MSB, so only the
// 10 state translates; 01 covers both migration directions.
enum class FlagValue : std::uint8_t { Idle = 0b00, Migrating = 0b01, Gated = 0b10 };

inline const char* flag_name(FlagValue v)
{
  switch (v) {
    case FlagValue::Idle: return "00";
    case FlagValue::Migrating: return "01";
    case FlagValue::Gated: return "10";
  }
  return "?";
}

class FlagState {
public:
  FlagValue value() const { return v_; }
  bool translation_active() const { return (std::uint8_t(v_) & 0b10) != 0; }

  void transition(FlagValue next)
  {
    bool ok = (v_ == FlagValue::Idle && next == FlagValue::Migrating) ||
              (v_ == FlagValue::Migrating && next == FlagValue::Gated) ||
              (v_ == FlagValue::Gated && next == FlagValue::Migrating) ||
              (v_ == FlagValue::Migrating && next == FlagValue::Idle);
    if (!ok)
      throw IllegalCommandError(std::string("flag: illegal transition ") +
                                flag_name(v_) + " -> " + flag_name(next));
    v_ = next;
  }

private:
  FlagValue v_ = FlagValue::Idle;
};

// Writes that land on a victim address mid-migration, so their scheduled
// copies can be skipped and later accesses routed to the fresh copy.
class MigrationWriteLog {
public:
  void record(std::uint64_t addr, std::uint8_t flag_bit) { entries_[addr] = flag_bit; }

  std::optional<std::uint8_t> find(std::uint64_t addr) const
  {
    auto it = entries_.find(addr);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::uint64_t addr) const { return entries_.count(addr) != 0; }
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

private:
  std::unordered_map<std::uint64_t, std::uint8_t> entries_;
};

struct EngineParams {
  double trie_capacity_fraction = 0.02;   // of modeled DRAM capacity
  std::uint32_t node_footprint_bytes = 16;
  double occupancy_reopen_fraction = 0.9; // target-bank reverse trigger
  double trie_reopen_fraction = 0.9;      // of either trie's ceiling
  std::uint32_t interrupt_stall_cycles = 3;
  std::uint32_t log_search_cycles = 1;
  std::uint32_t copy_stall_cycles = 0;    // set from the copy primitive cost
  std::uint64_t occupancy_check_interval_cycles = 10000;
  std::uint64_t trie_capacity_bytes_override = 0;  // 0 = use the fraction
};

struct TranslateResult {
  DecodedAddress effective;
  std::uint32_t stall_cycles = 0;
  bool interrupted = false;
};

struct CopyJob {
  std::uint32_t channel = 0;
  std::uint32_t logical_key = 0;
  DecodedAddress from;  // physical source slot
  DecodedAddress to;    // physical destination slot
};

struct AccessPlan {
  DecodedAddress physical;
  std::uint32_t stall_cycles = 0;
  bool interrupted = false;
  bool via_log = false;        // routed through the migration write log
  bool priority_copy = false;  // mid-migration write given an immediate copy
  std::optional<CopyJob> relocation;  // squatter moved out of a native slot
  bool new_occupancy = false;  // this access made a new address live
};

enum class OccupancyAction : std::uint8_t { None, ReverseMigrate, ReopenAll };

struct OccupancyDecision {
  OccupancyAction action = OccupancyAction::None;
  std::size_t pair_index = 0;  // valid for ReverseMigrate
};

enum class MigrationPhase : std::uint8_t { None, Forward, Reverse };

// Per-pair lifecycle. A reversed pair is never gated again within a run.
enum class PairState : std::uint8_t { Open, Gated, Reversing, Retired };

class RemapEngine {
public:
  RemapEngine(const Geometry& g, const VariationMatrix& vm, const EngineParams& ep)
      : g_(g), vm_(vm), ep_(ep)
  {
    g_.validate();
    check_key_width(g_);
    if (vm_.ranks != g_.total_ranks() || vm_.banks != g_.banks_per_rank)
      throw ConfigError("remap: variation matrix shape does not match geometry");
    const std::uint32_t rpc = g_.ranks_per_channel;
    for (const PairEntry& p : vm_.pairs) {
      if (p.victim_rank / rpc != p.target_rank / rpc)
        throw ConfigError("remap: victim/target pair crosses a channel");
    }
    std::uint64_t cap = ep_.trie_capacity_bytes_override;
    if (cap == 0)
      cap = std::uint64_t(double(g_.capacity_bytes()) * ep_.trie_capacity_fraction);
    trie_cap_per_channel_ = cap / g_.channels;
    tries_.resize(g_.channels);
    occ_tries_.resize(g_.channels);
    weak_rows_.resize(g_.channels);
    reserved_rows_.resize(g_.channels);
    const std::size_t nbanks = std::size_t(g_.channels) * rpc * g_.banks_per_rank;
    occupancy_.assign(nbanks, 0);
    tracked_.assign(nbanks, false);
    for (std::uint32_t ch = 0; ch < g_.channels; ++ch) {
      tries_[ch].set_capacity(trie_cap_per_channel_, ep_.node_footprint_bytes);
      occ_tries_[ch].set_capacity(trie_cap_per_channel_, ep_.node_footprint_bytes);
    }
    for (const PairEntry& p : vm_.pairs) {
      std::uint32_t ch = p.victim_rank / rpc;
      tracked_[bank_index(ch, p.victim_rank % rpc, p.victim_bank)] = true;
      tracked_[bank_index(ch, p.target_rank % rpc, p.target_bank)] = true;
    }
    pair_state_.assign(vm_.pairs.size(), PairState::Open);
  }

  const Geometry& geometry() const { return g_; }
  const VariationMatrix& matrix() const { return vm_; }
  const EngineParams& params() const { return ep_; }
  FlagValue flag_value() const { return flag_.value(); }
  const RemapTrie& trie(std::uint32_t ch) const { return tries_[ch]; }
  const RemapTrie& occupancy_trie(std::uint32_t ch) const { return occ_tries_[ch]; }
  MigrationPhase phase() const { return phase_; }
  bool gating_suppressed() const { return suppressed_; }
  void suppress_gating() { suppressed_ = true; }
  std::size_t pending_copies() const { return pending_.size(); }
  const MigrationWriteLog& write_log() const { return log_; }
  std::uint64_t trie_capacity_per_channel() const { return trie_cap_per_channel_; }

  std::uint64_t interrupts() const { return interrupts_; }
  std::uint64_t collisions() const { return collisions_; }
  std::uint64_t log_hits() const { return log_hits_; }
  std::uint64_t copies_executed() const { return copies_executed_; }
  std::uint64_t weak_redirect_hits() const { return weak_hits_; }

  std::uint64_t occupancy(std::uint32_t ch, std::uint32_t rank, std::uint32_t bank) const
  {
    return occupancy_[bank_index(ch, rank, bank)];
  }

  PairState pair_state(std::size_t i) const { return pair_state_[i]; }

  bool any_pair_gated() const
  {
    for (PairState s : pair_state_)
      if (s == PairState::Gated || s == PairState::Reversing) return true;
    return false;
  }

  std::vector<DecodedAddress> gated_victims() const
  {
    std::vector<DecodedAddress> out;
    for (std::size_t i = 0; i < vm_.pairs.size(); ++i)
      if (pair_state_[i] == PairState::Gated) out.push_back(pair_victim_addr(i));
    return out;
  }

  // ---- the translation contract ----------------------------------------

  // Gating translation alone: identity unless FLAG = 10; victims swap to the
  // paired bank keeping row/column, collision overrides divert and stall.
  // Weak-row redirection is a separate mechanism handled by plan_access.
  TranslateResult translate(std::uint32_t ch, const DecodedAddress& logical) const
  {
    TranslateResult res;
    res.effective = logical;
    if (flag_.value() != FlagValue::Gated) return res;
    int pi = victim_pair(ch, logical.rank, logical.bank);
    if (pi < 0) return res;
    std::uint32_t key = pack_addr_key(logical, g_);
    const TrieEntry* e = tries_[ch].find(key);
    if (e && e->kind == EntryKind::Override) {
      res.effective = unpack_addr_key(e->value, g_);
      res.effective.channel = logical.channel;
      res.stall_cycles = ep_.interrupt_stall_cycles;
      res.interrupted = true;
      return res;
    }
    if (e && e->kind == EntryKind::Pair) {
      res.effective = unpack_addr_key(e->value, g_);
      res.effective.channel = logical.channel;
      return res;
    }
    const PairEntry& p = vm_.pairs[std::size_t(pi)];
    res.effective.rank = local_rank(p.target_rank);
    res.effective.bank = p.target_bank;
    return res;
  }

  // Free-slot scan from (ro, co+1), wrapping through the whole bank; weak and
  // redirect-reserved rows count as occupied. Claims the found slot for
  // `logical_key` and records its override.
  std::pair<std::uint32_t, std::uint32_t> collision_resolve(std::uint32_t ch,
                                                            std::uint32_t logical_key,
                                                            std::uint32_t rank,
                                                            std::uint32_t bank,
                                                            std::uint32_t ro,
                                                            std::uint32_t co)
  {
    const std::uint64_t slots = g_.slots_per_bank();
    std::uint64_t start = std::uint64_t(ro) * g_.cols_per_row + co;
    for (std::uint64_t probe = 1; probe < slots; ++probe) {
      std::uint64_t s = (start + probe) % slots;
      std::uint32_t r = std::uint32_t(s / g_.cols_per_row);
      std::uint32_t c = std::uint32_t(s % g_.cols_per_row);
      if (!slot_free(ch, rank, bank, r, c)) continue;
      DecodedAddress slot{0, rank, bank, r, c};
      claim_slot(ch, slot, logical_key);
      tries_[ch].insert(logical_key, {EntryKind::Override, pack_addr_key(slot, g_)});
      ++collisions_;
      return {r, c};
    }
    throw TranslationError("remap: target bank has no free slot");
  }

  // ---- full access resolution -------------------------------------------

  // Resolves where one access lands physically, performing any placement,
  // collision resolution, write logging or priority copy it implies.
  // Resolution order: migration write log, per-address override, weak-row
  // redirect, then bank-level gating translation.
  AccessPlan plan_access(std::uint32_t ch, MemOp op, const DecodedAddress& logical)
  {
    AccessPlan plan;
    std::uint32_t lkey = pack_addr_key(logical, g_);
    std::uint64_t lid = combine(ch, lkey);
    const TrieEntry* e = tries_[ch].find(lkey);

    {
      int pl = victim_pair(ch, logical.rank, logical.bank);
      bool migrating = pl >= 0 && phase_ == MigrationPhase::Forward &&
                       pair_state_[std::size_t(pl)] == PairState::Open;
      if (migrating && log_.contains(lid)) {
        // Fresh copy lives at the target already; the home copy is stale.
        if (!e) throw TranslationError("remap: logged address missing a placement");
        plan.physical = unpack_addr_key(e->value, g_);
        plan.via_log = true;
        plan.stall_cycles += ep_.log_search_cycles;
        ++log_hits_;
        return finish_plan(plan, logical);
      }
    }

    if (e && e->kind == EntryKind::Override) {
      // Diverted placement recorded earlier; every access pays the
      // collision-override retrieval stall.
      plan.physical = unpack_addr_key(e->value, g_);
      plan.stall_cycles += ep_.interrupt_stall_cycles;
      plan.interrupted = true;
      ++interrupts_;
      if (op == MemOp::Write) {
        auto own = owner_of(ch, plan.physical);
        if (!own || *own != lkey)
          throw TranslationError("remap: override write hit a foreign slot");
      }
      return finish_plan(plan, logical);
    }

    // Weak-row redirect on the logical location. Redirect targets never sit
    // in a victim bank, so a redirected access is outside gating's reach.
    DecodedAddress eff = logical;
    bool redirected = false;
    if (apply_row_redirect(ch, eff)) {
      plan.stall_cycles += ep_.interrupt_stall_cycles;
      ++weak_hits_;
      redirected = true;
    }

    int pi = victim_pair(ch, eff.rank, eff.bank);
    PairState ps = pi >= 0 ? pair_state_[std::size_t(pi)] : PairState::Open;
    bool routed = pi >= 0 && (ps == PairState::Gated || ps == PairState::Reversing);
    bool migrating_victim =
        pi >= 0 && phase_ == MigrationPhase::Forward && ps == PairState::Open;

    if (routed) {
      if (e && e->kind == EntryKind::Pair) {
        plan.physical = unpack_addr_key(e->value, g_);
      } else {
        const PairEntry& p = vm_.pairs[std::size_t(pi)];
        DecodedAddress matrix_slot = eff;
        matrix_slot.rank = local_rank(p.target_rank);
        matrix_slot.bank = p.target_bank;
        auto own = owner_of(ch, matrix_slot);
        if (own && *own == lkey) {
          // Placed at the swap slot by an earlier write; no entry needed.
          plan.physical = matrix_slot;
        } else if (ps == PairState::Reversing) {
          // Pair being dismantled: unplaced addresses live at home, and new
          // data goes straight home so nothing is stranded at the target.
          plan.physical = eff;
          if (op == MemOp::Write) {
            place_write(ch, lkey, plan, true, false);
            return finish_plan(plan, logical);
          }
        } else {
          plan.physical = matrix_slot;
          if (op == MemOp::Write) {
            place_write(ch, lkey, plan, false, false);
            return finish_plan(plan, logical);
          }
        }
      }
      if (op == MemOp::Write) {
        auto own = owner_of(ch, plan.physical);
        if (!own || *own != lkey)
          throw TranslationError("remap: routed write hit a foreign slot");
      } else {
        if (apply_row_redirect(ch, plan.physical)) {
          plan.stall_cycles += ep_.interrupt_stall_cycles;
          ++weak_hits_;
        }
      }
      return finish_plan(plan, logical);
    }

    if (migrating_victim && op == MemOp::Write) {
      // Priority copy: place at the target now, log the address, skip its
      // scheduled copy, and stall for the copy plus the log search.
      const PairEntry& p = vm_.pairs[std::size_t(pi)];
      plan.physical = eff;
      plan.physical.rank = local_rank(p.target_rank);
      plan.physical.bank = p.target_bank;
      vacate_home_slot(ch, lkey);
      place_write(ch, lkey, plan, false, false);
      if (tries_[ch].find(lkey) == nullptr)
        tries_[ch].insert(lkey, {EntryKind::Pair, pack_addr_key(plan.physical, g_)});
      pending_skip_.insert(lid);
      log_.record(lid, 1);
      plan.priority_copy = true;
      plan.via_log = true;
      plan.stall_cycles += ep_.copy_stall_cycles + ep_.log_search_cycles;
      return finish_plan(plan, logical);
    }

    // Identity service (possibly weak-redirected).
    plan.physical = eff;
    if (op == MemOp::Write) {
      place_write(ch, lkey, plan, true, redirected);
    } else {
      // The bank swap can drop an unwritten read onto a weak row; the
      // row-level redirect keeps even those reads off weak rows.
      if (apply_row_redirect(ch, plan.physical)) {
        plan.stall_cycles += ep_.interrupt_stall_cycles;
        ++weak_hits_;
      }
    }
    return finish_plan(plan, logical);
  }

  // Current physical home of a logical address without mutating anything.
  // Mirrors plan_access for reads; used by read-back consistency checks.
  DecodedAddress locate(std::uint32_t ch, const DecodedAddress& logical) const
  {
    std::uint32_t lkey = pack_addr_key(logical, g_);
    const TrieEntry* e = tries_[ch].find(lkey);
    if (e && e->kind == EntryKind::Override) {
      DecodedAddress out = unpack_addr_key(e->value, g_);
      out.channel = logical.channel;
      return out;
    }
    DecodedAddress eff = logical;
    apply_row_redirect(ch, eff);
    int pi = victim_pair(ch, eff.rank, eff.bank);
    PairState ps = pi >= 0 ? pair_state_[std::size_t(pi)] : PairState::Open;
    bool routed = pi >= 0 && (ps == PairState::Gated || ps == PairState::Reversing);
    bool migrating = pi >= 0 && phase_ == MigrationPhase::Forward &&
                     ps == PairState::Open && log_.contains(combine(ch, lkey));
    if ((routed || migrating) && e && e->kind == EntryKind::Pair) {
      DecodedAddress out = unpack_addr_key(e->value, g_);
      out.channel = logical.channel;
      return out;
    }
    if (routed) {
      const PairEntry& p = vm_.pairs[std::size_t(pi)];
      DecodedAddress matrix_slot = eff;
      matrix_slot.rank = local_rank(p.target_rank);
      matrix_slot.bank = p.target_bank;
      auto own = owner_of(ch, matrix_slot);
      if ((own && *own == lkey) || ps != PairState::Reversing) {
        matrix_slot.channel = logical.channel;
        return matrix_slot;
      }
    }
    eff.channel = logical.channel;
    return eff;
  }

  std::optional<std::uint32_t> owner_of(std::uint32_t ch,
                                        const DecodedAddress& slot) const
  {
    const TrieEntry* e = occ_tries_[ch].find(pack_addr_key(slot, g_));
    if (!e) return std::nullopt;
    return e->value;
  }

  // ---- weak-row remapping -----------------------------------------------

  // Installs row-level redirects for every weak row: victim-bank rows borrow
  // the pair's target bank, every other bank redirects within itself.
  // Returns the redirected row count; must run before any occupancy exists.
  std::uint64_t install_weak_rows(const std::vector<std::uint64_t>& global_rows)
  {
    for (std::uint64_t o : occupancy_)
      if (o != 0) throw OrderError("remap: weak rows must be installed first");
    for (std::uint64_t id : global_rows) {
      RowLocation loc = locate_row(id, g_);
      if (loc.rank >= g_.total_ranks())
        throw ConfigError("weak rows: row id beyond geometry");
      std::uint32_t ch = loc.rank / g_.ranks_per_channel;
      std::uint32_t rank = loc.rank % g_.ranks_per_channel;
      weak_rows_[ch].insert(pack_row_key(rank, loc.bank, loc.row, g_));
    }
    std::uint64_t installed = 0;
    for (std::uint64_t id : global_rows) {
      RowLocation loc = locate_row(id, g_);
      std::uint32_t ch = loc.rank / g_.ranks_per_channel;
      std::uint32_t rank = loc.rank % g_.ranks_per_channel;
      std::uint32_t dest_rank = rank, dest_bank = loc.bank;
      int pi = victim_pair(ch, rank, loc.bank);
      if (pi >= 0) {
        dest_rank = local_rank(vm_.pairs[std::size_t(pi)].target_rank);
        dest_bank = vm_.pairs[std::size_t(pi)].target_bank;
      }
      std::uint32_t dest_row = pick_redirect_row(ch, dest_rank, dest_bank);
      reserved_rows_[ch].insert(pack_row_key(dest_rank, dest_bank, dest_row, g_));
      tracked_[bank_index(ch, rank, loc.bank)] = true;
      tracked_[bank_index(ch, dest_rank, dest_bank)] = true;
      std::uint32_t src_key = pack_row_key(rank, loc.bank, loc.row, g_);
      std::uint32_t dest_loc =
          pack_row_key(dest_rank, dest_bank, dest_row, g_) & ~row_key_flag;
      tries_[ch].insert(src_key, {EntryKind::RowRedirect, dest_loc});
      ++installed;
    }
    return installed;
  }

  bool is_weak_row(std::uint32_t ch, std::uint32_t rank, std::uint32_t bank,
                   std::uint32_t row) const
  {
    return weak_rows_[ch].count(pack_row_key(rank, bank, row, g_)) != 0;
  }

  std::uint64_t weak_row_count() const
  {
    std::uint64_t n = 0;
    for (const auto& s : weak_rows_) n += s.size();
    return n;
  }

  // ---- migration ----------------------------------------------------------

  // Forward migration over every open pair: FLAG 00 -> 01 and the victims'
  // live slots enter the pending copy queue. Victim banks stay powered until
  // complete_migration gates them.
  void begin_forward_migration()
  {
    if (suppressed_)
      throw OrderError("remap: gating suppressed for the rest of the run");
    if (phase_ != MigrationPhase::None)
      throw OrderError("remap: migration already in progress");
    for (PairState s : pair_state_)
      if (s == PairState::Gated || s == PairState::Reversing)
        throw OrderError("remap: forward migration from a gated state");
    flag_.transition(FlagValue::Migrating);
    phase_ = MigrationPhase::Forward;
    pending_.clear();
    pending_skip_.clear();
    forward_pairs_.clear();
    for (std::size_t i = 0; i < vm_.pairs.size(); ++i) {
      if (pair_state_[i] != PairState::Open) continue;
      forward_pairs_.push_back(i);
      std::uint32_t ch = pair_channel(i);
      DecodedAddress v = pair_victim_addr(i);
      auto [lo, hi] = bank_key_range(v.rank, v.bank, g_);
      occ_tries_[ch].for_each_range(lo, hi,
                                    [&](std::uint32_t, const TrieEntry& e) {
                                      pending_.push_back({ch, e.value});
                                    });
    }
  }

  // Reverse migration for one overflowing pair: FLAG 10 -> 01. Returns the
  // victim banks to power back on before copies flow.
  std::vector<DecodedAddress> begin_reverse_migration(std::size_t pair_index)
  {
    if (phase_ != MigrationPhase::None)
      throw OrderError("remap: migration already in progress");
    if (pair_state_[pair_index] != PairState::Gated)
      throw OrderError("remap: reverse of a pair that is not gated");
    flag_.transition(FlagValue::Migrating);
    phase_ = MigrationPhase::Reverse;
    pending_.clear();
    pending_skip_.clear();
    reopen_ = false;
    pair_state_[pair_index] = PairState::Reversing;
    enqueue_reverse(pair_index);
    return {pair_victim_addr(pair_index)};
  }

  // Reverse migration of everything still gated; afterwards gating stays off
  // for the rest of the run. Legal during a forward migration (which it
  // aborts) or a single-pair reverse (which it widens). Returns the victim
  // banks to power back on.
  std::vector<DecodedAddress> begin_reopen_all()
  {
    std::vector<DecodedAddress> wake;
    reopen_ = true;
    if (phase_ == MigrationPhase::Forward) {
      // Abort: anything already copied flows back; the rest never left home.
      pending_.clear();
      pending_skip_.clear();
      phase_ = MigrationPhase::Reverse;
      for (std::size_t i : forward_pairs_) {
        pair_state_[i] = PairState::Reversing;
        enqueue_reverse(i);
      }
      forward_pairs_.clear();
      return wake;  // nothing was gated yet
    }
    if (phase_ == MigrationPhase::None) {
      flag_.transition(FlagValue::Migrating);
      phase_ = MigrationPhase::Reverse;
      pending_.clear();
      pending_skip_.clear();
    }
    for (std::size_t i = 0; i < pair_state_.size(); ++i)
      if (pair_state_[i] == PairState::Gated) {
        pair_state_[i] = PairState::Reversing;
        enqueue_reverse(i);
        wake.push_back(pair_victim_addr(i));
      }
    return wake;
  }

  // Bank-list entry point mirroring the migration algorithm's signature.
  // Forward lists must cover exactly the open pairs; reverse handles one pair.
  std::vector<DecodedAddress> migrate_and_remap(
      const std::vector<DecodedAddress>& src_banks,
      const std::vector<DecodedAddress>& dest_banks, bool forward)
  {
    if (src_banks.size() != dest_banks.size())
      throw LengthMismatchError("migrate_and_remap: bank lists differ in length");
    for (std::size_t i = 0; i < src_banks.size(); ++i) {
      const DecodedAddress& v = forward ? src_banks[i] : dest_banks[i];
      const DecodedAddress& t = forward ? dest_banks[i] : src_banks[i];
      int pi = victim_pair(v.channel, v.rank, v.bank);
      if (pi < 0)
        throw ConfigError("migrate_and_remap: bank is not a victim in the matrix");
      const PairEntry& p = vm_.pairs[std::size_t(pi)];
      if (t.channel != v.channel || t.rank != local_rank(p.target_rank) ||
          t.bank != p.target_bank)
        throw ConfigError("migrate_and_remap: pair is not in the matrix");
    }
    if (forward) {
      std::size_t open = 0;
      for (PairState s : pair_state_)
        if (s == PairState::Open) ++open;
      if (src_banks.size() != open)
        throw ConfigError("migrate_and_remap: forward lists must cover open pairs");
      begin_forward_migration();
      return {};
    }
    if (src_banks.size() != 1)
      throw ConfigError("migrate_and_remap: reverse handles one pair at a time");
    int pi = victim_pair(dest_banks[0].channel, dest_banks[0].rank,
                         dest_banks[0].bank);
    return begin_reverse_migration(std::size_t(pi));
  }

  // Next copy with source/destination resolved against current state, or
  // nothing once the queue is drained.
  std::optional<CopyJob> next_copy()
  {
    while (!pending_.empty()) {
      Pending p = pending_.front();
      pending_.pop_front();
      if (pending_skip_.count(combine(p.channel, p.key))) continue;
      CopyJob job;
      job.channel = p.channel;
      job.logical_key = p.key;
      if (phase_ == MigrationPhase::Forward) {
        job.from = unpack_addr_key(p.key, g_);
        auto own = owner_of(p.channel, job.from);
        if (!own || *own != p.key)
          throw TranslationError("remap: pending copy lost its source");
        int pi = victim_pair(p.channel, job.from.rank, job.from.bank);
        if (pi < 0) throw TranslationError("remap: pending copy outside a victim");
        const PairEntry& pe = vm_.pairs[std::size_t(pi)];
        DecodedAddress desired = job.from;
        desired.rank = local_rank(pe.target_rank);
        desired.bank = pe.target_bank;
        if (slot_free(p.channel, desired.rank, desired.bank, desired.row,
                      desired.col)) {
          claim_slot(p.channel, desired, p.key);
          tries_[p.channel].insert(p.key,
                                   {EntryKind::Pair, pack_addr_key(desired, g_)});
          job.to = desired;
        } else {
          auto [r, c] = collision_resolve(p.channel, p.key, desired.rank,
                                          desired.bank, desired.row, desired.col);
          job.to = desired;
          job.to.row = r;
          job.to.col = c;
        }
        release_slot(p.channel, job.from);
      } else {
        job.to = unpack_addr_key(p.key, g_);
        const TrieEntry* e = tries_[p.channel].find(p.key);
        if (e && (e->kind == EntryKind::Pair || e->kind == EntryKind::Override)) {
          job.from = unpack_addr_key(e->value, g_);
          tries_[p.channel].erase(p.key);
        } else {
          // Placed at the swap slot by a post-gating write; no entry exists.
          int pi = victim_pair(p.channel, job.to.rank, job.to.bank);
          if (pi < 0) throw TranslationError("remap: reverse copy outside a victim");
          const PairEntry& pe = vm_.pairs[std::size_t(pi)];
          job.from = job.to;
          job.from.rank = local_rank(pe.target_rank);
          job.from.bank = pe.target_bank;
        }
        auto own = owner_of(p.channel, job.from);
        if (!own || *own != p.key)
          throw TranslationError("remap: reverse copy lost its source");
        if (!slot_free(p.channel, job.to.rank, job.to.bank, job.to.row, job.to.col))
          throw TranslationError("remap: home slot not free on reverse");
        release_slot(p.channel, job.from);
        claim_slot(p.channel, job.to, p.key);
      }
      job.from.channel = p.channel;
      job.to.channel = p.channel;
      ++copies_executed_;
      return job;
    }
    return std::nullopt;
  }

  bool migration_drained() const
  {
    return phase_ != MigrationPhase::None && pending_.empty();
  }

  // Commits FLAG and pair states once the queue is drained. For a forward
  // migration, returns the victim banks to switch off; reverse power-up
  // already happened at begin time.
  std::vector<DecodedAddress> complete_migration()
  {
    if (phase_ == MigrationPhase::None)
      throw OrderError("remap: no migration to complete");
    if (!pending_.empty())
      throw OrderError("remap: migration queue not drained");
    std::vector<DecodedAddress> banks;
    if (phase_ == MigrationPhase::Forward) {
      for (std::size_t i : forward_pairs_) {
        pair_state_[i] = PairState::Gated;
        banks.push_back(pair_victim_addr(i));
      }
      forward_pairs_.clear();
      flag_.transition(FlagValue::Gated);
    } else {
      for (std::size_t i = 0; i < pair_state_.size(); ++i)
        if (pair_state_[i] == PairState::Reversing)
          pair_state_[i] = PairState::Retired;
      if (any_pair_gated())
        flag_.transition(FlagValue::Gated);
      else
        flag_.transition(FlagValue::Idle);
      if (reopen_) suppressed_ = true;
      reopen_ = false;
    }
    phase_ = MigrationPhase::None;
    pending_skip_.clear();
    log_.clear();
    return banks;
  }

  // ---- occupancy / trie pressure ------------------------------------------

  // Thresholds are compared in integers (parts per thousand), so "at exactly
  // 90%" trips the trigger.
  OccupancyDecision occupancy_check() const
  {
    OccupancyDecision d;
    if (suppressed_) return d;
    for (std::uint32_t ch = 0; ch < g_.channels; ++ch) {
      if (trie_pressure(tries_[ch]) || trie_pressure(occ_tries_[ch])) {
        if (reopen_) return d;  // reopen already under way
        d.action = OccupancyAction::ReopenAll;
        return d;
      }
    }
    if (phase_ != MigrationPhase::None) return d;
    const std::uint64_t slots = g_.slots_per_bank();
    const std::uint64_t numer = per_mille(ep_.occupancy_reopen_fraction);
    for (std::size_t i = 0; i < vm_.pairs.size(); ++i) {
      if (pair_state_[i] != PairState::Gated) continue;
      const PairEntry& p = vm_.pairs[i];
      std::uint32_t ch = pair_channel(i);
      std::uint64_t occ = occupancy(ch, local_rank(p.target_rank), p.target_bank);
      if (occ * 1000 >= slots * numer) {
        d.action = OccupancyAction::ReverseMigrate;
        d.pair_index = i;
        return d;
      }
    }
    return d;
  }

private:
  struct Pending {
    std::uint32_t channel;
    std::uint32_t key;
  };

  static std::uint64_t combine(std::uint32_t ch, std::uint32_t key)
  {
    return (std::uint64_t(ch) << 32) | key;
  }

  static std::uint64_t per_mille(double fraction)
  {
    return std::uint64_t(std::llround(fraction * 1000.0));
  }

  std::size_t bank_index(std::uint32_t ch, std::uint32_t rank,
                         std::uint32_t bank) const
  {
    return (std::size_t(ch) * g_.ranks_per_channel + rank) * g_.banks_per_rank +
           bank;
  }

  std::uint32_t local_rank(std::uint32_t global_rank) const
  {
    return global_rank % g_.ranks_per_channel;
  }

  std::uint32_t pair_channel(std::size_t i) const
  {
    return vm_.pairs[i].victim_rank / g_.ranks_per_channel;
  }

  DecodedAddress pair_victim_addr(std::size_t i) const
  {
    DecodedAddress d;
    d.channel = pair_channel(i);
    d.rank = local_rank(vm_.pairs[i].victim_rank);
    d.bank = vm_.pairs[i].victim_bank;
    return d;
  }

  int victim_pair(std::uint32_t ch, std::uint32_t rank, std::uint32_t bank) const
  {
    return vm_.pair_index_of_victim(ch * g_.ranks_per_channel + rank, bank);
  }

  bool apply_row_redirect(std::uint32_t ch, DecodedAddress& d) const
  {
    const TrieEntry* e = tries_[ch].find(pack_row_key(d.rank, d.bank, d.row, g_));
    if (!e || e->kind != EntryKind::RowRedirect) return false;
    std::uint32_t v = e->value;
    d.row = v & (g_.rows_per_bank - 1);
    v >>= g_.row_bits();
    d.bank = v & (g_.banks_per_rank - 1);
    v >>= g_.bank_bits();
    d.rank = v & (g_.ranks_per_channel - 1);
    return true;
  }

  bool slot_free(std::uint32_t ch, std::uint32_t rank, std::uint32_t bank,
                 std::uint32_t row, std::uint32_t col) const
  {
    std::uint32_t rk = pack_row_key(rank, bank, row, g_);
    if (weak_rows_[ch].count(rk) || reserved_rows_[ch].count(rk)) return false;
    DecodedAddress d{0, rank, bank, row, col};
    return occ_tries_[ch].find(pack_addr_key(d, g_)) == nullptr;
  }

  void claim_slot(std::uint32_t ch, const DecodedAddress& slot, std::uint32_t owner)
  {
    occ_tries_[ch].insert(pack_addr_key(slot, g_), {EntryKind::Owner, owner});
    ++occupancy_[bank_index(ch, slot.rank, slot.bank)];
  }

  void release_slot(std::uint32_t ch, const DecodedAddress& slot)
  {
    if (!occ_tries_[ch].erase(pack_addr_key(slot, g_)))
      throw TranslationError("remap: releasing an empty slot");
    --occupancy_[bank_index(ch, slot.rank, slot.bank)];
  }

  // A first-ever write can arrive mid-migration; only vacate a home slot the
  // address actually owns.
  void vacate_home_slot(std::uint32_t ch, std::uint32_t lkey)
  {
    DecodedAddress home = unpack_addr_key(lkey, g_);
    auto own = owner_of(ch, home);
    if (own && *own == lkey) release_slot(ch, home);
  }

  // Write placement at plan.physical. Occupancy is tracked only for banks the
  // remap machinery can touch (pair banks, weak banks and redirect targets);
  // placements elsewhere are identity and collision-free by construction.
  // `redirected` marks a weak-row redirect, whose own reserved row is a legal
  // destination.
  void place_write(std::uint32_t ch, std::uint32_t lkey, AccessPlan& plan,
                   bool native, bool redirected)
  {
    DecodedAddress& d = plan.physical;
    if (!tracked_[bank_index(ch, d.rank, d.bank)]) return;
    auto owner = owner_of(ch, d);
    if (owner && *owner == lkey) return;  // rewrite of a live address
    if (!owner) {
      std::uint32_t rk = pack_row_key(d.rank, d.bank, d.row, g_);
      bool row_ok = weak_rows_[ch].count(rk) == 0 &&
                    (redirected || reserved_rows_[ch].count(rk) == 0);
      if (row_ok) {
        claim_slot(ch, d, lkey);
        plan.new_occupancy = true;
        return;
      }
    }
    if (owner && native) {
      // A remapped address squats on this native slot; move it along.
      std::uint32_t squatter = *owner;
      CopyJob move;
      move.channel = ch;
      move.logical_key = squatter;
      move.from = d;
      move.from.channel = ch;
      release_slot(ch, d);
      auto [r, c] = collision_resolve(ch, squatter, d.rank, d.bank, d.row, d.col);
      move.to = d;
      move.to.row = r;
      move.to.col = c;
      move.to.channel = ch;
      plan.relocation = move;
      claim_slot(ch, d, lkey);
      plan.new_occupancy = true;
      plan.stall_cycles += ep_.interrupt_stall_cycles;
      plan.interrupted = true;
      ++interrupts_;
      return;
    }
    // Foreign slot, or a weak/reserved row: divert.
    auto [r, c] = collision_resolve(ch, lkey, d.rank, d.bank, d.row, d.col);
    d.row = r;
    d.col = c;
    plan.new_occupancy = true;
    plan.stall_cycles += ep_.interrupt_stall_cycles;
    plan.interrupted = true;
    ++interrupts_;
  }

  AccessPlan finish_plan(AccessPlan plan, const DecodedAddress& logical)
  {
    plan.physical.channel = logical.channel;
    return plan;
  }

  std::uint32_t pick_redirect_row(std::uint32_t ch, std::uint32_t rank,
                                  std::uint32_t bank)
  {
    for (std::uint32_t row = 0; row < g_.rows_per_bank; ++row) {
      std::uint32_t rk = pack_row_key(rank, bank, row, g_);
      if (weak_rows_[ch].count(rk) || reserved_rows_[ch].count(rk)) continue;
      return row;
    }
    throw CapacityError("remap: no healthy row left for a weak-row redirect");
  }

  // Everything in the target bank owned by a victim-bank logical address goes
  // back, except weak-redirected rows, which stay for refresh safety.
  void enqueue_reverse(std::size_t pair_index)
  {
    const PairEntry& p = vm_.pairs[pair_index];
    std::uint32_t ch = pair_channel(pair_index);
    std::uint32_t trank = local_rank(p.target_rank);
    std::uint32_t vrank = local_rank(p.victim_rank);
    auto [lo, hi] = bank_key_range(trank, p.target_bank, g_);
    occ_tries_[ch].for_each_range(lo, hi, [&](std::uint32_t, const TrieEntry& e) {
      DecodedAddress owner = unpack_addr_key(e.value, g_);
      if (owner.rank != vrank || owner.bank != p.victim_bank) return;
      if (is_weak_row(ch, owner.rank, owner.bank, owner.row)) return;
      pending_.push_back({ch, e.value});
    });
  }

  bool trie_pressure(const RemapTrie& t) const
  {
    if (trie_cap_per_channel_ == 0) return false;
    return t.footprint_bytes() * 1000 >=
           trie_cap_per_channel_ * per_mille(ep_.trie_reopen_fraction);
  }

  Geometry g_;
  VariationMatrix vm_;
  EngineParams ep_;
  FlagState flag_;
  std::vector<RemapTrie> tries_;
  std::vector<RemapTrie> occ_tries_;
  std::vector<std::unordered_set<std::uint32_t>> weak_rows_;
  std::vector<std::unordered_set<std::uint32_t>> reserved_rows_;
  std::vector<std::uint64_t> occupancy_;
  std::vector<bool> tracked_;
  std::vector<PairState> pair_state_;
  std::vector<std::size_t> forward_pairs_;
  std::deque<Pending> pending_;
  std::unordered_set<std::uint64_t> pending_skip_;
  bool reopen_ = false;
  bool suppressed_ = false;
  MigrationPhase phase_ = MigrationPhase::None;
  MigrationWriteLog log_;
  std::uint64_t trie_cap_per_channel_ = 0;
  std::uint64_t interrupts_ = 0;
  std::uint64_t collisions_ = 0;
  std::uint64_t log_hits_ = 0;
  std::uint64_t copies_executed_ = 0;
  std::uint64_t weak_hits_ = 0;
};

}  // namespace vardram
