#include <catch2/catch_amalgamated.hpp>

#include "vardram/vardram.hpp"

using namespace vardram;

namespace {

// 1 channel x 2 ranks x 4 banks x 8 rows x 4 cols: 32 slots per bank, all
// keys fit one byte so trie paths are short and hand-checkable.
Geometry tiny_geometry()
{
  Geometry g;
  g.channels = 1;
  g.ranks_per_channel = 2;
  g.banks_per_rank = 4;
  g.rows_per_bank = 8;
  g.cols_per_row = 4;
  g.bytes_per_column = 8;
  return g;
}

VariationMatrix one_pair_matrix()
{
  VariationMatrix vm;
  vm.ranks = 2;
  vm.banks = 4;
  vm.pairs = {PairEntry{0, 1, 0, 2}};  // victim (0,1) -> target (0,2)
  vm.victim_timing = {TimingParams{}};
  vm.severity.assign(8, 0.0);
  return vm;
}

EngineParams roomy_params()
{
  EngineParams ep;
  ep.trie_capacity_bytes_override = 1 << 20;
  return ep;
}

DecodedAddress at(std::uint32_t rank, std::uint32_t bank, std::uint32_t row,
                  std::uint32_t col)
{
  return DecodedAddress{0, rank, bank, row, col};
}

// Forward-migrate and gate the single pair, draining any pending copies.
void gate_pair(RemapEngine& e)
{
  e.begin_forward_migration();
  while (e.next_copy()) {
  }
  e.complete_migration();
}

}  // namespace

TEST_CASE("flag transitions follow the protocol whitelist exhaustively")
{
  // 00 -> 01, 01 -> 10, 01 -> 00, 10 -> 01 are the only legal moves.
  auto reach = [](FlagValue target) {
    FlagState f;
    if (target == FlagValue::Idle) return f;
    f.transition(FlagValue::Migrating);
    if (target == FlagValue::Migrating) return f;
    f.transition(FlagValue::Gated);
    return f;
  };
  const FlagValue all[] = {FlagValue::Idle, FlagValue::Migrating,
                           FlagValue::Gated};
  for (FlagValue from : all)
    for (FlagValue to : all) {
      FlagState f = reach(from);
      bool legal = (from == FlagValue::Idle && to == FlagValue::Migrating) ||
                   (from == FlagValue::Migrating && to == FlagValue::Gated) ||
                   (from == FlagValue::Migrating && to == FlagValue::Idle) ||
                   (from == FlagValue::Gated && to == FlagValue::Migrating);
      if (legal) {
        REQUIRE_NOTHROW(f.transition(to));
        REQUIRE(f.value() == to);
      } else {
        REQUIRE_THROWS_AS(f.transition(to), IllegalCommandError);
        REQUIRE(f.value() == from);  // failed transition leaves state alone
      }
    }
}

TEST_CASE("translation is active exactly when the flag MSB is set")
{
  FlagState f;
  REQUIRE_FALSE(f.translation_active());  // 00
  f.transition(FlagValue::Migrating);
  REQUIRE_FALSE(f.translation_active());  // 01
  f.transition(FlagValue::Gated);
  REQUIRE(f.translation_active());  // 10
}

TEST_CASE("migration write log records, finds and clears")
{
  MigrationWriteLog log;
  REQUIRE_FALSE(log.contains(42));
  log.record(42, 1);
  log.record(43, 0);
  REQUIRE(log.size() == 2);
  REQUIRE(log.contains(42));
  REQUIRE(log.find(42).value() == 1);
  REQUIRE_FALSE(log.find(99).has_value());
  log.clear();
  REQUIRE(log.size() == 0);
}

TEST_CASE("engine construction validates matrix shape and channel locality")
{
  Geometry g = tiny_geometry();
  VariationMatrix vm = one_pair_matrix();
  vm.ranks = 1;
  REQUIRE_THROWS_AS(RemapEngine(g, vm, roomy_params()), ConfigError);

  Geometry two_ch = g;
  two_ch.channels = 2;
  two_ch.ranks_per_channel = 1;
  VariationMatrix cross;
  cross.ranks = 2;
  cross.banks = 4;
  cross.pairs = {PairEntry{0, 1, 1, 2}};  // victim ch 0, target ch 1
  cross.victim_timing = {TimingParams{}};
  cross.severity.assign(8, 0.0);
  REQUIRE_THROWS_AS(RemapEngine(two_ch, cross, roomy_params()), ConfigError);
}

TEST_CASE("gating translation swaps victim banks and leaves the rest alone")
{
  RemapEngine e(tiny_geometry(), one_pair_matrix(), roomy_params());

  // Before gating: identity, no matter the bank.
  TranslateResult r = e.translate(0, at(0, 1, 3, 2));
  REQUIRE(r.effective == at(0, 1, 3, 2));
  REQUIRE(r.stall_cycles == 0);

  gate_pair(e);
  REQUIRE(e.flag_value() == FlagValue::Gated);
  REQUIRE(e.pair_state(0) == PairState::Gated);
  REQUIRE(e.any_pair_gated());

  r = e.translate(0, at(0, 1, 3, 2));
  REQUIRE(r.effective == at(0, 2, 3, 2));  // row and column preserved
  REQUIRE(r.stall_cycles == 0);
  REQUIRE_FALSE(r.interrupted);

  r = e.translate(0, at(1, 3, 5, 1));
  REQUIRE(r.effective == at(1, 3, 5, 1));

  auto victims = e.gated_victims();
  REQUIRE(victims.size() == 1);
  REQUIRE(victims[0].rank == 0);
  REQUIRE(victims[0].bank == 1);
}

TEST_CASE("writes behind a gated victim land at the swap slot and read back")
{
  RemapEngine e(tiny_geometry(), one_pair_matrix(), roomy_params());
  gate_pair(e);

  AccessPlan w = e.plan_access(0, MemOp::Write, at(0, 1, 3, 2));
  REQUIRE(w.physical == at(0, 2, 3, 2));
  REQUIRE(w.new_occupancy);
  REQUIRE(w.stall_cycles == 0);
  REQUIRE(e.occupancy(0, 0, 2) == 1);
  REQUIRE(e.occupancy(0, 0, 1) == 0);

  AccessPlan r = e.plan_access(0, MemOp::Read, at(0, 1, 3, 2));
  REQUIRE(r.physical == at(0, 2, 3, 2));
  REQUIRE_FALSE(r.new_occupancy);
  REQUIRE(e.locate(0, at(0, 1, 3, 2)) == at(0, 2, 3, 2));
}

TEST_CASE("a prefilled swap slot diverts the victim write through an override")
{
  RemapEngine e(tiny_geometry(), one_pair_matrix(), roomy_params());
  // Native data occupies the matrix slot in the target bank before gating.
  e.plan_access(0, MemOp::Write, at(0, 2, 2, 0));
  gate_pair(e);

  AccessPlan w = e.plan_access(0, MemOp::Write, at(0, 1, 2, 0));
  REQUIRE(w.physical == at(0, 2, 2, 1));  // next free slot in scan order
  REQUIRE(w.interrupted);
  REQUIRE(w.stall_cycles == 3);
  REQUIRE(e.collisions() == 1);
  REQUIRE(e.interrupts() == 1);

  // Every later access pays the override retrieval interrupt.
  AccessPlan r = e.plan_access(0, MemOp::Read, at(0, 1, 2, 0));
  REQUIRE(r.physical == at(0, 2, 2, 1));
  REQUIRE(r.interrupted);
  REQUIRE(r.stall_cycles == 3);
  REQUIRE(e.interrupts() == 2);

  TranslateResult t = e.translate(0, at(0, 1, 2, 0));
  REQUIRE(t.effective == at(0, 2, 2, 1));
  REQUIRE(t.stall_cycles == 3);
  REQUIRE(t.interrupted);

  // The native owner still reads its own slot without interference.
  AccessPlan n = e.plan_access(0, MemOp::Read, at(0, 2, 2, 0));
  REQUIRE(n.physical == at(0, 2, 2, 0));
  REQUIRE(n.stall_cycles == 0);
}

TEST_CASE("forward migration copies live victim data and a mid-flight write wins")
{
  EngineParams ep = roomy_params();
  ep.copy_stall_cycles = 44;
  RemapEngine e(tiny_geometry(), one_pair_matrix(), ep);

  // Two live victim addresses before migration starts.
  e.plan_access(0, MemOp::Write, at(0, 1, 2, 0));
  e.plan_access(0, MemOp::Write, at(0, 1, 2, 1));
  REQUIRE(e.occupancy(0, 0, 1) == 2);

  e.begin_forward_migration();
  REQUIRE(e.phase() == MigrationPhase::Forward);
  REQUIRE(e.flag_value() == FlagValue::Migrating);
  REQUIRE(e.pending_copies() == 2);
  REQUIRE_FALSE(e.migration_drained());

  // Priority copy: the write goes straight to the target and is logged.
  AccessPlan w = e.plan_access(0, MemOp::Write, at(0, 1, 2, 0));
  REQUIRE(w.priority_copy);
  REQUIRE(w.via_log);
  REQUIRE(w.physical == at(0, 2, 2, 0));
  REQUIRE(w.stall_cycles == 44 + 1);
  REQUIRE(e.write_log().size() == 1);

  // A read of the logged address pays only the log search.
  AccessPlan r = e.plan_access(0, MemOp::Read, at(0, 1, 2, 0));
  REQUIRE(r.via_log);
  REQUIRE(r.physical == at(0, 2, 2, 0));
  REQUIRE(r.stall_cycles == 1);
  REQUIRE(e.log_hits() == 1);

  // The scheduled copy of the logged address is skipped; the other flows.
  auto job = e.next_copy();
  REQUIRE(job.has_value());
  REQUIRE(job->from == at(0, 1, 2, 1));
  REQUIRE(job->to == at(0, 2, 2, 1));
  REQUIRE_FALSE(e.next_copy().has_value());
  REQUIRE(e.copies_executed() == 1);
  REQUIRE(e.migration_drained());

  auto gated = e.complete_migration();
  REQUIRE(gated.size() == 1);
  REQUIRE(gated[0].bank == 1);
  REQUIRE(e.flag_value() == FlagValue::Gated);
  REQUIRE(e.write_log().size() == 0);  // log retires with the migration

  // Both addresses now read from the target bank with no log involved.
  REQUIRE(e.locate(0, at(0, 1, 2, 0)) == at(0, 2, 2, 0));
  REQUIRE(e.locate(0, at(0, 1, 2, 1)) == at(0, 2, 2, 1));
  REQUIRE(e.occupancy(0, 0, 1) == 0);
  REQUIRE(e.occupancy(0, 0, 2) == 2);
}

TEST_CASE("a native write relocates the squatting migrated data")
{
  RemapEngine e(tiny_geometry(), one_pair_matrix(), roomy_params());
  e.plan_access(0, MemOp::Write, at(0, 1, 2, 0));
  gate_pair(e);
  REQUIRE(e.locate(0, at(0, 1, 2, 0)) == at(0, 2, 2, 0));

  // The target bank's own address wants its home slot back.
  AccessPlan w = e.plan_access(0, MemOp::Write, at(0, 2, 2, 0));
  REQUIRE(w.physical == at(0, 2, 2, 0));
  REQUIRE(w.relocation.has_value());
  REQUIRE(w.relocation->from == at(0, 2, 2, 0));
  REQUIRE(w.relocation->to == at(0, 2, 2, 1));
  REQUIRE(w.interrupted);

  // The displaced victim address follows its new override.
  REQUIRE(e.locate(0, at(0, 1, 2, 0)) == at(0, 2, 2, 1));
  AccessPlan r = e.plan_access(0, MemOp::Read, at(0, 1, 2, 0));
  REQUIRE(r.physical == at(0, 2, 2, 1));
}

TEST_CASE("crossing the occupancy threshold asks for a reverse migration")
{
  RemapEngine e(tiny_geometry(), one_pair_matrix(), roomy_params());
  e.plan_access(0, MemOp::Write, at(0, 1, 2, 0));
  e.plan_access(0, MemOp::Write, at(0, 1, 2, 1));
  gate_pair(e);

  // Fill the target bank natively, avoiding row 2 where the migrants sit.
  // 32 slots, 90% trips at 29 live addresses: 2 migrants + 27 natives.
  std::uint32_t written = 0;
  for (std::uint32_t row : {0u, 1u, 3u, 4u, 5u, 6u, 7u}) {
    for (std::uint32_t col = 0; col < 4; ++col) {
      if (written == 26) {
        REQUIRE(e.occupancy_check().action == OccupancyAction::None);
      }
      e.plan_access(0, MemOp::Write, at(0, 2, row, col));
      ++written;
      if (written == 27) {
        OccupancyDecision d = e.occupancy_check();
        REQUIRE(d.action == OccupancyAction::ReverseMigrate);
        REQUIRE(d.pair_index == 0);
      }
      if (written == 27) break;
    }
    if (written == 27) break;
  }
  REQUIRE(e.occupancy(0, 0, 2) == 29);

  auto wake = e.begin_reverse_migration(0);
  REQUIRE(wake.size() == 1);
  REQUIRE(wake[0].bank == 1);
  REQUIRE(e.phase() == MigrationPhase::Reverse);
  REQUIRE(e.pair_state(0) == PairState::Reversing);
  REQUIRE(e.flag_value() == FlagValue::Migrating);
  REQUIRE(e.pending_copies() == 2);

  // Reverse copies land the migrants back in their home slots.
  while (auto job = e.next_copy()) {
    REQUIRE(job->to.bank == 1);
    REQUIRE(job->from.bank == 2);
    REQUIRE(job->to.row == 2);
  }
  auto gated = e.complete_migration();
  REQUIRE(gated.empty());  // reverse powered the bank up at begin time
  REQUIRE(e.pair_state(0) == PairState::Retired);
  REQUIRE(e.flag_value() == FlagValue::Idle);
  REQUIRE_FALSE(e.any_pair_gated());
  REQUIRE(e.locate(0, at(0, 1, 2, 0)) == at(0, 1, 2, 0));
  REQUIRE(e.occupancy(0, 0, 1) == 2);
  REQUIRE(e.occupancy(0, 0, 2) == 27);

  // A retired pair never re-gates: a new forward migration has no open pair.
  e.begin_forward_migration();
  REQUIRE(e.complete_migration().empty());
}

TEST_CASE("writes during a reverse go straight home so nothing is stranded")
{
  RemapEngine e(tiny_geometry(), one_pair_matrix(), roomy_params());
  e.plan_access(0, MemOp::Write, at(0, 1, 2, 0));
  gate_pair(e);
  e.begin_reverse_migration(0);

  // New victim-bank address mid-reverse: placed at home immediately.
  AccessPlan w = e.plan_access(0, MemOp::Write, at(0, 1, 4, 3));
  REQUIRE(w.physical == at(0, 1, 4, 3));
  REQUIRE(w.new_occupancy);

  // The already-migrated address still reads from the target until copied.
  AccessPlan r = e.plan_access(0, MemOp::Read, at(0, 1, 2, 0));
  REQUIRE(r.physical == at(0, 2, 2, 0));

  while (e.next_copy()) {
  }
  e.complete_migration();
  REQUIRE(e.locate(0, at(0, 1, 2, 0)) == at(0, 1, 2, 0));
  REQUIRE(e.locate(0, at(0, 1, 4, 3)) == at(0, 1, 4, 3));
}

TEST_CASE("trie pressure triggers reopen-all and suppresses future gating")
{
  EngineParams ep;
  // Room for exactly one four-node path per trie; its footprint of 64 bytes
  // already exceeds 90% of the 70-byte ceiling.
  ep.trie_capacity_bytes_override = 70;
  RemapEngine e(tiny_geometry(), one_pair_matrix(), ep);
  gate_pair(e);
  REQUIRE(e.occupancy_check().action == OccupancyAction::None);

  e.plan_access(0, MemOp::Write, at(0, 1, 3, 0));  // claims one tracked slot
  OccupancyDecision d = e.occupancy_check();
  REQUIRE(d.action == OccupancyAction::ReopenAll);

  auto wake = e.begin_reopen_all();
  REQUIRE(wake.size() == 1);
  REQUIRE(wake[0].bank == 1);
  while (e.next_copy()) {
  }
  e.complete_migration();
  REQUIRE(e.gating_suppressed());
  REQUIRE(e.pair_state(0) == PairState::Retired);
  REQUIRE(e.flag_value() == FlagValue::Idle);
  REQUIRE(e.locate(0, at(0, 1, 3, 0)) == at(0, 1, 3, 0));

  // Suppression is final: no further checks fire, no forward restarts.
  REQUIRE(e.occupancy_check().action == OccupancyAction::None);
  REQUIRE_THROWS_AS(e.begin_forward_migration(), OrderError);
}

TEST_CASE("reopen-all during a forward migration aborts it cleanly")
{
  RemapEngine e(tiny_geometry(), one_pair_matrix(), roomy_params());
  e.plan_access(0, MemOp::Write, at(0, 1, 2, 0));
  e.begin_forward_migration();
  REQUIRE(e.pending_copies() == 1);

  auto wake = e.begin_reopen_all();
  REQUIRE(wake.empty());  // nothing was gated yet
  REQUIRE(e.phase() == MigrationPhase::Reverse);
  while (e.next_copy()) {
  }
  e.complete_migration();
  REQUIRE(e.gating_suppressed());
  REQUIRE(e.flag_value() == FlagValue::Idle);
  REQUIRE(e.locate(0, at(0, 1, 2, 0)) == at(0, 1, 2, 0));
}

TEST_CASE("weak rows redirect away, victims borrowing their pair's target")
{
  Geometry g = tiny_geometry();
  RemapEngine e(g, one_pair_matrix(), roomy_params());
  // Victim-bank weak row (rank 0, bank 1, row 5) and an unpaired bank's
  // weak row (rank 1, bank 3, row 2).
  std::vector<std::uint64_t> rows = {global_row_id(0, 1, 5, g),
                                     global_row_id(1, 3, 2, g)};
  REQUIRE(e.install_weak_rows(rows) == 2);
  REQUIRE(e.weak_row_count() == 2);
  REQUIRE(e.is_weak_row(0, 0, 1, 5));
  REQUIRE(e.is_weak_row(0, 1, 3, 2));
  REQUIRE_FALSE(e.is_weak_row(0, 0, 1, 4));

  // Victim weak row: redirected into the pair's target bank.
  AccessPlan r = e.plan_access(0, MemOp::Read, at(0, 1, 5, 2));
  REQUIRE(r.physical.bank == 2);
  REQUIRE(r.physical.rank == 0);
  REQUIRE(r.physical.row != 5);
  REQUIRE(r.stall_cycles == 3);
  REQUIRE(e.weak_redirect_hits() == 1);

  // Unpaired bank: redirected within itself to a healthy row.
  AccessPlan w = e.plan_access(0, MemOp::Write, at(1, 3, 2, 1));
  REQUIRE(w.physical.rank == 1);
  REQUIRE(w.physical.bank == 3);
  REQUIRE(w.physical.row != 2);
  REQUIRE(w.physical.col == 1);
  REQUIRE(w.stall_cycles == 3);
  REQUIRE(w.new_occupancy);
  REQUIRE(e.locate(0, at(1, 3, 2, 1)) == w.physical);

  // Healthy rows in the same banks are untouched.
  AccessPlan h = e.plan_access(0, MemOp::Read, at(1, 3, 4, 0));
  REQUIRE(h.physical == at(1, 3, 4, 0));
  REQUIRE(h.stall_cycles == 0);
}

TEST_CASE("weak rows must be installed before any occupancy exists")
{
  Geometry g = tiny_geometry();
  RemapEngine e(g, one_pair_matrix(), roomy_params());
  e.plan_access(0, MemOp::Write, at(0, 1, 0, 0));
  REQUIRE_THROWS_AS(e.install_weak_rows({global_row_id(1, 3, 2, g)}),
                    OrderError);
}

TEST_CASE("weak redirects survive gating and reverse migration")
{
  Geometry g = tiny_geometry();
  RemapEngine e(g, one_pair_matrix(), roomy_params());
  e.install_weak_rows({global_row_id(0, 1, 5, g)});
  AccessPlan w = e.plan_access(0, MemOp::Write, at(0, 1, 5, 0));
  DecodedAddress redirected = w.physical;
  REQUIRE(redirected.bank == 2);

  gate_pair(e);
  // The redirected row sits in the target bank, outside gating's reach.
  REQUIRE(e.plan_access(0, MemOp::Read, at(0, 1, 5, 0)).physical == redirected);

  e.begin_reverse_migration(0);
  while (e.next_copy()) {
  }
  e.complete_migration();
  // Weak-redirected data stays put for refresh safety.
  REQUIRE(e.locate(0, at(0, 1, 5, 0)) == redirected);
}

TEST_CASE("migration bank-list wrapper validates its arguments")
{
  RemapEngine e(tiny_geometry(), one_pair_matrix(), roomy_params());
  DecodedAddress victim = at(0, 1, 0, 0);
  DecodedAddress target = at(0, 2, 0, 0);
  DecodedAddress stranger = at(1, 3, 0, 0);

  REQUIRE_THROWS_AS(e.migrate_and_remap({victim}, {}, true),
                    LengthMismatchError);
  REQUIRE_THROWS_AS(e.migrate_and_remap({stranger}, {target}, true),
                    ConfigError);
  REQUIRE_THROWS_AS(e.migrate_and_remap({victim}, {stranger}, true),
                    ConfigError);

  REQUIRE(e.migrate_and_remap({victim}, {target}, true).empty());
  while (e.next_copy()) {
  }
  e.complete_migration();
  REQUIRE(e.pair_state(0) == PairState::Gated);

  auto wake = e.migrate_and_remap({target}, {victim}, false);
  REQUIRE(wake.size() == 1);
  while (e.next_copy()) {
  }
  e.complete_migration();
  REQUIRE(e.pair_state(0) == PairState::Retired);
}

TEST_CASE("migration ordering violations throw")
{
  RemapEngine e(tiny_geometry(), one_pair_matrix(), roomy_params());
  REQUIRE_THROWS_AS(e.complete_migration(), OrderError);
  REQUIRE_THROWS_AS(e.begin_reverse_migration(0), OrderError);  // not gated

  e.begin_forward_migration();
  REQUIRE_THROWS_AS(e.begin_forward_migration(), OrderError);
  e.complete_migration();
  REQUIRE_THROWS_AS(e.begin_forward_migration(), OrderError);  // already gated

  e.plan_access(0, MemOp::Write, at(0, 1, 2, 0));
  e.begin_reverse_migration(0);
  REQUIRE_THROWS_AS(e.complete_migration(), OrderError);  // queue not drained
  while (e.next_copy()) {
  }
  e.complete_migration();
}

TEST_CASE("plan stalls never exceed two trie retrievals per access")
{
  RemapEngine e(tiny_geometry(), one_pair_matrix(), roomy_params());
  Geometry g = tiny_geometry();
  e.install_weak_rows({global_row_id(0, 1, 5, g), global_row_id(1, 0, 1, g)});
  gate_pair(e);
  std::mt19937_64 rng(3);
  // Rows and columns are clipped so the logical set sharing the target bank
  // stays below its 32 physical slots.
  for (int i = 0; i < 4000; ++i) {
    DecodedAddress d = at(std::uint32_t(rng() % 2), std::uint32_t(rng() % 4),
                          std::uint32_t(rng() % 3), std::uint32_t(rng() % 2));
    MemOp op = rng() % 2 ? MemOp::Write : MemOp::Read;
    AccessPlan p = e.plan_access(0, op, d);
    REQUIRE(p.stall_cycles <= 6);
  }
}
