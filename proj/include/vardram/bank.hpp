#pragma once

#include <cstdint>
#include <optional>

#include "types.hpp"

namespace vardram {

enum class BankPower : std::uint8_t {
  ActiveIdle,
  RowOpen,
  PoweredDownLp,
  GatedOff,
};

inline const char* bank_power_name(BankPower p)
{
  switch (p) {
    case BankPower::ActiveIdle: return "ACTIVE_IDLE";
    case BankPower::RowOpen: return "ROW_OPEN";
    case BankPower::PoweredDownLp: return "POWERED_DOWN_LP";
    case BankPower::GatedOff: return "GATED_OFF";
  }
  return "?";
}

enum class CmdType : std::uint8_t { Act, Pre, Read, Write, Refresh };

struct BankState {
  BankPower power = BankPower::ActiveIdle;
  std::optional<std::uint32_t> open_row;
  time_ps busy_until = 0;
  std::uint64_t occupancy = 0;  // live addresses, maintained by the remapper
  TimingParams timing;          // per-bank, possibly derated
  std::uint64_t gate_transient_count = 0;

  // Applies one command at `now`, returning its completion time. Commands
  // serialize on the bank: the caller must not issue before busy_until.
  time_ps apply(CmdType cmd, std::uint32_t arg, time_ps now)
  {
    if (now < busy_until)
      throw OrderError("bank: command issued while busy");
    if (power == BankPower::GatedOff)
      throw IllegalCommandError("bank: command to GATED_OFF bank");
    if (power == BankPower::PoweredDownLp)
      throw IllegalCommandError("bank: command to POWERED_DOWN_LP bank");
    switch (cmd) {
      case CmdType::Act:
        if (power != BankPower::ActiveIdle)
          throw IllegalCommandError("bank: ACT requires ACTIVE_IDLE");
        power = BankPower::RowOpen;
        open_row = arg;
        busy_until = now + timing.tras;
        return busy_until;
      case CmdType::Pre:
        if (power != BankPower::RowOpen)
          throw IllegalCommandError("bank: PRE requires ROW_OPEN");
        power = BankPower::ActiveIdle;
        open_row.reset();
        busy_until = now + timing.trp;
        return busy_until;
      case CmdType::Read:
        if (power != BankPower::RowOpen)
          throw IllegalCommandError("bank: READ on closed row");
        busy_until = now + timing.read_burst_ps();
        return busy_until;
      case CmdType::Write:
        if (power != BankPower::RowOpen)
          throw IllegalCommandError("bank: WRITE on closed row");
        busy_until = now + timing.write_burst_ps();
        return busy_until;
      case CmdType::Refresh:
        if (power != BankPower::ActiveIdle)
          throw IllegalCommandError("bank: REFRESH requires ACTIVE_IDLE");
        busy_until = now + timing.trfc;
        return busy_until;
    }
    throw IllegalCommandError("bank: unknown command");
  }

  // Power transitions happen between commands; gating additionally requires a
  // fully quiesced bank. Crossing the GATED_OFF boundary in either direction
  // is one switch transient for the energy model.
  void set_power_state(BankPower next, time_ps now)
  {
    if (next == BankPower::RowOpen)
      throw IllegalCommandError("bank: ROW_OPEN is entered via ACT only");
    if (power == BankPower::RowOpen)
      throw IllegalCommandError("bank: close the open row before a power change");
    if (now < busy_until)
      throw IllegalCommandError("bank: power change while busy");
    if (next == power) return;
    if (power == BankPower::GatedOff || next == BankPower::GatedOff)
      ++gate_transient_count;
    power = next;
  }
};

// Open-page service: row hit costs the burst alone, a conflicting open row
// pays PRE + ACT first, a closed bank pays ACT. Command-bus contention is the
// scheduler's concern, not modeled here.
inline time_ps service_request(BankState& bank, MemOp op, std::uint32_t row,
                               std::uint32_t col, time_ps now)
{
  time_ps t = now < bank.busy_until ? bank.busy_until : now;
  if (bank.power == BankPower::RowOpen && bank.open_row && *bank.open_row != row)
    t = bank.apply(CmdType::Pre, 0, t);
  if (bank.power == BankPower::ActiveIdle)
    t = bank.apply(CmdType::Act, row, t);
  return bank.apply(op == MemOp::Read ? CmdType::Read : CmdType::Write, col, t);
}

}  // namespace vardram
