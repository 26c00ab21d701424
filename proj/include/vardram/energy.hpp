#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bank.hpp"
#include "types.hpp"

namespace vardram {

// Per-event charges and rank-level standby currents. Gating overhead numbers
// (sleep leakage, controller draw, switch transient) are measured device
// constants; the rest are datasheet-magnitude defaults, all config-settable.
struct DeviceEnergyProfile {
  double vdd = 1.2;                       // V
  double idd_active_standby_ma = 46.0;    // rank-level, row open
  double idd_precharge_standby_ma = 34.0; // rank-level, all rows closed
  double idd_powerdown_ma = 25.0;         // rank-level, LP mode
  double act_pre_energy_nj = 1.8;         // per ACT+PRE pair
  double read_burst_energy_nj = 1.0;
  double write_burst_energy_nj = 1.1;
  double refresh_energy_nj = 30.0;        // per refresh command per rank
  double odt_energy_per_burst_nj = 0.0;
  double sleep_leakage_nw = 8.89;         // per gated bank
  double controller_power_uw = 42.84;     // translation/migration controller
  double wake_transient_pj = 1.2;         // per gate or ungate event

  void validate() const
  {
    const double* vals[] = {&vdd,
                            &idd_active_standby_ma,
                            &idd_precharge_standby_ma,
                            &idd_powerdown_ma,
                            &act_pre_energy_nj,
                            &read_burst_energy_nj,
                            &write_burst_energy_nj,
                            &refresh_energy_nj,
                            &odt_energy_per_burst_nj,
                            &sleep_leakage_nw,
                            &controller_power_uw,
                            &wake_transient_pj};
    for (const double* v : vals)
      if (!(*v >= 0.0)) throw ConfigError("energy profile: values must be >= 0");
  }
};

enum class EnergyEvent : std::uint8_t {
  ActPre,
  ReadBurst,
  WriteBurst,
  Refresh,
  GateTransient,
};

struct EnergyBreakdown {
  double background_nj = 0.0;
  double act_pre_nj = 0.0;
  double burst_nj = 0.0;
  double refresh_nj = 0.0;
  double odt_nj = 0.0;
  double overhead_nj = 0.0;

  // Single fixed summation order so the additivity identity is exact.
  double total_nj() const
  {
    return background_nj + act_pre_nj + burst_nj + refresh_nj + odt_nj +
           overhead_nj;
  }
};

// Continuous components (standby current integration, migration copies)
// accumulate as they happen; countable events are tallied as integers and
// priced once at report time, so identities like burst_nj == N * E_burst and
// overhead leakage == 8.89 nW * gated time hold exactly.
class EnergyCounters {
public:
  EnergyCounters() = default;

  EnergyCounters(const DeviceEnergyProfile& profile, std::uint32_t banks_per_rank,
                 std::size_t bank_count)
      : profile_(profile), banks_per_rank_(banks_per_rank)
  {
    profile_.validate();
    if (banks_per_rank_ == 0)
      throw ConfigError("energy: banks_per_rank must be positive");
    background_nj_.assign(bank_count, 0.0);
    copy_overhead_nj_.assign(bank_count, 0.0);
    gated_ps_.assign(bank_count, 0);
    for (auto& a : event_counts_) a.assign(bank_count, 0);
  }

  const DeviceEnergyProfile& profile() const { return profile_; }
  std::size_t bank_count() const { return background_nj_.size(); }

  // Standby/leakage integration over one span in a fixed power state.
  // Returns the energy attributed to the span; gated spans are tallied in
  // integer picoseconds and priced at report time.
  double accrue_background(std::size_t bank, BankPower state, time_ps span)
  {
    if (span == 0) return 0.0;
    if (state == BankPower::GatedOff) {
      gated_ps_[bank] += span;
      return leakage_nj(span);
    }
    double idd_ma = 0.0;
    switch (state) {
      case BankPower::RowOpen: idd_ma = profile_.idd_active_standby_ma; break;
      case BankPower::ActiveIdle: idd_ma = profile_.idd_precharge_standby_ma; break;
      case BankPower::PoweredDownLp: idd_ma = profile_.idd_powerdown_ma; break;
      case BankPower::GatedOff: break;
    }
    // V * mA = mW; mW * ns = pJ; /1000 -> nJ.
    double delta = profile_.vdd * (idd_ma / banks_per_rank_) *
                   ps_to_ns(span) * 1e-3;
    background_nj_[bank] += delta;
    return delta;
  }

  double accrue_event(std::size_t bank, EnergyEvent ev)
  {
    ++event_counts_[std::size_t(ev)][bank];
    switch (ev) {
      case EnergyEvent::ActPre: return profile_.act_pre_energy_nj;
      case EnergyEvent::ReadBurst:
        return profile_.read_burst_energy_nj + profile_.odt_energy_per_burst_nj;
      case EnergyEvent::WriteBurst:
        return profile_.write_burst_energy_nj + profile_.odt_energy_per_burst_nj;
      case EnergyEvent::Refresh:
        return profile_.refresh_energy_nj / banks_per_rank_;
      case EnergyEvent::GateTransient: return profile_.wake_transient_pj * 1e-3;
    }
    return 0.0;
  }

  // Migration/copy traffic is gating overhead, kept out of the burst counters
  // so translated and untranslated replays of one trace match there.
  void accrue_copy_overhead(std::size_t bank, double nj)
  {
    copy_overhead_nj_[bank] += nj;
  }

  // Controller draw spans the whole run, only in scenarios that gate.
  void set_run_span(time_ps span, bool controller_active)
  {
    run_span_ps_ = span;
    controller_active_ = controller_active;
  }

  std::uint64_t event_count(std::size_t bank, EnergyEvent ev) const
  {
    return event_counts_[std::size_t(ev)][bank];
  }

  std::uint64_t gated_ps(std::size_t bank) const { return gated_ps_[bank]; }

  double controller_nj() const
  {
    if (!controller_active_) return 0.0;
    return profile_.controller_power_uw * 1e-6 * ps_to_ns(run_span_ps_);
  }

  EnergyBreakdown bank_breakdown(std::size_t bank) const
  {
    EnergyBreakdown b;
    b.background_nj = background_nj_[bank];
    b.act_pre_nj = double(count(bank, EnergyEvent::ActPre)) *
                   profile_.act_pre_energy_nj;
    b.burst_nj = double(count(bank, EnergyEvent::ReadBurst)) *
                     profile_.read_burst_energy_nj +
                 double(count(bank, EnergyEvent::WriteBurst)) *
                     profile_.write_burst_energy_nj;
    b.refresh_nj = double(count(bank, EnergyEvent::Refresh)) *
                   (profile_.refresh_energy_nj / banks_per_rank_);
    b.odt_nj = double(count(bank, EnergyEvent::ReadBurst) +
                      count(bank, EnergyEvent::WriteBurst)) *
               profile_.odt_energy_per_burst_nj;
    b.overhead_nj = copy_overhead_nj_[bank] +
                    double(count(bank, EnergyEvent::GateTransient)) *
                        (profile_.wake_transient_pj * 1e-3) +
                    leakage_nj(gated_ps_[bank]);
    return b;
  }

  EnergyBreakdown totals() const
  {
    EnergyBreakdown t;
    for (std::size_t i = 0; i < bank_count(); ++i) {
      EnergyBreakdown b = bank_breakdown(i);
      t.background_nj += b.background_nj;
      t.act_pre_nj += b.act_pre_nj;
      t.burst_nj += b.burst_nj;
      t.refresh_nj += b.refresh_nj;
      t.odt_nj += b.odt_nj;
      t.overhead_nj += b.overhead_nj;
    }
    t.overhead_nj += controller_nj();
    return t;
  }

private:
  std::uint64_t count(std::size_t bank, EnergyEvent ev) const
  {
    return event_counts_[std::size_t(ev)][bank];
  }

  double leakage_nj(time_ps span) const
  {
    // nW * ns = 1e-9 nJ.
    return profile_.sleep_leakage_nw * ps_to_ns(span) * 1e-9;
  }

  DeviceEnergyProfile profile_;
  std::uint32_t banks_per_rank_ = 8;
  std::vector<double> background_nj_;
  std::vector<double> copy_overhead_nj_;
  std::vector<std::uint64_t> gated_ps_;
  std::array<std::vector<std::uint64_t>, 5> event_counts_;
  time_ps run_span_ps_ = 0;
  bool controller_active_ = false;
};

}  // namespace vardram
