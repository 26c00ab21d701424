#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "types.hpp"

namespace vardram {

struct RefreshConfig {
  time_ps trefw = 64000000000ull;  // 64 ms
  time_ps trefi = 7812500;         // JEDEC-exact 7.8125 us
  std::uint32_t multiplier = 1;    // 1x normal, 4x extended window
  double ber = 4e-9;               // per cell per extended window
  std::uint64_t cells_per_row = 65536;

  void validate() const
  {
    if (trefi == 0 || trefw % trefi != 0)
      throw ConfigError("refresh: tREFW must be an integer multiple of tREFI");
    if (multiplier != 1 && multiplier != 4)
      throw ConfigError("refresh: multiplier must be 1 or 4");
    if (!(ber >= 0.0 && ber <= 1.0))
      throw ConfigError("refresh: ber must be in [0,1]");
    if (cells_per_row == 0)
      throw ConfigError("refresh: cells_per_row must be positive");
  }

  time_ps period() const { return trefi * multiplier; }
  std::uint64_t commands_per_window() const { return trefw / trefi; }
};

inline std::uint64_t cells_per_row_of(const Geometry& g)
{
  return std::uint64_t(g.cols_per_row) * g.bytes_per_column * 8;
}

// P(row has at least one weak cell) = 1 - (1 - BER)^N, evaluated in log space
// so tiny BER values keep full precision.
inline double weak_row_probability(double ber, std::uint64_t cells_per_row)
{
  if (!(ber >= 0.0 && ber <= 1.0))
    throw std::invalid_argument("weak_row_probability: ber outside [0,1]");
  if (cells_per_row == 0)
    throw std::invalid_argument("weak_row_probability: cells_per_row == 0");
  if (ber == 0.0) return 0.0;
  if (ber == 1.0) return 1.0;
  return -std::expm1(double(cells_per_row) * std::log1p(-ber));
}

// Global row ids: ((rank * banks + bank) * rows + row), the unit used by the
// weak-row set file format.
inline std::uint64_t global_row_id(std::uint32_t rank, std::uint32_t bank,
                                   std::uint32_t row, const Geometry& g)
{
  return (std::uint64_t(rank) * g.banks_per_rank + bank) * g.rows_per_bank + row;
}

struct RowLocation {
  std::uint32_t rank = 0;
  std::uint32_t bank = 0;
  std::uint32_t row = 0;
};

inline RowLocation locate_row(std::uint64_t row_id, const Geometry& g)
{
  RowLocation loc;
  loc.row = std::uint32_t(row_id % g.rows_per_bank);
  row_id /= g.rows_per_bank;
  loc.bank = std::uint32_t(row_id % g.banks_per_rank);
  loc.rank = std::uint32_t(row_id / g.banks_per_rank);
  return loc;
}

// Independent Bernoulli draw per row, ascending row-id order, so the set is
// sorted and seed-deterministic.
inline std::vector<std::uint64_t> sample_weak_rows(const Geometry& g,
                                                   double probability,
                                                   std::uint64_t seed)
{
  if (!(probability >= 0.0 && probability <= 1.0))
    throw std::invalid_argument("sample_weak_rows: probability outside [0,1]");
  std::vector<std::uint64_t> rows;
  if (probability == 0.0) return rows;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution draw(probability);
  std::uint64_t total =
      std::uint64_t(g.total_ranks()) * g.banks_per_rank * g.rows_per_bank;
  for (std::uint64_t id = 0; id < total; ++id)
    if (draw(rng)) rows.push_back(id);
  return rows;
}

// All-bank refresh per rank: ticks at k * (tREFI * multiplier) for k >= 1 up
// to and including the horizon. Every rank refreshes at every tick, so the
// per-rank command count equals the tick count.
inline std::vector<time_ps> refresh_ticks(const RefreshConfig& cfg, time_ps horizon)
{
  cfg.validate();
  std::vector<time_ps> ticks;
  time_ps step = cfg.period();
  for (time_ps t = step; t <= horizon; t += step) ticks.push_back(t);
  return ticks;
}

inline void write_weak_rows(const std::vector<std::uint64_t>& rows, std::ostream& os)
{
  for (std::uint64_t id : rows) os << id << '\n';
}

inline std::vector<std::uint64_t> read_weak_rows(std::istream& is)
{
  std::vector<std::uint64_t> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(line, &pos);
    } catch (const std::exception&) {
      throw ParseError("weak-row set: bad row id: " + line);
    }
    if (pos != line.size())
      throw ParseError("weak-row set: trailing characters: " + line);
    rows.push_back(v);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

}  // namespace vardram
