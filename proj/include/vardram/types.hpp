#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vardram {

// Simulation time is integer picoseconds. Command/bus granularity is one
// clock period (tCK); bank timing intervals are not forced onto the cycle
// grid so that ns-specified intervals hold exactly.
using time_ps = std::uint64_t;

inline constexpr time_ps ps_per_ns = 1000;

inline time_ps ns_to_ps(double ns)
{
  if (ns < 0)
    throw std::invalid_argument("negative time");
  return static_cast<time_ps>(ns * 1000.0 + 0.5);
}

inline double ps_to_ns(time_ps ps) { return static_cast<double>(ps) / 1000.0; }

struct VardramError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : VardramError { using VardramError::VardramError; };
struct ParseError : VardramError { using VardramError::VardramError; };
struct OrderError : VardramError { using VardramError::VardramError; };
struct IllegalCommandError : VardramError { using VardramError::VardramError; };
struct CapacityError : VardramError { using VardramError::VardramError; };
struct LengthMismatchError : VardramError { using VardramError::VardramError; };
// Raised only by internal consistency assertions; reaching it is a bug.
struct TranslationError : VardramError { using VardramError::VardramError; };

inline bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

inline unsigned log2_exact(std::uint64_t v)
{
  unsigned b = 0;
  while ((std::uint64_t{1} << b) < v) ++b;
  return b;
}

struct Geometry {
  std::uint32_t channels = 1;
  std::uint32_t ranks_per_channel = 2;
  std::uint32_t banks_per_rank = 8;
  std::uint32_t rows_per_bank = 4096;
  std::uint32_t cols_per_row = 1024;
  std::uint32_t bytes_per_column = 8;

  void validate() const
  {
    auto chk = [](std::uint64_t v, const char* name) {
      if (!is_pow2(v))
        throw ConfigError(std::string("geometry: ") + name + " must be a power of two");
    };
    chk(channels, "channels");
    chk(ranks_per_channel, "ranks_per_channel");
    chk(banks_per_rank, "banks_per_rank");
    chk(rows_per_bank, "rows_per_bank");
    chk(cols_per_row, "cols_per_row");
    chk(bytes_per_column, "bytes_per_column");
  }

  std::uint64_t total_ranks() const { return std::uint64_t(channels) * ranks_per_channel; }
  std::uint64_t total_banks() const { return total_ranks() * banks_per_rank; }
  std::uint64_t slots_per_bank() const { return std::uint64_t(rows_per_bank) * cols_per_row; }
  std::uint64_t capacity_bytes() const
  {
    return total_banks() * slots_per_bank() * bytes_per_column;
  }

  unsigned offset_bits() const { return log2_exact(bytes_per_column); }
  unsigned col_bits() const { return log2_exact(cols_per_row); }
  unsigned bank_bits() const { return log2_exact(banks_per_rank); }
  unsigned rank_bits() const { return log2_exact(ranks_per_channel); }
  unsigned row_bits() const { return log2_exact(rows_per_bank); }
};

// All fields in integer picoseconds except the burst lengths (clock cycles).
struct TimingParams {
  time_ps tras = 32000;
  time_ps trp = 13750;
  time_ps trc = 45750;
  time_ps tck = 1250;
  time_ps trefi = 7812500;
  time_ps trefw = 64000000000ull;  // 64 ms
  time_ps trfc = 260000;
  std::uint32_t read_burst = 4;
  std::uint32_t write_burst = 4;

  static TimingParams from_ns(double tras_ns, double trp_ns, double tck_ns,
                              double trefi_ns, double trefw_ns, double trfc_ns,
                              std::uint32_t read_burst, std::uint32_t write_burst)
  {
    TimingParams t;
    t.tras = ns_to_ps(tras_ns);
    t.trp = ns_to_ps(trp_ns);
    t.trc = t.tras + t.trp;
    t.tck = ns_to_ps(tck_ns);
    t.trefi = ns_to_ps(trefi_ns);
    t.trefw = ns_to_ps(trefw_ns);
    t.trfc = ns_to_ps(trfc_ns);
    t.read_burst = read_burst;
    t.write_burst = write_burst;
    t.validate();
    return t;
  }

  void validate() const
  {
    if (trc != tras + trp)
      throw ConfigError("timing: tRC must equal tRAS + tRP");
    if (tck == 0)
      throw ConfigError("timing: tCK must be positive");
    if (trefi == 0 || trefw % trefi != 0)
      throw ConfigError("timing: tREFW must be an integer multiple of tREFI");
  }

  time_ps read_burst_ps() const { return time_ps(read_burst) * tck; }
  time_ps write_burst_ps() const { return time_ps(write_burst) * tck; }
};

struct DecodedAddress {
  std::uint32_t channel = 0;
  std::uint32_t rank = 0;
  std::uint32_t bank = 0;
  std::uint32_t row = 0;
  std::uint32_t col = 0;

  bool operator==(const DecodedAddress&) const = default;
};

enum class MemOp : std::uint8_t { Read, Write };

}  // namespace vardram
