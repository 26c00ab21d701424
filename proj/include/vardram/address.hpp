#pragma once

#include <utility>

#include "types.hpp"

namespace vardram {

// Physical address layout, LSB to MSB:
//   byte offset | column | bank | rank | row | channel
// Row bits sit above rank so that a row sweep within one bank strides far
// apart in the flat address space, and consecutive columns are contiguous.

inline DecodedAddress decode_address(std::uint64_t addr, const Geometry& g)
{
  DecodedAddress d;
  unsigned shift = g.offset_bits();
  d.col = std::uint32_t((addr >> shift) & (g.cols_per_row - 1));
  shift += g.col_bits();
  d.bank = std::uint32_t((addr >> shift) & (g.banks_per_rank - 1));
  shift += g.bank_bits();
  d.rank = std::uint32_t((addr >> shift) & (g.ranks_per_channel - 1));
  shift += g.rank_bits();
  d.row = std::uint32_t((addr >> shift) & (g.rows_per_bank - 1));
  shift += g.row_bits();
  d.channel = std::uint32_t((addr >> shift) & (g.channels - 1));
  return d;
}

// 32-bit trie keys: rank|bank|row|col packed contiguously, rank highest, so a
// (rank,bank) prefix owns one contiguous key range. Bit 31 is reserved to tag
// row-granularity keys (weak-row redirects), which drop the column field.
inline void check_key_width(const Geometry& g)
{
  unsigned bits = g.rank_bits() + g.bank_bits() + g.row_bits() + g.col_bits();
  if (bits > 31)
    throw ConfigError("geometry: rank|bank|row|col exceeds the 31-bit key space");
}

inline constexpr std::uint32_t row_key_flag = 0x80000000u;

inline std::uint32_t pack_addr_key(const DecodedAddress& d, const Geometry& g)
{
  std::uint32_t key = d.rank;
  key = (key << g.bank_bits()) | d.bank;
  key = (key << g.row_bits()) | d.row;
  key = (key << g.col_bits()) | d.col;
  return key;
}

inline DecodedAddress unpack_addr_key(std::uint32_t key, const Geometry& g)
{
  DecodedAddress d;
  d.col = key & (g.cols_per_row - 1);
  key >>= g.col_bits();
  d.row = key & (g.rows_per_bank - 1);
  key >>= g.row_bits();
  d.bank = key & (g.banks_per_rank - 1);
  key >>= g.bank_bits();
  d.rank = key & (g.ranks_per_channel - 1);
  return d;
}

inline std::uint32_t pack_row_key(std::uint32_t rank, std::uint32_t bank,
                                  std::uint32_t row, const Geometry& g)
{
  std::uint32_t key = rank;
  key = (key << g.bank_bits()) | bank;
  key = (key << g.row_bits()) | row;
  return key | row_key_flag;
}

// Key range covered by one (rank, bank) prefix at address granularity.
inline std::pair<std::uint32_t, std::uint32_t> bank_key_range(std::uint32_t rank,
                                                              std::uint32_t bank,
                                                              const Geometry& g)
{
  std::uint32_t lo = ((rank << g.bank_bits()) | bank) << (g.row_bits() + g.col_bits());
  std::uint32_t hi = lo + (std::uint32_t{1} << (g.row_bits() + g.col_bits())) - 1;
  return {lo, hi};
}

inline std::uint64_t encode_address(const DecodedAddress& d, const Geometry& g)
{
  if (d.channel >= g.channels || d.rank >= g.ranks_per_channel ||
      d.bank >= g.banks_per_rank || d.row >= g.rows_per_bank ||
      d.col >= g.cols_per_row)
    throw ParseError("encode_address: field out of range");
  std::uint64_t addr = 0;
  unsigned shift = g.offset_bits();
  addr |= std::uint64_t(d.col) << shift;
  shift += g.col_bits();
  addr |= std::uint64_t(d.bank) << shift;
  shift += g.bank_bits();
  addr |= std::uint64_t(d.rank) << shift;
  shift += g.rank_bits();
  addr |= std::uint64_t(d.row) << shift;
  shift += g.row_bits();
  addr |= std::uint64_t(d.channel) << shift;
  return addr;
}

}  // namespace vardram
