#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "vardram/vardram.hpp"

using namespace vardram;

namespace {

Geometry small_geometry()
{
  Geometry g;
  g.channels = 2;
  g.ranks_per_channel = 2;
  g.banks_per_rank = 4;
  g.rows_per_bank = 64;
  g.cols_per_row = 16;
  g.bytes_per_column = 8;
  return g;
}

}  // namespace

TEST_CASE("address field layout places column lowest and row above rank")
{
  Geometry g;  // defaults: 1ch x 2ranks x 8banks x 4096rows x 1024cols x 8B
  DecodedAddress d{0, 1, 5, 7, 9};
  // offset 3 bits | col 10 | bank 3 | rank 1 | row 12:
  //   9 << 3 | 5 << 13 | 1 << 16 | 7 << 17 = 0xFA048
  REQUIRE(encode_address(d, g) == 0xFA048ull);
  REQUIRE(decode_address(0xFA048ull, g) == d);
}

TEST_CASE("encode/decode round-trips over random addresses")
{
  Geometry g = small_geometry();
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    DecodedAddress d;
    d.channel = std::uint32_t(rng() % g.channels);
    d.rank = std::uint32_t(rng() % g.ranks_per_channel);
    d.bank = std::uint32_t(rng() % g.banks_per_rank);
    d.row = std::uint32_t(rng() % g.rows_per_bank);
    d.col = std::uint32_t(rng() % g.cols_per_row);
    std::uint64_t addr = encode_address(d, g);
    REQUIRE(decode_address(addr, g) == d);
    // Byte offsets within one column decode to the same location.
    REQUIRE(decode_address(addr + (rng() % g.bytes_per_column), g) == d);
  }
}

TEST_CASE("encode_address rejects out-of-range fields")
{
  Geometry g = small_geometry();
  REQUIRE_THROWS_AS(encode_address({2, 0, 0, 0, 0}, g), ParseError);
  REQUIRE_THROWS_AS(encode_address({0, 2, 0, 0, 0}, g), ParseError);
  REQUIRE_THROWS_AS(encode_address({0, 0, 4, 0, 0}, g), ParseError);
  REQUIRE_THROWS_AS(encode_address({0, 0, 0, 64, 0}, g), ParseError);
  REQUIRE_THROWS_AS(encode_address({0, 0, 0, 0, 16}, g), ParseError);
}

TEST_CASE("trie keys pack rank|bank|row|col and round-trip")
{
  Geometry g = small_geometry();
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    DecodedAddress d;
    d.rank = std::uint32_t(rng() % g.ranks_per_channel);
    d.bank = std::uint32_t(rng() % g.banks_per_rank);
    d.row = std::uint32_t(rng() % g.rows_per_bank);
    d.col = std::uint32_t(rng() % g.cols_per_row);
    std::uint32_t key = pack_addr_key(d, g);
    REQUIRE((key & row_key_flag) == 0);
    DecodedAddress back = unpack_addr_key(key, g);
    REQUIRE(back.rank == d.rank);
    REQUIRE(back.bank == d.bank);
    REQUIRE(back.row == d.row);
    REQUIRE(back.col == d.col);
  }
}

TEST_CASE("row keys carry the row granularity flag in bit 31")
{
  Geometry g = small_geometry();
  std::uint32_t k = pack_row_key(1, 3, 42, g);
  REQUIRE((k & row_key_flag) != 0);
  // A row key is an address key with the column bits stripped.
  std::uint32_t addr_key = pack_addr_key({0, 1, 3, 42, 0}, g);
  REQUIRE((k & ~row_key_flag) == addr_key >> g.col_bits());
  DecodedAddress d = unpack_addr_key((k & ~row_key_flag) << g.col_bits(), g);
  REQUIRE(d.rank == 1);
  REQUIRE(d.bank == 3);
  REQUIRE(d.row == 42);
  REQUIRE(d.col == 0);
}

TEST_CASE("bank_key_range spans exactly the keys packed for that bank")
{
  Geometry g = small_geometry();
  for (std::uint32_t rank = 0; rank < g.ranks_per_channel; ++rank)
    for (std::uint32_t bank = 0; bank < g.banks_per_rank; ++bank) {
      auto [lo, hi] = bank_key_range(rank, bank, g);
      REQUIRE(pack_addr_key({0, rank, bank, 0, 0}, g) == lo);
      REQUIRE(pack_addr_key({0, rank, bank, g.rows_per_bank - 1,
                             g.cols_per_row - 1}, g) == hi);
      // Adjacent banks start one past this range.
      std::uint32_t next = (std::uint64_t(rank) * g.banks_per_rank + bank + 1 <
                            std::uint64_t(g.ranks_per_channel) * g.banks_per_rank)
                               ? hi + 1
                               : hi;
      if (next != hi) {
        std::uint32_t nrank = (bank + 1 == g.banks_per_rank) ? rank + 1 : rank;
        std::uint32_t nbank = (bank + 1 == g.banks_per_rank) ? 0 : bank + 1;
        REQUIRE(bank_key_range(nrank, nbank, g).first == next);
      }
    }
}

TEST_CASE("check_key_width rejects geometries beyond 31 key bits")
{
  Geometry g;
  g.channels = 1;
  g.ranks_per_channel = 4;   // 2 bits
  g.banks_per_rank = 16;     // 4 bits
  g.rows_per_bank = 1 << 16; // 16 bits
  g.cols_per_row = 1 << 10;  // 10 bits -> 32 total
  g.bytes_per_column = 8;
  REQUIRE_THROWS_AS(check_key_width(g), ConfigError);
  g.rows_per_bank = 1 << 15;  // 31 total fits
  REQUIRE_NOTHROW(check_key_width(g));
}
