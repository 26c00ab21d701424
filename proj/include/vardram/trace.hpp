#pragma once

#include <zlib.h>

#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "address.hpp"
#include "types.hpp"

namespace vardram {

struct MemoryRequest {
  std::uint64_t issue_cycle = 0;
  MemOp op = MemOp::Read;
  std::uint64_t address = 0;
  std::uint64_t payload_tag = 0;

  bool operator==(const MemoryRequest&) const = default;
};

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Tag used when a trace line omits the payload column; depends on the line
// number so rewrites of one address get distinct tags.
inline std::uint64_t default_payload_tag(std::uint64_t address, std::uint64_t line_no)
{
  return splitmix64(address ^ splitmix64(line_no));
}

inline std::vector<MemoryRequest> parse_trace(std::istream& is)
{
  std::vector<MemoryRequest> out;
  std::string line;
  std::uint64_t line_no = 0;
  std::uint64_t prev_cycle = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    MemoryRequest req;
    std::string op_s, addr_s, tag_s;
    if (!(ls >> req.issue_cycle >> op_s >> addr_s))
      throw ParseError("trace line " + std::to_string(line_no) + ": malformed");
    if (op_s == "R")
      req.op = MemOp::Read;
    else if (op_s == "W")
      req.op = MemOp::Write;
    else
      throw ParseError("trace line " + std::to_string(line_no) + ": bad op '" +
                       op_s + "'");
    auto parse_hex = [&](const std::string& s) {
      std::size_t pos = 0;
      std::uint64_t v = 0;
      try {
        v = std::stoull(s, &pos, 16);
      } catch (const std::exception&) {
        throw ParseError("trace line " + std::to_string(line_no) +
                         ": bad hex field '" + s + "'");
      }
      if (pos != s.size())
        throw ParseError("trace line " + std::to_string(line_no) +
                         ": bad hex field '" + s + "'");
      return v;
    };
    req.address = parse_hex(addr_s);
    if (ls >> tag_s)
      req.payload_tag = parse_hex(tag_s);
    else
      req.payload_tag = default_payload_tag(req.address, line_no);
    std::string extra;
    if (ls >> extra)
      throw ParseError("trace line " + std::to_string(line_no) +
                       ": trailing field '" + extra + "'");
    if (!out.empty() && req.issue_cycle < prev_cycle)
      throw OrderError("trace line " + std::to_string(line_no) +
                       ": issue cycles decrease");
    prev_cycle = req.issue_cycle;
    out.push_back(req);
  }
  return out;
}

inline void emit_trace(const std::vector<MemoryRequest>& reqs, std::ostream& os)
{
  char buf[96];
  for (const MemoryRequest& r : reqs) {
    std::snprintf(buf, sizeof buf, "%llu %c 0x%llx 0x%llx",
                  (unsigned long long)r.issue_cycle, r.op == MemOp::Read ? 'R' : 'W',
                  (unsigned long long)r.address, (unsigned long long)r.payload_tag);
    os << buf << '\n';
  }
}

// zlib's gz layer reads plain files unchanged, so one path serves both .gz
// and raw text traces.
inline std::vector<MemoryRequest> read_trace_file(const std::string& path)
{
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw ParseError("trace: cannot open " + path);
  std::string content;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) content.append(buf, std::size_t(n));
  bool bad = n < 0;
  gzclose(f);
  if (bad) throw ParseError("trace: read error on " + path);
  std::istringstream is(content);
  return parse_trace(is);
}

inline void check_trace_addresses(const std::vector<MemoryRequest>& reqs,
                                  const Geometry& g)
{
  const std::uint64_t cap = g.capacity_bytes();
  for (const MemoryRequest& r : reqs)
    if (r.address >= cap)
      throw ParseError("trace: address 0x" + std::to_string(r.address) +
                       " beyond capacity");
}

enum class TraceKind : std::uint8_t { Uniform, Hotspot, CollisionStress, IdleHeavy };

inline TraceKind trace_kind_from_string(const std::string& s)
{
  if (s == "uniform") return TraceKind::Uniform;
  if (s == "hotspot") return TraceKind::Hotspot;
  if (s == "collision_stress") return TraceKind::CollisionStress;
  if (s == "idle_heavy") return TraceKind::IdleHeavy;
  throw ConfigError("trace: unknown kind '" + s + "'");
}

inline const char* trace_kind_name(TraceKind k)
{
  switch (k) {
    case TraceKind::Uniform: return "uniform";
    case TraceKind::Hotspot: return "hotspot";
    case TraceKind::CollisionStress: return "collision_stress";
    case TraceKind::IdleHeavy: return "idle_heavy";
  }
  return "?";
}

struct TraceGenParams {
  Geometry geometry;
  std::uint64_t request_count = 20000;
  double write_fraction = 0.3;
  std::uint64_t mean_gap_cycles = 4;
  // hotspot: bounded footprint so victim and healthy banks both see traffic;
  // every k-th request goes uniform over the whole space (0 disables)
  std::uint32_t hotspot_banks = 5;
  std::uint32_t hotspot_rows = 16;
  std::uint32_t hotspot_background_every = 8;
  // collision_stress: the bank pair whose slots are made to clash
  std::uint32_t stress_victim_rank = 0;
  std::uint32_t stress_victim_bank = 0;
  std::uint32_t stress_target_rank = 0;
  std::uint32_t stress_target_bank = 1;
  double overlap_fraction = 1.0;
  // idle_heavy: activity bursts separated by long quiet windows
  std::uint64_t burst_length = 64;
  std::uint64_t idle_gap_cycles = 20000;
};

namespace detail {

inline std::uint64_t column_aligned(std::uint64_t slot, const Geometry& g)
{
  return slot * g.bytes_per_column;
}

}  // namespace detail

inline std::vector<MemoryRequest> generate_synthetic(TraceKind kind,
                                                     const TraceGenParams& p,
                                                     std::uint64_t seed)
{
  const Geometry& g = p.geometry;
  g.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<MemoryRequest> out;
  out.reserve(p.request_count);
  std::uint64_t cycle = 0;

  auto advance = [&]() {
    std::uniform_int_distribution<std::uint64_t> gap(1, 2 * p.mean_gap_cycles + 1);
    cycle += gap(rng);
  };
  auto push = [&](MemOp op, std::uint64_t addr) {
    MemoryRequest r;
    r.issue_cycle = cycle;
    r.op = op;
    r.address = addr;
    r.payload_tag = rng();
    out.push_back(r);
  };
  auto rnd_op = [&]() {
    return unit(rng) < p.write_fraction ? MemOp::Write : MemOp::Read;
  };

  switch (kind) {
    case TraceKind::Uniform: {
      const std::uint64_t slots = g.capacity_bytes() / g.bytes_per_column;
      std::uniform_int_distribution<std::uint64_t> slot(0, slots - 1);
      for (std::uint64_t i = 0; i < p.request_count; ++i) {
        advance();
        push(rnd_op(), detail::column_aligned(slot(rng), g));
      }
      break;
    }
    case TraceKind::Hotspot: {
      std::uint32_t nb = std::min(p.hotspot_banks, g.banks_per_rank);
      std::uint32_t nr = std::min(p.hotspot_rows, g.rows_per_bank);
      if (nb == 0 || nr == 0) throw ConfigError("trace: empty hotspot footprint");
      std::uniform_int_distribution<std::uint32_t> bank(0, nb - 1);
      std::uniform_int_distribution<std::uint32_t> row(0, nr - 1);
      std::uniform_int_distribution<std::uint32_t> col(0, g.cols_per_row - 1);
      const std::uint64_t slots = g.capacity_bytes() / g.bytes_per_column;
      std::uniform_int_distribution<std::uint64_t> slot(0, slots - 1);
      for (std::uint64_t i = 0; i < p.request_count; ++i) {
        advance();
        if (p.hotspot_background_every != 0 &&
            (i + 1) % p.hotspot_background_every == 0) {
          push(rnd_op(), detail::column_aligned(slot(rng), g));
          continue;
        }
        DecodedAddress d{0, 0, bank(rng), row(rng), col(rng)};
        push(rnd_op(), encode_address(d, g));
      }
      break;
    }
    case TraceKind::CollisionStress: {
      // Fill target-bank slots natively, then hit the same (row, col) slots
      // in the victim bank; once the victim is remapped onto the target,
      // every one of those accesses must resolve a collision. A final read
      // pass re-touches the overridden addresses. Slots stride across a
      // 64-row window so consecutive accesses never share a row buffer.
      std::uint64_t n = p.request_count / 3;
      if (n == 0) break;
      if (!(p.overlap_fraction >= 0.0 && p.overlap_fraction <= 1.0))
        throw ConfigError("trace: overlap_fraction outside [0,1]");
      std::uint64_t prefill = std::uint64_t(double(n) * p.overlap_fraction + 0.5);
      std::uint64_t window = std::min<std::uint64_t>(64, g.rows_per_bank);
      if (n > window * g.cols_per_row)
        throw ConfigError("trace: collision slot count exceeds the row window");
      auto slot_addr = [&](std::uint32_t rank, std::uint32_t bank, std::uint64_t i) {
        DecodedAddress d{0, rank, bank, std::uint32_t(i % window),
                         std::uint32_t(i / window)};
        return encode_address(d, g);
      };
      for (std::uint64_t i = 0; i < prefill; ++i) {
        advance();
        push(MemOp::Write, slot_addr(p.stress_target_rank, p.stress_target_bank, i));
      }
      for (std::uint64_t i = 0; i < n; ++i) {
        advance();
        push(MemOp::Write, slot_addr(p.stress_victim_rank, p.stress_victim_bank, i));
      }
      for (std::uint64_t i = 0; i < n; ++i) {
        advance();
        push(MemOp::Read, slot_addr(p.stress_victim_rank, p.stress_victim_bank, i));
      }
      break;
    }
    case TraceKind::IdleHeavy: {
      const std::uint64_t slots = g.capacity_bytes() / g.bytes_per_column;
      std::uniform_int_distribution<std::uint64_t> slot(0, slots - 1);
      std::uint64_t in_burst = 0;
      for (std::uint64_t i = 0; i < p.request_count; ++i) {
        if (in_burst == p.burst_length) {
          cycle += p.idle_gap_cycles;
          in_burst = 0;
        }
        advance();
        ++in_burst;
        push(rnd_op(), detail::column_aligned(slot(rng), g));
      }
      break;
    }
  }
  return out;
}

}  // namespace vardram
