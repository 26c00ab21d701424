#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "types.hpp"

namespace vardram {

// Exact Cholesky field generation caps the grid; larger grids would need a
// spectral approximation, which we deliberately avoid.
inline constexpr std::size_t max_field_grid_cells = 96 * 96;

struct VariationParams {
  double mean = 1.0;              // nominal multiplier
  double sigma_over_mean = 0.09;  // total WID sigma/mu
  double systematic_fraction = 0.5;
  double phi = 0.3;  // correlation density, chip edge = 1.0
  std::uint64_t seed = 1;

  void validate() const
  {
    if (!(sigma_over_mean >= 0))
      throw ConfigError("variation: sigma_over_mean must be >= 0");
    if (!(systematic_fraction >= 0.0 && systematic_fraction <= 1.0))
      throw ConfigError("variation: systematic_fraction must be in [0,1]");
    if (!(phi > 0.0 && phi <= 1.0))
      throw ConfigError("variation: phi must be in (0,1]");
  }
};

struct BankRegion {
  std::uint32_t row0 = 0;
  std::uint32_t col0 = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
};

struct VariationMap {
  std::uint32_t grid_rows = 0;
  std::uint32_t grid_cols = 0;
  std::uint32_t ranks = 0;
  std::uint32_t banks = 0;
  std::vector<double> grid;          // row-major deviations, multiples of mu
  std::vector<BankRegion> regions;   // index rank * banks + bank

  double at(std::uint32_t r, std::uint32_t c) const
  {
    return grid[std::size_t(r) * grid_cols + c];
  }

  double& at(std::uint32_t r, std::uint32_t c)
  {
    return grid[std::size_t(r) * grid_cols + c];
  }

  const BankRegion& region(std::uint32_t rank, std::uint32_t bank) const
  {
    return regions[std::size_t(rank) * banks + bank];
  }

  void validate() const
  {
    if (grid_rows == 0 || grid_cols == 0 || ranks == 0 || banks == 0)
      throw ConfigError("variation map: empty dimensions");
    if (grid.size() != std::size_t(grid_rows) * grid_cols)
      throw ConfigError("variation map: grid size mismatch");
    if (regions.size() != std::size_t(ranks) * banks)
      throw ConfigError("variation map: region count mismatch");
    std::vector<std::uint8_t> covered(grid.size(), 0);
    for (const auto& reg : regions) {
      if (reg.rows == 0 || reg.cols == 0)
        throw ConfigError("variation map: empty bank region");
      if (reg.row0 + reg.rows > grid_rows || reg.col0 + reg.cols > grid_cols)
        throw ConfigError("variation map: region out of bounds");
      for (std::uint32_t r = reg.row0; r < reg.row0 + reg.rows; ++r)
        for (std::uint32_t c = reg.col0; c < reg.col0 + reg.cols; ++c) {
          std::uint8_t& slot = covered[std::size_t(r) * grid_cols + c];
          if (slot) throw ConfigError("variation map: overlapping bank regions");
          slot = 1;
        }
    }
    for (std::uint8_t c : covered)
      if (!c) throw ConfigError("variation map: regions do not tile the grid");
    for (double v : grid)
      if (!std::isfinite(v)) throw ConfigError("variation map: non-finite value");
  }
};

// Spherical correlogram: 1 at d = 0, reaches 0 at d = phi, 0 beyond.
inline double spherical_correlation(double d, double phi)
{
  if (!(d >= 0.0)) throw std::invalid_argument("spherical_correlation: d < 0");
  if (!(phi > 0.0)) throw std::invalid_argument("spherical_correlation: phi <= 0");
  if (d >= phi) return 0.0;
  double r = d / phi;
  return 1.0 - 1.5 * r + 0.5 * r * r * r;
}

inline VariationMap make_empty_map(std::uint32_t grid_rows, std::uint32_t grid_cols,
                                   std::uint32_t ranks, std::uint32_t banks)
{
  if (grid_rows < 2 || grid_cols < 2)
    throw ConfigError("variation map: grid must be at least 2x2");
  if (ranks == 0 || banks == 0)
    throw ConfigError("variation map: ranks/banks must be positive");
  if (grid_rows % ranks != 0 || grid_cols % banks != 0)
    throw ConfigError("variation map: grid dims must divide by ranks x banks");
  VariationMap m;
  m.grid_rows = grid_rows;
  m.grid_cols = grid_cols;
  m.ranks = ranks;
  m.banks = banks;
  m.grid.assign(std::size_t(grid_rows) * grid_cols, 0.0);
  std::uint32_t rr = grid_rows / ranks;
  std::uint32_t bc = grid_cols / banks;
  m.regions.reserve(std::size_t(ranks) * banks);
  for (std::uint32_t ra = 0; ra < ranks; ++ra)
    for (std::uint32_t ba = 0; ba < banks; ++ba)
      m.regions.push_back({ra * rr, ba * bc, rr, bc});
  return m;
}

namespace detail {

// One-slot cache of the correlation Cholesky factor. The factor depends only
// on (grid dims, phi); sigma scales it linearly, so 100-seed sweeps reuse one
// factorization. Guarded because the map generator is documented thread-safe.
struct FieldFactorCache {
  std::mutex mu;
  std::uint32_t rows = 0, cols = 0;
  double phi = -1.0;
  Eigen::MatrixXd factor;  // lower triangle valid
};

inline FieldFactorCache& field_factor_cache()
{
  static FieldFactorCache c;
  return c;
}

inline void ensure_correlation_factor(FieldFactorCache& cache, std::uint32_t rows,
                                      std::uint32_t cols, double phi)
{
  if (cache.rows == rows && cache.cols == cols && cache.phi == phi) return;
  const std::size_t n = std::size_t(rows) * cols;
  Eigen::MatrixXd& m = cache.factor;
  cache.rows = 0;  // invalidate while rebuilding
  m.resize(Eigen::Index(n), Eigen::Index(n));
  for (std::size_t i = 0; i < n; ++i) {
    double yi = (double(i / cols) + 0.5) / rows;
    double xi = (double(i % cols) + 0.5) / cols;
    for (std::size_t j = 0; j <= i; ++j) {
      double yj = (double(j / cols) + 0.5) / rows;
      double xj = (double(j % cols) + 0.5) / cols;
      double d = std::hypot(xi - xj, yi - yj);
      double rho = spherical_correlation(d, phi);
      m(Eigen::Index(i), Eigen::Index(j)) = rho;
      m(Eigen::Index(j), Eigen::Index(i)) = rho;
    }
  }
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(m);  // factors in place
  if (llt.info() != Eigen::Success)
    throw ConfigError("variation: correlation matrix not positive definite "
                      "(phi/grid mismatch)");
  cache.rows = rows;
  cache.cols = cols;
  cache.phi = phi;
}

}  // namespace detail

inline VariationMap generate_variation_map(const VariationParams& params,
                                           std::uint32_t grid_rows,
                                           std::uint32_t grid_cols,
                                           std::uint32_t ranks, std::uint32_t banks)
{
  params.validate();
  VariationMap map = make_empty_map(grid_rows, grid_cols, ranks, banks);
  const std::size_t n = map.grid.size();
  if (n > max_field_grid_cells)
    throw ConfigError("variation: grid exceeds the exact-field generation budget");

  const double sigma = params.sigma_over_mean * params.mean;
  if (sigma == 0.0) return map;
  const double sigma_sys = sigma * std::sqrt(params.systematic_fraction);
  const double sigma_rand = sigma * std::sqrt(1.0 - params.systematic_fraction);

  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  if (sigma_sys > 0.0) {
    auto& cache = detail::field_factor_cache();
    std::lock_guard<std::mutex> lock(cache.mu);
    detail::ensure_correlation_factor(cache, grid_rows, grid_cols, params.phi);
    Eigen::VectorXd z{Eigen::Index(n)};
    for (std::size_t i = 0; i < n; ++i) z(Eigen::Index(i)) = gauss(rng);
    Eigen::VectorXd field = cache.factor.triangularView<Eigen::Lower>() * z;
    for (std::size_t i = 0; i < n; ++i) map.grid[i] = sigma_sys * field(Eigen::Index(i));
  }
  if (sigma_rand > 0.0) {
    for (std::size_t i = 0; i < n; ++i) map.grid[i] += sigma_rand * gauss(rng);
  }
  return map;
}

struct PairEntry {
  std::uint32_t victim_rank = 0;
  std::uint32_t victim_bank = 0;
  std::uint32_t target_rank = 0;
  std::uint32_t target_bank = 0;

  bool operator==(const PairEntry&) const = default;
};

// Severity -> tRAS mapping: linear up to severity_max, saturated above. The
// endpoint (+18 ns absolute) is measured; the interior is an assumption.
struct DerateParams {
  time_ps delta_tras_max = 18000;  // ps
  double severity_max = 0.15;
};

inline TimingParams derate_timing(const TimingParams& nominal, double severity,
                                  const DerateParams& dp = {})
{
  if (!(severity >= 0.0)) throw std::invalid_argument("derate_timing: severity < 0");
  if (!(dp.severity_max > 0.0))
    throw ConfigError("derate: severity_max must be positive");
  double ratio = severity / dp.severity_max;
  if (ratio > 1.0) ratio = 1.0;
  TimingParams out = nominal;
  out.tras += time_ps(std::llround(double(dp.delta_tras_max) * ratio));
  out.trc = out.tras + out.trp;
  return out;
}

struct VariationMatrix {
  std::uint32_t ranks = 0;
  std::uint32_t banks = 0;
  std::vector<PairEntry> pairs;
  std::vector<TimingParams> victim_timing;  // parallel to pairs
  std::vector<double> severity;             // index rank * banks + bank

  int pair_index_of_victim(std::uint32_t rank, std::uint32_t bank) const
  {
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (pairs[i].victim_rank == rank && pairs[i].victim_bank == bank)
        return int(i);
    return -1;
  }

  int pair_index_of_target(std::uint32_t rank, std::uint32_t bank) const
  {
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (pairs[i].target_rank == rank && pairs[i].target_bank == bank)
        return int(i);
    return -1;
  }

  bool is_victim(std::uint32_t rank, std::uint32_t bank) const
  {
    return pair_index_of_victim(rank, bank) >= 0;
  }

  bool is_target(std::uint32_t rank, std::uint32_t bank) const
  {
    return pair_index_of_target(rank, bank) >= 0;
  }
};

inline VariationMatrix classify_banks(const VariationMap& map, double threshold,
                                      std::uint32_t victim_count,
                                      const TimingParams& nominal = {},
                                      const DerateParams& dp = {})
{
  map.validate();
  const std::uint32_t total = map.ranks * map.banks;
  if (victim_count > total / 2)
    throw ConfigError("classify_banks: victim_count exceeds half the bank count");

  VariationMatrix vm;
  vm.ranks = map.ranks;
  vm.banks = map.banks;
  vm.severity.resize(total, 0.0);
  for (std::uint32_t ra = 0; ra < map.ranks; ++ra)
    for (std::uint32_t ba = 0; ba < map.banks; ++ba) {
      const BankRegion& reg = map.region(ra, ba);
      double acc = 0.0;
      for (std::uint32_t r = reg.row0; r < reg.row0 + reg.rows; ++r)
        for (std::uint32_t c = reg.col0; c < reg.col0 + reg.cols; ++c)
          acc += std::fabs(map.at(r, c));
      vm.severity[std::size_t(ra) * map.banks + ba] =
          acc / (double(reg.rows) * reg.cols);
    }

  // Worst banks first; ties broken by (rank, bank) for determinism.
  std::vector<std::uint32_t> order(total);
  for (std::uint32_t i = 0; i < total; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&vm](std::uint32_t a, std::uint32_t b) {
    if (vm.severity[a] != vm.severity[b]) return vm.severity[a] > vm.severity[b];
    return a < b;
  });

  std::vector<std::uint32_t> victims;
  for (std::uint32_t idx : order) {
    if (victims.size() >= victim_count) break;
    if (vm.severity[idx] > threshold) victims.push_back(idx);
  }

  std::vector<std::uint8_t> taken(total, 0);
  for (std::uint32_t v : victims) taken[v] = 1;

  // Healthiest unpaired candidate, same rank preferred, then a rotating rank
  // pointer for cross-rank picks.
  auto healthiest_in_rank = [&](std::uint32_t rank) -> int {
    int best = -1;
    for (std::uint32_t ba = 0; ba < map.banks; ++ba) {
      std::uint32_t idx = rank * map.banks + ba;
      if (taken[idx]) continue;
      if (best < 0 || vm.severity[idx] < vm.severity[std::uint32_t(best)])
        best = int(idx);
    }
    return best;
  };

  std::uint32_t rr_rank = 0;
  for (std::uint32_t v : victims) {
    std::uint32_t vrank = v / map.banks;
    int t = healthiest_in_rank(vrank);
    if (t < 0) {
      for (std::uint32_t step = 0; step < map.ranks; ++step) {
        std::uint32_t cand = (rr_rank + step) % map.ranks;
        t = healthiest_in_rank(cand);
        if (t >= 0) {
          rr_rank = (cand + 1) % map.ranks;
          break;
        }
      }
    }
    if (t < 0)
      throw TranslationError("classify_banks: no healthy target available");
    taken[std::uint32_t(t)] = 1;
    PairEntry pe;
    pe.victim_rank = vrank;
    pe.victim_bank = v % map.banks;
    pe.target_rank = std::uint32_t(t) / map.banks;
    pe.target_bank = std::uint32_t(t) % map.banks;
    vm.pairs.push_back(pe);
    vm.victim_timing.push_back(derate_timing(nominal, vm.severity[v], dp));
  }
  return vm;
}

// Text form: two header lines, then one grid row per line. Decimals are
// printed round-trip exact.
inline void write_variation_map(const VariationMap& map, std::ostream& os)
{
  os << "vardram-map 1\n";
  os << "grid " << map.grid_rows << ' ' << map.grid_cols << '\n';
  os << "floorplan " << map.ranks << ' ' << map.banks << '\n';
  char buf[40];
  for (std::uint32_t r = 0; r < map.grid_rows; ++r) {
    for (std::uint32_t c = 0; c < map.grid_cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", map.at(r, c));
      os << (c ? " " : "") << buf;
    }
    os << '\n';
  }
}

inline VariationMap read_variation_map(std::istream& is)
{
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "vardram-map" || version != 1)
    throw ParseError("variation map: bad header");
  std::string tag;
  std::uint32_t rows = 0, cols = 0, ranks = 0, banks = 0;
  if (!(is >> tag >> rows >> cols) || tag != "grid")
    throw ParseError("variation map: bad grid line");
  if (!(is >> tag >> ranks >> banks) || tag != "floorplan")
    throw ParseError("variation map: bad floorplan line");
  VariationMap map = make_empty_map(rows, cols, ranks, banks);
  for (double& v : map.grid)
    if (!(is >> v)) throw ParseError("variation map: truncated grid data");
  map.validate();
  return map;
}

}  // namespace vardram
