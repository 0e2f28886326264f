#include "powermod/hcs.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace powermod {

std::vector<std::vector<std::size_t>> partition_indices(std::size_t n, std::size_t m, PartitionMode mode,
                                                        std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("number of subsets must be >= 1");
  if (n < m) throw std::invalid_argument("dataset has fewer vectors than subsets");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (mode == PartitionMode::Random) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5e1ecu};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> parts(m);
  const std::size_t base = n / m;
  const std::size_t extra = n % m;
  std::size_t at = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    parts[i].assign(order.begin() + static_cast<std::ptrdiff_t>(at),
                    order.begin() + static_cast<std::ptrdiff_t>(at + len));
    if (mode == PartitionMode::Random) std::sort(parts[i].begin(), parts[i].end());
    at += len;
  }
  return parts;
}

CounterSelection select_counters(std::span<const Vector> vectors, const CounterSchema& schema,
                                 const SelectionConfig& cfg) {
  const std::size_t n = schema.size();
  if (cfg.n_select < 1 || cfg.n_select > n) {
    throw std::invalid_argument("n_select must lie in [1, " + std::to_string(n) + "]");
  }
  cfg.forest.validate(n);
  const auto parts = partition_indices(vectors.size(), cfg.subsets, cfg.partition, cfg.forest.rng_seed);

  const Mat x = counter_matrix(vectors);
  const Vec y = power_vector(vectors);
  ImportanceReport report;
  report.per_subset.resize(static_cast<Eigen::Index>(cfg.subsets), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    Mat xs(static_cast<Eigen::Index>(parts[i].size()), x.cols());
    Vec ys(static_cast<Eigen::Index>(parts[i].size()));
    for (std::size_t r = 0; r < parts[i].size(); ++r) {
      xs.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(parts[i][r]));
      ys(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(parts[i][r]));
    }
    ForestConfig fc = cfg.forest;
    fc.rng_seed = cfg.forest.rng_seed + i;  // subset 0 reproduces a plain forest
    report.per_subset.row(static_cast<Eigen::Index>(i)) = importance(fit_forest(xs, ys, fc)).transpose();
  }
  report.average = report.per_subset.colwise().mean().transpose();
  report.ranking.resize(n);
  std::iota(report.ranking.begin(), report.ranking.end(), std::size_t{0});
  std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](std::size_t a, std::size_t b) {
    return report.average(static_cast<Eigen::Index>(a)) > report.average(static_cast<Eigen::Index>(b));
  });

  CounterSelection sel;
  sel.indices.assign(report.ranking.begin(), report.ranking.begin() + static_cast<std::ptrdiff_t>(cfg.n_select));
  for (auto k : sel.indices) sel.names.push_back(schema.name(k));
  sel.report = std::move(report);
  return sel;
}

CounterSelection select_counters(const Dataset& dataset, const SelectionConfig& cfg) {
  return select_counters(dataset.vectors, dataset.schema, cfg);
}

}  // namespace powermod
