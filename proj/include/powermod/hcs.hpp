#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "powermod/core.hpp"
#include "powermod/forest.hpp"

namespace powermod {

enum class PartitionMode { Contiguous, Random };

struct ImportanceReport {
  Mat per_subset;                    // M x n, row i from the forest on subset i
  Vec average;                       // row means of per_subset
  std::vector<std::size_t> ranking;  // descending by average, ties in schema order
};

struct CounterSelection {
  std::vector<std::size_t> indices;  // top n_select of the ranking
  std::vector<std::string> names;
  ImportanceReport report;
};

struct SelectionConfig {
  std::size_t n_select = 6;
  std::size_t subsets = 4;
  PartitionMode partition = PartitionMode::Contiguous;
  ForestConfig forest;
};

/// Splits [0, n) into m slices. Contiguous slices follow dataset order with
/// sizes differing by at most one; random slices use a seeded shuffle.
std::vector<std::vector<std::size_t>> partition_indices(std::size_t n, std::size_t m, PartitionMode mode,
                                                        std::uint64_t seed);

/// Ranks features by importance averaged over one forest per subset and
/// returns the top n_select.
CounterSelection select_counters(std::span<const Vector> vectors, const CounterSchema& schema,
                                 const SelectionConfig& cfg);

CounterSelection select_counters(const Dataset& dataset, const SelectionConfig& cfg);

}  // namespace powermod
