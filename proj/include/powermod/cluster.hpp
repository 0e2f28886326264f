#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "powermod/core.hpp"

namespace powermod {

/// A set of pairwise-similar vectors. Members are indices into the sequence
/// that was clustered, in insertion order.
struct VectorGroup {
  std::size_t group_id = 0;
  std::vector<std::size_t> members;
};

/// Greedy first-fit clustering: each vector joins the earliest-created group
/// whose every member is similar to it, otherwise it founds a new group.
std::vector<VectorGroup> cluster(std::span<const NormalizedVector> vectors, const SimilarityBounds& bounds,
                                 bool include_power);

std::vector<VectorGroup> recluster_counters_only(std::span<const NormalizedVector> vectors,
                                                 const SimilarityBounds& bounds);

/// group_of[i] is the id of the group holding vector i.
std::vector<std::size_t> group_assignment(std::span<const VectorGroup> groups, std::size_t n_vectors);

}  // namespace powermod
