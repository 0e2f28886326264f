#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "powermod/cluster.hpp"
#include "powermod/core.hpp"

namespace powermod {

/// Which traces get the Type I / Type II (boundary-averaging) checks.
/// Auto enables them for power-sensor traces only.
enum class BoundaryNoiseScope { Auto, Always, Never };

struct NoiseConfig {
  SimilarityBounds bounds{0.9};
  double eps_half = 0.1;    // relative tolerance of the "about half" / "about the mean" power tests
  double eps_ratio = 0.1;   // max spread (max - min) of the per-counter ratios or fractions
  double delta_half = 0.05; // ratios whose mean is within this of 0.5 are genuine halves
  double min_separation = 0.05;  // Type II skips counters whose neighbours differ by less (normalized units)
  std::size_t consecutive_run = 2;
  SimilarityBounds type3_bounds{0.7};
  bool mean_ratio_correction = false;  // use the mean ratio instead of the first counter's
  BoundaryNoiseScope boundary_scope = BoundaryNoiseScope::Auto;

  void validate() const;
};

enum class FilterAction { Untouched, CorrectedTypeI, CorrectedTypeII, RemovedTypeIII };

std::string_view to_string(FilterAction action);

struct VectorAnnotation {
  std::string trace_id;
  std::size_t seq = 0;
  bool normal = false;
  FilterAction action = FilterAction::Untouched;
  double original_power = 0.0;
  double final_power = 0.0;              // power after the Type I/II corrections (also set for removed vectors)
  std::optional<std::size_t> reference;  // seq of the neighbour used for a correction
};

struct FilterReport {
  std::size_t input = 0;
  std::size_t normal = 0;
  std::size_t type1_corrected = 0;
  std::size_t type2_corrected = 0;
  std::size_t type3_removed = 0;
  std::size_t untouched = 0;
  std::vector<VectorAnnotation> annotations;  // input order
  NoiseConfig config;
};

struct PowerCorrection {
  std::size_t index = 0;
  double power = 0.0;
  std::size_t reference_seq = 0;
};

/// prev[i] / next[i]: index of the vector with seq - 1 / seq + 1 in the same
/// trace, or npos.
struct Neighbours {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> prev;
  std::vector<std::size_t> next;
};

Neighbours find_neighbours(std::span<const NormalizedVector> vectors);

/// A group is normal when it holds a run of at least consecutive_run members
/// adjacent in the same trace; every member of a normal group is normal.
std::vector<char> identify_normal(std::span<const NormalizedVector> vectors, std::span<const VectorGroup> groups,
                                  const NoiseConfig& cfg);

/// Detects Type I vectors against the current powers, then rewrites their
/// power from the normal neighbour. `eligible` (empty = all) restricts the
/// vectors that may be flagged. Normal vectors are never flagged.
std::vector<PowerCorrection> detect_correct_type1(std::span<NormalizedVector> vectors, std::span<const char> normal,
                                                  const NoiseConfig& cfg, std::span<const char> eligible = {});

/// Type II: interpolates between two normal neighbours. Vectors listed in
/// `skip` (already corrected) are left alone.
std::vector<PowerCorrection> detect_correct_type2(std::span<NormalizedVector> vectors, std::span<const char> normal,
                                                  const NoiseConfig& cfg, std::span<const char> eligible = {},
                                                  std::span<const char> skip = {});

/// Marks vectors whose power disagrees with the median normal power of their
/// counters-only group. Returns a removal mask.
std::vector<char> remove_type3(std::span<const NormalizedVector> vectors, std::span<const VectorGroup> counter_groups,
                               std::span<const char> normal, const NoiseConfig& cfg);

struct FilterResult {
  Dataset dataset;
  FilterReport report;
};

/// Grouping, normal runs, Type I/II correction, then Type III removal, on
/// the min-max normalized dataset. Counters are never changed; only powers
/// (Types I/II) or whole vectors (Type III).
FilterResult filter(const Dataset& dataset, const NoiseConfig& cfg);

}  // namespace powermod
