#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "powermod/core.hpp"
#include "powermod/models.hpp"

namespace powermod {

inline constexpr std::size_t kFoldCount = 4;

/// Four disjoint parts covering the dataset. Rotation r trains on every part
/// except parts[r] and holds parts[r] out.
struct FoldPlan {
  std::array<std::vector<std::size_t>, kFoldCount> parts;

  std::vector<std::size_t> training(std::size_t rotation) const;
};

/// Seeded shuffle dealt round-robin into four parts, so sizes differ by at most one.
FoldPlan make_folds(std::size_t n, std::uint64_t seed);

/// Indices into `unknown` of vectors with no similar vector (power included)
/// in `known`.
std::vector<std::size_t> dedupe_unknown_indices(std::span<const NormalizedVector> known,
                                                std::span<const NormalizedVector> unknown,
                                                const SimilarityBounds& bounds);
std::vector<NormalizedVector> dedupe_unknown(std::span<const NormalizedVector> known,
                                             std::span<const NormalizedVector> unknown,
                                             const SimilarityBounds& bounds);

/// Per-vector errors for one evaluation set.
struct ErrorSet {
  std::vector<double> ape;         // percent, measured > 0 only
  std::vector<double> signed_pct;  // 100 (predicted - measured) / measured
  std::vector<double> abs_watts;   // |predicted - measured|, every vector
  std::size_t excluded = 0;        // vectors with measured <= 0

  void add(double predicted, double measured);
  void append(const ErrorSet& other);
  double mean_ape() const;  // NaN when empty
};

struct CdfPoint {
  double threshold = 0.0;
  double fraction = 0.0;
};

/// Empirical CDF evaluated at each distinct error value.
std::vector<CdfPoint> empirical_cdf(std::span<const double> errors);

struct Summary {
  double mean_ape = 0.0;
  double stddev_across_folds = 0.0;  // population stddev of the per-fold means
  double mean_signed_pct = 0.0;
  double mean_abs_watts = 0.0;
  std::size_t count = 0;
  std::size_t excluded = 0;
  std::vector<CdfPoint> cdf;
};

struct FoldResult {
  std::size_t rotation = 0;
  std::size_t train_size = 0;
  std::size_t heldout_size = 0;
  std::size_t unknown_size = 0;  // held-out vectors left after de-duplication
  ErrorSet known;
  ErrorSet unknown;
};

struct ModelReport {
  ModelKind kind = ModelKind::Lrpm;
  std::vector<FoldResult> folds;
  Summary known;
  Summary unknown;
  Summary all;  // union of the known and unknown per-vector errors
};

struct EvalConfig {
  std::uint64_t seed = 42;
  SimilarityBounds bounds{0.9};
  ModelSet models;
};

struct EvaluationReport {
  std::uint64_t seed = 0;
  std::size_t vectors = 0;
  std::vector<ModelReport> models;

  const ModelReport& get(ModelKind kind) const;
};

/// Four rotations: train on three parts (normalization fitted on them), test
/// on the training vectors (Known) and on the held-out vectors that survive
/// de-duplication (Unknown).
EvaluationReport run_experiment(const Dataset& dataset, std::span<const ModelKind> kinds, const EvalConfig& cfg);

Summary summarize(std::span<const ErrorSet> per_fold);

nlohmann::json to_json(const EvaluationReport& report, bool include_cdf = true);

}  // namespace powermod
