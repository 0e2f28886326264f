#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "powermod/core.hpp"

namespace powermod {

struct ForestConfig {
  std::size_t ntree = 16;
  std::optional<std::size_t> max_depth;  // unlimited when empty
  std::size_t min_samples_leaf = 5;
  std::optional<std::size_t> mtry;  // max(n/3, 1) when empty
  bool bootstrap = true;
  std::uint64_t rng_seed = 42;

  std::size_t resolved_mtry(std::size_t n_features) const;
  void validate(std::size_t n_features) const;
};

/// CART regression tree stored as a flat node array; node 0 is the root.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean training target of the node
    std::size_t samples = 0;
    double impurity_decrease = 0.0;  // SSE reduction of this split
  };

  RegressionTree() = default;
  explicit RegressionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  template <typename Derived>
  double predict(const Eigen::MatrixBase<Derived>& x) const {
    int i = 0;
    while (nodes_[i].feature >= 0) {
      i = x(nodes_[i].feature) <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
    }
    return nodes_[i].value;
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t depth() const;

 private:
  std::vector<Node> nodes_;
};

struct RegressionForest {
  std::vector<RegressionTree> trees;
  Vec impurity_decrease;  // per feature, summed over all trees
  double oob_mse = 0.0;   // NaN when no out-of-bag sample exists

  double predict(const Vec& x) const;
};

/// Grows one tree on the given rows of (x, y) using variance-reduction splits.
/// Candidate features are visited in ascending index order and a split only
/// replaces the incumbent if strictly better, so ties go to the lowest index.
RegressionTree fit_tree(const Mat& x, const Vec& y, std::span<const std::size_t> rows, const ForestConfig& cfg,
                        std::uint64_t seed);

/// Tree t draws from an RNG stream seeded by (rng_seed, t), so the forest is
/// identical however the trees are scheduled.
RegressionForest fit_forest(const Mat& x, const Vec& y, const ForestConfig& cfg);
RegressionForest fit_forest(std::span<const Vector> vectors, const ForestConfig& cfg);

/// Per-feature impurity importance normalized to sum to 1; all zeros when the
/// forest contains no split.
Vec importance(const RegressionForest& forest);

}  // namespace powermod
