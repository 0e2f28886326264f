#include "powermod/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "powermod/parallel.hpp"

namespace powermod {

std::size_t ForestConfig::resolved_mtry(std::size_t n_features) const {
  return mtry.value_or(std::max<std::size_t>(n_features / 3, 1));
}

void ForestConfig::validate(std::size_t n_features) const {
  if (ntree < 1) throw std::invalid_argument("ntree must be >= 1");
  if (min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be >= 1");
  if (max_depth && *max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
  const auto m = resolved_mtry(n_features);
  if (m < 1 || m > n_features) throw std::invalid_argument("mtry must lie in [1, n]");
}

std::size_t RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes_[i].feature >= 0) {
      stack.emplace_back(nodes_[i].left, d + 1);
      stack.emplace_back(nodes_[i].right, d + 1);
    }
  }
  return best;
}

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

}  // namespace

RegressionTree fit_tree(const Mat& x, const Vec& y, std::span<const std::size_t> rows_in, const ForestConfig& cfg,
                        std::uint64_t seed) {
  if (rows_in.empty()) throw std::invalid_argument("cannot grow a tree on zero rows");
  const auto n_features = static_cast<std::size_t>(x.cols());
  const std::size_t mtry = cfg.resolved_mtry(n_features);
  const std::size_t leaf = cfg.min_samples_leaf;
  std::mt19937_64 rng = stream(seed, 0);

  std::vector<std::size_t> rows(rows_in.begin(), rows_in.end());
  std::vector<RegressionTree::Node> nodes;
  std::vector<std::size_t> features(n_features);
  std::vector<std::size_t> order;
  std::vector<double> prefix;

  struct Pending {
    int node;
    std::size_t begin, end, depth;
  };
  nodes.emplace_back();
  std::vector<Pending> stack{{0, 0, rows.size(), 0}};

  while (!stack.empty()) {
    const Pending job = stack.back();
    stack.pop_back();
    const std::size_t count = job.end - job.begin;

    double sum = 0.0;
    for (std::size_t i = job.begin; i < job.end; ++i) sum += y(static_cast<Eigen::Index>(rows[i]));
    const double mean = sum / static_cast<double>(count);
    double sse = 0.0;
    for (std::size_t i = job.begin; i < job.end; ++i) {
      const double d = y(static_cast<Eigen::Index>(rows[i])) - mean;
      sse += d * d;
    }
    nodes[job.node].value = mean;
    nodes[job.node].samples = count;

    const bool depth_ok = !cfg.max_depth || job.depth < *cfg.max_depth;
    if (!depth_ok || count < 2 * leaf || sse <= 0.0) continue;

    std::iota(features.begin(), features.end(), std::size_t{0});
    for (std::size_t i = 0; i < mtry; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n_features - 1);
      std::swap(features[i], features[pick(rng)]);
    }
    std::sort(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(mtry));

    Split best;
    const double base = sum * sum / static_cast<double>(count);
    for (std::size_t fi = 0; fi < mtry; ++fi) {
      const auto f = static_cast<Eigen::Index>(features[fi]);
      order.assign(rows.begin() + static_cast<std::ptrdiff_t>(job.begin),
                   rows.begin() + static_cast<std::ptrdiff_t>(job.end));
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double xa = x(static_cast<Eigen::Index>(a), f);
        const double xb = x(static_cast<Eigen::Index>(b), f);
        return xa < xb || (xa == xb && a < b);
      });
      double left_sum = 0.0;
      for (std::size_t s = 1; s < count; ++s) {
        left_sum += y(static_cast<Eigen::Index>(order[s - 1]));
        if (s < leaf || count - s < leaf) continue;
        const double lo = x(static_cast<Eigen::Index>(order[s - 1]), f);
        const double hi = x(static_cast<Eigen::Index>(order[s]), f);
        if (!(lo < hi)) continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(s) +
                            right_sum * right_sum / static_cast<double>(count - s) - base;
        if (gain > best.gain) {
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid < hi)) mid = lo;
          best = Split{static_cast<int>(f), mid, gain};
        }
      }
    }
    if (best.feature < 0) continue;

    const auto mid_it = std::stable_partition(
        rows.begin() + static_cast<std::ptrdiff_t>(job.begin), rows.begin() + static_cast<std::ptrdiff_t>(job.end),
        [&](std::size_t r) { return x(static_cast<Eigen::Index>(r), best.feature) <= best.threshold; });
    const auto split_at = static_cast<std::size_t>(mid_it - rows.begin());

    const int left = static_cast<int>(nodes.size());
    nodes.emplace_back();
    const int right = static_cast<int>(nodes.size());
    nodes.emplace_back();
    auto& node = nodes[job.node];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    node.impurity_decrease = best.gain;
    stack.push_back({right, split_at, job.end, job.depth + 1});
    stack.push_back({left, job.begin, split_at, job.depth + 1});
  }
  return RegressionTree(std::move(nodes));
}

double RegressionForest::predict(const Vec& x) const {
  if (trees.empty()) throw std::logic_error("forest has no trees");
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(x);
  return s / static_cast<double>(trees.size());
}

RegressionForest fit_forest(const Mat& x, const Vec& y, const ForestConfig& cfg) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0) throw std::invalid_argument("cannot fit a forest on an empty dataset");
  if (static_cast<std::size_t>(y.size()) != n) throw std::invalid_argument("target length mismatch");
  cfg.validate(static_cast<std::size_t>(x.cols()));

  RegressionForest forest;
  forest.trees.resize(cfg.ntree);
  std::vector<std::vector<char>> in_bag(cfg.ntree);

  parallel_for(cfg.ntree, [&](std::size_t t) {
    std::vector<std::size_t> rows(n);
    std::vector<char> bag(n, 0);
    if (cfg.bootstrap) {
      std::mt19937_64 rng = stream(cfg.rng_seed, 2 * t + 1);
      std::uniform_int_distribution<std::size_t> draw(0, n - 1);
      for (auto& r : rows) {
        r = draw(rng);
        bag[r] = 1;
      }
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      std::fill(bag.begin(), bag.end(), 1);
    }
    const std::uint64_t tree_seed = stream(cfg.rng_seed, 2 * t + 2)();
    forest.trees[t] = fit_tree(x, y, rows, cfg, tree_seed);
    in_bag[t] = std::move(bag);
  });

  forest.impurity_decrease = Vec::Zero(x.cols());
  for (const auto& tree : forest.trees) {
    for (const auto& node : tree.nodes()) {
      if (node.feature >= 0) forest.impurity_decrease(node.feature) += node.impurity_decrease;
    }
  }

  double err = 0.0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    std::size_t votes = 0;
    for (std::size_t t = 0; t < cfg.ntree; ++t) {
      if (!in_bag[t][i]) {
        s += forest.trees[t].predict(x.row(static_cast<Eigen::Index>(i)));
        ++votes;
      }
    }
    if (votes > 0) {
      const double d = s / static_cast<double>(votes) - y(static_cast<Eigen::Index>(i));
      err += d * d;
      ++covered;
    }
  }
  forest.oob_mse = covered > 0 ? err / static_cast<double>(covered) : std::numeric_limits<double>::quiet_NaN();
  return forest;
}

RegressionForest fit_forest(std::span<const Vector> vectors, const ForestConfig& cfg) {
  if (vectors.empty()) throw std::invalid_argument("cannot fit a forest on an empty dataset");
  return fit_forest(counter_matrix(vectors), power_vector(vectors), cfg);
}

Vec importance(const RegressionForest& forest) {
  const double total = forest.impurity_decrease.sum();
  if (!(total > 0.0)) return Vec::Zero(forest.impurity_decrease.size());
  return forest.impurity_decrease / total;
}

}  // namespace powermod
