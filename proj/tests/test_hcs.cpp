#include <doctest.h>

#include <map>
#include <numeric>

#include "powermod/forest.hpp"
#include "powermod/hcs.hpp"
#include "support.hpp"

using namespace powermod;

namespace {

struct Xy {
  Mat x;
  Vec y;
};

Xy linear_data(std::size_t rows, std::size_t cols, std::uint64_t seed, double noise = 0.1) {
  auto g = testing::rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> e(0.0, noise);
  Xy d{Mat(rows, cols), Vec(rows)};
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < cols; ++k) d.x(i, k) = u(g);
    d.y(i) = 3.0 * d.x(i, 0) + e(g);
  }
  return d;
}

ForestConfig stump(std::size_t n) {
  ForestConfig c;
  c.ntree = 1;
  c.max_depth = 1;
  c.min_samples_leaf = 1;
  c.mtry = n;
  c.bootstrap = false;
  return c;
}

std::vector<Vector> as_vectors(const Xy& d) {
  std::vector<Vector> out;
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    out.push_back({d.y(i), d.x.row(i).transpose(), "t", static_cast<std::size_t>(i)});
  }
  return out;
}

}  // namespace

TEST_CASE("a tree leaf predicts the mean of its training targets") {
  const auto d = linear_data(200, 3, 1);
  ForestConfig c;
  c.ntree = 1;
  c.bootstrap = false;
  c.min_samples_leaf = 10;
  std::vector<std::size_t> rows(200);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto tree = fit_tree(d.x, d.y, rows, c, 3);
  std::map<const RegressionTree::Node*, std::pair<double, int>> acc;
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    int at = 0;
    while (tree.nodes()[at].feature >= 0) {
      const auto& nd = tree.nodes()[at];
      at = d.x(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    auto& a = acc[&tree.nodes()[at]];
    a.first += d.y(i);
    a.second += 1;
  }
  for (const auto& [leaf, a] : acc) {
    CHECK(leaf->value == doctest::Approx(a.first / a.second).epsilon(1e-12));
    CHECK(static_cast<int>(leaf->samples) == a.second);
    CHECK(a.second >= 10);
  }
}

TEST_CASE("constant target yields single-leaf trees and zero importance") {
  auto d = linear_data(100, 4, 2);
  d.y.setConstant(5.0);
  const auto f = fit_forest(d.x, d.y, ForestConfig{});
  for (const auto& t : f.trees) CHECK(t.nodes().size() == 1);
  CHECK(f.predict(d.x.row(0).transpose()) == 5.0);
  CHECK(importance(f).isZero());
}

TEST_CASE("an unpruned tree memorizes distinct inputs") {
  Xy d{Mat(50, 1), Vec(50)};
  auto g = testing::rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < 50; ++i) d.x(i, 0) = d.y(i) = u(g);
  ForestConfig c;
  c.ntree = 1;
  c.bootstrap = false;
  c.min_samples_leaf = 1;
  const auto f = fit_forest(d.x, d.y, c);
  for (Eigen::Index i = 0; i < 50; ++i) CHECK(f.predict(d.x.row(i).transpose()) == d.y(i));
}

TEST_CASE("importance is one-hot for a single split and sums to one otherwise") {
  Xy d{Mat::Zero(40, 4), Vec(40)};
  for (Eigen::Index i = 0; i < 40; ++i) {
    d.x(i, 2) = static_cast<double>(i);
    d.y(i) = i < 20 ? 1.0 : 7.0;
  }
  const auto f = fit_forest(d.x, d.y, stump(4));
  CHECK(importance(f) == Vec::Unit(4, 2));

  const auto r = linear_data(300, 5, 4);
  const Vec imp = importance(fit_forest(r.x, r.y, ForestConfig{}));
  CHECK(imp.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((imp.array() >= 0.0).all());
}

TEST_CASE("the root split matches a brute-force stump search") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto g = testing::rng(seed + 50);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Xy d{Mat(60, 3), Vec(60)};
    for (Eigen::Index i = 0; i < 60; ++i) {
      for (Eigen::Index k = 0; k < 3; ++k) d.x(i, k) = u(g);
      d.y(i) = std::sin(6 * d.x(i, 1)) + d.x(i, 2) * d.x(i, 0);
    }
    double best = std::numeric_limits<double>::infinity();
    int best_f = -1;
    for (Eigen::Index f = 0; f < 3; ++f) {
      for (Eigen::Index s = 0; s < 60; ++s) {
        const double th = d.x(s, f);
        double ls = 0, rs = 0, lq = 0, rq = 0;
        int ln = 0, rn = 0;
        for (Eigen::Index i = 0; i < 60; ++i) {
          if (d.x(i, f) <= th) { ls += d.y(i); lq += d.y(i) * d.y(i); ++ln; }
          else { rs += d.y(i); rq += d.y(i) * d.y(i); ++rn; }
        }
        if (ln == 0 || rn == 0) continue;
        const double sse = (lq - ls * ls / ln) + (rq - rs * rs / rn);
        if (sse < best - 1e-12) { best = sse; best_f = static_cast<int>(f); }
      }
    }
    const auto f = fit_forest(d.x, d.y, stump(3));
    const auto& root = f.trees[0].nodes()[0];
    CHECK(root.feature == best_f);
    const double total = (d.y.array() - d.y.mean()).square().sum();
    CHECK(total - root.impurity_decrease == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("a relevant feature outranks pure noise") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = linear_data(400, 2, seed, 0.3);
    ForestConfig c;
    c.rng_seed = seed;
    const Vec imp = importance(fit_forest(d.x, d.y, c));
    CHECK(imp(0) > imp(1));
  }
}

TEST_CASE("property: permuting feature columns permutes importances") {
  const auto d = linear_data(300, 4, 6, 0.5);
  // Deep nodes with a handful of rows can see two features induce the same
  // partition; the lowest-index tie rule then depends on column order. Large
  // leaves keep every candidate partition distinct.
  ForestConfig c;
  c.mtry = 4;
  c.ntree = 8;
  c.min_samples_leaf = 20;
  const std::vector<Eigen::Index> perm{2, 0, 3, 1};
  Mat xp(d.x.rows(), 4);
  for (Eigen::Index k = 0; k < 4; ++k) xp.col(k) = d.x.col(perm[k]);
  const Vec a = importance(fit_forest(d.x, d.y, c));
  const Vec b = importance(fit_forest(xp, d.y, c));
  for (Eigen::Index k = 0; k < 4; ++k) CHECK(b(k) == doctest::Approx(a(perm[k])).epsilon(1e-12));
}

TEST_CASE("property: a duplicated column never wins a tied split") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto d = linear_data(100, 3, seed + 20);
    Mat xd(100, 4);
    xd.leftCols(3) = d.x;
    xd.col(3) = d.x.col(0);
    const auto plain = fit_forest(d.x, d.y, stump(3));
    const auto dup = fit_forest(xd, d.y, stump(4));
    CHECK(dup.trees[0].nodes()[0].feature == 0);
    for (Eigen::Index i = 0; i < 100; ++i) {
      CHECK(dup.predict(xd.row(i).transpose()) == plain.predict(d.x.row(i).transpose()));
    }
  }
}

TEST_CASE("property: more trees reduce the spread of out-of-bag error across seeds") {
  auto spread = [](std::size_t ntree) {
    std::vector<double> v;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto d = linear_data(150, 4, 100, 0.3);
      ForestConfig c;
      c.ntree = ntree;
      c.rng_seed = seed;
      v.push_back(fit_forest(d.x, d.y, c).oob_mse);
    }
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
  };
  CHECK(spread(64) <= spread(1));
}

TEST_CASE("forests are deterministic per seed and differ across seeds") {
  const auto d = linear_data(200, 6, 7, 0.5);
  ForestConfig c;
  c.ntree = 4;
  const Vec a = importance(fit_forest(d.x, d.y, c));
  CHECK(a == importance(fit_forest(d.x, d.y, c)));
  c.rng_seed = 43;
  CHECK(a != importance(fit_forest(d.x, d.y, c)));
}

TEST_CASE("partitions cover every index once") {
  for (auto mode : {PartitionMode::Contiguous, PartitionMode::Random}) {
    const auto parts = partition_indices(103, 4, mode, 9);
    REQUIRE(parts.size() == 4);
    std::vector<int> seen(103, 0);
    for (const auto& p : parts) {
      CHECK((p.size() == 25 || p.size() == 26));
      for (auto i : p) ++seen[i];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
  const auto c = partition_indices(10, 3, PartitionMode::Contiguous, 0);
  CHECK(c[0] == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(c[2] == std::vector<std::size_t>{7, 8, 9});
  CHECK_THROWS(partition_indices(2, 3, PartitionMode::Contiguous, 0));
}

TEST_CASE("select_counters with one subset is the top-n of a single forest") {
  const auto d = linear_data(300, 6, 8, 0.4);
  const auto vs = as_vectors(d);
  const CounterSchema schema({"a", "b", "c", "d", "e", "f"});
  SelectionConfig cfg;
  cfg.subsets = 1;
  cfg.n_select = 3;
  const auto sel = select_counters(vs, schema, cfg);
  const Vec imp = importance(fit_forest(d.x, d.y, cfg.forest));
  std::vector<std::size_t> order(6);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return imp(a) > imp(b); });
  CHECK(sel.indices == std::vector<std::size_t>(order.begin(), order.begin() + 3));
  CHECK(sel.names[0] == "a");
  CHECK(sel.report.average.isApprox(imp));
}

TEST_CASE("select_counters is deterministic and validates n_select") {
  const auto d = linear_data(200, 5, 9, 0.4);
  const auto vs = as_vectors(d);
  const CounterSchema schema({"a", "b", "c", "d", "e"});
  SelectionConfig cfg;
  cfg.n_select = 2;
  const auto a = select_counters(vs, schema, cfg);
  const auto b = select_counters(vs, schema, cfg);
  CHECK(a.indices == b.indices);
  CHECK(a.report.per_subset == b.report.per_subset);
  CHECK(a.report.per_subset.rows() == 4);
  cfg.n_select = 6;
  CHECK_THROWS_AS(select_counters(vs, schema, cfg), std::invalid_argument);
  cfg.n_select = 0;
  CHECK_THROWS_AS(select_counters(vs, schema, cfg), std::invalid_argument);
}
