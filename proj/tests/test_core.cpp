#include <doctest.h>

#include <random>

#include "powermod/core.hpp"
#include "support.hpp"

using namespace powermod;

namespace {

Vector vec(std::initializer_list<double> counters, double p = 1.0) {
  Vector v;
  v.counters = Eigen::Map<const Vec>(counters.begin(), static_cast<Eigen::Index>(counters.size()));
  v.p_dynamic = p;
  return v;
}

NormalizedVector nvec(std::initializer_list<double> counters, double p = 1.0) {
  NormalizedVector v;
  v.counters = Eigen::Map<const Vec>(counters.begin(), static_cast<Eigen::Index>(counters.size()));
  v.p_dynamic = p;
  return v;
}

}  // namespace

TEST_CASE("schema rejects empty, blank and duplicate names") {
  CHECK_THROWS_AS(CounterSchema(std::vector<std::string>{}), std::invalid_argument);
  CHECK_THROWS_AS(CounterSchema({"a", ""}), std::invalid_argument);
  CHECK_THROWS_AS(CounterSchema({"a", "b", "a"}), std::invalid_argument);
  const CounterSchema s({"cycles", "l2_miss", "inst"});
  CHECK(s.size() == 3);
  CHECK(s.index_of("inst") == 2u);
  CHECK_FALSE(s.index_of("nope"));
  const std::vector<std::size_t> cols{2, 0};
  CHECK(s.project(cols).names() == std::vector<std::string>{"inst", "cycles"});
}

TEST_CASE("normalization parameters are per-column min and max") {
  std::vector<Vector> a{vec({2}), vec({4}), vec({10})};
  auto p = compute_normalization(a);
  CHECK(p.min(0) == 2.0);
  CHECK(p.max(0) == 10.0);

  std::vector<Vector> b{vec({5})};
  p = compute_normalization(b);
  CHECK(p.min(0) == 5.0);
  CHECK(p.max(0) == 5.0);

  std::vector<Vector> c{vec({0, 1}), vec({8, 3})};
  p = compute_normalization(c);
  CHECK(p.min(0) == 0.0);
  CHECK(p.min(1) == 1.0);
  CHECK(p.max(0) == 8.0);
  CHECK(p.max(1) == 3.0);

  CHECK_THROWS_WITH(compute_normalization(std::span<const Vector>{}), "empty dataset");
}

TEST_CASE("normalize maps the range onto [0,1] and leaves power alone") {
  std::vector<Vector> a{vec({2}), vec({10})};
  const auto p = compute_normalization(a);
  CHECK(normalize(vec({10}), p).counters(0) == 1.0);
  CHECK(normalize(vec({2}), p).counters(0) == 0.0);
  CHECK(normalize(vec({6}, 3.7), p).p_dynamic == 3.7);
  // outside the fitted range: clamped
  CHECK(normalize(vec({20}), p).counters(0) == 1.0);
  CHECK(normalize(vec({-1}), p).counters(0) == 0.0);
  // degenerate column
  std::vector<Vector> d{vec({5}), vec({5})};
  CHECK(normalize(vec({5}), compute_normalization(d)).counters(0) == 0.0);
}

TEST_CASE("property: normalization round trip and bit-exact power") {
  auto g = testing::rng(1);
  std::uniform_real_distribution<double> u(0.0, 1e9);
  std::vector<Vector> vs(200);
  for (auto& v : vs) {
    v.counters.resize(7);
    for (Eigen::Index k = 0; k < 7; ++k) v.counters(k) = u(g);
    v.p_dynamic = u(g) * 1e-8;
  }
  const auto p = compute_normalization(vs);
  for (const auto& v : vs) {
    const auto n = normalize(v, p);
    CHECK(n.p_dynamic == v.p_dynamic);
    CHECK((n.counters.array() >= 0.0).all());
    CHECK((n.counters.array() <= 1.0).all());
    const Vec back = denormalize_counters(n.counters, p);
    for (Eigen::Index k = 0; k < 7; ++k) {
      CHECK(std::abs(back(k) - v.counters(k)) <= 1e-9 * std::max(std::abs(v.counters(k)), 1.0));
    }
  }
}

TEST_CASE("similarity bounds") {
  CHECK_THROWS(SimilarityBounds(0.0));
  CHECK_THROWS(SimilarityBounds(1.5));
  const SimilarityBounds b(0.8);
  CHECK(b.b_v() == doctest::Approx(1.25));
  CHECK(SimilarityBounds{}.a_v() == 0.9);
}

TEST_CASE("is_similar examples") {
  const SimilarityBounds b(0.9);
  const auto u = nvec({0.3, 0.7}, 2.0);
  CHECK(is_similar(u, u, b, true));
  CHECK_FALSE(is_similar(nvec({0.5}), nvec({1.0}), b, false));
  CHECK(is_similar(nvec({0.0, 0.0}, 3.0), nvec({0.0, 0.0}, 3.0), b, true));
  CHECK_FALSE(is_similar(nvec({0.0}), nvec({0.1}), b, false));
  // power: 0 vs 0 similar, 0 vs positive not
  CHECK(is_similar(nvec({0.5}, 0.0), nvec({0.5}, 0.0), b, true));
  CHECK_FALSE(is_similar(nvec({0.5}, 0.0), nvec({0.5}, 0.1), b, true));
  // power ignored when excluded
  CHECK(is_similar(nvec({0.5}, 1.0), nvec({0.5}, 10.0), b, false));
}

TEST_CASE("property: similarity is symmetric, reflexive, monotone and matches the oracle") {
  const auto vs = testing::pooled_vectors(120, 3, 11);
  const std::vector<double> levels{1.0, 0.95, 0.9, 0.8, 0.5, 0.1};
  for (std::size_t i = 0; i < vs.size(); ++i) {
    CHECK(is_similar(vs[i], vs[i], SimilarityBounds(0.9), true));
    for (std::size_t j = 0; j < vs.size(); ++j) {
      bool prev = false;
      for (double a : levels) {
        const SimilarityBounds b(a);
        const bool s = is_similar(vs[i], vs[j], b, true);
        REQUIRE(s == is_similar(vs[j], vs[i], b, true));
        REQUIRE(s == testing::similar_oracle(vs[i], vs[j], a, true));
        if (prev) REQUIRE(s);  // looser bound keeps similarity
        prev = s;
      }
    }
  }
}

TEST_CASE("project keeps traces and vectors consistent") {
  Dataset d;
  d.schema = CounterSchema({"a", "b", "c"});
  Trace t;
  t.trace_id = "x";
  RawSample s;
  s.counter_begin = Vec::Zero(3);
  s.counter_end = Vec::LinSpaced(3, 1, 3);
  t.samples.push_back(s);
  d.traces.push_back(t);
  d.vectors.push_back(Vector{1.0, Vec::LinSpaced(3, 1, 3), "x", 0});
  const std::vector<std::size_t> cols{2, 0};
  const auto p = project(d, cols);
  CHECK(p.schema.names() == std::vector<std::string>{"c", "a"});
  CHECK(p.vectors[0].counters(0) == 3.0);
  CHECK(p.vectors[0].counters(1) == 1.0);
  CHECK(p.traces[0].samples[0].counter_end(0) == 3.0);
}
