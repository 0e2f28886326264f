#include "powermod/cluster.hpp"

#include <stdexcept>

namespace powermod {

namespace {

// Per-coordinate envelope of a group. A candidate whose coordinate falls
// outside [lo * a, hi / a] of the envelope cannot be similar to every member,
// so the group is skipped before the exact pairwise test. The slack factor
// keeps the prefilter conservative under rounding.
struct Envelope {
  Vec lo;
  Vec hi;

  void extend(const Vec& x) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }

  bool may_admit(const Vec& x, double a_v) const {
    constexpr double slack = 1.0 + 1e-9;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double v = x(k);
      if (v == 0.0) {
        if (hi(k) != 0.0) return false;
        continue;
      }
      if (lo(k) <= 0.0) return false;
      if (hi(k) > v / a_v * slack) return false;
      if (lo(k) < v * a_v / slack) return false;
    }
    return true;
  }
};

Vec features(const NormalizedVector& v, bool include_power) {
  if (!include_power) return v.counters;
  Vec f(v.counters.size() + 1);
  f(0) = v.p_dynamic;
  f.tail(v.counters.size()) = v.counters;
  return f;
}

}  // namespace

std::vector<VectorGroup> cluster(std::span<const NormalizedVector> vectors, const SimilarityBounds& bounds,
                                 bool include_power) {
  if (vectors.empty()) throw std::invalid_argument("cannot cluster an empty vector set");
  const auto width = vectors.front().counters.size();

  std::vector<VectorGroup> groups;
  std::vector<Envelope> envelopes;
  std::vector<Vec> feats;
  feats.reserve(vectors.size());
  for (const auto& v : vectors) {
    if (v.counters.size() != width) throw std::invalid_argument("inconsistent vector width");
    feats.push_back(features(v, include_power));
  }

  const double a = bounds.a_v();
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const Vec& x = feats[i];
    bool placed = false;
    for (std::size_t g = 0; g < groups.size() && !placed; ++g) {
      if (!envelopes[g].may_admit(x, a)) continue;
      bool all_similar = true;
      for (auto m : groups[g].members) {
        if (!counters_similar(x, feats[m], a)) {
          all_similar = false;
          break;
        }
      }
      if (all_similar) {
        groups[g].members.push_back(i);
        envelopes[g].extend(x);
        placed = true;
      }
    }
    if (!placed) {
      groups.push_back(VectorGroup{groups.size(), {i}});
      envelopes.push_back(Envelope{x, x});
    }
  }
  return groups;
}

std::vector<VectorGroup> recluster_counters_only(std::span<const NormalizedVector> vectors,
                                                 const SimilarityBounds& bounds) {
  return cluster(vectors, bounds, false);
}

std::vector<std::size_t> group_assignment(std::span<const VectorGroup> groups, std::size_t n_vectors) {
  std::vector<std::size_t> out(n_vectors, static_cast<std::size_t>(-1));
  for (const auto& g : groups) {
    for (auto m : g.members) out.at(m) = g.group_id;
  }
  return out;
}

}  // namespace powermod
