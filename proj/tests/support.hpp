#pragma once

// Test-only helpers: seeded data generators and brute-force oracles that
// share no code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "powermod/core.hpp"

namespace testing {

using powermod::Mat;
using powermod::NormalizedVector;
using powermod::Vec;

inline std::mt19937_64 rng(std::uint64_t seed) {
  std::seed_seq s{seed, std::uint64_t{0x7E57}};
  return std::mt19937_64(s);
}

/// Normalized vectors whose coordinates come from a small value pool (with
/// zeros), so that similar pairs and 0/0 coordinates both occur often.
inline std::vector<NormalizedVector> pooled_vectors(std::size_t count, std::size_t n, std::uint64_t seed,
                                                    std::size_t traces = 3) {
  auto g = rng(seed);
  const std::vector<double> pool{0.0, 0.0, 0.2, 0.21, 0.22, 0.5, 0.52, 0.55, 0.9, 0.95, 1.0};
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<NormalizedVector> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].counters.resize(static_cast<Eigen::Index>(n));
    for (Eigen::Index k = 0; k < out[i].counters.size(); ++k) out[i].counters(k) = pool[pick(g)];
    out[i].p_dynamic = 4.0 * pool[pick(g)];
    out[i].trace_id = "t" + std::to_string(i % traces);
    out[i].seq = i / traces;
  }
  return out;
}

/// Reference ratio test written from the bound definition a <= x/y <= 1/a.
inline bool ratio_ok_oracle(double x, double y, double a) {
  if (x == 0.0 && y == 0.0) return true;
  if (x == 0.0 || y == 0.0) return false;
  const double r = x / y;
  return r >= a * (1 - 1e-12) && r <= (1.0 / a) * (1 + 1e-12);
}

inline bool similar_oracle(const NormalizedVector& u, const NormalizedVector& w, double a, bool power) {
  if (power && !ratio_ok_oracle(u.p_dynamic, w.p_dynamic, a)) return false;
  for (Eigen::Index k = 0; k < u.counters.size(); ++k) {
    if (!ratio_ok_oracle(u.counters(k), w.counters(k), a)) return false;
  }
  return true;
}

/// Minimum-norm least squares through the SVD pseudo-inverse.
inline Vec pinv_solve(const Mat& x, const Vec& y) {
  Eigen::JacobiSVD<Mat> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec s = svd.singularValues();
  const double tol = 1e-12 * std::max<double>(static_cast<double>(std::max(x.rows(), x.cols())), 1.0) *
                     (s.size() ? s(0) : 0.0);
  Vec inv = Vec::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) inv(i) = s(i) > tol ? 1.0 / s(i) : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * y;
}

/// Euclidean projection onto {0 <= a <= C, s'a = 0}, by bisection on the
/// hyperplane multiplier.
inline Vec project_box_hyperplane(const Vec& v, const Vec& s, double C) {
  auto clip = [&](double lambda) {
    return (v - lambda * s).cwiseMax(0.0).cwiseMin(C).eval();
  };
  double lo = -1e6, hi = 1e6;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (s.dot(clip(mid)) > 0.0) lo = mid;
    else hi = mid;
  }
  return clip(0.5 * (lo + hi));
}

struct QpResult {
  Vec alpha;
  double objective = 0.0;
};

/// Dense projected-gradient oracle for the epsilon-SVR dual with kernel
/// matrix K, targets y, tube eps and box C.
inline QpResult svr_dual_oracle(const Mat& K, const Vec& y, double eps, double C, int iterations = 200000) {
  const Eigen::Index l = y.size();
  Mat Q(2 * l, 2 * l);
  Vec s(2 * l), p(2 * l);
  for (Eigen::Index i = 0; i < 2 * l; ++i) {
    s(i) = i < l ? 1.0 : -1.0;
    p(i) = i < l ? eps - y(i) : eps + y(i - l);
  }
  for (Eigen::Index i = 0; i < 2 * l; ++i) {
    for (Eigen::Index j = 0; j < 2 * l; ++j) Q(i, j) = s(i) * s(j) * K(i % l, j % l);
  }
  const double L = Eigen::SelfAdjointEigenSolver<Mat>(Q).eigenvalues().maxCoeff();
  const double step = 1.0 / std::max(L, 1e-12);
  Vec a = Vec::Zero(2 * l);
  Vec prev = a;
  Vec z = a;
  double t = 1.0;
  for (int it = 0; it < iterations; ++it) {  // accelerated projected gradient
    const Vec g = Q * z + p;
    const Vec next = project_box_hyperplane(z - step * g, s, C);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = next + ((t - 1.0) / tn) * (next - prev);
    prev = next;
    t = tn;
    a = next;
  }
  return {a, 0.5 * a.dot(Q * a) + p.dot(a)};
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("powermod_test_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace testing
