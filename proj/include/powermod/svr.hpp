#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "powermod/core.hpp"

namespace powermod {

enum class KernelType { Rbf, Linear };

struct Kernel {
  KernelType type = KernelType::Rbf;
  double gamma = 0.0;  // RBF width; 0 means 1 / n_features at fit time

  template <typename DerivedA, typename DerivedB>
  double operator()(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) const {
    if (type == KernelType::Linear) return a.dot(b);
    return std::exp(-gamma * (a - b).squaredNorm());
  }
};

struct SvrConfig {
  Kernel kernel;
  double C = 10.0;
  double epsilon = 0.01;
  double tolerance = 1e-3;  // stop when the maximal KKT violation falls below this
  std::size_t max_iterations = 10'000'000;

  void validate() const;
};

/// f(x) = sum_i coef_i K(sv_i, x) + bias, with |coef_i| <= C.
struct SvrModel {
  Kernel kernel;
  double C = 10.0;
  double epsilon = 0.01;
  Mat support_vectors;  // one row per support vector
  Vec dual_coef;
  double bias = 0.0;

  template <typename Derived>
  double predict(const Eigen::MatrixBase<Derived>& x) const {
    double s = bias;
    for (Eigen::Index i = 0; i < support_vectors.rows(); ++i) {
      s += dual_coef(i) * kernel(support_vectors.row(i).transpose(), x);
    }
    return s;
  }
};

/// Solver state at termination. alpha has 2l entries: alpha_i for the upper
/// tube constraints, then alpha*_i for the lower ones.
struct SvrDiagnostics {
  Vec alpha;
  double objective = 0.0;
  double kkt_violation = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Epsilon-SVR dual solved by sequential minimal optimization with
/// second-order working-set selection. Deterministic given data order.
SvrModel fit_svr(const Mat& x, const Vec& y, const SvrConfig& cfg, SvrDiagnostics* diagnostics = nullptr);
SvrModel fit_svr(std::span<const NormalizedVector> train, const SvrConfig& cfg,
                 SvrDiagnostics* diagnostics = nullptr);

/// Largest KKT violation m(alpha) - M(alpha) of a dual point for the problem
/// defined by (x, y, cfg). Zero means optimal.
double svr_kkt_violation(const Mat& x, const Vec& y, const SvrConfig& cfg, const Vec& alpha);

}  // namespace powermod
