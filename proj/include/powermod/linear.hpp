#pragma once

#include <span>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/QR>

#include "powermod/core.hpp"

namespace powermod {

/// P = sum_k c_k * e_k (+ intercept when enabled).
struct LinearModel {
  Vec coefficients;
  double intercept = 0.0;
  bool has_intercept = false;

  template <typename Derived>
  double predict(const Eigen::MatrixBase<Derived>& x) const {
    return coefficients.dot(x) + intercept;
  }

  /// One prediction per row of x.
  Vec predict_rows(const Mat& x) const { return (x * coefficients).array() + intercept; }
};

/// Least squares through a complete orthogonal decomposition, so a
/// rank-deficient design yields the minimum-norm coefficient vector.
template <typename DerivedX, typename DerivedY>
LinearModel fit_lr(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y,
                   bool intercept = false) {
  if (x.rows() == 0) throw std::invalid_argument("cannot fit a linear model on an empty training set");
  if (x.rows() != y.size()) throw std::invalid_argument("target length mismatch");
  LinearModel m;
  m.has_intercept = intercept;
  if (!intercept) {
    m.coefficients = x.completeOrthogonalDecomposition().solve(y);
    return m;
  }
  Mat design(x.rows(), x.cols() + 1);
  design.leftCols(x.cols()) = x;
  design.col(x.cols()).setOnes();
  const Vec sol = design.completeOrthogonalDecomposition().solve(y);
  m.coefficients = sol.head(x.cols());
  m.intercept = sol(x.cols());
  return m;
}

LinearModel fit_lr(std::span<const NormalizedVector> train, bool intercept = false);

}  // namespace powermod
