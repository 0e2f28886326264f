#include "powermod/linear.hpp"

namespace powermod {

LinearModel fit_lr(std::span<const NormalizedVector> train, bool intercept) {
  if (train.empty()) throw std::invalid_argument("cannot fit a linear model on an empty training set");
  return fit_lr(counter_matrix(train), power_vector(train), intercept);
}

}  // namespace powermod
