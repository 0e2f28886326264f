#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "powermod/core.hpp"

namespace powermod {

enum class Activation { Sigmoid, Tanh, Relu, Linear };
enum class Optimizer { Sgd, Adam };

struct NnConfig {
  std::vector<std::size_t> hidden{16};
  Activation activation = Activation::Sigmoid;  // hidden layers; the output is linear
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 0.01;
  std::size_t epochs = 300;
  std::size_t batch_size = 32;  // 0 means full batch
  std::uint64_t seed = 42;

  void validate() const;
};

struct DenseLayer {
  Mat weights;  // out x in
  Vec bias;
};

/// Fully connected feed-forward regressor with one scalar output.
struct NnModel {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::Sigmoid;

  double predict(const Vec& x) const;
  /// Column-per-sample batch forward pass.
  Eigen::RowVectorXd predict_batch(const Mat& x_cols) const;

  std::size_t parameter_count() const;
  /// Flattened as [W1 (column-major), b1, W2, b2, ...].
  Vec parameters() const;
  void set_parameters(const Vec& theta);
};

struct LossGradient {
  double loss = 0.0;  // 0.5 * mean squared error
  Vec gradient;       // same layout as NnModel::parameters()
};

/// Loss and its exact gradient by backpropagation. x holds one sample per row.
LossGradient loss_and_gradient(const NnModel& model, const Mat& x, const Vec& y);
double loss(const NnModel& model, const Mat& x, const Vec& y);

/// Seeded Glorot-uniform initialization; the output bias starts at `output_bias`.
NnModel init_nn(std::size_t n_inputs, const NnConfig& cfg, double output_bias = 0.0);

/// Mini-batch gradient descent on squared error. The returned weights are the
/// best seen by full-training-set loss (the initial weights included), so the
/// final loss never exceeds the initial one. A non-finite loss throws
/// FitError naming the epoch.
NnModel fit_nn(const Mat& x, const Vec& y, const NnConfig& cfg, std::vector<double>* loss_history = nullptr);
NnModel fit_nn(std::span<const NormalizedVector> train, const NnConfig& cfg,
               std::vector<double>* loss_history = nullptr);

}  // namespace powermod
