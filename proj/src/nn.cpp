#include "powermod/nn.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "powermod/error.hpp"

namespace powermod {

void NnConfig::validate() const {
  for (auto h : hidden) {
    if (h == 0) throw std::invalid_argument("hidden layer width must be positive");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
}

namespace {

Mat activate(const Mat& z, Activation a) {
  switch (a) {
    case Activation::Sigmoid: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Relu: return z.array().max(0.0).matrix();
    case Activation::Linear: return z;
  }
  return z;
}

// Derivative expressed through the pre-activation z and the output a.
Mat activation_slope(const Mat& z, const Mat& a, Activation act) {
  switch (act) {
    case Activation::Sigmoid: return (a.array() * (1.0 - a.array())).matrix();
    case Activation::Tanh: return (1.0 - a.array().square()).matrix();
    case Activation::Relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Linear: return Mat::Ones(z.rows(), z.cols());
  }
  return Mat::Ones(z.rows(), z.cols());
}

struct Forward {
  std::vector<Mat> z;  // pre-activations per layer
  std::vector<Mat> a;  // a[0] = input, a[l+1] = output of layer l
};

Forward forward(const NnModel& m, const Mat& x_cols) {
  Forward f;
  f.a.push_back(x_cols);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    Mat z = layer.weights * f.a.back();
    z.colwise() += layer.bias;
    const bool last = l + 1 == m.layers.size();
    f.a.push_back(last ? z : activate(z, m.activation));
    f.z.push_back(std::move(z));
  }
  return f;
}

}  // namespace

Eigen::RowVectorXd NnModel::predict_batch(const Mat& x_cols) const {
  Mat a = x_cols;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Mat z = layers[l].weights * a;
    z.colwise() += layers[l].bias;
    a = l + 1 == layers.size() ? z : activate(z, activation);
  }
  return a.row(0);
}

double NnModel::predict(const Vec& x) const { return predict_batch(x)(0); }

std::size_t NnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

Vec NnModel::parameters() const {
  Vec theta(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index o = 0;
  for (const auto& l : layers) {
    theta.segment(o, l.weights.size()) = l.weights.reshaped();
    o += l.weights.size();
    theta.segment(o, l.bias.size()) = l.bias;
    o += l.bias.size();
  }
  return theta;
}

void NnModel::set_parameters(const Vec& theta) {
  if (static_cast<std::size_t>(theta.size()) != parameter_count()) {
    throw std::invalid_argument("parameter vector has the wrong length");
  }
  Eigen::Index o = 0;
  for (auto& l : layers) {
    l.weights.reshaped() = theta.segment(o, l.weights.size());
    o += l.weights.size();
    l.bias = theta.segment(o, l.bias.size());
    o += l.bias.size();
  }
}

double loss(const NnModel& model, const Mat& x, const Vec& y) {
  const Eigen::RowVectorXd pred = model.predict_batch(x.transpose());
  return 0.5 * (pred.transpose() - y).squaredNorm() / static_cast<double>(y.size());
}

LossGradient loss_and_gradient(const NnModel& model, const Mat& x, const Vec& y) {
  if (x.rows() != y.size() || x.rows() == 0) throw std::invalid_argument("bad training batch");
  const double n = static_cast<double>(y.size());
  const Forward f = forward(model, x.transpose());
  const Mat residual = f.a.back() - y.transpose();

  LossGradient out;
  out.loss = 0.5 * residual.squaredNorm() / n;
  out.gradient.resize(static_cast<Eigen::Index>(model.parameter_count()));

  // Offsets of each layer's block in the flat layout.
  std::vector<Eigen::Index> offset(model.layers.size());
  Eigen::Index o = 0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    offset[l] = o;
    o += model.layers[l].weights.size() + model.layers[l].bias.size();
  }

  Mat delta = residual / n;  // dLoss/dz for the linear output layer
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const auto& layer = model.layers[l];
    const Mat dw = delta * f.a[l].transpose();
    const Vec db = delta.rowwise().sum();
    out.gradient.segment(offset[l], dw.size()) = dw.reshaped();
    out.gradient.segment(offset[l] + dw.size(), db.size()) = db;
    if (l == 0) break;
    const Mat da = layer.weights.transpose() * delta;
    delta = (da.array() * activation_slope(f.z[l - 1], f.a[l], model.activation).array()).matrix();
  }
  return out;
}

NnModel init_nn(std::size_t n_inputs, const NnConfig& cfg, double output_bias) {
  cfg.validate();
  if (n_inputs == 0) throw std::invalid_argument("network needs at least one input");
  std::seed_seq seq{cfg.seed, std::uint64_t{0}};
  std::mt19937_64 rng(seq);

  NnModel m;
  m.activation = cfg.activation;
  std::size_t in = n_inputs;
  auto add_layer = [&](std::size_t out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer;
    layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
      for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) layer.weights(i, j) = dist(rng);
    }
    layer.bias = Vec::Zero(static_cast<Eigen::Index>(out));
    m.layers.push_back(std::move(layer));
    in = out;
  };
  for (auto h : cfg.hidden) add_layer(h);
  add_layer(1);
  m.layers.back().bias(0) = output_bias;
  return m;
}

NnModel fit_nn(const Mat& x, const Vec& y, const NnConfig& cfg, std::vector<double>* loss_history) {
  cfg.validate();
  if (x.rows() == 0) throw std::invalid_argument("cannot fit a network on an empty training set");
  if (x.rows() != y.size()) throw std::invalid_argument("target length mismatch");

  NnModel model = init_nn(static_cast<std::size_t>(x.cols()), cfg, y.mean());
  Vec theta = model.parameters();
  const Eigen::Index p = theta.size();
  const auto n = static_cast<std::size_t>(x.rows());
  const std::size_t batch = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);

  std::seed_seq seq{cfg.seed, std::uint64_t{1}};
  std::mt19937_64 rng(seq);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  Vec m1 = Vec::Zero(p);
  Vec m2 = Vec::Zero(p);
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  std::size_t step = 0;

  double best_loss = loss(model, x, y);
  Vec best = theta;
  if (loss_history) {
    loss_history->clear();
    loss_history->push_back(best_loss);
  }

  Mat xb;
  Vec yb;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(start + batch, n);
      const auto rows = static_cast<Eigen::Index>(end - start);
      xb.resize(rows, x.cols());
      yb.resize(rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        xb.row(r) = x.row(order[start + static_cast<std::size_t>(r)]);
        yb(r) = y(order[start + static_cast<std::size_t>(r)]);
      }
      const Vec g = loss_and_gradient(model, xb, yb).gradient;
      if (cfg.optimizer == Optimizer::Sgd) {
        theta -= cfg.learning_rate * g;
      } else {
        ++step;
        m1 = kBeta1 * m1 + (1.0 - kBeta1) * g;
        m2 = kBeta2 * m2 + (1.0 - kBeta2) * g.cwiseAbs2();
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        theta.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + kEps);
      }
      model.set_parameters(theta);
    }
    const double l = loss(model, x, y);
    if (!std::isfinite(l)) throw FitError("network training diverged at epoch " + std::to_string(epoch));
    if (loss_history) loss_history->push_back(l);
    if (l < best_loss) {
      best_loss = l;
      best = theta;
    }
  }
  model.set_parameters(best);
  return model;
}

NnModel fit_nn(std::span<const NormalizedVector> train, const NnConfig& cfg, std::vector<double>* loss_history) {
  return fit_nn(counter_matrix(train), power_vector(train), cfg, loss_history);
}

}  // namespace powermod
