#include "powermod/svr.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "powermod/error.hpp"

namespace powermod {

void SvrConfig::validate() const {
  if (!(C > 0.0)) throw std::invalid_argument("SVR C must be positive");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("SVR epsilon must be non-negative");
  if (!(tolerance > 0.0)) throw std::invalid_argument("SVR tolerance must be positive");
  if (kernel.type == KernelType::Rbf && kernel.gamma < 0.0) throw std::invalid_argument("RBF gamma must be >= 0");
}

namespace {

constexpr double kTau = 1e-12;

Kernel resolve_kernel(Kernel k, Eigen::Index n_features) {
  if (k.type == KernelType::Rbf && k.gamma == 0.0) k.gamma = 1.0 / static_cast<double>(std::max<Eigen::Index>(n_features, 1));
  return k;
}

Mat gram(const Mat& x, const Kernel& k) {
  const Eigen::Index l = x.rows();
  Mat g(l, l);
  if (k.type == KernelType::Linear) {
    g.noalias() = x * x.transpose();
    return g;
  }
  const Vec sq = x.rowwise().squaredNorm();
  g.noalias() = x * x.transpose();
  for (Eigen::Index j = 0; j < l; ++j) {
    for (Eigen::Index i = 0; i < l; ++i) {
      g(i, j) = std::exp(-k.gamma * std::max(sq(i) + sq(j) - 2.0 * g(i, j), 0.0));
    }
  }
  return g;
}

// Dual in libsvm's 2l form: minimize 0.5 a'Qa + p'a subject to s'a = 0 and
// 0 <= a <= C, where s_t = +1 for t < l and -1 otherwise, Q_ts = s_t s_s K.
struct DualProblem {
  const Mat& k;
  Eigen::Index l;
  Vec p;
  std::vector<signed char> sign;
  double c;

  DualProblem(const Mat& gram, const Vec& y, double eps, double C) : k(gram), l(y.size()), p(2 * y.size()), sign(2 * y.size()), c(C) {
    for (Eigen::Index i = 0; i < l; ++i) {
      p(i) = eps - y(i);
      p(i + l) = eps + y(i);
      sign[i] = 1;
      sign[i + l] = -1;
    }
  }

  double q(Eigen::Index s, Eigen::Index t) const { return sign[s] * sign[t] * k(s % l, t % l); }
  double qd(Eigen::Index t) const { return k(t % l, t % l); }
  bool upper(const Vec& a, Eigen::Index t) const { return a(t) >= c; }
  bool lower(const Vec& a, Eigen::Index t) const { return a(t) <= 0.0; }

  Vec gradient(const Vec& a) const {
    Vec g = p;
    for (Eigen::Index t = 0; t < 2 * l; ++t) {
      if (a(t) == 0.0) continue;
      for (Eigen::Index s = 0; s < 2 * l; ++s) g(s) += q(s, t) * a(t);
    }
    return g;
  }

  // m(a) - M(a) over the up/low index sets.
  double violation(const Vec& a, const Vec& g) const {
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < 2 * l; ++t) {
      const double v = -sign[t] * g(t);
      const bool in_up = sign[t] > 0 ? !upper(a, t) : !lower(a, t);
      const bool in_low = sign[t] > 0 ? !lower(a, t) : !upper(a, t);
      if (in_up) up = std::max(up, v);
      if (in_low) low = std::min(low, v);
    }
    if (!std::isfinite(up) || !std::isfinite(low)) return 0.0;
    return std::max(up - low, 0.0);
  }
};

}  // namespace

double svr_kkt_violation(const Mat& x, const Vec& y, const SvrConfig& cfg, const Vec& alpha) {
  const Kernel k = resolve_kernel(cfg.kernel, x.cols());
  const Mat g = gram(x, k);
  const DualProblem dual(g, y, cfg.epsilon, cfg.C);
  return dual.violation(alpha, dual.gradient(alpha));
}

SvrModel fit_svr(const Mat& x, const Vec& y, const SvrConfig& cfg, SvrDiagnostics* diagnostics) {
  cfg.validate();
  if (x.rows() < 2) throw std::invalid_argument("SVR needs at least two training vectors");
  if (x.rows() != y.size()) throw std::invalid_argument("target length mismatch");

  const Kernel kernel = resolve_kernel(cfg.kernel, x.cols());
  const Mat k = gram(x, kernel);
  const DualProblem dual(k, y, cfg.epsilon, cfg.C);
  const Eigen::Index l = dual.l;
  const Eigen::Index n2 = 2 * l;
  const double C = cfg.C;
  const auto& s = dual.sign;

  Vec a = Vec::Zero(n2);
  Vec g = dual.p;
  std::size_t iter = 0;
  bool converged = false;

  while (iter < cfg.max_iterations) {
    // Working set: i maximizes -s_t g_t over I_up; j minimizes the
    // second-order decrease estimate over I_low.
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n2; ++t) {
      if (s[t] > 0) {
        if (!dual.upper(a, t) && -g(t) >= gmax) {
          gmax = -g(t);
          i = t;
        }
      } else if (!dual.lower(a, t) && g(t) >= gmax) {
        gmax = g(t);
        i = t;
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    double best = std::numeric_limits<double>::infinity();
    if (i >= 0) {
      for (Eigen::Index t = 0; t < n2; ++t) {
        if (s[t] > 0) {
          if (dual.lower(a, t)) continue;
          const double diff = gmax + g(t);
          gmax2 = std::max(gmax2, g(t));
          if (diff > 0.0) {
            double quad = dual.qd(i) + dual.qd(t) - 2.0 * s[i] * dual.q(i, t);
            if (quad <= 0.0) quad = kTau;
            const double obj = -(diff * diff) / quad;
            if (obj <= best) {
              best = obj;
              j = t;
            }
          }
        } else {
          if (dual.upper(a, t)) continue;
          const double diff = gmax - g(t);
          gmax2 = std::max(gmax2, -g(t));
          if (diff > 0.0) {
            double quad = dual.qd(i) + dual.qd(t) + 2.0 * s[i] * dual.q(i, t);
            if (quad <= 0.0) quad = kTau;
            const double obj = -(diff * diff) / quad;
            if (obj <= best) {
              best = obj;
              j = t;
            }
          }
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < cfg.tolerance) {
      converged = true;
      break;
    }
    ++iter;

    const double ai_old = a(i);
    const double aj_old = a(j);
    const double qij = dual.q(i, j);
    if (s[i] != s[j]) {
      double quad = dual.qd(i) + dual.qd(j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-g(i) - g(j)) / quad;
      const double diff = a(i) - a(j);
      a(i) += delta;
      a(j) += delta;
      if (diff > 0.0) {
        if (a(j) < 0.0) {
          a(j) = 0.0;
          a(i) = diff;
        }
      } else if (a(i) < 0.0) {
        a(i) = 0.0;
        a(j) = -diff;
      }
      if (diff > 0.0) {
        if (a(i) > C) {
          a(i) = C;
          a(j) = C - diff;
        }
      } else if (a(j) > C) {
        a(j) = C;
        a(i) = C + diff;
      }
    } else {
      double quad = dual.qd(i) + dual.qd(j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (g(i) - g(j)) / quad;
      const double sum = a(i) + a(j);
      a(i) -= delta;
      a(j) += delta;
      if (sum > C) {
        if (a(i) > C) {
          a(i) = C;
          a(j) = sum - C;
        }
      } else if (a(j) < 0.0) {
        a(j) = 0.0;
        a(i) = sum;
      }
      if (sum > C) {
        if (a(j) > C) {
          a(j) = C;
          a(i) = sum - C;
        }
      } else if (a(i) < 0.0) {
        a(i) = 0.0;
        a(j) = sum;
      }
    }

    const double di = a(i) - ai_old;
    const double dj = a(j) - aj_old;
    const Eigen::Index ri = i % l;
    const Eigen::Index rj = j % l;
    for (Eigen::Index t = 0; t < n2; ++t) {
      const Eigen::Index r = t % l;
      g(t) += s[t] * (s[i] * k(r, ri) * di + s[j] * k(r, rj) * dj);
    }
    if (!std::isfinite(g(i)) || !std::isfinite(g(j))) throw FitError("SVR solver produced non-finite gradient");
  }

  // Bias: average of -s_t g_t over free variables, else the midpoint of the
  // feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (Eigen::Index t = 0; t < n2; ++t) {
    const double yg = s[t] * g(t);
    if (dual.upper(a, t)) {
      if (s[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (dual.lower(a, t)) {
      if (s[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

  SvrModel model;
  model.kernel = kernel;
  model.C = cfg.C;
  model.epsilon = cfg.epsilon;
  model.bias = -rho;
  std::vector<Eigen::Index> sv;
  for (Eigen::Index r = 0; r < l; ++r) {
    if (a(r) - a(r + l) != 0.0) sv.push_back(r);
  }
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  model.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t m = 0; m < sv.size(); ++m) {
    model.support_vectors.row(static_cast<Eigen::Index>(m)) = x.row(sv[m]);
    model.dual_coef(static_cast<Eigen::Index>(m)) = a(sv[m]) - a(sv[m] + l);
  }

  if (diagnostics) {
    diagnostics->alpha = a;
    diagnostics->objective = 0.5 * a.dot(g + dual.p);
    diagnostics->kkt_violation = dual.violation(a, g);
    diagnostics->iterations = iter;
    diagnostics->converged = converged;
  }
  return model;
}

SvrModel fit_svr(std::span<const NormalizedVector> train, const SvrConfig& cfg, SvrDiagnostics* diagnostics) {
  return fit_svr(counter_matrix(train), power_vector(train), cfg, diagnostics);
}

}  // namespace powermod
