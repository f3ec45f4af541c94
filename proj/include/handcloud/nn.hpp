#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "handcloud/random.hpp"

namespace handcloud::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

// SiLU, x * sigmoid(x). Smooth everywhere, so finite differences are a valid
// oracle for every weight.
inline Matrix silu(const Matrix& x) {
  return (x.array() / (1.0 + (-x.array()).exp())).matrix();
}

inline Matrix silu_grad(const Matrix& x) {
  const Eigen::ArrayXXd s = 1.0 / (1.0 + (-x.array()).exp());
  return (s * (1.0 + x.array() * (1.0 - s))).matrix();
}

/// Fills a weight block with N(0, 1/fan_in).
inline void init_weights(double* data, std::size_t count, std::size_t fan_in, Rng& rng) {
  const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < count; ++i) data[i] = rng.normal(0.0, sd);
}

/**
 * Perceptron with two SiLU hidden layers and a linear output, whose first
 * layer sees a per-row input plus a latent vector shared by the whole batch:
 *
 *   h1 = silu(Wx x + Wz z + b1),  h2 = silu(W2 h1 + b2),  y = W3 h2 + b3
 *
 * Weights live in an external flat buffer starting at `offset`, column-major.
 */
class ConditionedMlp {
 public:
  ConditionedMlp() = default;
  ConditionedMlp(std::size_t input, std::size_t latent, std::size_t hidden, std::size_t output)
      : in_(input), latent_(latent), hidden_(hidden), out_(output) {}

  std::size_t input_dim() const { return in_; }
  std::size_t latent_dim() const { return latent_; }
  std::size_t hidden_dim() const { return hidden_; }
  std::size_t output_dim() const { return out_; }

  std::size_t parameter_count() const {
    return hidden_ * (in_ + latent_ + 1) + hidden_ * (hidden_ + 1) + out_ * (hidden_ + 1);
  }

  /// Random hidden layers; the output layer is zeroed when `zero_output`.
  void initialize(double* params, Rng& rng, bool zero_output) const {
    const std::size_t fan1 = in_ + latent_;
    double* p = params;
    init_weights(p, hidden_ * in_, fan1, rng);
    p += hidden_ * in_;
    init_weights(p, hidden_ * latent_, fan1, rng);
    p += hidden_ * latent_;
    std::fill(p, p + hidden_, 0.0);
    p += hidden_;
    init_weights(p, hidden_ * hidden_, hidden_, rng);
    p += hidden_ * hidden_;
    std::fill(p, p + hidden_, 0.0);
    p += hidden_;
    if (zero_output)
      std::fill(p, p + out_ * hidden_ + out_, 0.0);
    else
      init_weights(p, out_ * hidden_ + out_, hidden_, rng);
  }

  struct Cache {
    Matrix pre1, act1, pre2, act2;
  };

  /// x: in x n (one column per row of the batch). Returns out x n.
  Matrix forward(const double* params, const Matrix& x, const Vector& z, Cache& cache) const {
    const Views w = views(params);
    const Vector shared = w.wz * z + w.b1;
    cache.pre1 = (w.wx * x).colwise() + shared;
    cache.act1 = silu(cache.pre1);
    cache.pre2 = (w.w2 * cache.act1).colwise() + w.b2;
    cache.act2 = silu(cache.pre2);
    return (w.w3 * cache.act2).colwise() + w.b3;
  }

  /// Accumulates weight gradients into `grad` (same layout as params) and
  /// returns d loss / d x.
  Matrix backward(const double* params, const Matrix& x, const Vector& z, const Cache& cache,
                  const Matrix& d_out, double* grad) const {
    const Views w = views(params);
    GradViews g = grad_views(grad);
    g.w3 += d_out * cache.act2.transpose();
    g.b3 += d_out.rowwise().sum();
    const Matrix d2 = ((w.w3.transpose() * d_out).array() * silu_grad(cache.pre2).array()).matrix();
    g.w2 += d2 * cache.act1.transpose();
    g.b2 += d2.rowwise().sum();
    const Matrix d1 = ((w.w2.transpose() * d2).array() * silu_grad(cache.pre1).array()).matrix();
    const Vector d1_sum = d1.rowwise().sum();
    g.wx += d1 * x.transpose();
    g.wz += d1_sum * z.transpose();
    g.b1 += d1_sum;
    return w.wx.transpose() * d1;
  }

 private:
  struct Views {
    ConstMatrixMap wx, wz;
    ConstVectorMap b1;
    ConstMatrixMap w2;
    ConstVectorMap b2;
    ConstMatrixMap w3;
    ConstVectorMap b3;
  };
  struct GradViews {
    MatrixMap wx, wz;
    VectorMap b1;
    MatrixMap w2;
    VectorMap b2;
    MatrixMap w3;
    VectorMap b3;
  };

  template <typename V, typename Ptr>
  V make_views(Ptr p) const {
    const auto h = static_cast<Eigen::Index>(hidden_);
    const auto in = static_cast<Eigen::Index>(in_);
    const auto lat = static_cast<Eigen::Index>(latent_);
    const auto out = static_cast<Eigen::Index>(out_);
    Ptr wx = p;
    Ptr wz = wx + h * in;
    Ptr b1 = wz + h * lat;
    Ptr w2 = b1 + h;
    Ptr b2 = w2 + h * h;
    Ptr w3 = b2 + h;
    Ptr b3 = w3 + out * h;
    return V{{wx, h, in}, {wz, h, lat}, {b1, h}, {w2, h, h}, {b2, h}, {w3, out, h}, {b3, out}};
  }

  Views views(const double* p) const { return make_views<Views>(p); }
  GradViews grad_views(double* p) const { return make_views<GradViews>(p); }

  std::size_t in_ = 0, latent_ = 0, hidden_ = 0, out_ = 0;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-6;
};

/// ADAM with L2 weight decay folded into the gradient.
class Adam {
 public:
  Adam(std::size_t n, const AdamConfig& config) : config_(config), m_(Vector::Zero(static_cast<Eigen::Index>(n))),
                                                  v_(Vector::Zero(static_cast<Eigen::Index>(n))) {}

  void step(Vector& params, Vector grad) {
    ++t_;
    grad += config_.weight_decay * params;
    m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
    v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const double lr = config_.learning_rate;
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
  }

  std::uint64_t steps() const { return t_; }
  double learning_rate() const { return config_.learning_rate; }
  /// For callers that run their own schedule; moments are kept.
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  AdamConfig config_;
  Vector m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace handcloud::nn
