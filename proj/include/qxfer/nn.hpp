// Copyright 2026 The qxfer Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal dense layers with explicit forward caches and hand-written
// backward passes. Row-major convention: a batch is an (N x features) matrix.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "qxfer/common.hpp"

namespace qxfer::nn {

using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param() = default;
  Param(std::string n, Mat v)
      : name(std::move(n)), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
};

enum class Mode { Train, Eval };

inline Mat uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

/// y = x W + b, W is (in x out).
struct Linear {
  Param w;
  Param b;

  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    w = Param(name + ".weight", uniform_init(in, out, bound, rng));
    b = Param(name + ".bias", uniform_init(1, out, bound, rng));
  }

  [[nodiscard]] Mat forward(const Mat& x) const {
    Mat y = x * w.value;
    y.rowwise() += b.value.row(0);
    return y;
  }

  /// Accumulates parameter gradients; returns dL/dx.
  Mat backward(const Mat& x, const Mat& dy) {
    w.grad.noalias() += x.transpose() * dy;
    b.grad += dy.colwise().sum();
    return dy * w.value.transpose();
  }

  void collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

/// Batch normalization over rows (every node of every graph in the batch).
struct BatchNorm {
  Param gamma;
  Param beta;
  RowVec running_mean;
  RowVec running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  struct Cache {
    Mat xhat;
    RowVec inv_std;
  };

  BatchNorm() = default;
  BatchNorm(const std::string& name, int dim, double mom = 0.1)
      : gamma(name + ".gamma", Mat::Ones(1, dim)),
        beta(name + ".beta", Mat::Zero(1, dim)),
        running_mean(RowVec::Zero(dim)),
        running_var(RowVec::Ones(dim)),
        momentum(mom) {}

  /// Train mode normalizes with batch statistics and updates the running
  /// averages; eval mode is a fixed affine map.
  Mat forward(const Mat& x, Mode mode, Cache* cache) {
    RowVec mean, var;
    if (mode == Mode::Train) {
      mean = x.colwise().mean();
      var = (x.rowwise() - mean).array().square().colwise().mean();
      const double n = static_cast<double>(x.rows());
      const RowVec unbiased = n > 1 ? RowVec(var * (n / (n - 1.0))) : var;
      running_mean = (1.0 - momentum) * running_mean + momentum * mean;
      running_var = (1.0 - momentum) * running_var + momentum * unbiased;
    } else {
      mean = running_mean;
      var = running_var;
    }
    const RowVec inv_std = (var.array() + eps).rsqrt().matrix();
    Mat xhat = (x.rowwise() - mean).array().rowwise() * inv_std.array();
    Mat y = xhat.array().rowwise() * gamma.value.row(0).array();
    y.rowwise() += beta.value.row(0);
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = inv_std;
    }
    return y;
  }

  [[nodiscard]] Mat eval_forward(const Mat& x) const {
    const RowVec inv_std = (running_var.array() + eps).rsqrt().matrix();
    Mat y = ((x.rowwise() - running_mean).array().rowwise() * inv_std.array())
                .rowwise() * gamma.value.row(0).array();
    y.rowwise() += beta.value.row(0);
    return y;
  }

  /// Backward through train-mode statistics.
  Mat backward(const Cache& c, const Mat& dy) {
    gamma.grad += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    beta.grad += dy.colwise().sum();
    const Mat dxhat = dy.array().rowwise() * gamma.value.row(0).array();
    const double n = static_cast<double>(dy.rows());
    const RowVec sum_d = dxhat.colwise().sum();
    const RowVec sum_dx = (dxhat.array() * c.xhat.array()).colwise().sum().matrix();
    Mat dx = (n * dxhat.array()).matrix();
    dx.rowwise() -= sum_d;
    dx -= (c.xhat.array().rowwise() * sum_dx.array()).matrix();
    dx = (dx.array().rowwise() * (c.inv_std.array() / n)).matrix();
    return dx;
  }

  void collect(std::vector<Param*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

/// Layer normalization over the features of each row.
struct LayerNorm {
  Param gamma;
  Param beta;
  double eps = 1e-5;

  struct Cache {
    Mat xhat;
    Eigen::VectorXd inv_std;
  };

  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim)
      : gamma(name + ".gamma", Mat::Ones(1, dim)),
        beta(name + ".beta", Mat::Zero(1, dim)) {}

  [[nodiscard]] Mat forward(const Mat& x, Cache* cache) const {
    const Eigen::VectorXd mean = x.rowwise().mean();
    Mat centered = x.colwise() - mean;
    const Eigen::VectorXd var = centered.array().square().rowwise().mean();
    const Eigen::VectorXd inv_std = (var.array() + eps).rsqrt().matrix();
    Mat xhat = centered.array().colwise() * inv_std.array();
    Mat y = xhat.array().rowwise() * gamma.value.row(0).array();
    y.rowwise() += beta.value.row(0);
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = inv_std;
    }
    return y;
  }

  Mat backward(const Cache& c, const Mat& dy) {
    gamma.grad += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    beta.grad += dy.colwise().sum();
    const Mat dxhat = dy.array().rowwise() * gamma.value.row(0).array();
    const double d = static_cast<double>(dy.cols());
    const Eigen::VectorXd sum_d = dxhat.rowwise().sum();
    const Eigen::VectorXd sum_dx = (dxhat.array() * c.xhat.array()).rowwise().sum();
    Mat dx = d * dxhat;
    dx.colwise() -= sum_d;
    dx -= (c.xhat.array().colwise() * sum_dx.array()).matrix();
    dx = (dx.array().colwise() * (c.inv_std.array() / d)).matrix();
    return dx;
  }

  void collect(std::vector<Param*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

inline Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

inline Mat relu_backward(const Mat& x, const Mat& dy) {
  return (x.array() > 0.0).select(dy, 0.0);
}

/// Inverted-dropout mask: entries are 0 with probability `rate`, otherwise
/// 1 / (1 - rate).
inline Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  if (rate <= 0.0) return Mat::Ones(rows, cols);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Mat m(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng) < rate ? 0.0 : keep;
  return m;
}

inline double mse_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  if (pred.size() != target.size())
    throw ValidationError("mse_loss: length mismatch");
  if (pred.size() == 0) throw ValidationError("mse_loss: empty input");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

inline Eigen::VectorXd mse_grad(const Eigen::VectorXd& pred,
                                const Eigen::VectorXd& target) {
  return 2.0 * (pred - target) / static_cast<double>(pred.size());
}

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  long long step = 0;
};

/// Decoupled weight decay followed by the bias-corrected Adam update.
inline void adamw_step(const std::vector<Param*>& params, AdamWState& state,
                       const AdamWConfig& cfg) {
  if (state.m.empty()) {
    for (const Param* p : params) {
      state.m.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size())
    throw ValidationError("adamw_step: parameter/state shape mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      throw ValidationError("adamw_step: gradient shape mismatch for " + p.name);
    p.value *= 1.0 - cfg.lr * cfg.weight_decay;
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * p.grad;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= cfg.lr * (state.m[i].array() / bc1) /
                       ((state.v[i].array() / bc2).sqrt() + cfg.eps);
  }
}

/// Reduce-on-plateau (minimizing): after more than `patience` epochs without
/// relative improvement of `threshold`, lr <- factor * lr.
struct PlateauScheduler {
  double factor = 0.05;
  int patience = 2;
  double threshold = 1e-4;
  double best = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  /// Returns the new learning rate.
  double step(double metric, double lr) {
    if (metric < best * (1.0 - threshold)) {
      best = metric;
      bad_epochs = 0;
    } else if (++bad_epochs > patience) {
      bad_epochs = 0;
      return lr * factor;
    }
    return lr;
  }
};

}  // namespace qxfer::nn
