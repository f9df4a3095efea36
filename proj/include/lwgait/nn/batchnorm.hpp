#pragma once

#include <cmath>

#include "lwgait/nn/param.hpp"

namespace lwgait {

// Batch normalization over N x C x H x W, stats per channel. Training mode
// uses batch statistics and maintains running estimates for inference.
class BatchNorm2d {
 public:
  BatchNorm2d() = default;

  explicit BatchNorm2d(int64_t channels, double eps = 1e-5, double momentum = 0.1)
      : ch_(channels), eps_(eps), momentum_(momentum) {
    gamma_.resize({ch_});
    beta_.resize({ch_});
    gamma_.value.fill(1.0f);
    running_mean_.reshape({ch_});
    running_var_.reshape({ch_});
    running_var_.fill(1.0f);
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.add(prefix + ".gamma", gamma_);
    reg.add(prefix + ".beta", beta_);
    reg.add_buffer(prefix + ".running_mean", running_mean_);
    reg.add_buffer(prefix + ".running_var", running_var_);
  }

  struct Cache {
    Tensor xhat;
    std::vector<double> invstd;
    int64_t count = 0;
  };

  Tensor forward_train(const Tensor& x, Cache& cache) {
    check(x);
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t plane = h * w, count = n * plane;
    Tensor y(x.shape());
    cache.xhat.reshape(x.shape());
    cache.invstd.assign(static_cast<size_t>(ch_), 0.0);
    cache.count = count;
    for (int64_t c = 0; c < ch_; ++c) {
      double sum = 0.0, sq = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        const float* xp = x.data() + (i * ch_ + c) * plane;
        for (int64_t p = 0; p < plane; ++p) {
          sum += xp[p];
          sq += static_cast<double>(xp[p]) * xp[p];
        }
      }
      const double mean = sum / count;
      const double var = sq / count - mean * mean;  // biased
      const double invstd = 1.0 / std::sqrt(var + eps_);
      cache.invstd[static_cast<size_t>(c)] = invstd;
      const float g = gamma_.value[c], b = beta_.value[c];
      for (int64_t i = 0; i < n; ++i) {
        const float* xp = x.data() + (i * ch_ + c) * plane;
        float* xh = cache.xhat.data() + (i * ch_ + c) * plane;
        float* yp = y.data() + (i * ch_ + c) * plane;
        for (int64_t p = 0; p < plane; ++p) {
          xh[p] = static_cast<float>((xp[p] - mean) * invstd);
          yp[p] = g * xh[p] + b;
        }
      }
      // unbiased variance in the running estimate, torch convention
      const double unbiased = count > 1 ? var * count / (count - 1) : var;
      running_mean_[c] = static_cast<float>((1.0 - momentum_) * running_mean_[c] + momentum_ * mean);
      running_var_[c] = static_cast<float>((1.0 - momentum_) * running_var_[c] + momentum_ * unbiased);
    }
    return y;
  }

  Tensor forward_eval(const Tensor& x) const {
    check(x);
    const int64_t n = x.dim(0), plane = x.dim(2) * x.dim(3);
    Tensor y(x.shape());
    for (int64_t c = 0; c < ch_; ++c) {
      const float scale = static_cast<float>(gamma_.value[c] / std::sqrt(static_cast<double>(running_var_[c]) + eps_));
      const float shift = beta_.value[c] - scale * running_mean_[c];
      for (int64_t i = 0; i < n; ++i) {
        const float* xp = x.data() + (i * ch_ + c) * plane;
        float* yp = y.data() + (i * ch_ + c) * plane;
        for (int64_t p = 0; p < plane; ++p) yp[p] = scale * xp[p] + shift;
      }
    }
    return y;
  }

  Tensor backward(const Tensor& dy, const Cache& cache) {
    const int64_t n = dy.dim(0), plane = dy.dim(2) * dy.dim(3);
    const double count = static_cast<double>(cache.count);
    Tensor dx(dy.shape());
    for (int64_t c = 0; c < ch_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        const float* dp = dy.data() + (i * ch_ + c) * plane;
        const float* xh = cache.xhat.data() + (i * ch_ + c) * plane;
        for (int64_t p = 0; p < plane; ++p) {
          sum_dy += dp[p];
          sum_dy_xhat += static_cast<double>(dp[p]) * xh[p];
        }
      }
      gamma_.grad[c] += static_cast<float>(sum_dy_xhat);
      beta_.grad[c] += static_cast<float>(sum_dy);
      const double g = gamma_.value[c], invstd = cache.invstd[static_cast<size_t>(c)];
      const double mean_dy = sum_dy / count, mean_dy_xhat = sum_dy_xhat / count;
      for (int64_t i = 0; i < n; ++i) {
        const float* dp = dy.data() + (i * ch_ + c) * plane;
        const float* xh = cache.xhat.data() + (i * ch_ + c) * plane;
        float* dxp = dx.data() + (i * ch_ + c) * plane;
        for (int64_t p = 0; p < plane; ++p)
          dxp[p] = static_cast<float>(g * invstd * (dp[p] - mean_dy - xh[p] * mean_dy_xhat));
      }
    }
    return dx;
  }

  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }
  int64_t parameter_count() const { return gamma_.size() + beta_.size(); }

 private:
  void check(const Tensor& x) const {
    require(x.rank() == 4 && x.dim(1) == ch_, ErrorCode::dimension, "batchnorm channel mismatch");
  }

  int64_t ch_ = 0;
  double eps_ = 1e-5, momentum_ = 0.1;
  Parameter gamma_, beta_;
  Tensor running_mean_, running_var_;
};

}  // namespace lwgait
