#pragma once

#include <cmath>

#include "lwgait/nn/param.hpp"

namespace lwgait {

// Layer normalization over the last dimension of [N x dim] activations.
class LayerNorm {
 public:
  LayerNorm() = default;

  explicit LayerNorm(int64_t dim, double eps = 1e-6) : dim_(dim), eps_(eps) {
    gamma_.resize({dim_});
    beta_.resize({dim_});
    gamma_.value.fill(1.0f);
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.add(prefix + ".gamma", gamma_);
    reg.add(prefix + ".beta", beta_);
  }

  struct Cache {
    Tensor xhat;
    std::vector<double> invstd;
  };

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const {
    const int64_t n = x.size() / dim_;
    Tensor y(x.shape());
    Tensor xhat(x.shape());
    std::vector<double> invstds(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      const float* xp = x.data() + i * dim_;
      double sum = 0.0, sq = 0.0;
      for (int64_t d = 0; d < dim_; ++d) {
        sum += xp[d];
        sq += static_cast<double>(xp[d]) * xp[d];
      }
      const double mean = sum / dim_;
      const double var = sq / dim_ - mean * mean;
      const double invstd = 1.0 / std::sqrt(var + eps_);
      invstds[static_cast<size_t>(i)] = invstd;
      float* xh = xhat.data() + i * dim_;
      float* yp = y.data() + i * dim_;
      for (int64_t d = 0; d < dim_; ++d) {
        xh[d] = static_cast<float>((xp[d] - mean) * invstd);
        yp[d] = gamma_.value[d] * xh[d] + beta_.value[d];
      }
    }
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->invstd = std::move(invstds);
    }
    return y;
  }

  Tensor backward(const Tensor& dy, const Cache& cache) {
    const int64_t n = dy.size() / dim_;
    Tensor dx(dy.shape());
    for (int64_t i = 0; i < n; ++i) {
      const float* dp = dy.data() + i * dim_;
      const float* xh = cache.xhat.data() + i * dim_;
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (int64_t d = 0; d < dim_; ++d) {
        const double dxhat = static_cast<double>(dp[d]) * gamma_.value[d];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xh[d];
        gamma_.grad[d] += dp[d] * xh[d];
        beta_.grad[d] += dp[d];
      }
      const double invstd = cache.invstd[static_cast<size_t>(i)];
      float* dxp = dx.data() + i * dim_;
      for (int64_t d = 0; d < dim_; ++d) {
        const double dxhat = static_cast<double>(dp[d]) * gamma_.value[d];
        dxp[d] = static_cast<float>(invstd * (dxhat - sum_dxhat / dim_ - xh[d] * sum_dxhat_xhat / dim_));
      }
    }
    return dx;
  }

  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }

 private:
  int64_t dim_ = 0;
  double eps_ = 1e-6;
  Parameter gamma_, beta_;
};

}  // namespace lwgait
