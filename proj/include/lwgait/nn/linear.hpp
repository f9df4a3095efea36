#pragma once

#include "lwgait/core/gemm.hpp"
#include "lwgait/nn/param.hpp"

namespace lwgait {

// Dense map on row-major [N x in] activations. Weight stored [in x out].
class Linear {
 public:
  Linear() = default;

  Linear(int64_t in, int64_t out, bool has_bias = true)
      : in_(in), out_(out), has_bias_(has_bias) {
    weight_.resize({in_, out_});
    if (has_bias_) bias_.resize({out_});
  }

  void init(Rng& rng, double stddev) {
    normal_init(weight_.value, rng, stddev);
    if (has_bias_) bias_.value.zero();
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.add(prefix + ".weight", weight_);
    if (has_bias_) reg.add(prefix + ".bias", bias_);
  }

  struct Cache {
    Tensor input;
  };

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const {
    const int64_t n = x.size() / in_;
    require(n * in_ == x.size(), ErrorCode::dimension, "linear input width mismatch");
    Tensor y({n, out_});
    if (has_bias_) {
      for (int64_t i = 0; i < n; ++i)
        for (int64_t o = 0; o < out_; ++o) y[i * out_ + o] = bias_.value[o];
    }
    gemm_nn(n, in_, out_, x.data(), weight_.value.data(), y.data());
    if (cache) cache->input = x;
    return y;
  }

  Tensor backward(const Tensor& dy, const Cache& cache) {
    const int64_t n = dy.size() / out_;
    gemm_tn(in_, n, out_, cache.input.data(), dy.data(), weight_.grad.data());
    if (has_bias_) {
      for (int64_t i = 0; i < n; ++i)
        for (int64_t o = 0; o < out_; ++o) bias_.grad[o] += dy[i * out_ + o];
    }
    Tensor wt({out_, in_});
    for (int64_t a = 0; a < in_; ++a)
      for (int64_t o = 0; o < out_; ++o) wt[o * in_ + a] = weight_.value[a * out_ + o];
    Tensor dx({n, in_});
    gemm_nn(n, out_, in_, dy.data(), wt.data(), dx.data());
    return dx;
  }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  int64_t in_features() const { return in_; }
  int64_t out_features() const { return out_; }
  int64_t parameter_count() const { return weight_.size() + (has_bias_ ? bias_.size() : 0); }

 private:
  int64_t in_ = 0, out_ = 0;
  bool has_bias_ = true;
  Parameter weight_, bias_;
};

}  // namespace lwgait
