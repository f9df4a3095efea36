#pragma once

#include <vector>

#include "lwgait/core/gemm.hpp"
#include "lwgait/core/parallel.hpp"
#include "lwgait/nn/param.hpp"

namespace lwgait {

// 2-D convolution on N x C x H x W maps. Weight is stored [K x Cout] with
// K = Cin*kh*kw so both the forward product and the weight-gradient product
// run with a contiguous inner loop (see gemm.hpp).
class Conv2d {
 public:
  Conv2d() = default;

  Conv2d(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride, int64_t pad)
      : in_ch_(in_ch), out_ch_(out_ch), kh_(kernel), kw_(kernel), stride_(stride), pad_(pad) {
    weight_.resize({kh_ * kw_ * in_ch_, out_ch_});
    bias_.resize({out_ch_});
  }

  void init(Rng& rng, double stddev) {
    normal_init(weight_.value, rng, stddev);
    bias_.value.zero();
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.add(prefix + ".weight", weight_);
    reg.add(prefix + ".bias", bias_);
  }

  int64_t out_h(int64_t h) const { return (h + 2 * pad_ - kh_) / stride_ + 1; }
  int64_t out_w(int64_t w) const { return (w + 2 * pad_ - kw_) / stride_ + 1; }
  int64_t in_channels() const { return in_ch_; }
  int64_t out_channels() const { return out_ch_; }

  struct Cache {
    Tensor input;  // retained for the weight gradient
  };

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const {
    require(x.rank() == 4 && x.dim(1) == in_ch_, ErrorCode::dimension,
            "conv input channel mismatch");
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t ho = out_h(h), wo = out_w(w);
    require(ho >= 1 && wo >= 1, ErrorCode::dimension, "conv output collapses to zero");
    Tensor y({n, out_ch_, ho, wo});
    const int64_t kdim = kh_ * kw_ * in_ch_, pos = ho * wo;

    parallel_for(n, [&](int64_t i) {
      std::vector<float> col(static_cast<size_t>(pos * kdim));
      std::vector<float> out(static_cast<size_t>(pos * out_ch_));
      im2col(x.data() + i * in_ch_ * h * w, h, w, col.data());
      for (int64_t p = 0; p < pos; ++p)
        for (int64_t c = 0; c < out_ch_; ++c) out[static_cast<size_t>(p * out_ch_ + c)] = bias_.value[c];
      gemm_nn(pos, kdim, out_ch_, col.data(), weight_.value.data(), out.data());
      float* yd = y.data() + i * out_ch_ * pos;
      for (int64_t p = 0; p < pos; ++p)
        for (int64_t c = 0; c < out_ch_; ++c) yd[c * pos + p] = out[static_cast<size_t>(p * out_ch_ + c)];
    });

    if (cache) cache->input = x;
    return y;
  }

  // Accumulates into weight/bias grads; returns grad w.r.t. input.
  // Per-frame partials reduced in frame order, so the result does not
  // depend on the worker count.
  Tensor backward(const Tensor& dy, const Cache& cache) {
    const Tensor& x = cache.input;
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t ho = dy.dim(2), wo = dy.dim(3);
    const int64_t kdim = kh_ * kw_ * in_ch_, pos = ho * wo;
    Tensor dx({n, in_ch_, h, w});

    // W^T materialized once per call; weights are small.
    std::vector<float> wt(static_cast<size_t>(out_ch_ * kdim));
    for (int64_t k = 0; k < kdim; ++k)
      for (int64_t c = 0; c < out_ch_; ++c)
        wt[static_cast<size_t>(c * kdim + k)] = weight_.value[k * out_ch_ + c];

    std::vector<std::vector<float>> dw_frame(static_cast<size_t>(n));
    std::vector<std::vector<float>> db_frame(static_cast<size_t>(n));

    parallel_for(n, [&](int64_t i) {
      auto& dw = dw_frame[static_cast<size_t>(i)];
      auto& db = db_frame[static_cast<size_t>(i)];
      dw.assign(static_cast<size_t>(kdim * out_ch_), 0.0f);
      db.assign(static_cast<size_t>(out_ch_), 0.0f);
      std::vector<float> col(static_cast<size_t>(pos * kdim));
      std::vector<float> dyt(static_cast<size_t>(pos * out_ch_));
      std::vector<float> dcol(static_cast<size_t>(pos * kdim), 0.0f);
      const float* dyd = dy.data() + i * out_ch_ * pos;
      for (int64_t p = 0; p < pos; ++p)
        for (int64_t oc = 0; oc < out_ch_; ++oc)
          dyt[static_cast<size_t>(p * out_ch_ + oc)] = dyd[oc * pos + p];
      im2col(x.data() + i * in_ch_ * h * w, h, w, col.data());
      gemm_tn(kdim, pos, out_ch_, col.data(), dyt.data(), dw.data());
      for (int64_t p = 0; p < pos; ++p)
        for (int64_t oc = 0; oc < out_ch_; ++oc) db[static_cast<size_t>(oc)] += dyt[static_cast<size_t>(p * out_ch_ + oc)];
      gemm_nn(pos, out_ch_, kdim, dyt.data(), wt.data(), dcol.data());
      col2im(dcol.data(), h, w, dx.data() + i * in_ch_ * h * w);
    });

    for (int64_t i = 0; i < n; ++i) {
      for (int64_t k = 0; k < kdim * out_ch_; ++k)
        weight_.grad[k] += dw_frame[static_cast<size_t>(i)][static_cast<size_t>(k)];
      for (int64_t oc = 0; oc < out_ch_; ++oc)
        bias_.grad[oc] += db_frame[static_cast<size_t>(i)][static_cast<size_t>(oc)];
    }
    return dx;
  }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }
  int64_t parameter_count() const { return weight_.size() + bias_.size(); }

 private:
  // col layout: [pos x (kh*kw*Cin)], k index = (ky*kw + kx)*Cin + c.
  void im2col(const float* x, int64_t h, int64_t w, float* col) const {
    const int64_t ho = out_h(h), wo = out_w(w);
    for (int64_t oy = 0; oy < ho; ++oy) {
      for (int64_t ox = 0; ox < wo; ++ox) {
        float* dst = col + (oy * wo + ox) * kh_ * kw_ * in_ch_;
        for (int64_t ky = 0; ky < kh_; ++ky) {
          const int64_t iy = oy * stride_ + ky - pad_;
          for (int64_t kx = 0; kx < kw_; ++kx) {
            const int64_t ix = ox * stride_ + kx - pad_;
            float* d = dst + (ky * kw_ + kx) * in_ch_;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
              for (int64_t c = 0; c < in_ch_; ++c) d[c] = 0.0f;
            } else {
              for (int64_t c = 0; c < in_ch_; ++c) d[c] = x[(c * h + iy) * w + ix];
            }
          }
        }
      }
    }
  }

  void col2im(const float* dcol, int64_t h, int64_t w, float* dx) const {
    const int64_t ho = out_h(h), wo = out_w(w);
    for (int64_t oy = 0; oy < ho; ++oy) {
      for (int64_t ox = 0; ox < wo; ++ox) {
        const float* src = dcol + (oy * wo + ox) * kh_ * kw_ * in_ch_;
        for (int64_t ky = 0; ky < kh_; ++ky) {
          const int64_t iy = oy * stride_ + ky - pad_;
          if (iy < 0 || iy >= h) continue;
          for (int64_t kx = 0; kx < kw_; ++kx) {
            const int64_t ix = ox * stride_ + kx - pad_;
            if (ix < 0 || ix >= w) continue;
            const float* s = src + (ky * kw_ + kx) * in_ch_;
            for (int64_t c = 0; c < in_ch_; ++c) dx[(c * h + iy) * w + ix] += s[c];
          }
        }
      }
    }
  }

  int64_t in_ch_ = 0, out_ch_ = 0, kh_ = 0, kw_ = 0, stride_ = 1, pad_ = 0;
  Parameter weight_, bias_;
};

}  // namespace lwgait
