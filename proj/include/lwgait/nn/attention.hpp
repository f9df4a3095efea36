#pragma once

#include <cmath>
#include <vector>

#include "lwgait/nn/linear.hpp"

namespace lwgait {

// Multi-head self-attention over [frames x tokens x dim] activations,
// flattened to [frames*tokens x dim]. Attention never crosses frames.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;

  MultiHeadAttention(int64_t dim, int64_t heads)
      : dim_(dim), heads_(heads), head_dim_(dim / heads), qkv_(dim, 3 * dim), proj_(dim, dim) {
    require(dim % heads == 0, ErrorCode::configuration, "attention dim not divisible by heads");
  }

  void init(Rng& rng, double stddev) {
    qkv_.init(rng, stddev);
    proj_.init(rng, stddev);
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) {
    qkv_.register_params(reg, prefix + ".qkv");
    proj_.register_params(reg, prefix + ".proj");
  }

  struct Cache {
    Linear::Cache qkv_cache, proj_cache;
    Tensor qkv;    // [F*T x 3C]
    Tensor probs;  // [F x heads x T x T]
    Tensor heads_out;
    int64_t frames = 0, tokens = 0;
  };

  Tensor forward(const Tensor& x, int64_t frames, int64_t tokens, Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.frames = frames;
    c.tokens = tokens;
    c.qkv = qkv_.forward(x, cache ? &c.qkv_cache : nullptr);
    c.probs.reshape({frames, heads_, tokens, tokens});
    c.heads_out.reshape({frames * tokens, dim_});
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

    for (int64_t f = 0; f < frames; ++f) {
      const float* qkv = c.qkv.data() + f * tokens * 3 * dim_;
      for (int64_t h = 0; h < heads_; ++h) {
        float* probs = c.probs.data() + ((f * heads_ + h) * tokens) * tokens;
        for (int64_t i = 0; i < tokens; ++i) {
          const float* qi = qkv + i * 3 * dim_ + h * head_dim_;
          float* row = probs + i * tokens;
          float row_max = -1e30f;
          for (int64_t j = 0; j < tokens; ++j) {
            const float* kj = qkv + j * 3 * dim_ + dim_ + h * head_dim_;
            double dot = 0.0;
            for (int64_t d = 0; d < head_dim_; ++d) dot += static_cast<double>(qi[d]) * kj[d];
            row[j] = static_cast<float>(dot * scale);
            row_max = std::max(row_max, row[j]);
          }
          double denom = 0.0;
          for (int64_t j = 0; j < tokens; ++j) {
            row[j] = std::exp(row[j] - row_max);
            denom += row[j];
          }
          const float inv = static_cast<float>(1.0 / denom);
          for (int64_t j = 0; j < tokens; ++j) row[j] *= inv;
          float* out = c.heads_out.data() + (f * tokens + i) * dim_ + h * head_dim_;
          for (int64_t d = 0; d < head_dim_; ++d) out[d] = 0.0f;
          for (int64_t j = 0; j < tokens; ++j) {
            const float* vj = qkv + j * 3 * dim_ + 2 * dim_ + h * head_dim_;
            const float p = row[j];
            for (int64_t d = 0; d < head_dim_; ++d) out[d] += p * vj[d];
          }
        }
      }
    }
    return proj_.forward(c.heads_out, cache ? &c.proj_cache : nullptr);
  }

  Tensor backward(const Tensor& dy, Cache& cache) {
    const int64_t frames = cache.frames, tokens = cache.tokens;
    Tensor d_heads = proj_.backward(dy, cache.proj_cache);
    Tensor d_qkv({frames * tokens, 3 * dim_});
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

    for (int64_t f = 0; f < frames; ++f) {
      const float* qkv = cache.qkv.data() + f * tokens * 3 * dim_;
      float* dqkv = d_qkv.data() + f * tokens * 3 * dim_;
      for (int64_t h = 0; h < heads_; ++h) {
        const float* probs = cache.probs.data() + ((f * heads_ + h) * tokens) * tokens;
        std::vector<float> dprobs(static_cast<size_t>(tokens * tokens), 0.0f);
        for (int64_t i = 0; i < tokens; ++i) {
          const float* dout = d_heads.data() + (f * tokens + i) * dim_ + h * head_dim_;
          const float* row = probs + i * tokens;
          float* drow = dprobs.data() + i * tokens;
          // through the weighted sum of values
          for (int64_t j = 0; j < tokens; ++j) {
            const float* vj = qkv + j * 3 * dim_ + 2 * dim_ + h * head_dim_;
            float* dvj = dqkv + j * 3 * dim_ + 2 * dim_ + h * head_dim_;
            double dot = 0.0;
            for (int64_t d = 0; d < head_dim_; ++d) {
              dot += static_cast<double>(dout[d]) * vj[d];
              dvj[d] += row[j] * dout[d];
            }
            drow[j] = static_cast<float>(dot);
          }
          // softmax jacobian
          double dot_pr = 0.0;
          for (int64_t j = 0; j < tokens; ++j) dot_pr += static_cast<double>(drow[j]) * row[j];
          for (int64_t j = 0; j < tokens; ++j)
            drow[j] = static_cast<float>(row[j] * (drow[j] - dot_pr));
          // through the scaled dot products
          const float* qi = qkv + i * 3 * dim_ + h * head_dim_;
          float* dqi = dqkv + i * 3 * dim_ + h * head_dim_;
          for (int64_t j = 0; j < tokens; ++j) {
            const float* kj = qkv + j * 3 * dim_ + dim_ + h * head_dim_;
            float* dkj = dqkv + j * 3 * dim_ + dim_ + h * head_dim_;
            const float ds = static_cast<float>(drow[j] * scale);
            for (int64_t d = 0; d < head_dim_; ++d) {
              dqi[d] += ds * kj[d];
              dkj[d] += ds * qi[d];
            }
          }
        }
      }
    }
    return qkv_.backward(d_qkv, cache.qkv_cache);
  }

  Linear& qkv() { return qkv_; }
  Linear& proj() { return proj_; }

 private:
  int64_t dim_ = 0, heads_ = 0, head_dim_ = 0;
  Linear qkv_, proj_;
};

}  // namespace lwgait
