#pragma once

#include <cmath>

#include "lwgait/core/tensor.hpp"

namespace lwgait {

inline float gelu(float x) {
  return 0.5f * x * (1.0f + std::erf(x * 0.70710678118654752f));
}

inline float gelu_grad(float x) {
  const float cdf = 0.5f * (1.0f + std::erf(x * 0.70710678118654752f));
  const float pdf = 0.39894228040143268f * std::exp(-0.5f * x * x);
  return cdf + x * pdf;
}

inline float sigmoid(float x) {
  return x >= 0.0f ? 1.0f / (1.0f + std::exp(-x))
                   : std::exp(x) / (1.0f + std::exp(x));
}

struct Gelu {
  struct Cache {
    Tensor input;
  };
  static Tensor forward(const Tensor& x, Cache* cache = nullptr) {
    Tensor y(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) y[i] = gelu(x[i]);
    if (cache) cache->input = x;
    return y;
  }
  static Tensor backward(const Tensor& dy, const Cache& cache) {
    Tensor dx(dy.shape());
    for (int64_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * gelu_grad(cache.input[i]);
    return dx;
  }
};

struct Relu {
  struct Cache {
    Tensor input;
  };
  static Tensor forward(const Tensor& x, Cache* cache = nullptr) {
    Tensor y(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
    if (cache) cache->input = x;
    return y;
  }
  static Tensor backward(const Tensor& dy, const Cache& cache) {
    Tensor dx(dy.shape());
    for (int64_t i = 0; i < dy.size(); ++i) dx[i] = cache.input[i] > 0.0f ? dy[i] : 0.0f;
    return dx;
  }
};

struct Sigmoid {
  struct Cache {
    Tensor output;
  };
  static Tensor forward(const Tensor& x, Cache* cache = nullptr) {
    Tensor y(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
    if (cache) cache->output = y;
    return y;
  }
  static Tensor backward(const Tensor& dy, const Cache& cache) {
    Tensor dx(dy.shape());
    for (int64_t i = 0; i < dy.size(); ++i) {
      const float s = cache.output[i];
      dx[i] = dy[i] * s * (1.0f - s);
    }
    return dx;
  }
};

}  // namespace lwgait
