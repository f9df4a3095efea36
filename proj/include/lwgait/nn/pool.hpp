#pragma once

#include <vector>

#include "lwgait/core/tensor.hpp"

namespace lwgait {

// Elementwise max over the frame axis of [T x C x H x W]. Order invariant,
// which is what makes the downstream embedding a set function of frames.
struct SetMaxPool {
  struct Cache {
    std::vector<int32_t> argmax;  // winning frame per cell
    int64_t frames = 0;
  };

  static Tensor forward(const Tensor& x, Cache* cache = nullptr) {
    const int64_t t = x.dim(0), cells = x.dim(1) * x.dim(2) * x.dim(3);
    Tensor y({x.dim(1), x.dim(2), x.dim(3)});
    std::vector<int32_t> arg(static_cast<size_t>(cells), 0);
    for (int64_t cell = 0; cell < cells; ++cell) {
      float best = x[cell];
      int32_t best_t = 0;
      for (int64_t f = 1; f < t; ++f) {
        const float v = x[f * cells + cell];
        if (v > best) {
          best = v;
          best_t = static_cast<int32_t>(f);
        }
      }
      y[cell] = best;
      arg[static_cast<size_t>(cell)] = best_t;
    }
    if (cache) {
      cache->argmax = std::move(arg);
      cache->frames = t;
    }
    return y;
  }

  static Tensor backward(const Tensor& dy, const Cache& cache, const std::vector<int64_t>& in_shape) {
    Tensor dx(in_shape);
    const int64_t cells = dy.size();
    for (int64_t cell = 0; cell < cells; ++cell)
      dx[cache.argmax[static_cast<size_t>(cell)] * cells + cell] = dy[cell];
    return dx;
  }
};

// Horizontal strip pooling: the C x H x W map is cut into K row bands and
// each band is reduced per channel to mean + max.
struct StripPool {
  struct Cache {
    std::vector<int32_t> argmax;  // winning cell per (part, channel)
    std::vector<int64_t> in_shape;
    int64_t parts = 0;
  };

  // output [K x C]
  static Tensor forward(const Tensor& x, int64_t parts, Cache* cache = nullptr) {
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    require(h >= parts && parts >= 1, ErrorCode::dimension, "strip count exceeds map height");
    Tensor y({parts, c});
    std::vector<int32_t> arg(static_cast<size_t>(parts * c), 0);
    for (int64_t p = 0; p < parts; ++p) {
      const int64_t y0 = p * h / parts, y1 = (p + 1) * h / parts;
      const int64_t cells = (y1 - y0) * w;
      for (int64_t ch = 0; ch < c; ++ch) {
        const float* xp = x.data() + ch * h * w;
        double sum = 0.0;
        float best = xp[y0 * w];
        int64_t best_i = y0 * w;
        for (int64_t yy = y0; yy < y1; ++yy) {
          for (int64_t xx = 0; xx < w; ++xx) {
            const float v = xp[yy * w + xx];
            sum += v;
            if (v > best) {
              best = v;
              best_i = yy * w + xx;
            }
          }
        }
        y[p * c + ch] = static_cast<float>(sum / cells) + best;
        arg[static_cast<size_t>(p * c + ch)] = static_cast<int32_t>(best_i);
      }
    }
    if (cache) {
      cache->argmax = std::move(arg);
      cache->in_shape = x.shape();
      cache->parts = parts;
    }
    return y;
  }

  static Tensor backward(const Tensor& dy, const Cache& cache) {
    const int64_t c = cache.in_shape[0], h = cache.in_shape[1], w = cache.in_shape[2];
    const int64_t parts = cache.parts;
    Tensor dx(cache.in_shape);
    for (int64_t p = 0; p < parts; ++p) {
      const int64_t y0 = p * h / parts, y1 = (p + 1) * h / parts;
      const float inv = 1.0f / static_cast<float>((y1 - y0) * w);
      for (int64_t ch = 0; ch < c; ++ch) {
        const float g = dy[p * c + ch];
        float* dxp = dx.data() + ch * h * w;
        for (int64_t yy = y0; yy < y1; ++yy)
          for (int64_t xx = 0; xx < w; ++xx) dxp[yy * w + xx] += g * inv;
        dxp[cache.argmax[static_cast<size_t>(p * c + ch)]] += g;
      }
    }
    return dx;
  }
};

}  // namespace lwgait
