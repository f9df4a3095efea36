#pragma once

#include <vector>

#include "lwgait/core/tensor.hpp"

namespace lwgait {

// Bilinear resize of N x C x H x W maps, align_corners=false convention.
// The map is linear in its input, so backward is the transposed scatter
// with the same weights.
namespace bilinear_detail {

struct Taps {
  int64_t lo, hi;
  float w_lo, w_hi;
};

inline std::vector<Taps> make_taps(int64_t in, int64_t out) {
  std::vector<Taps> taps(static_cast<size_t>(out));
  const double s = static_cast<double>(in) / out;
  for (int64_t o = 0; o < out; ++o) {
    double pos = (o + 0.5) * s - 0.5;
    if (pos < 0.0) pos = 0.0;
    int64_t lo = static_cast<int64_t>(pos);
    if (lo > in - 1) lo = in - 1;
    int64_t hi = lo + 1 < in ? lo + 1 : in - 1;
    const float frac = static_cast<float>(pos - lo);
    taps[static_cast<size_t>(o)] = {lo, hi, 1.0f - frac, frac};
  }
  return taps;
}

}  // namespace bilinear_detail

inline Tensor bilinear_resize(const Tensor& x, int64_t out_h, int64_t out_w) {
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h == out_h && w == out_w) return x;
  const auto ty = bilinear_detail::make_taps(h, out_h);
  const auto tx = bilinear_detail::make_taps(w, out_w);
  Tensor y({n, c, out_h, out_w});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const float* xp = x.data() + (i * c + ch) * h * w;
      float* yp = y.data() + (i * c + ch) * out_h * out_w;
      for (int64_t oy = 0; oy < out_h; ++oy) {
        const auto& a = ty[static_cast<size_t>(oy)];
        for (int64_t ox = 0; ox < out_w; ++ox) {
          const auto& b = tx[static_cast<size_t>(ox)];
          yp[oy * out_w + ox] = a.w_lo * (b.w_lo * xp[a.lo * w + b.lo] + b.w_hi * xp[a.lo * w + b.hi]) +
                                a.w_hi * (b.w_lo * xp[a.hi * w + b.lo] + b.w_hi * xp[a.hi * w + b.hi]);
        }
      }
    }
  }
  return y;
}

inline Tensor bilinear_resize_backward(const Tensor& dy, int64_t in_h, int64_t in_w) {
  const int64_t n = dy.dim(0), c = dy.dim(1), oh = dy.dim(2), ow = dy.dim(3);
  if (oh == in_h && ow == in_w) return dy;
  const auto ty = bilinear_detail::make_taps(in_h, oh);
  const auto tx = bilinear_detail::make_taps(in_w, ow);
  Tensor dx({n, c, in_h, in_w});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const float* dp = dy.data() + (i * c + ch) * oh * ow;
      float* dxp = dx.data() + (i * c + ch) * in_h * in_w;
      for (int64_t oy = 0; oy < oh; ++oy) {
        const auto& a = ty[static_cast<size_t>(oy)];
        for (int64_t ox = 0; ox < ow; ++ox) {
          const auto& b = tx[static_cast<size_t>(ox)];
          const float g = dp[oy * ow + ox];
          dxp[a.lo * in_w + b.lo] += a.w_lo * b.w_lo * g;
          dxp[a.lo * in_w + b.hi] += a.w_lo * b.w_hi * g;
          dxp[a.hi * in_w + b.lo] += a.w_hi * b.w_lo * g;
          dxp[a.hi * in_w + b.hi] += a.w_hi * b.w_hi * g;
        }
      }
    }
  }
  return dx;
}

}  // namespace lwgait
