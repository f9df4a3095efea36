#pragma once

#include <cmath>
#include <vector>

#include "lwgait/backbone.hpp"
#include "lwgait/nn/conv.hpp"
#include "lwgait/nn/resize.hpp"

namespace lwgait {

// Two-channel soft assignment per pixel of the deepest feature map.
// Channels sum to one; which channel is the person is decided once by
// select_foreground and then frozen.
struct SilhouetteMask {
  Tensor map;  // [T x 2 x h_N x w_N]
  int foreground_channel = 0;

  // [T x 1 x h x w] view of the chosen channel
  Tensor foreground() const {
    const int64_t t = map.dim(0), h = map.dim(2), w = map.dim(3);
    Tensor fg({t, 1, h, w});
    for (int64_t f = 0; f < t; ++f)
      for (int64_t i = 0; i < h * w; ++i)
        fg[f * h * w + i] = map[(f * 2 + foreground_channel) * h * w + i];
    return fg;
  }
};

struct MaskedFeatureStack {
  std::vector<Tensor> layers;  // same shapes as the source stack
};

// Unsupervised silhouette extractor: a 1x1-conv autoencoder squeezed
// through two softmax channels, trained purely by reconstruction.
class MaskAutoencoder {
 public:
  MaskAutoencoder() = default;

  explicit MaskAutoencoder(int64_t channels)
      : channels_(channels), enc_(channels, 2, 1, 1, 0), dec_(2, channels, 1, 1, 0) {}

  void init(Rng& rng, double stddev = 0.02) {
    enc_.init(rng, stddev);
    dec_.init(rng, stddev);
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) {
    enc_.register_params(reg, prefix + ".enc");
    dec_.register_params(reg, prefix + ".dec");
  }

  int64_t channels() const { return channels_; }

  struct Cache {
    Conv2d::Cache enc_cache, dec_cache;
    Tensor mask;   // softmax output
    Tensor recon;  // decoder output
    Tensor target;
  };

  // Eq-style softmax over the two encoder channels, per pixel.
  SilhouetteMask encode_mask(const Tensor& f_last, Cache* cache = nullptr) const {
    require(f_last.rank() == 4 && f_last.dim(1) == channels_, ErrorCode::dimension,
            "mask encoder channel mismatch");
    Tensor logits = enc_.forward(f_last, cache ? &cache->enc_cache : nullptr);
    const int64_t t = logits.dim(0), plane = logits.dim(2) * logits.dim(3);
    SilhouetteMask mask;
    mask.map.reshape(logits.shape());
    for (int64_t f = 0; f < t; ++f) {
      const float* a = logits.data() + (f * 2 + 0) * plane;
      const float* b = logits.data() + (f * 2 + 1) * plane;
      float* ma = mask.map.data() + (f * 2 + 0) * plane;
      float* mb = mask.map.data() + (f * 2 + 1) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        const float mx = std::max(a[i], b[i]);
        const float ea = std::exp(a[i] - mx), eb = std::exp(b[i] - mx);
        const float inv = 1.0f / (ea + eb);
        ma[i] = ea * inv;
        mb[i] = eb * inv;
      }
    }
    if (cache) cache->mask = mask.map;
    return mask;
  }

  // Mean squared reconstruction error of the deepest map from the mask.
  double recon_loss(const Tensor& f_last, const SilhouetteMask& mask, Cache* cache = nullptr) const {
    Tensor recon = dec_.forward(mask.map, cache ? &cache->dec_cache : nullptr);
    require(recon.same_shape(f_last), ErrorCode::dimension, "reconstruction shape mismatch");
    double acc = 0.0;
    for (int64_t i = 0; i < recon.size(); ++i) {
      const double d = static_cast<double>(f_last[i]) - recon[i];
      acc += d * d;
    }
    if (cache) {
      cache->recon = std::move(recon);
      cache->target = f_last;
    }
    return acc / static_cast<double>(f_last.size());
  }

  // Accumulates encoder and decoder gradients. The deepest map is treated
  // as a constant, so nothing flows back into the backbone from here.
  void backward_rec(Cache& cache, double loss_scale = 1.0) {
    const int64_t n = cache.recon.size();
    Tensor d_recon(cache.recon.shape());
    const double k = 2.0 * loss_scale / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i)
      d_recon[i] = static_cast<float>(k * (static_cast<double>(cache.recon[i]) - cache.target[i]));
    Tensor d_mask = dec_.backward(d_recon, cache.dec_cache);
    // softmax jacobian, two channels per pixel
    const int64_t t = d_mask.dim(0), plane = d_mask.dim(2) * d_mask.dim(3);
    Tensor d_logits(d_mask.shape());
    for (int64_t f = 0; f < t; ++f) {
      const float* ma = cache.mask.data() + (f * 2 + 0) * plane;
      const float* mb = cache.mask.data() + (f * 2 + 1) * plane;
      const float* da = d_mask.data() + (f * 2 + 0) * plane;
      const float* db = d_mask.data() + (f * 2 + 1) * plane;
      float* la = d_logits.data() + (f * 2 + 0) * plane;
      float* lb = d_logits.data() + (f * 2 + 1) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        const float dot = da[i] * ma[i] + db[i] * mb[i];
        la[i] = ma[i] * (da[i] - dot);
        lb[i] = mb[i] * (db[i] - dot);
      }
    }
    enc_.backward(d_logits, cache.enc_cache);
  }

  Conv2d& encoder() { return enc_; }
  Conv2d& decoder() { return dec_; }

 private:
  int64_t channels_ = 0;
  Conv2d enc_, dec_;
};

// Mean activation over the one-pixel border ring, per channel, averaged
// over a calibration batch. Background dominates the frame edge, so the
// person channel is the one with the LOWER border mean. Ties pick 0.
inline int select_foreground(const std::vector<SilhouetteMask>& calibration) {
  require(!calibration.empty(), ErrorCode::parameter, "empty calibration batch");
  double border_mean[2] = {0.0, 0.0};
  int64_t count = 0;
  for (const auto& mask : calibration) {
    const int64_t t = mask.map.dim(0), h = mask.map.dim(2), w = mask.map.dim(3);
    for (int64_t f = 0; f < t; ++f) {
      for (int c = 0; c < 2; ++c) {
        const float* m = mask.map.data() + (f * 2 + c) * h * w;
        double s = 0.0;
        for (int64_t x = 0; x < w; ++x) s += m[x] + m[(h - 1) * w + x];
        for (int64_t y = 1; y + 1 < h; ++y) s += m[y * w] + m[y * w + (w - 1)];
        border_mean[c] += s;
      }
      count += 2 * (h + w) - 4;
    }
  }
  border_mean[0] /= count;
  border_mean[1] /= count;
  return border_mean[1] < border_mean[0] ? 1 : 0;
}

inline int select_foreground(const SilhouetteMask& mask) {
  return select_foreground(std::vector<SilhouetteMask>{mask});
}

// Background suppression: the foreground probability map is resized to each
// layer's grid and multiplied in, broadcast over channels.
inline MaskedFeatureStack apply_mask(const SilhouetteMask& mask, const FeatureStack& stack,
                                     std::vector<Tensor>* resized_out = nullptr) {
  MaskedFeatureStack out;
  const Tensor fg = mask.foreground();
  for (const auto& layer : stack.layers) {
    const int64_t t = layer.dim(0), c = layer.dim(1), h = layer.dim(2), w = layer.dim(3);
    require(t == fg.dim(0), ErrorCode::dimension, "mask frame count mismatch");
    Tensor m = bilinear_resize(fg, h, w);
    Tensor masked(layer.shape());
    for (int64_t f = 0; f < t; ++f) {
      const float* mp = m.data() + f * h * w;
      for (int64_t ch = 0; ch < c; ++ch) {
        const float* xp = layer.data() + (f * c + ch) * h * w;
        float* yp = masked.data() + (f * c + ch) * h * w;
        for (int64_t i = 0; i < h * w; ++i) yp[i] = mp[i] * xp[i];
      }
    }
    out.layers.push_back(std::move(masked));
    if (resized_out) resized_out->push_back(std::move(m));
  }
  return out;
}

// Gradient of the gait losses w.r.t. the raw stack; the mask is a constant
// here by design, so this is just the same broadcast multiply.
inline Tensor apply_mask_backward_layer(const Tensor& d_masked, const Tensor& resized_mask) {
  const int64_t t = d_masked.dim(0), c = d_masked.dim(1);
  const int64_t plane = d_masked.dim(2) * d_masked.dim(3);
  Tensor dx(d_masked.shape());
  for (int64_t f = 0; f < t; ++f) {
    const float* mp = resized_mask.data() + f * plane;
    for (int64_t ch = 0; ch < c; ++ch) {
      const float* dp = d_masked.data() + (f * c + ch) * plane;
      float* xp = dx.data() + (f * c + ch) * plane;
      for (int64_t i = 0; i < plane; ++i) xp[i] = dp[i] * mp[i];
    }
  }
  return dx;
}

}  // namespace lwgait
