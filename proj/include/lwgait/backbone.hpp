#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "lwgait/core/container.hpp"
#include "lwgait/core/parallel.hpp"
#include "lwgait/nn/activations.hpp"
#include "lwgait/nn/attention.hpp"
#include "lwgait/nn/layernorm.hpp"
#include "lwgait/nn/linear.hpp"

namespace lwgait {

enum class Condition { CL, UP, DN, BG, NM };

inline const char* condition_name(Condition c) {
  switch (c) {
    case Condition::CL: return "CL";
    case Condition::UP: return "UP";
    case Condition::DN: return "DN";
    case Condition::BG: return "BG";
    case Condition::NM: return "NM";
  }
  return "?";
}

inline Condition condition_from_name(const std::string& s) {
  if (s == "CL") return Condition::CL;
  if (s == "UP") return Condition::UP;
  if (s == "DN") return Condition::DN;
  if (s == "BG") return Condition::BG;
  if (s == "NM") return Condition::NM;
  throw Error(ErrorCode::format, "unknown condition: " + s);
}

struct ImageSequence {
  Tensor frames;  // [T x 3 x H x W], values in [0,1]
  int identity_label = 0;
  Condition condition_label = Condition::NM;
  int view_label = 0;
  std::string sequence_id;
};

// Which residual-block outputs are exposed downstream. Indices are 1-based
// and the deepest tap always equals the backbone depth.
struct LayerTap {
  int backbone_depth = 0;
  std::vector<int> tapped_indices;
  int n = 0;

  void validate() const {
    require(n >= 1 && n == static_cast<int>(tapped_indices.size()), ErrorCode::invalid_tap,
            "tap count mismatch");
    int prev = 0;
    for (int idx : tapped_indices) {
      require(idx >= 1 && idx <= backbone_depth, ErrorCode::invalid_tap, "tap index out of range");
      require(idx > prev, ErrorCode::invalid_tap, "tap indices must ascend");
      prev = idx;
    }
    require(tapped_indices.back() == backbone_depth, ErrorCode::invalid_tap,
            "deepest tap must equal backbone depth");
  }
};

// Uniform stride rule: index_k = round(k * depth / n), forced to end at the
// deepest block. Monotone for n <= depth, so no deduplication ever fires.
inline LayerTap select_tap(int backbone_depth, int n) {
  require(n >= 1 && n <= backbone_depth, ErrorCode::invalid_tap,
          "tap count must satisfy 1 <= N <= backbone depth");
  LayerTap tap;
  tap.backbone_depth = backbone_depth;
  tap.n = 0;
  int prev = 0;
  for (int k = 1; k <= n; ++k) {
    int idx = static_cast<int>(std::llround(static_cast<double>(k) * backbone_depth / n));
    if (idx <= prev) continue;  // dedup safeguard
    tap.tapped_indices.push_back(idx);
    prev = idx;
  }
  tap.tapped_indices.back() = backbone_depth;
  tap.n = static_cast<int>(tap.tapped_indices.size());
  tap.validate();
  return tap;
}

struct LayerMeta {
  int64_t channels = 0, h = 0, w = 0;
  bool operator==(const LayerMeta&) const = default;
};

enum class StackSource { toy_backbone, file };

// The tapped per-layer maps for one sequence.
struct FeatureStack {
  std::vector<Tensor> layers;  // each [T x C_i x h_i x w_i]
  std::vector<LayerMeta> layer_meta;
  StackSource source = StackSource::toy_backbone;

  int64_t frame_count() const { return layers.empty() ? 0 : layers.front().dim(0); }
  int n() const { return static_cast<int>(layers.size()); }

  void validate() const {
    require(!layers.empty(), ErrorCode::integrity, "empty feature stack");
    require(layers.size() == layer_meta.size(), ErrorCode::integrity, "layer_meta count mismatch");
    const int64_t t = layers.front().dim(0);
    for (size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      const auto& m = layer_meta[i];
      require(l.rank() == 4 && l.dim(0) == t, ErrorCode::integrity,
              "feature stack frames disagree across layers");
      require(l.dim(1) == m.channels && l.dim(2) == m.h && l.dim(3) == m.w, ErrorCode::integrity,
              "feature stack shape disagrees with layer_meta");
    }
  }
};

struct BackboneConfig {
  int depth = 12;
  int dim = 64;
  int heads = 2;
  int patch = 8;
  int mlp_hidden = 128;
  int input_h = 64;
  int input_w = 32;
};

// Small pre-norm residual vision transformer. Frames are processed
// independently; there is no temporal mixing anywhere in the backbone.
class ToyBackbone {
 public:
  ToyBackbone() = default;

  explicit ToyBackbone(const BackboneConfig& cfg) : cfg_(cfg) {
    require(cfg.dim % cfg.heads == 0, ErrorCode::configuration, "dim must divide by heads");
    require(cfg.input_h % cfg.patch == 0 && cfg.input_w % cfg.patch == 0, ErrorCode::configuration,
            "input size must divide by patch size");
    grid_h_ = cfg.input_h / cfg.patch;
    grid_w_ = cfg.input_w / cfg.patch;
    tokens_ = grid_h_ * grid_w_;
    patch_proj_ = Linear(3 * cfg.patch * cfg.patch, cfg.dim);
    pos_embed_.resize({tokens_, cfg.dim});
    blocks_.resize(static_cast<size_t>(cfg.depth));
    for (auto& b : blocks_) {
      b.ln1 = LayerNorm(cfg.dim);
      b.attn = MultiHeadAttention(cfg.dim, cfg.heads);
      b.ln2 = LayerNorm(cfg.dim);
      b.fc1 = Linear(cfg.dim, cfg.mlp_hidden);
      b.fc2 = Linear(cfg.mlp_hidden, cfg.dim);
    }
  }

  void init(Rng& rng) {
    patch_proj_.init(rng, 0.02);
    normal_init(pos_embed_.value, rng, 0.02);
    for (auto& b : blocks_) {
      b.attn.init(rng, 0.02);
      b.fc1.init(rng, 0.02);
      b.fc2.init(rng, 0.02);
    }
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) {
    patch_proj_.register_params(reg, prefix + ".patch_proj");
    reg.add(prefix + ".pos_embed", pos_embed_);
    for (size_t i = 0; i < blocks_.size(); ++i) {
      const std::string bp = prefix + ".block" + std::to_string(i + 1);
      blocks_[i].ln1.register_params(reg, bp + ".ln1");
      blocks_[i].attn.register_params(reg, bp + ".attn");
      blocks_[i].ln2.register_params(reg, bp + ".ln2");
      blocks_[i].fc1.register_params(reg, bp + ".fc1");
      blocks_[i].fc2.register_params(reg, bp + ".fc2");
    }
  }

  const BackboneConfig& config() const { return cfg_; }
  int64_t tokens() const { return tokens_; }
  int64_t grid_h() const { return grid_h_; }
  int64_t grid_w() const { return grid_w_; }

  struct BlockCache {
    LayerNorm::Cache ln1, ln2;
    MultiHeadAttention::Cache attn;
    Linear::Cache fc1, fc2;
    Gelu::Cache gelu;
  };

  struct Cache {
    Linear::Cache patch_cache;
    std::vector<BlockCache> blocks;
    int64_t frames = 0;
  };

  // Patch embedding plus positions, before any block. Exposed so tests can
  // assert the residual identity path.
  Tensor embed(const Tensor& frames, Cache* cache = nullptr) const {
    require(frames.rank() == 4 && frames.dim(1) == 3, ErrorCode::dimension,
            "backbone wants [T x 3 x H x W] frames");
    require(frames.dim(2) == cfg_.input_h && frames.dim(3) == cfg_.input_w, ErrorCode::dimension,
            "frame size does not match backbone config");
    const int64_t t = frames.dim(0);
    require(t >= 1, ErrorCode::empty_sequence, "sequence must have at least one frame");
    Tensor patches({t * tokens_, 3 * cfg_.patch * cfg_.patch});
    for (int64_t f = 0; f < t; ++f) extract_patches(frames, f, patches.data() + f * tokens_ * patches.dim(1));
    Tensor x = patch_proj_.forward(patches, cache ? &cache->patch_cache : nullptr);
    for (int64_t f = 0; f < t; ++f)
      for (int64_t tok = 0; tok < tokens_; ++tok)
        for (int64_t d = 0; d < cfg_.dim; ++d)
          x[(f * tokens_ + tok) * cfg_.dim + d] += pos_embed_.value[tok * cfg_.dim + d];
    if (cache) cache->frames = t;
    return x;
  }

  // Runs the block stack, recording tapped outputs as spatial maps.
  FeatureStack forward_stack(const Tensor& frames, const LayerTap& tap, Cache* cache = nullptr) const {
    require(tap.backbone_depth == cfg_.depth, ErrorCode::configuration,
            "tap depth does not match backbone depth");
    tap.validate();
    if (cache) cache->blocks.resize(blocks_.size());
    Tensor x = embed(frames, cache);
    const int64_t t = frames.dim(0);

    FeatureStack stack;
    stack.source = StackSource::toy_backbone;
    size_t next_tap = 0;
    for (size_t i = 0; i < blocks_.size(); ++i) {
      x = run_block(blocks_[i], x, t, cache ? &cache->blocks[i] : nullptr);
      if (next_tap < tap.tapped_indices.size() &&
          static_cast<int>(i + 1) == tap.tapped_indices[next_tap]) {
        stack.layers.push_back(tokens_to_map(x, t));
        stack.layer_meta.push_back({cfg_.dim, grid_h_, grid_w_});
        ++next_tap;
      }
    }
    stack.validate();
    return stack;
  }

  // tap_grads[i] pairs with tap.tapped_indices[i]. Accumulates parameter
  // gradients; input gradients are discarded (frames are data).
  void backward_stack(const std::vector<Tensor>& tap_grads, const LayerTap& tap, Cache& cache) {
    require(tap_grads.size() == tap.tapped_indices.size(), ErrorCode::dimension,
            "tap gradient count mismatch");
    const int64_t t = cache.frames;
    Tensor dx({t * tokens_, cfg_.dim});
    int next = static_cast<int>(tap.tapped_indices.size()) - 1;
    for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i) {
      if (next >= 0 && tap.tapped_indices[static_cast<size_t>(next)] == i + 1) {
        Tensor g = map_to_tokens(tap_grads[static_cast<size_t>(next)], t);
        dx.add_(g);
        --next;
      }
      dx = block_backward(blocks_[static_cast<size_t>(i)], dx, cache.blocks[static_cast<size_t>(i)]);
    }
    // position embedding gradient, then patch projection
    for (int64_t f = 0; f < t; ++f)
      for (int64_t tok = 0; tok < tokens_; ++tok)
        for (int64_t d = 0; d < cfg_.dim; ++d)
          pos_embed_.grad[tok * cfg_.dim + d] += dx[(f * tokens_ + tok) * cfg_.dim + d];
    patch_proj_.backward(dx, cache.patch_cache);
  }

 private:
  struct Block {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    Linear fc1, fc2;
  };

  Tensor run_block(const Block& b, const Tensor& x, int64_t frames, BlockCache* c) const {
    Tensor a = b.ln1.forward(x, c ? &c->ln1 : nullptr);
    Tensor attn_out = b.attn.forward(a, frames, tokens_, c ? &c->attn : nullptr);
    Tensor x1 = x;
    x1.add_(attn_out);
    Tensor m = b.ln2.forward(x1, c ? &c->ln2 : nullptr);
    Tensor h = b.fc1.forward(m, c ? &c->fc1 : nullptr);
    h = Gelu::forward(h, c ? &c->gelu : nullptr);
    Tensor mlp_out = b.fc2.forward(h, c ? &c->fc2 : nullptr);
    Tensor x2 = x1;
    x2.add_(mlp_out);
    return x2;
  }

  Tensor block_backward(Block& b, const Tensor& dy, BlockCache& c) {
    Tensor dh = b.fc2.backward(dy, c.fc2);
    dh = Gelu::backward(dh, c.gelu);
    Tensor dm = b.fc1.backward(dh, c.fc1);
    Tensor dx1 = b.ln2.backward(dm, c.ln2);
    dx1.add_(dy);
    Tensor da = b.attn.backward(dx1, c.attn);
    Tensor dx = b.ln1.backward(da, c.ln1);
    dx.add_(dx1);
    return dx;
  }

  // Patch vector layout: channel-major, then rows, then columns.
  void extract_patches(const Tensor& frames, int64_t f, float* out) const {
    const int64_t p = cfg_.patch, h = cfg_.input_h, w = cfg_.input_w;
    for (int64_t gy = 0; gy < grid_h_; ++gy) {
      for (int64_t gx = 0; gx < grid_w_; ++gx) {
        float* dst = out + (gy * grid_w_ + gx) * 3 * p * p;
        for (int64_t c = 0; c < 3; ++c)
          for (int64_t py = 0; py < p; ++py)
            for (int64_t px = 0; px < p; ++px)
              dst[(c * p + py) * p + px] = frames[((f * 3 + c) * h + gy * p + py) * w + gx * p + px];
      }
    }
  }

  Tensor tokens_to_map(const Tensor& x, int64_t t) const {
    Tensor map({t, cfg_.dim, grid_h_, grid_w_});
    for (int64_t f = 0; f < t; ++f)
      for (int64_t tok = 0; tok < tokens_; ++tok)
        for (int64_t d = 0; d < cfg_.dim; ++d)
          map[((f * cfg_.dim + d) * grid_h_ + tok / grid_w_) * grid_w_ + tok % grid_w_] =
              x[(f * tokens_ + tok) * cfg_.dim + d];
    return map;
  }

  Tensor map_to_tokens(const Tensor& map, int64_t t) const {
    Tensor x({t * tokens_, cfg_.dim});
    for (int64_t f = 0; f < t; ++f)
      for (int64_t tok = 0; tok < tokens_; ++tok)
        for (int64_t d = 0; d < cfg_.dim; ++d)
          x[(f * tokens_ + tok) * cfg_.dim + d] =
              map[((f * cfg_.dim + d) * grid_h_ + tok / grid_w_) * grid_w_ + tok % grid_w_];
    return x;
  }

  BackboneConfig cfg_;
  int64_t grid_h_ = 0, grid_w_ = 0, tokens_ = 0;
  Linear patch_proj_;
  Parameter pos_embed_;
  std::vector<Block> blocks_;
};

inline FeatureStack forward_stack(const ToyBackbone& backbone, const ImageSequence& sequence,
                                  const LayerTap& tap, ToyBackbone::Cache* cache = nullptr) {
  return backbone.forward_stack(sequence.frames, tap, cache);
}

// ---- feature-stack file format -------------------------------------------

inline constexpr char kFeatureStackMagic[4] = {'F', 'S', 'T', 'K'};
inline constexpr const char* kFeatureStackLayout = "TCHW per layer, layers concatenated in tap order";

inline void save_feature_stack(const std::string& path, const FeatureStack& stack) {
  stack.validate();
  json meta = json::array();
  int64_t total = 0;
  for (const auto& m : stack.layer_meta) {
    meta.push_back({{"C", m.channels}, {"h", m.h}, {"w", m.w}});
    total += stack.frame_count() * m.channels * m.h * m.w;
  }
  json header = {{"version", 1},
                 {"N", stack.n()},
                 {"T", stack.frame_count()},
                 {"layer_meta", meta},
                 {"dtype", "f32le"},
                 {"layout", kFeatureStackLayout}};
  std::vector<float> payload;
  payload.reserve(static_cast<size_t>(total));
  for (const auto& layer : stack.layers)
    payload.insert(payload.end(), layer.data(), layer.data() + layer.size());
  write_container(path, kFeatureStackMagic, header, payload);
}

inline FeatureStack load_feature_stack(const std::string& path) {
  Container c = read_container(path, kFeatureStackMagic);
  const auto& h = c.header;
  require(h.contains("version") && h.contains("N") && h.contains("T") && h.contains("layer_meta") &&
              h.contains("dtype"),
          ErrorCode::format, "feature stack header missing fields");
  require(h["dtype"] == "f32le", ErrorCode::format, "unsupported dtype");
  const int n = h["N"].get<int>();
  const int64_t t = h["T"].get<int64_t>();
  require(n >= 1 && t >= 1, ErrorCode::format, "invalid N or T in header");
  require(static_cast<int>(h["layer_meta"].size()) == n, ErrorCode::integrity,
          "layer_meta count disagrees with N");

  FeatureStack stack;
  stack.source = StackSource::file;
  int64_t expected = 0;
  for (const auto& m : h["layer_meta"]) {
    LayerMeta lm{m["C"].get<int64_t>(), m["h"].get<int64_t>(), m["w"].get<int64_t>()};
    require(lm.channels >= 1 && lm.h >= 1 && lm.w >= 1, ErrorCode::format, "bad layer_meta entry");
    stack.layer_meta.push_back(lm);
    expected += t * lm.channels * lm.h * lm.w;
  }
  require(static_cast<int64_t>(c.payload.size()) == expected, ErrorCode::integrity,
          "payload size does not match header in " + path);

  int64_t off = 0;
  for (const auto& m : stack.layer_meta) {
    Tensor layer({t, m.channels, m.h, m.w});
    std::copy(c.payload.begin() + off, c.payload.begin() + off + layer.size(), layer.data());
    off += layer.size();
    stack.layers.push_back(std::move(layer));
  }
  stack.validate();
  return stack;
}

}  // namespace lwgait
