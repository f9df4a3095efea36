#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "lwgait/maskpath.hpp"
#include "lwgait/nn/batchnorm.hpp"
#include "lwgait/nn/conv.hpp"
#include "lwgait/nn/linear.hpp"
#include "lwgait/nn/pool.hpp"

namespace lwgait {

// ---- projection head -------------------------------------------------------

// Per-layer channel squeeze ahead of the gait encoder: two 1x1 convs with a
// batch norm after each and a GELU between, sigmoid at call time, then a
// bilinear upsample to the working silhouette resolution.
class ProjectionHead {
 public:
  static constexpr int64_t kChannels = 16;

  ProjectionHead() = default;

  ProjectionHead(int64_t in_channels, int64_t out_h = 64, int64_t out_w = 32)
      : in_(in_channels), out_h_(out_h), out_w_(out_w),
        conv1_(in_channels, kChannels, 1, 1, 0),
        bn1_(kChannels),
        conv2_(kChannels, kChannels, 1, 1, 0),
        bn2_(kChannels) {}

  void init(Rng& rng) {
    conv1_.init(rng, std::sqrt(2.0 / static_cast<double>(in_)));
    conv2_.init(rng, std::sqrt(2.0 / static_cast<double>(kChannels)));
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) {
    conv1_.register_params(reg, prefix + ".conv1");
    bn1_.register_params(reg, prefix + ".bn1");
    conv2_.register_params(reg, prefix + ".conv2");
    bn2_.register_params(reg, prefix + ".bn2");
  }

  int64_t in_channels() const { return in_; }
  int64_t out_h() const { return out_h_; }
  int64_t out_w() const { return out_w_; }

  struct Cache {
    Conv2d::Cache conv1, conv2;
    BatchNorm2d::Cache bn1, bn2;
    Gelu::Cache gelu;
    Sigmoid::Cache sigmoid;
    int64_t in_h = 0, in_w = 0;
  };

  // [T x C_i x h x w] -> [T x 16 x out_h x out_w], values in (0,1)
  Tensor forward(const Tensor& x, bool train, Cache* cache = nullptr) {
    require(x.dim(1) == in_, ErrorCode::dimension, "projection head channel mismatch");
    require(!train || cache, ErrorCode::configuration, "training forward needs a cache");
    Tensor h = conv1_.forward(x, cache ? &cache->conv1 : nullptr);
    h = train ? bn1_.forward_train(h, cache->bn1) : bn1_.forward_eval(h);
    h = Gelu::forward(h, cache ? &cache->gelu : nullptr);
    h = conv2_.forward(h, cache ? &cache->conv2 : nullptr);
    h = train ? bn2_.forward_train(h, cache->bn2) : bn2_.forward_eval(h);
    h = Sigmoid::forward(h, cache ? &cache->sigmoid : nullptr);
    if (cache) {
      cache->in_h = x.dim(2);
      cache->in_w = x.dim(3);
    }
    return bilinear_resize(h, out_h_, out_w_);
  }

  Tensor backward(const Tensor& dy, Cache& cache) {
    Tensor d = bilinear_resize_backward(dy, cache.in_h, cache.in_w);
    d = Sigmoid::backward(d, cache.sigmoid);
    d = bn2_.backward(d, cache.bn2);
    d = conv2_.backward(d, cache.conv2);
    d = Gelu::backward(d, cache.gelu);
    d = bn1_.backward(d, cache.bn1);
    return conv1_.backward(d, cache.conv1);
  }

 private:
  int64_t in_ = 0, out_h_ = 64, out_w_ = 32;
  Conv2d conv1_, conv2_;
  BatchNorm2d bn1_, bn2_;
};

// ---- gait encoder -----------------------------------------------------------

struct GaitEncoderConfig {
  int64_t in_channels = ProjectionHead::kChannels;
  int64_t stage1 = 32, stage2 = 64, stage3 = 128;
  int64_t parts = 4;
  int64_t embed_dim = 64;
};

// Compact frame encoder with set pooling: three conv stages, elementwise
// max over frames, horizontal strips with mean+max fusion, one linear map
// per strip. Stage 1 is a stride-4 patch stem; stages 2 and 3 downsample
// by 2 between stages.
class GaitEncoder {
 public:
  GaitEncoder() = default;

  explicit GaitEncoder(const GaitEncoderConfig& cfg)
      : cfg_(cfg),
        stem_(cfg.in_channels, cfg.stage1, 4, 4, 0),
        bn1_(cfg.stage1),
        conv2_(cfg.stage1, cfg.stage2, 3, 2, 1),
        bn2_(cfg.stage2),
        conv3_(cfg.stage2, cfg.stage3, 3, 2, 1),
        bn3_(cfg.stage3) {
    part_fc_.reserve(static_cast<size_t>(cfg.parts));
    for (int64_t p = 0; p < cfg.parts; ++p)
      part_fc_.emplace_back(cfg.stage3, cfg.embed_dim, /*has_bias=*/false);
  }

  void init(Rng& rng) {
    stem_.init(rng, std::sqrt(2.0 / static_cast<double>(cfg_.in_channels * 16)));
    conv2_.init(rng, std::sqrt(2.0 / static_cast<double>(cfg_.stage1 * 9)));
    conv3_.init(rng, std::sqrt(2.0 / static_cast<double>(cfg_.stage2 * 9)));
    for (auto& fc : part_fc_) fc.init(rng, std::sqrt(1.0 / static_cast<double>(cfg_.stage3)));
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) {
    stem_.register_params(reg, prefix + ".stem");
    bn1_.register_params(reg, prefix + ".bn1");
    conv2_.register_params(reg, prefix + ".conv2");
    bn2_.register_params(reg, prefix + ".bn2");
    conv3_.register_params(reg, prefix + ".conv3");
    bn3_.register_params(reg, prefix + ".bn3");
    for (size_t p = 0; p < part_fc_.size(); ++p)
      part_fc_[p].register_params(reg, prefix + ".part" + std::to_string(p));
  }

  const GaitEncoderConfig& config() const { return cfg_; }

  int64_t parameter_count() const {
    int64_t n = stem_.parameter_count() + bn1_.parameter_count() + conv2_.parameter_count() +
                bn2_.parameter_count() + conv3_.parameter_count() + bn3_.parameter_count();
    for (const auto& fc : part_fc_) n += fc.parameter_count();
    return n;
  }

  int64_t forward_count() const { return forward_count_; }
  void reset_forward_count() { forward_count_ = 0; }

  // One contiguous run of frames belonging to one sequence.
  struct SeqSpan {
    int64_t start = 0, len = 0;
  };

  struct Cache {
    Conv2d::Cache stem, conv2, conv3;
    BatchNorm2d::Cache bn1, bn2, bn3;
    Relu::Cache relu1, relu2, relu3;
    std::vector<SetMaxPool::Cache> set_pool;
    std::vector<StripPool::Cache> strip;
    std::vector<Linear::Cache> parts;  // spans * parts
    std::vector<int64_t> conv_out_shape;
    std::vector<SeqSpan> spans;
  };

  // [F x C x H x W] frames from several sequences; conv stages and batch
  // norm run over all frames together, set pooling per span. Returns
  // [spans x parts x embed_dim].
  Tensor forward_batch(const Tensor& x, const std::vector<SeqSpan>& spans, bool train,
                       Cache* cache = nullptr) {
    require(!spans.empty(), ErrorCode::empty_sequence, "no sequences to encode");
    for (const auto& s : spans)
      require(s.len >= 1, ErrorCode::empty_sequence, "encoder needs at least one frame");
    require(x.dim(1) == cfg_.in_channels, ErrorCode::dimension, "encoder channel mismatch");
    require(!train || cache, ErrorCode::configuration, "training forward needs a cache");
    forward_count_ += static_cast<int64_t>(spans.size());

    Tensor h = stem_.forward(x, cache ? &cache->stem : nullptr);
    h = train ? bn1_.forward_train(h, cache->bn1) : bn1_.forward_eval(h);
    h = Relu::forward(h, cache ? &cache->relu1 : nullptr);
    h = conv2_.forward(h, cache ? &cache->conv2 : nullptr);
    h = train ? bn2_.forward_train(h, cache->bn2) : bn2_.forward_eval(h);
    h = Relu::forward(h, cache ? &cache->relu2 : nullptr);
    h = conv3_.forward(h, cache ? &cache->conv3 : nullptr);
    h = train ? bn3_.forward_train(h, cache->bn3) : bn3_.forward_eval(h);
    h = Relu::forward(h, cache ? &cache->relu3 : nullptr);

    const int64_t c = h.dim(1), mh = h.dim(2), mw = h.dim(3);
    const int64_t s_count = static_cast<int64_t>(spans.size());
    Tensor out({s_count, cfg_.parts, cfg_.embed_dim});
    if (cache) {
      cache->conv_out_shape = h.shape();
      cache->spans = spans;
      cache->set_pool.resize(spans.size());
      cache->strip.resize(spans.size());
      cache->parts.resize(spans.size() * static_cast<size_t>(cfg_.parts));
    }
    for (int64_t s = 0; s < s_count; ++s) {
      const auto& span = spans[static_cast<size_t>(s)];
      Tensor frames({span.len, c, mh, mw});
      std::copy(h.data() + span.start * c * mh * mw, h.data() + (span.start + span.len) * c * mh * mw,
                frames.data());
      Tensor pooled = SetMaxPool::forward(frames, cache ? &cache->set_pool[static_cast<size_t>(s)] : nullptr);
      Tensor strips = StripPool::forward(pooled, cfg_.parts, cache ? &cache->strip[static_cast<size_t>(s)] : nullptr);
      for (int64_t p = 0; p < cfg_.parts; ++p) {
        Tensor row({1, cfg_.stage3});
        for (int64_t ch = 0; ch < cfg_.stage3; ++ch) row[ch] = strips[p * cfg_.stage3 + ch];
        Linear::Cache* fc_cache =
            cache ? &cache->parts[static_cast<size_t>(s * cfg_.parts + p)] : nullptr;
        Tensor emb = part_fc_[static_cast<size_t>(p)].forward(row, fc_cache);
        for (int64_t d = 0; d < cfg_.embed_dim; ++d)
          out[(s * cfg_.parts + p) * cfg_.embed_dim + d] = emb[d];
      }
    }
    return out;
  }

  // [T x C x H x W] frames -> [parts x embed_dim], frame-order invariant.
  Tensor forward(const Tensor& x, bool train, Cache* cache = nullptr) {
    Tensor out = forward_batch(x, {{0, x.dim(0)}}, train, cache);
    out.view({cfg_.parts, cfg_.embed_dim});
    return out;
  }

  // d_embs: [spans x parts x embed_dim]; returns d_input over all frames.
  Tensor backward_batch(const Tensor& d_embs, Cache& cache) {
    const int64_t c = cache.conv_out_shape[1], mh = cache.conv_out_shape[2], mw = cache.conv_out_shape[3];
    Tensor d_h(cache.conv_out_shape);
    for (size_t s = 0; s < cache.spans.size(); ++s) {
      Tensor d_strips({cfg_.parts, cfg_.stage3});
      for (int64_t p = 0; p < cfg_.parts; ++p) {
        Tensor d_emb({1, cfg_.embed_dim});
        for (int64_t d = 0; d < cfg_.embed_dim; ++d)
          d_emb[d] = d_embs[(static_cast<int64_t>(s) * cfg_.parts + p) * cfg_.embed_dim + d];
        Tensor d_row = part_fc_[static_cast<size_t>(p)].backward(d_emb, cache.parts[s * static_cast<size_t>(cfg_.parts) + static_cast<size_t>(p)]);
        for (int64_t ch = 0; ch < cfg_.stage3; ++ch) d_strips[p * cfg_.stage3 + ch] = d_row[ch];
      }
      Tensor d_pooled = StripPool::backward(d_strips, cache.strip[s]);
      const auto& span = cache.spans[s];
      Tensor d_frames = SetMaxPool::backward(d_pooled, cache.set_pool[s], {span.len, c, mh, mw});
      for (int64_t i = 0; i < d_frames.size(); ++i) d_h[span.start * c * mh * mw + i] += d_frames[i];
    }
    Tensor d = Relu::backward(d_h, cache.relu3);
    d = bn3_.backward(d, cache.bn3);
    d = conv3_.backward(d, cache.conv3);
    d = Relu::backward(d, cache.relu2);
    d = bn2_.backward(d, cache.bn2);
    d = conv2_.backward(d, cache.conv2);
    d = Relu::backward(d, cache.relu1);
    d = bn1_.backward(d, cache.bn1);
    return stem_.backward(d, cache.stem);
  }

  Tensor backward(const Tensor& d_out, Cache& cache) {
    Tensor d = d_out;
    d.view({1, cfg_.parts, cfg_.embed_dim});
    return backward_batch(d, cache);
  }

 private:
  GaitEncoderConfig cfg_;
  Conv2d stem_, conv2_, conv3_;
  BatchNorm2d bn1_, bn2_, bn3_;
  std::vector<Linear> part_fc_;
  int64_t forward_count_ = 0;
};

// Exact bank size under encoder sharing: P encoders of s parameters each.
inline int64_t count_encoder_parameters(int64_t p, int64_t s) {
  require(p >= 1, ErrorCode::parameter, "encoder count must be positive");
  require(s >= 0, ErrorCode::parameter, "encoder size must be non-negative");
  return p * s;
}

// ---- grouping ---------------------------------------------------------------

// Contiguous depth groups over the tapped layers plus an encoder-sharing
// assignment. Group bounds are 1-based inclusive; encoder ids are 1-based.
struct GroupingPlan {
  std::vector<std::pair<int, int>> depth_groups;
  std::vector<int> encoder_assignment;
  double epsilon = 0.05;

  int group_count() const { return static_cast<int>(depth_groups.size()); }

  int encoder_count() const {
    int p = 0;
    for (int e : encoder_assignment) p = std::max(p, e);
    return p;
  }

  void validate(int n) const {
    require(!depth_groups.empty(), ErrorCode::plan, "plan has no groups");
    require(depth_groups.size() == encoder_assignment.size(), ErrorCode::plan,
            "assignment size disagrees with group count");
    require(group_count() <= n, ErrorCode::plan, "more groups than layers");
    int expect = 1;
    for (const auto& [lo, hi] : depth_groups) {
      require(lo == expect, ErrorCode::plan, "groups must be contiguous and cover 1..N");
      require(hi >= lo, ErrorCode::plan, "empty group range");
      expect = hi + 1;
    }
    require(expect == n + 1, ErrorCode::plan, "groups must cover 1..N exactly");
    const int p = encoder_count();
    require(p >= 1 && p <= group_count(), ErrorCode::plan, "encoder count out of range");
    std::vector<bool> used(static_cast<size_t>(p), false);
    for (int e : encoder_assignment) {
      require(e >= 1 && e <= p, ErrorCode::plan, "assignment references missing encoder");
      used[static_cast<size_t>(e - 1)] = true;
    }
    for (bool u : used) require(u, ErrorCode::plan, "every encoder must be used at least once");
  }

  static GroupingPlan identity(int n) {
    GroupingPlan plan;
    for (int i = 1; i <= n; ++i) {
      plan.depth_groups.emplace_back(i, i);
      plan.encoder_assignment.push_back(i);
    }
    return plan;
  }

  // Paper-style default: contiguous pairs, shallow half on encoder 1 and
  // deep half on encoder 2.
  static GroupingPlan default_paired(int n) {
    GroupingPlan plan;
    for (int lo = 1; lo <= n; lo += 2) {
      plan.depth_groups.emplace_back(lo, std::min(lo + 1, n));
      plan.encoder_assignment.push_back(0);
    }
    const int j = plan.group_count();
    for (int g = 0; g < j; ++g) plan.encoder_assignment[static_cast<size_t>(g)] = g < (j + 1) / 2 ? 1 : 2;
    if (j == 1) plan.encoder_assignment[0] = 1;
    return plan;
  }

  json to_json(int n) const {
    json groups = json::array();
    for (const auto& [lo, hi] : depth_groups) groups.push_back({lo, hi});
    return json{{"N", n}, {"groups", groups}, {"assignment", encoder_assignment}, {"epsilon", epsilon}};
  }

  static GroupingPlan from_json(const json& j, int* n_out = nullptr) {
    GroupingPlan plan;
    require(j.contains("N") && j.contains("groups") && j.contains("assignment"), ErrorCode::plan,
            "plan json needs N, groups, assignment");
    for (const auto& g : j["groups"]) {
      require(g.is_array() && g.size() == 2, ErrorCode::plan, "group entries are [lo, hi]");
      plan.depth_groups.emplace_back(g[0].get<int>(), g[1].get<int>());
    }
    plan.encoder_assignment = j["assignment"].get<std::vector<int>>();
    if (j.contains("epsilon")) plan.epsilon = j["epsilon"].get<double>();
    const int n = j["N"].get<int>();
    plan.validate(n);
    if (n_out) *n_out = n;
    return plan;
  }
};

inline GroupingPlan load_plan(const std::string& path, int* n_out = nullptr) {
  std::ifstream f(path);
  require(f.good(), ErrorCode::io, "cannot open plan file: " + path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::plan, std::string("invalid plan json: ") + e.what());
  }
  return GroupingPlan::from_json(j, n_out);
}

// Channelwise concatenation of each group's member layers, ascending.
inline std::vector<Tensor> depth_group_concat(const MaskedFeatureStack& masked,
                                              const GroupingPlan& plan) {
  plan.validate(static_cast<int>(masked.layers.size()));
  std::vector<Tensor> groups;
  groups.reserve(plan.depth_groups.size());
  for (const auto& [lo, hi] : plan.depth_groups) {
    const Tensor& first = masked.layers[static_cast<size_t>(lo - 1)];
    const int64_t t = first.dim(0), h = first.dim(2), w = first.dim(3);
    int64_t total_c = 0;
    for (int i = lo; i <= hi; ++i) {
      const Tensor& l = masked.layers[static_cast<size_t>(i - 1)];
      require(l.dim(0) == t && l.dim(2) == h && l.dim(3) == w, ErrorCode::plan,
              "group members must share frame count and grid");
      total_c += l.dim(1);
    }
    Tensor g({t, total_c, h, w});
    for (int64_t f = 0; f < t; ++f) {
      int64_t c_off = 0;
      for (int i = lo; i <= hi; ++i) {
        const Tensor& l = masked.layers[static_cast<size_t>(i - 1)];
        const int64_t c = l.dim(1);
        std::copy(l.data() + f * c * h * w, l.data() + (f + 1) * c * h * w,
                  g.data() + (f * total_c + c_off) * h * w);
        c_off += c;
      }
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

// Splits a concatenated group gradient back into per-layer gradients.
inline std::vector<Tensor> depth_group_split(const Tensor& d_group,
                                             const std::vector<const Tensor*>& members) {
  std::vector<Tensor> grads;
  const int64_t t = d_group.dim(0), h = d_group.dim(2), w = d_group.dim(3);
  const int64_t total_c = d_group.dim(1);
  int64_t c_off = 0;
  for (const Tensor* m : members) {
    const int64_t c = m->dim(1);
    Tensor g({t, c, h, w});
    for (int64_t f = 0; f < t; ++f)
      std::copy(d_group.data() + (f * total_c + c_off) * h * w,
                d_group.data() + (f * total_c + c_off + c) * h * w, g.data() + f * c * h * w);
    c_off += c;
    grads.push_back(std::move(g));
  }
  return grads;
}

// ---- representation set ----------------------------------------------------

enum class EmbeddingMode { standard, grouped };

struct GaitEmbeddingSet {
  std::vector<Tensor> units;  // each [parts x embed_dim]
  EmbeddingMode mode = EmbeddingMode::standard;
};

struct BranchCaches {
  std::vector<ProjectionHead::Cache> heads;
  std::vector<GaitEncoder::Cache> encoders;
};

// One unit per tapped layer: dedicated head, dedicated encoder.
inline GaitEmbeddingSet forward_standard(const MaskedFeatureStack& masked,
                                         std::vector<ProjectionHead>& heads,
                                         std::vector<GaitEncoder>& encoders, bool train,
                                         BranchCaches* caches = nullptr) {
  const size_t n = masked.layers.size();
  require(heads.size() == n && encoders.size() == n, ErrorCode::configuration,
          "head/encoder count must equal the tap count");
  GaitEmbeddingSet set;
  set.mode = EmbeddingMode::standard;
  if (caches) {
    caches->heads.resize(n);
    caches->encoders.resize(n);
  }
  for (size_t i = 0; i < n; ++i) {
    Tensor projected = heads[i].forward(masked.layers[i], train, caches ? &caches->heads[i] : nullptr);
    set.units.push_back(encoders[i].forward(projected, train, caches ? &caches->encoders[i] : nullptr));
  }
  return set;
}

// Grouped variant: one unit per depth group, encoders shared per the plan.
inline GaitEmbeddingSet forward_grouped(const MaskedFeatureStack& masked, const GroupingPlan& plan,
                                        std::vector<ProjectionHead>& heads_grouped,
                                        std::vector<GaitEncoder>& encoders_shared, bool train,
                                        BranchCaches* caches = nullptr) {
  plan.validate(static_cast<int>(masked.layers.size()));
  const size_t j = static_cast<size_t>(plan.group_count());
  require(heads_grouped.size() == j, ErrorCode::plan, "grouped head count must equal J");
  require(static_cast<int>(encoders_shared.size()) == plan.encoder_count(), ErrorCode::plan,
          "shared encoder count must equal P");
  std::vector<Tensor> groups = depth_group_concat(masked, plan);
  GaitEmbeddingSet set;
  set.mode = EmbeddingMode::grouped;
  if (caches) {
    caches->heads.resize(j);
    caches->encoders.resize(j);
  }
  for (size_t g = 0; g < j; ++g) {
    Tensor projected = heads_grouped[g].forward(groups[g], train, caches ? &caches->heads[g] : nullptr);
    GaitEncoder& enc = encoders_shared[static_cast<size_t>(plan.encoder_assignment[g] - 1)];
    set.units.push_back(enc.forward(projected, train, caches ? &caches->encoders[g] : nullptr));
  }
  return set;
}

// Mean squared gap between each grouped unit and the mean of the standard
// units it replaces. The measurable proxy for the grouping constraint.
inline double fidelity_gap(const GaitEmbeddingSet& standard, const GaitEmbeddingSet& grouped,
                           const std::vector<std::vector<int>>& alignment) {
  require(alignment.size() == grouped.units.size(), ErrorCode::dimension,
          "alignment must cover every grouped unit");
  double total = 0.0;
  for (size_t g = 0; g < grouped.units.size(); ++g) {
    const Tensor& gu = grouped.units[g];
    require(!alignment[g].empty(), ErrorCode::dimension, "empty alignment set");
    Tensor mean(gu.shape());
    for (int idx : alignment[g]) {
      const Tensor& su = standard.units.at(static_cast<size_t>(idx));
      require(su.same_shape(gu), ErrorCode::dimension, "unit shapes disagree");
      mean.add_(su);
    }
    mean.scale_(1.0f / static_cast<float>(alignment[g].size()));
    double acc = 0.0;
    for (int64_t i = 0; i < gu.size(); ++i) {
      const double d = static_cast<double>(gu[i]) - mean[i];
      acc += d * d;
    }
    total += acc / static_cast<double>(gu.size());
  }
  return total / static_cast<double>(grouped.units.size());
}

// Alignment induced by a plan: group j covers its member layers.
inline std::vector<std::vector<int>> plan_alignment(const GroupingPlan& plan) {
  std::vector<std::vector<int>> alignment;
  for (const auto& [lo, hi] : plan.depth_groups) {
    std::vector<int> members;
    for (int i = lo; i <= hi; ++i) members.push_back(i - 1);
    alignment.push_back(std::move(members));
  }
  return alignment;
}

}  // namespace lwgait
