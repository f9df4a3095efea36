#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "lwgait/gaitnet.hpp"

namespace lwgait {

// ---- batch sampling ---------------------------------------------------------

// What the sampler needs to know about a dataset: identity and frame count
// per sequence, nothing else.
struct DatasetIndex {
  std::vector<int> sequence_identity;
  std::vector<int64_t> sequence_frames;

  std::map<int, std::vector<int>> by_identity() const {
    std::map<int, std::vector<int>> m;
    for (size_t i = 0; i < sequence_identity.size(); ++i)
      m[sequence_identity[i]].push_back(static_cast<int>(i));
    return m;
  }
};

struct BatchEntry {
  int sequence_index = 0;
  int identity = 0;
  std::vector<int64_t> frame_indices;
};

struct TrainBatch {
  std::vector<BatchEntry> entries;  // p*k sequences, grouped by identity
  int p = 0, k = 0, l = 0;

  void validate() const {
    require(static_cast<int>(entries.size()) == p * k, ErrorCode::configuration,
            "batch must hold p*k sequences");
    std::map<int, int> counts;
    for (const auto& e : entries) {
      require(static_cast<int>(e.frame_indices.size()) == l, ErrorCode::configuration,
              "every sequence must be trimmed to l frames");
      counts[e.identity] += 1;
    }
    require(static_cast<int>(counts.size()) == p, ErrorCode::configuration,
            "batch must hold exactly p identities");
    for (const auto& [id, c] : counts)
      require(c == k, ErrorCode::configuration, "every identity must contribute k sequences");
  }
};

// p identities without replacement, k sequences each (with replacement only
// when an identity has fewer than k), l consecutive frames with wraparound.
inline TrainBatch sample_batch(const DatasetIndex& index, Rng& rng, int p, int k, int l) {
  require(p >= 1 && k >= 1 && l >= 1, ErrorCode::configuration, "p, k, l must be positive");
  const auto groups = index.by_identity();
  require(static_cast<int>(groups.size()) >= p, ErrorCode::dataset_too_small,
          "dataset has fewer than p identities");

  std::vector<int> ids;
  ids.reserve(groups.size());
  for (const auto& [id, seqs] : groups) ids.push_back(id);
  rng.shuffle(ids);
  ids.resize(static_cast<size_t>(p));

  TrainBatch batch;
  batch.p = p;
  batch.k = k;
  batch.l = l;
  for (int id : ids) {
    const auto& seqs = groups.at(id);
    std::vector<int> chosen;
    if (static_cast<int>(seqs.size()) >= k) {
      std::vector<int> pool = seqs;
      rng.shuffle(pool);
      chosen.assign(pool.begin(), pool.begin() + k);
    } else {
      for (int i = 0; i < k; ++i) chosen.push_back(seqs[rng.below(seqs.size())]);
    }
    for (int seq : chosen) {
      BatchEntry entry;
      entry.sequence_index = seq;
      entry.identity = id;
      const int64_t frames = index.sequence_frames[static_cast<size_t>(seq)];
      require(frames >= 1, ErrorCode::dataset_too_small, "sequence with no frames");
      const int64_t start = static_cast<int64_t>(rng.below(static_cast<uint64_t>(frames)));
      for (int64_t j = 0; j < l; ++j) entry.frame_indices.push_back((start + j) % frames);
      batch.entries.push_back(std::move(entry));
    }
  }
  batch.validate();
  return batch;
}

// ---- augmentation -----------------------------------------------------------

inline Tensor hflip_frames(const Tensor& frames) {
  Tensor out(frames.shape());
  const int64_t t = frames.dim(0), c = frames.dim(1), h = frames.dim(2), w = frames.dim(3);
  for (int64_t f = 0; f < t; ++f)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
          out[((f * c + ch) * h + y) * w + x] = frames[((f * c + ch) * h + y) * w + (w - 1 - x)];
  return out;
}

// One coin per sequence; all frames flip together or not at all.
inline Tensor flip_augment(const Tensor& frames, Rng& rng, bool* flipped_out = nullptr) {
  const bool flip = rng.bernoulli(0.5);
  if (flipped_out) *flipped_out = flip;
  return flip ? hflip_frames(frames) : frames;
}

// ---- losses -----------------------------------------------------------------

struct LossReport {
  double tri = 0.0, ce = 0.0, rec = 0.0;
  double total() const { return tri + ce + rec; }
};

// Stacks per-sequence embedding sets into one [B x parts x emb] tensor per
// unit, the layout both losses consume.
inline std::vector<Tensor> stack_units(const std::vector<GaitEmbeddingSet>& sets) {
  require(!sets.empty(), ErrorCode::configuration, "empty embedding batch");
  const size_t units = sets.front().units.size();
  const int64_t parts = sets.front().units.front().dim(0);
  const int64_t emb = sets.front().units.front().dim(1);
  std::vector<Tensor> stacked;
  for (size_t u = 0; u < units; ++u) {
    Tensor t({static_cast<int64_t>(sets.size()), parts, emb});
    for (size_t b = 0; b < sets.size(); ++b) {
      const Tensor& src = sets[b].units[u];
      require(src.dim(0) == parts && src.dim(1) == emb, ErrorCode::dimension,
              "inconsistent unit shapes in batch");
      std::copy(src.data(), src.data() + src.size(), t.data() + static_cast<int64_t>(b) * parts * emb);
    }
    stacked.push_back(std::move(t));
  }
  return stacked;
}

// Batch-all triplet loss with margin over per-part Euclidean distances,
// averaged over the active (violating) triplets of each unit/part and then
// over parts and units. Zero when every positive pair beats every negative
// pair by at least the margin.
inline double triplet_loss(const std::vector<Tensor>& unit_batches, const std::vector<int>& labels,
                           double margin, std::vector<Tensor>* grads = nullptr) {
  require(!unit_batches.empty(), ErrorCode::configuration, "no units");
  const int64_t b = unit_batches.front().dim(0);
  require(static_cast<int64_t>(labels.size()) == b, ErrorCode::configuration,
          "label count must match batch size");
  {
    std::map<int, int> distinct;
    for (int l : labels) distinct[l] += 1;
    require(distinct.size() >= 2, ErrorCode::undefined_triplets,
            "triplet loss needs at least two identities in the batch");
  }
  const int64_t parts = unit_batches.front().dim(1);
  const int64_t emb = unit_batches.front().dim(2);
  const int64_t units = static_cast<int64_t>(unit_batches.size());

  if (grads) {
    grads->clear();
    for (const auto& u : unit_batches) grads->emplace_back(u.shape());
  }

  double total = 0.0;
  std::vector<double> dist(static_cast<size_t>(b * b));
  std::vector<double> ddist(static_cast<size_t>(b * b));
  for (int64_t u = 0; u < units; ++u) {
    const Tensor& e = unit_batches[static_cast<size_t>(u)];
    for (int64_t p = 0; p < parts; ++p) {
      auto vec = [&](int64_t i) { return e.data() + (i * parts + p) * emb; };
      for (int64_t i = 0; i < b; ++i)
        for (int64_t j = 0; j < b; ++j) {
          double ss = 0.0;
          const float* a = vec(i);
          const float* c = vec(j);
          for (int64_t d = 0; d < emb; ++d) {
            const double df = static_cast<double>(a[d]) - c[d];
            ss += df * df;
          }
          dist[static_cast<size_t>(i * b + j)] = std::sqrt(ss);
        }

      double sum = 0.0;
      int64_t active = 0;
      std::fill(ddist.begin(), ddist.end(), 0.0);
      for (int64_t a = 0; a < b; ++a)
        for (int64_t pos = 0; pos < b; ++pos) {
          if (pos == a || labels[static_cast<size_t>(pos)] != labels[static_cast<size_t>(a)]) continue;
          for (int64_t neg = 0; neg < b; ++neg) {
            if (labels[static_cast<size_t>(neg)] == labels[static_cast<size_t>(a)]) continue;
            const double v = dist[static_cast<size_t>(a * b + pos)] -
                             dist[static_cast<size_t>(a * b + neg)] + margin;
            if (v > 0.0) {
              sum += v;
              ++active;
              if (grads) {
                ddist[static_cast<size_t>(a * b + pos)] += 1.0;
                ddist[static_cast<size_t>(a * b + neg)] -= 1.0;
              }
            }
          }
        }
      if (active > 0) {
        total += sum / static_cast<double>(active);
        if (grads) {
          Tensor& g = (*grads)[static_cast<size_t>(u)];
          const double scale = 1.0 / (static_cast<double>(active) * units * parts);
          for (int64_t i = 0; i < b; ++i)
            for (int64_t j = 0; j < b; ++j) {
              const double dd = ddist[static_cast<size_t>(i * b + j)];
              if (dd == 0.0) continue;
              const double d = dist[static_cast<size_t>(i * b + j)];
              if (d <= 1e-12) continue;  // subgradient 0 at coincident points
              const double k = dd * scale / d;
              const float* a = vec(i);
              const float* c = vec(j);
              float* gi = g.data() + (i * parts + p) * emb;
              float* gj = g.data() + (j * parts + p) * emb;
              for (int64_t dd2 = 0; dd2 < emb; ++dd2) {
                const double diff = (static_cast<double>(a[dd2]) - c[dd2]) * k;
                gi[dd2] += static_cast<float>(diff);
                gj[dd2] -= static_cast<float>(diff);
              }
            }
        }
      }
    }
  }
  return total / (static_cast<double>(units) * parts);
}

// Per-(unit, part) linear softmax classifiers over the training identities.
class ClassifierBank {
 public:
  ClassifierBank() = default;

  ClassifierBank(int64_t units, int64_t parts, int64_t emb, int64_t classes)
      : units_(units), parts_(parts), classes_(classes) {
    for (int64_t i = 0; i < units * parts; ++i) fcs_.emplace_back(emb, classes, /*has_bias=*/true);
  }

  void init(Rng& rng, double stddev = 0.01) {
    for (auto& fc : fcs_) fc.init(rng, stddev);
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) {
    for (size_t i = 0; i < fcs_.size(); ++i) {
      const int64_t u = static_cast<int64_t>(i) / parts_, p = static_cast<int64_t>(i) % parts_;
      fcs_[i].register_params(reg, prefix + ".unit" + std::to_string(u) + ".part" + std::to_string(p));
    }
  }

  int64_t classes() const { return classes_; }
  int64_t units() const { return units_; }

  // Mean cross-entropy over units, parts and samples. Accumulates classifier
  // gradients when grads is set and returns embedding gradients through it.
  double loss(const std::vector<Tensor>& unit_batches, const std::vector<int>& labels,
              std::vector<Tensor>* grads = nullptr) {
    require(static_cast<int64_t>(unit_batches.size()) == units_, ErrorCode::configuration,
            "unit count mismatch in classifier bank");
    const int64_t b = unit_batches.front().dim(0);
    const int64_t emb = unit_batches.front().dim(2);
    for (int l : labels)
      require(l >= 0 && l < classes_, ErrorCode::label, "label outside classifier range");
    if (grads) {
      grads->clear();
      for (const auto& u : unit_batches) grads->emplace_back(u.shape());
    }

    double total = 0.0;
    const double denom = static_cast<double>(units_) * parts_ * b;
    for (int64_t u = 0; u < units_; ++u) {
      const Tensor& e = unit_batches[static_cast<size_t>(u)];
      for (int64_t p = 0; p < parts_; ++p) {
        Linear& fc = fcs_[static_cast<size_t>(u * parts_ + p)];
        Tensor rows({b, emb});
        for (int64_t i = 0; i < b; ++i)
          std::copy(e.data() + (i * parts_ + p) * emb, e.data() + (i * parts_ + p + 1) * emb,
                    rows.data() + i * emb);
        Linear::Cache cache;
        Tensor logits = fc.forward(rows, grads ? &cache : nullptr);
        Tensor dlogits({b, classes_});
        for (int64_t i = 0; i < b; ++i) {
          const float* row = logits.data() + i * classes_;
          float mx = row[0];
          for (int64_t c = 1; c < classes_; ++c) mx = std::max(mx, row[c]);
          double z = 0.0;
          for (int64_t c = 0; c < classes_; ++c) z += std::exp(static_cast<double>(row[c]) - mx);
          const int y = labels[static_cast<size_t>(i)];
          total += (std::log(z) - (static_cast<double>(row[y]) - mx)) / denom;
          if (grads) {
            for (int64_t c = 0; c < classes_; ++c) {
              const double soft = std::exp(static_cast<double>(row[c]) - mx) / z;
              dlogits[i * classes_ + c] =
                  static_cast<float>((soft - (c == y ? 1.0 : 0.0)) / denom);
            }
          }
        }
        if (grads) {
          Tensor drows = fc.backward(dlogits, cache);
          Tensor& g = (*grads)[static_cast<size_t>(u)];
          for (int64_t i = 0; i < b; ++i)
            for (int64_t d = 0; d < emb; ++d) g[(i * parts_ + p) * emb + d] += drows[i * emb + d];
        }
      }
    }
    return total;
  }

 private:
  int64_t units_ = 0, parts_ = 0, classes_ = 0;
  std::vector<Linear> fcs_;
};

// ---- schedule and optimizer -------------------------------------------------

struct Schedule {
  double base_lr = 0.1;
  std::vector<int64_t> milestones = {15000, 25000};
  double decay = 10.0;
  int64_t total_iters = 30000;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  void validate() const {
    require(base_lr > 0.0 && decay > 0.0 && total_iters >= 1, ErrorCode::schedule,
            "invalid schedule constants");
    int64_t prev = 0;
    for (int64_t m : milestones) {
      require(m > prev && m < total_iters, ErrorCode::schedule,
              "milestones must ascend and stay below total_iters");
      prev = m;
    }
  }
};

inline double lr_at(int64_t iter, const Schedule& schedule) {
  require(iter >= 0 && iter < schedule.total_iters, ErrorCode::schedule,
          "iteration outside the schedule");
  double lr = schedule.base_lr;
  for (int64_t m : schedule.milestones)
    if (iter >= m) lr /= schedule.decay;
  return lr;
}

// Classical momentum with L2 decay folded into the gradient:
// v <- mu*v + g + wd*theta ; theta <- theta - lr*v
class SgdOptimizer {
 public:
  SgdOptimizer() = default;

  explicit SgdOptimizer(const ParamRegistry& reg) {
    velocity_.reserve(reg.params.size());
    for (const auto& p : reg.params) velocity_.emplace_back(p.param->value.shape());
  }

  void step(const ParamRegistry& reg, double lr, double momentum, double weight_decay) {
    require(velocity_.size() == reg.params.size(), ErrorCode::configuration,
            "optimizer state does not match registry");
    for (size_t i = 0; i < reg.params.size(); ++i) {
      Parameter& p = *reg.params[i].param;
      Tensor& v = velocity_[i];
      for (int64_t j = 0; j < p.size(); ++j) {
        const float g = p.grad[j];
        if (!std::isfinite(g))
          throw Error(ErrorCode::numeric, "non-finite gradient in " + reg.params[i].name);
        const float gd = static_cast<float>(g + weight_decay * p.value[j]);
        v[j] = static_cast<float>(momentum * v[j] + gd);
        p.value[j] -= static_cast<float>(lr * v[j]);
      }
    }
  }

  std::vector<Tensor>& velocity() { return velocity_; }
  const std::vector<Tensor>& velocity() const { return velocity_; }

 private:
  std::vector<Tensor> velocity_;
};

}  // namespace lwgait
