#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "lwgait/evalkit.hpp"

namespace lwgait {

// Average pairwise cosine similarity between layer features over a batch.
// Entry (a,b) averages the cosine of the two layers' channel vectors at
// the same frame and spatial position. Pairs with different channel counts
// are incomparable and left as NaN.
struct SimilarityMatrix {
  int n = 0;
  std::vector<double> values;          // n*n, NaN where incomparable
  int64_t zero_vectors_excluded = 0;
  int64_t incomparable_pairs = 0;

  double at(int a, int b) const { return values[static_cast<size_t>(a * n + b)]; }
  bool comparable(int a, int b) const { return !std::isnan(at(a, b)); }
};

inline SimilarityMatrix layer_cosine_matrix(const std::vector<FeatureStack>& stacks) {
  require(!stacks.empty(), ErrorCode::parameter, "need at least one feature stack");
  const auto& meta = stacks.front().layer_meta;
  for (const auto& s : stacks)
    require(s.layer_meta == meta, ErrorCode::dimension, "stacks must share layer_meta");
  const int n = static_cast<int>(meta.size());

  SimilarityMatrix sim;
  sim.n = n;
  sim.values.assign(static_cast<size_t>(n * n), std::numeric_limits<double>::quiet_NaN());

  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      if (meta[static_cast<size_t>(a)].channels != meta[static_cast<size_t>(b)].channels) {
        ++sim.incomparable_pairs;
        continue;
      }
      // spatial mismatch: both maps resized to the smaller grid
      const int64_t h = std::min(meta[static_cast<size_t>(a)].h, meta[static_cast<size_t>(b)].h);
      const int64_t w = std::min(meta[static_cast<size_t>(a)].w, meta[static_cast<size_t>(b)].w);
      const int64_t c = meta[static_cast<size_t>(a)].channels;
      double acc = 0.0;
      int64_t count = 0;
      for (const auto& stack : stacks) {
        const Tensor la = bilinear_resize(stack.layers[static_cast<size_t>(a)], h, w);
        const Tensor lb = bilinear_resize(stack.layers[static_cast<size_t>(b)], h, w);
        const int64_t t = la.dim(0);
        for (int64_t f = 0; f < t; ++f) {
          for (int64_t pos = 0; pos < h * w; ++pos) {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (int64_t ch = 0; ch < c; ++ch) {
              const double va = la[(f * c + ch) * h * w + pos];
              const double vb = lb[(f * c + ch) * h * w + pos];
              dot += va * vb;
              na += va * va;
              nb += vb * vb;
            }
            if (na == 0.0 || nb == 0.0) {
              ++sim.zero_vectors_excluded;
              continue;
            }
            acc += dot / (std::sqrt(na) * std::sqrt(nb));
            ++count;
          }
        }
      }
      const double value = count > 0 ? acc / static_cast<double>(count)
                                     : std::numeric_limits<double>::quiet_NaN();
      sim.values[static_cast<size_t>(a * n + b)] = value;
      sim.values[static_cast<size_t>(b * n + a)] = value;
    }
  }
  return sim;
}

// Greedy left-to-right merge: extend the current contiguous group while the
// minimum pairwise similarity inside it stays at or above tau. Encoders are
// then assigned by splitting the group sequence at the largest between-group
// dissimilarity boundaries into at most p_max runs.
inline GroupingPlan suggest_grouping(const SimilarityMatrix& sim, double tau, int p_max) {
  require(tau > 0.0 && tau <= 1.0, ErrorCode::parameter, "tau must be in (0, 1]");
  require(p_max >= 1, ErrorCode::parameter, "p_max must be at least 1");
  const int n = sim.n;
  require(n >= 1, ErrorCode::parameter, "empty similarity matrix");

  GroupingPlan plan;
  int start = 0;
  double running_min = 1.0;
  for (int next = 1; next <= n; ++next) {
    bool extend = next < n;
    if (extend) {
      for (int i = start; i < next && extend; ++i) {
        const double s = sim.at(i, next);
        if (std::isnan(s) || s < tau) extend = false;
        running_min = std::min(running_min, s);
      }
    }
    if (!extend) {
      plan.depth_groups.emplace_back(start + 1, next);
      start = next;
      running_min = 1.0;
    }
  }

  const int j = plan.group_count();
  const int p = std::min(p_max, j);
  // boundary dissimilarity: 1 - mean cross similarity of adjacent groups
  std::vector<std::pair<double, int>> boundaries;
  for (int g = 0; g + 1 < j; ++g) {
    const auto& [alo, ahi] = plan.depth_groups[static_cast<size_t>(g)];
    const auto& [blo, bhi] = plan.depth_groups[static_cast<size_t>(g + 1)];
    double acc = 0.0;
    int64_t count = 0;
    bool incomparable = false;
    for (int a = alo; a <= ahi; ++a)
      for (int b = blo; b <= bhi; ++b) {
        const double s = sim.at(a - 1, b - 1);
        if (std::isnan(s)) {
          incomparable = true;
        } else {
          acc += s;
          ++count;
        }
      }
    const double dissim = incomparable || count == 0
                              ? std::numeric_limits<double>::infinity()
                              : 1.0 - acc / static_cast<double>(count);
    boundaries.emplace_back(dissim, g);
  }
  std::stable_sort(boundaries.begin(), boundaries.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<bool> cut(static_cast<size_t>(j), false);
  for (int i = 0; i < p - 1 && i < static_cast<int>(boundaries.size()); ++i)
    cut[static_cast<size_t>(boundaries[static_cast<size_t>(i)].second)] = true;

  plan.encoder_assignment.assign(static_cast<size_t>(j), 0);
  int encoder = 1;
  for (int g = 0; g < j; ++g) {
    plan.encoder_assignment[static_cast<size_t>(g)] = encoder;
    if (g < j - 1 && cut[static_cast<size_t>(g)]) ++encoder;
  }
  plan.validate(n);
  return plan;
}

// Ensemble-vs-best-single-layer deltas per report column. Negative deltas
// (ensemble trailing the best layer) are flagged, not hidden.
struct EnsembleComparison {
  std::vector<double> best_layer;    // per column
  std::vector<int> best_layer_row;   // argmax layer row per column
  std::vector<double> ensemble;      // per column
  std::vector<double> delta;         // ensemble - best layer
  std::vector<bool> negative;
};

inline EnsembleComparison ensemble_vs_separate_report(const std::vector<std::vector<double>>& grid) {
  require(grid.size() >= 2, ErrorCode::parameter, "grid needs layer rows plus an ensemble row");
  const size_t cols = grid.front().size();
  EnsembleComparison cmp;
  for (size_t col = 0; col < cols; ++col) {
    double best = grid[0][col];
    int best_row = 0;
    for (size_t row = 1; row + 1 < grid.size(); ++row)
      if (grid[row][col] > best) {
        best = grid[row][col];
        best_row = static_cast<int>(row);
      }
    const double ens = grid.back()[col];
    cmp.best_layer.push_back(best);
    cmp.best_layer_row.push_back(best_row);
    cmp.ensemble.push_back(ens);
    cmp.delta.push_back(ens - best);
    cmp.negative.push_back(ens < best);
  }
  return cmp;
}

}  // namespace lwgait
