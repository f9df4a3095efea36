#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "lwgait/gaitnet.hpp"

namespace lwgait {

// ---- distances --------------------------------------------------------------

// Euclidean distance between two part-structured embeddings, flattened.
inline double layer_distance(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), ErrorCode::dimension, "embedding shapes disagree");
  double ss = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    ss += d * d;
  }
  return std::sqrt(ss);
}

// Ensemble fusion: plain arithmetic mean of the per-unit scores.
inline double ensemble_distance(const std::vector<double>& per_unit) {
  require(!per_unit.empty(), ErrorCode::protocol, "ensemble of zero units");
  double sum = 0.0;
  for (double d : per_unit) sum += d;
  return sum / static_cast<double>(per_unit.size());
}

// ---- probe/gallery scoring ---------------------------------------------------

struct EvalEntry {
  GaitEmbeddingSet set;
  int identity = 0;
  Condition condition = Condition::NM;
  int view = 0;
  std::string sequence_id;
};

struct DistanceTable {
  int units = 0;
  int64_t probes = 0, gallery = 0;
  std::vector<std::vector<double>> per_unit;  // [units][probes*gallery]
  std::vector<double> ensemble;               // [probes*gallery]
  std::vector<EvalEntry> probe_meta, gallery_meta;  // sets cleared, labels kept

  double unit_distance(int unit, int64_t p, int64_t g) const {
    return per_unit[static_cast<size_t>(unit)][static_cast<size_t>(p * gallery + g)];
  }
  double ensemble_dist(int64_t p, int64_t g) const {
    return ensemble[static_cast<size_t>(p * gallery + g)];
  }
};

// Optional per-unit distance normalization ahead of the ensemble mean.
// Off by default and excluded from acceptance runs; the fusion the tables
// report is the plain mean.
struct DistanceTableOptions {
  bool normalize_units = false;
};

inline DistanceTable build_distance_table(const std::vector<EvalEntry>& probes,
                                          const std::vector<EvalEntry>& gallery,
                                          const DistanceTableOptions& options = {}) {
  require(!probes.empty() && !gallery.empty(), ErrorCode::protocol, "empty probe or gallery set");
  const int units = static_cast<int>(probes.front().set.units.size());
  for (const auto& e : probes)
    require(static_cast<int>(e.set.units.size()) == units, ErrorCode::dimension,
            "probe unit counts disagree");
  for (const auto& e : gallery)
    require(static_cast<int>(e.set.units.size()) == units, ErrorCode::dimension,
            "gallery unit counts disagree");

  DistanceTable table;
  table.units = units;
  table.probes = static_cast<int64_t>(probes.size());
  table.gallery = static_cast<int64_t>(gallery.size());
  table.per_unit.assign(static_cast<size_t>(units),
                        std::vector<double>(static_cast<size_t>(table.probes * table.gallery)));
  for (int u = 0; u < units; ++u)
    for (int64_t p = 0; p < table.probes; ++p)
      for (int64_t g = 0; g < table.gallery; ++g)
        table.per_unit[static_cast<size_t>(u)][static_cast<size_t>(p * table.gallery + g)] =
            layer_distance(probes[static_cast<size_t>(p)].set.units[static_cast<size_t>(u)],
                           gallery[static_cast<size_t>(g)].set.units[static_cast<size_t>(u)]);

  if (options.normalize_units) {
    for (auto& mat : table.per_unit) {
      double mean = 0.0;
      for (double d : mat) mean += d;
      mean /= static_cast<double>(mat.size());
      if (mean > 0.0)
        for (double& d : mat) d /= mean;
    }
  }

  table.ensemble.assign(static_cast<size_t>(table.probes * table.gallery), 0.0);
  for (int64_t i = 0; i < table.probes * table.gallery; ++i) {
    std::vector<double> per(static_cast<size_t>(units));
    for (int u = 0; u < units; ++u) per[static_cast<size_t>(u)] = table.per_unit[static_cast<size_t>(u)][static_cast<size_t>(i)];
    table.ensemble[static_cast<size_t>(i)] = ensemble_distance(per);
  }

  table.probe_meta = probes;
  table.gallery_meta = gallery;
  for (auto& e : table.probe_meta) e.set.units.clear();
  for (auto& e : table.gallery_meta) e.set.units.clear();
  return table;
}

// ---- protocols --------------------------------------------------------------

struct EvalProtocol {
  std::vector<Condition> gallery_conditions = {Condition::NM};
  std::vector<Condition> probe_conditions;  // empty = every condition present
  bool exclude_same_view = true;
  std::vector<int> ranks = {1, 5};
};

// Which distances drive the ranking: one unit, or the ensemble mean.
struct UnitSelector {
  bool ensemble = true;
  int unit = 0;
  static UnitSelector layer(int i) { return {false, i}; }
  static UnitSelector mean() { return {true, 0}; }
};

struct RankAccuracy {
  double overall_pct = 0.0;
  std::map<Condition, double> per_condition_pct;
  std::map<Condition, int64_t> probe_counts;
};

// Fraction of probes whose identity appears among the top-k admissible
// gallery identities. Identity score is its best (minimum) distance; ties
// break by gallery enumeration order.
inline RankAccuracy rank_k(const DistanceTable& table, const EvalProtocol& protocol,
                           const UnitSelector& selector, int rank) {
  require(rank >= 1, ErrorCode::protocol, "rank must be at least 1");
  if (!selector.ensemble)
    require(selector.unit >= 0 && selector.unit < table.units, ErrorCode::protocol,
            "unit selector out of range");
  RankAccuracy acc;
  std::map<Condition, int64_t> hits;
  for (int64_t p = 0; p < table.probes; ++p) {
    const auto& probe = table.probe_meta[static_cast<size_t>(p)];
    // best distance per admissible gallery identity, first-seen order kept
    std::vector<int> order;          // identity ids in enumeration order
    std::map<int, double> best;
    for (int64_t g = 0; g < table.gallery; ++g) {
      const auto& entry = table.gallery_meta[static_cast<size_t>(g)];
      if (protocol.exclude_same_view && entry.view == probe.view) continue;
      const double d = selector.ensemble ? table.ensemble_dist(p, g)
                                         : table.unit_distance(selector.unit, p, g);
      auto it = best.find(entry.identity);
      if (it == best.end()) {
        best[entry.identity] = d;
        order.push_back(entry.identity);
      } else if (d < it->second) {
        it->second = d;
      }
    }
    require(!best.empty(), ErrorCode::protocol,
            "probe has no admissible gallery entries: " + probe.sequence_id);

    // stable sort by score keeps enumeration order on ties
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return best.at(a) < best.at(b); });
    bool hit = false;
    for (int i = 0; i < rank && i < static_cast<int>(order.size()); ++i)
      if (order[static_cast<size_t>(i)] == probe.identity) hit = true;

    acc.probe_counts[probe.condition] += 1;
    if (hit) hits[probe.condition] += 1;
  }

  int64_t total = 0, total_hits = 0;
  for (const auto& [cond, count] : acc.probe_counts) {
    const int64_t h = hits.count(cond) ? hits[cond] : 0;
    acc.per_condition_pct[cond] = 100.0 * static_cast<double>(h) / static_cast<double>(count);
    total += count;
    total_hits += h;
  }
  acc.overall_pct = 100.0 * static_cast<double>(total_hits) / static_cast<double>(total);
  return acc;
}

// ---- the per-layer grid -----------------------------------------------------

// One row per tapped layer plus an ensemble row, columns per probe
// condition plus AVG; the layout of the layer-wise accuracy figures.
struct PerLayerReport {
  std::vector<std::string> row_names;       // layer_1.. + "ensemble"
  std::vector<Condition> conditions;
  std::map<int, std::vector<std::vector<double>>> grid;  // rank -> [row][col] incl AVG col
  std::map<int, std::vector<int>> best_row_per_column;   // rank -> argmax rows
};

inline PerLayerReport per_layer_report(const DistanceTable& table, const EvalProtocol& protocol) {
  PerLayerReport report;
  // conditions present among probes, protocol order first if given
  std::vector<Condition> conds = protocol.probe_conditions;
  if (conds.empty()) {
    std::map<Condition, bool> seen;
    for (const auto& p : table.probe_meta)
      if (!seen.count(p.condition)) {
        seen[p.condition] = true;
        conds.push_back(p.condition);
      }
  }
  report.conditions = conds;
  for (int u = 0; u < table.units; ++u) report.row_names.push_back("layer_" + std::to_string(u + 1));
  report.row_names.push_back("ensemble");

  for (int rank : protocol.ranks) {
    std::vector<std::vector<double>> grid;
    for (int row = 0; row <= table.units; ++row) {
      const UnitSelector sel = row < table.units ? UnitSelector::layer(row) : UnitSelector::mean();
      const RankAccuracy acc = rank_k(table, protocol, sel, rank);
      std::vector<double> cols;
      double avg = 0.0;
      for (Condition c : conds) {
        const double v = acc.per_condition_pct.count(c) ? acc.per_condition_pct.at(c) : 0.0;
        cols.push_back(v);
        avg += v;
      }
      cols.push_back(avg / static_cast<double>(conds.size()));
      grid.push_back(std::move(cols));
    }
    std::vector<int> best;
    for (size_t col = 0; col <= conds.size(); ++col) {
      int arg = 0;
      for (size_t row = 1; row < grid.size(); ++row)
        if (grid[row][col] > grid[static_cast<size_t>(arg)][col]) arg = static_cast<int>(row);
      best.push_back(arg);
    }
    report.grid[rank] = std::move(grid);
    report.best_row_per_column[rank] = std::move(best);
  }
  return report;
}

}  // namespace lwgait
