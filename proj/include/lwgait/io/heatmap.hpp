#pragma once

#include <cmath>
#include <vector>

#include "lwgait/io/png.hpp"

namespace lwgait {

struct HeatmapOptions {
  int cell = 18;                 // pixels per matrix cell
  double vmin = 0.0, vmax = 1.0;
  std::vector<int> boundaries;   // row/col indices drawn as separators
};

// Blue -> white -> red ramp; NaN cells render dark gray.
inline void heatmap_color(double v, float& r, float& g, float& b) {
  if (std::isnan(v)) {
    r = g = b = 0.25f;
    return;
  }
  const double t = std::clamp(v, 0.0, 1.0);
  if (t < 0.5) {
    const double u = t / 0.5;
    r = static_cast<float>(0.2 + 0.8 * u);
    g = static_cast<float>(0.3 + 0.7 * u);
    b = 1.0f;
  } else {
    const double u = (t - 0.5) / 0.5;
    r = 1.0f;
    g = static_cast<float>(1.0 - 0.7 * u);
    b = static_cast<float>(1.0 - 0.8 * u);
  }
}

inline void write_heatmap(const std::string& path, const std::vector<std::vector<double>>& matrix,
                          const HeatmapOptions& options = {}) {
  require(!matrix.empty() && !matrix.front().empty(), ErrorCode::parameter, "empty heatmap");
  const int64_t rows = static_cast<int64_t>(matrix.size());
  const int64_t cols = static_cast<int64_t>(matrix.front().size());
  const int64_t cell = options.cell;
  Tensor img({3, rows * cell, cols * cell});
  const double span = options.vmax - options.vmin;
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) {
      const double raw = matrix[static_cast<size_t>(r)][static_cast<size_t>(c)];
      const double v = std::isnan(raw) ? raw : (raw - options.vmin) / (span != 0.0 ? span : 1.0);
      float cr, cg, cb;
      heatmap_color(v, cr, cg, cb);
      for (int64_t y = r * cell; y < (r + 1) * cell; ++y)
        for (int64_t x = c * cell; x < (c + 1) * cell; ++x) {
          img.at(0, y, x) = cr;
          img.at(1, y, x) = cg;
          img.at(2, y, x) = cb;
        }
    }
  for (int b : options.boundaries) {
    if (b <= 0) continue;
    if (static_cast<int64_t>(b) < rows)
      for (int64_t x = 0; x < cols * cell; ++x) {
        img.at(0, b * cell, x) = 0.0f;
        img.at(1, b * cell, x) = 0.0f;
        img.at(2, b * cell, x) = 0.0f;
      }
    if (static_cast<int64_t>(b) < cols)
      for (int64_t y = 0; y < rows * cell; ++y) {
        img.at(0, y, b * cell) = 0.0f;
        img.at(1, y, b * cell) = 0.0f;
        img.at(2, y, b * cell) = 0.0f;
      }
  }
  write_png(path, img);
}

}  // namespace lwgait
