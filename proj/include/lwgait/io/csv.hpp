#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "lwgait/core/error.hpp"

namespace lwgait {

// Fixed-precision CSV so identical values always serialize to identical
// bytes.
inline std::string format_cell(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::string>& row_names,
                      const std::vector<std::vector<double>>& rows, int precision = 4) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::io, "cannot open for write: " + path);
  for (size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
  f << "\n";
  for (size_t r = 0; r < rows.size(); ++r) {
    if (!row_names.empty()) f << row_names[r];
    for (double v : rows[r]) f << "," << format_cell(v, precision);
    f << "\n";
  }
  require(f.good(), ErrorCode::io, "write failed: " + path);
}

}  // namespace lwgait
