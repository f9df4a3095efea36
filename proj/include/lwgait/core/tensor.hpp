#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "lwgait/core/error.hpp"

namespace lwgait {

// Dense row-major float tensor. Rank up to 4 covers every map in the
// pipeline (frames x channels x height x width).
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) { reshape(std::move(shape)); }

  Tensor(std::initializer_list<int64_t> shape)
      : Tensor(std::vector<int64_t>(shape)) {}

  void reshape(std::vector<int64_t> shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
      require(d >= 0, ErrorCode::dimension, "negative tensor dimension");
      n *= d;
    }
    shape_ = std::move(shape);
    data_.assign(static_cast<size_t>(n), 0.0f);
  }

  // Reinterpret without touching data; element count must match.
  void view(std::vector<int64_t> shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    require(n == size(), ErrorCode::dimension, "view changes element count");
    shape_ = std::move(shape);
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // 4-D accessors used by the conv/pool kernels.
  float& at(int64_t a, int64_t b, int64_t c, int64_t d) {
    return data_[static_cast<size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
  }
  float at(int64_t a, int64_t b, int64_t c, int64_t d) const {
    return data_[static_cast<size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
  }
  float& at(int64_t a, int64_t b, int64_t c) {
    return data_[static_cast<size_t>((a * shape_[1] + b) * shape_[2] + c)];
  }
  float at(int64_t a, int64_t b, int64_t c) const {
    return data_[static_cast<size_t>((a * shape_[1] + b) * shape_[2] + c)];
  }
  float& at(int64_t a, int64_t b) { return data_[static_cast<size_t>(a * shape_[1] + b)]; }
  float at(int64_t a, int64_t b) const { return data_[static_cast<size_t>(a * shape_[1] + b)]; }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(0.0f); }

  void add_(const Tensor& other) {
    require(other.size() == size(), ErrorCode::dimension, "add_ size mismatch");
    for (int64_t i = 0; i < size(); ++i) data_[static_cast<size_t>(i)] += other[i];
  }

  void scale_(float s) {
    for (float& v : data_) v *= s;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool bitwise_equal(const Tensor& other) const {
    return shape_ == other.shape_ && data_.size() == other.data_.size() &&
           (data_.empty() ||
            std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0);
  }

  bool all_finite() const {
    for (float v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::vector<int64_t> shape_;
  std::vector<float> data_;
};

inline int64_t numel(const std::vector<int64_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), int64_t{1}, std::multiplies<int64_t>());
}

}  // namespace lwgait
