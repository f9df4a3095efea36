#pragma once

#include <string>
#include <vector>

#include "lwgait/core/rng.hpp"
#include "lwgait/core/tensor.hpp"

namespace lwgait {

// Trainable array: value plus accumulated gradient.
struct Parameter {
  Tensor value;
  Tensor grad;

  void resize(std::vector<int64_t> shape) {
    value.reshape(shape);
    grad.reshape(shape);
  }
  void zero_grad() { grad.zero(); }
  int64_t size() const { return value.size(); }
};

// Named view over a module's parameters and persistent buffers (BN running
// stats and the like). Buffers are checkpointed but never stepped.
struct ParamRef {
  std::string name;
  Parameter* param;
};

struct BufferRef {
  std::string name;
  Tensor* tensor;
};

struct ParamRegistry {
  std::vector<ParamRef> params;
  std::vector<BufferRef> buffers;

  void add(const std::string& name, Parameter& p) { params.push_back({name, &p}); }
  void add_buffer(const std::string& name, Tensor& t) { buffers.push_back({name, &t}); }

  void merge(const std::string& prefix, const ParamRegistry& other) {
    for (const auto& p : other.params) params.push_back({prefix + "." + p.name, p.param});
    for (const auto& b : other.buffers) buffers.push_back({prefix + "." + b.name, b.tensor});
  }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& p : params) n += p.param->size();
    return n;
  }

  void zero_grad() const {
    for (const auto& p : params) p.param->zero_grad();
  }
};

// Copies values and buffers (not grads) between identically-structured
// registries, e.g. standard -> grouped twins or checkpoint restores.
inline void copy_state(const ParamRegistry& src, ParamRegistry& dst) {
  require(src.params.size() == dst.params.size() && src.buffers.size() == dst.buffers.size(),
          ErrorCode::configuration, "registry structure mismatch");
  for (size_t i = 0; i < src.params.size(); ++i) {
    require(src.params[i].param->size() == dst.params[i].param->size(), ErrorCode::configuration,
            "parameter size mismatch: " + src.params[i].name);
    dst.params[i].param->value = src.params[i].param->value;
  }
  for (size_t i = 0; i < src.buffers.size(); ++i)
    *dst.buffers[i].tensor = *src.buffers[i].tensor;
}

inline void normal_init(Tensor& t, Rng& rng, double stddev) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal(0.0, stddev));
}

inline void uniform_init(Tensor& t, Rng& rng, double lo, double hi) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
}

}  // namespace lwgait
