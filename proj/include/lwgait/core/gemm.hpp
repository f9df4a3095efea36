#pragma once

#include <cstdint>

namespace lwgait {

// Small dense products behind every conv/linear. Layouts are chosen so the
// inner loop always runs over contiguous memory on B and C; g++ -O3
// vectorizes these without reassociation flags, which keeps float results
// bitwise reproducible across runs.

// C[M x N] += A[M x K] * B[K x N]
inline void gemm_nn(int64_t M, int64_t K, int64_t N, const float* __restrict__ A,
                    const float* __restrict__ B, float* __restrict__ C) {
  for (int64_t m = 0; m < M; ++m) {
    const float* a = A + m * K;
    float* c = C + m * N;
    for (int64_t k = 0; k < K; ++k) {
      const float av = a[k];
      const float* b = B + k * N;
      for (int64_t n = 0; n < N; ++n) c[n] += av * b[n];
    }
  }
}

// C[M x N] += A^T * B where A is stored [K x M]
inline void gemm_tn(int64_t M, int64_t K, int64_t N, const float* __restrict__ A,
                    const float* __restrict__ B, float* __restrict__ C) {
  for (int64_t k = 0; k < K; ++k) {
    const float* a = A + k * M;
    const float* b = B + k * N;
    for (int64_t m = 0; m < M; ++m) {
      const float av = a[m];
      float* c = C + m * N;
      for (int64_t n = 0; n < N; ++n) c[n] += av * b[n];
    }
  }
}

}  // namespace lwgait
