// SPDX-License-Identifier: Apache-2.0
#include "paragate/nn/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace paragate::nn::kernels {

namespace scalar {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * ldc;
    const double* ai = a + i * lda;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

double dot(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace scalar

bool cpu_has_avx2() {
#if defined(PARAGATE_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

Isa detect() {
  if (const char* env = std::getenv("PARAGATE_SIMD"); env && std::strcmp(env, "scalar") == 0) return Isa::Scalar;
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<int>& isa_slot() {
  static std::atomic<int> slot{static_cast<int>(detect())};
  return slot;
}

}  // namespace

Isa active_isa() { return static_cast<Isa>(isa_slot().load(std::memory_order_relaxed)); }

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

void force_isa(Isa isa) {
  if (isa == Isa::Avx2 && !cpu_has_avx2()) isa = Isa::Scalar;
  isa_slot().store(static_cast<int>(isa), std::memory_order_relaxed);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc) {
#ifdef PARAGATE_HAVE_AVX2
  if (active_isa() == Isa::Avx2) return avx2::gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
#endif
  scalar::gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
}

double dot(std::size_t n, const double* x, const double* y) {
#ifdef PARAGATE_HAVE_AVX2
  if (active_isa() == Isa::Avx2) return avx2::dot(n, x, y);
#endif
  return scalar::dot(n, x, y);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
#ifdef PARAGATE_HAVE_AVX2
  if (active_isa() == Isa::Avx2) return avx2::axpy(n, alpha, x, y);
#endif
  scalar::axpy(n, alpha, x, y);
}

}  // namespace paragate::nn::kernels
