// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace paragate::nn::kernels {

enum class Isa { Scalar, Avx2 };

// Row-major dense kernels. `ld*` are row strides in elements.

/// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc);
/// sum_i x[i] * y[i]
double dot(std::size_t n, const double* x, const double* y);
/// y += alpha * x
void axpy(std::size_t n, double alpha, const double* x, double* y);

/// The instruction set the dispatched kernels use. Fixed at first call:
/// AVX2+FMA when the CPU has both, unless PARAGATE_SIMD=scalar is set.
Isa active_isa();
const char* isa_name(Isa isa);
/// Overrides dispatch (tests and benchmarks). Not thread-safe against
/// concurrent kernel calls.
void force_isa(Isa isa);
bool cpu_has_avx2();

namespace scalar {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc);
double dot(std::size_t n, const double* x, const double* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
}  // namespace scalar

namespace avx2 {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc);
double dot(std::size_t n, const double* x, const double* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
}  // namespace avx2

}  // namespace paragate::nn::kernels
