#pragma once

#include <cstddef>

// Dense double-precision inner loops used by the training engine.
//
// Every routine has a portable scalar reference and an AVX2/FMA variant. The
// dispatching entry points pick the variant once per process from the CPU
// feature flags; RANKSCOPE_KERNEL=scalar forces the reference path. Results
// of the two variants differ only by floating-point reassociation.
namespace rankscope::kernels {

enum class Isa { Scalar, Avx2 };

bool isa_available(Isa isa);
Isa active_isa();
// Overrides the dispatch choice for the remainder of the process.
void set_active_isa(Isa isa);
const char* isa_name(Isa isa);

// C (M x N, row stride ldc) += A (M x K, row stride lda) * B (K x N, row stride ldb).
void gemm_acc(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda,
              const double* B, std::size_t ldb, double* C, std::size_t ldc);
double dot(const double* x, const double* y, std::size_t n);
// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);

namespace scalar {
void gemm_acc(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda,
              const double* B, std::size_t ldb, double* C, std::size_t ldc);
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
void gemm_acc(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda,
              const double* B, std::size_t ldb, double* C, std::size_t ldc);
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
}  // namespace avx2

}  // namespace rankscope::kernels
