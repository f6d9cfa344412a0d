// Compiled with -mavx2 -mfma; only reached after a runtime feature check.
#include "rankscope/kernels.hpp"

#include <algorithm>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define RANKSCOPE_HAVE_AVX2 1
#endif

namespace rankscope::kernels::avx2 {

#ifdef RANKSCOPE_HAVE_AVX2

namespace {

constexpr std::size_t kBlockK = 256;
constexpr std::size_t kBlockN = 256;

// 4 rows of C, 8 columns, over kn terms of the reduction.
inline void micro_4x8(std::size_t kn, const double* A, std::size_t lda, const double* B,
                      std::size_t ldb, double* C, std::size_t ldc) {
    __m256d c00 = _mm256_loadu_pd(C), c01 = _mm256_loadu_pd(C + 4);
    __m256d c10 = _mm256_loadu_pd(C + ldc), c11 = _mm256_loadu_pd(C + ldc + 4);
    __m256d c20 = _mm256_loadu_pd(C + 2 * ldc), c21 = _mm256_loadu_pd(C + 2 * ldc + 4);
    __m256d c30 = _mm256_loadu_pd(C + 3 * ldc), c31 = _mm256_loadu_pd(C + 3 * ldc + 4);
    const double* a0 = A;
    const double* a1 = A + lda;
    const double* a2 = A + 2 * lda;
    const double* a3 = A + 3 * lda;
    for (std::size_t k = 0; k < kn; ++k) {
        const double* b = B + k * ldb;
        const __m256d b0 = _mm256_loadu_pd(b);
        const __m256d b1 = _mm256_loadu_pd(b + 4);
        __m256d a = _mm256_broadcast_sd(a0 + k);
        c00 = _mm256_fmadd_pd(a, b0, c00);
        c01 = _mm256_fmadd_pd(a, b1, c01);
        a = _mm256_broadcast_sd(a1 + k);
        c10 = _mm256_fmadd_pd(a, b0, c10);
        c11 = _mm256_fmadd_pd(a, b1, c11);
        a = _mm256_broadcast_sd(a2 + k);
        c20 = _mm256_fmadd_pd(a, b0, c20);
        c21 = _mm256_fmadd_pd(a, b1, c21);
        a = _mm256_broadcast_sd(a3 + k);
        c30 = _mm256_fmadd_pd(a, b0, c30);
        c31 = _mm256_fmadd_pd(a, b1, c31);
    }
    _mm256_storeu_pd(C, c00);
    _mm256_storeu_pd(C + 4, c01);
    _mm256_storeu_pd(C + ldc, c10);
    _mm256_storeu_pd(C + ldc + 4, c11);
    _mm256_storeu_pd(C + 2 * ldc, c20);
    _mm256_storeu_pd(C + 2 * ldc + 4, c21);
    _mm256_storeu_pd(C + 3 * ldc, c30);
    _mm256_storeu_pd(C + 3 * ldc + 4, c31);
}

// 1 row of C, 4 columns.
inline void micro_1x4(std::size_t kn, const double* A, const double* B, std::size_t ldb,
                      double* C) {
    __m256d c = _mm256_loadu_pd(C);
    for (std::size_t k = 0; k < kn; ++k)
        c = _mm256_fmadd_pd(_mm256_broadcast_sd(A + k), _mm256_loadu_pd(B + k * ldb), c);
    _mm256_storeu_pd(C, c);
}

inline void tail_scalar(std::size_t kn, const double* A, const double* B, std::size_t ldb,
                        double* C) {
    double s = *C;
    for (std::size_t k = 0; k < kn; ++k) s += A[k] * B[k * ldb];
    *C = s;
}

}  // namespace

void gemm_acc(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda,
              const double* B, std::size_t ldb, double* C, std::size_t ldc) {
    for (std::size_t j0 = 0; j0 < N; j0 += kBlockN) {
        const std::size_t j1 = std::min(N, j0 + kBlockN);
        for (std::size_t k0 = 0; k0 < K; k0 += kBlockK) {
            const std::size_t kn = std::min(K, k0 + kBlockK) - k0;
            const double* Bk = B + k0 * ldb;
            std::size_t i = 0;
            for (; i + 4 <= M; i += 4) {
                const double* Ai = A + i * lda + k0;
                double* Ci = C + i * ldc;
                std::size_t j = j0;
                for (; j + 8 <= j1; j += 8) micro_4x8(kn, Ai, lda, Bk + j, ldb, Ci + j, ldc);
                for (; j < j1; ++j)
                    for (std::size_t r = 0; r < 4; ++r)
                        tail_scalar(kn, Ai + r * lda, Bk + j, ldb, Ci + r * ldc + j);
            }
            for (; i < M; ++i) {
                const double* Ai = A + i * lda + k0;
                double* Ci = C + i * ldc;
                std::size_t j = j0;
                for (; j + 4 <= j1; j += 4) micro_1x4(kn, Ai, Bk + j, ldb, Ci + j);
                for (; j < j1; ++j) tail_scalar(kn, Ai, Bk + j, ldb, Ci + j);
            }
        }
    }
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
    }
    s0 = _mm256_add_pd(s0, s1);
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, s0);
    double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

#else

void gemm_acc(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda,
              const double* B, std::size_t ldb, double* C, std::size_t ldc) {
    scalar::gemm_acc(M, N, K, A, lda, B, ldb, C, ldc);
}
double dot(const double* x, const double* y, std::size_t n) { return scalar::dot(x, y, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { scalar::axpy(a, x, y, n); }

#endif

}  // namespace rankscope::kernels::avx2
