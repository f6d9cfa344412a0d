#include "rankscope/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace rankscope::kernels {

namespace scalar {

void gemm_acc(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda,
              const double* B, std::size_t ldb, double* C, std::size_t ldc) {
    for (std::size_t i = 0; i < M; ++i) {
        double* c = C + i * ldc;
        const double* a = A + i * lda;
        for (std::size_t k = 0; k < K; ++k) {
            const double aik = a[k];
            if (aik == 0.0) continue;
            const double* b = B + k * ldb;
            for (std::size_t j = 0; j < N; ++j) c[j] += aik * b[j];
        }
    }
}

double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace scalar

namespace {

Isa detect() {
    if (const char* env = std::getenv("RANKSCOPE_KERNEL")) {
        if (std::string_view(env) == "scalar") return Isa::Scalar;
    }
    return isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

bool isa_available(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return true;
        case Isa::Avx2:
#if defined(__x86_64__) || defined(__i386__)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
    current().store(isa_available(isa) ? isa : Isa::Scalar, std::memory_order_relaxed);
}

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

void gemm_acc(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda,
              const double* B, std::size_t ldb, double* C, std::size_t ldc) {
    if (active_isa() == Isa::Avx2) return avx2::gemm_acc(M, N, K, A, lda, B, ldb, C, ldc);
    scalar::gemm_acc(M, N, K, A, lda, B, ldb, C, ldc);
}

double dot(const double* x, const double* y, std::size_t n) {
    if (active_isa() == Isa::Avx2) return avx2::dot(x, y, n);
    return scalar::dot(x, y, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    if (active_isa() == Isa::Avx2) return avx2::axpy(a, x, y, n);
    scalar::axpy(a, x, y, n);
}

}  // namespace rankscope::kernels
