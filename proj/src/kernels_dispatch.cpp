#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>

#include "elberto/kernels.hpp"

namespace elberto::kernels {

namespace {

Isa resolve_isa() {
#if defined(ELBERTO_HAVE_AVX2)
    const char* env = std::getenv("ELBERTO_SIMD");
    const bool cpu_ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
        if (std::strcmp(env, "avx2") == 0 && cpu_ok) return Isa::avx2;
        // "auto" and anything unrecognized fall through to detection
    }
    return cpu_ok ? Isa::avx2 : Isa::scalar;
#else
    return Isa::scalar;
#endif
}

}  // namespace

Isa active_isa() {
    static const Isa isa = resolve_isa();
    return isa;
}

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

#if defined(ELBERTO_HAVE_AVX2)
#define ELBERTO_DISPATCH(fn, ...)                  \
    if (active_isa() == Isa::avx2) {               \
        detail::fn##_avx2(__VA_ARGS__);            \
        return;                                    \
    }                                              \
    detail::fn##_scalar(__VA_ARGS__)
#define ELBERTO_DISPATCH_RET(fn, ...)              \
    if (active_isa() == Isa::avx2) {               \
        return detail::fn##_avx2(__VA_ARGS__);     \
    }                                              \
    return detail::fn##_scalar(__VA_ARGS__)
#else
#define ELBERTO_DISPATCH(fn, ...) detail::fn##_scalar(__VA_ARGS__)
#define ELBERTO_DISPATCH_RET(fn, ...) return detail::fn##_scalar(__VA_ARGS__)
#endif

void matmul_nn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
    ELBERTO_DISPATCH(matmul_nn, a, b, c, m, k, n, accumulate);
}
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    ELBERTO_DISPATCH(matmul_nn, a, b, c, m, k, n, accumulate);
}
void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
    ELBERTO_DISPATCH(matmul_nt, a, b, c, m, k, n, accumulate);
}
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    ELBERTO_DISPATCH(matmul_nt, a, b, c, m, k, n, accumulate);
}
void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
    ELBERTO_DISPATCH(matmul_tn, a, b, c, m, k, n, accumulate);
}
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    ELBERTO_DISPATCH(matmul_tn, a, b, c, m, k, n, accumulate);
}
float dot(const float* a, const float* b, int n) { ELBERTO_DISPATCH_RET(dot, a, b, n); }
double dot(const double* a, const double* b, int n) { ELBERTO_DISPATCH_RET(dot, a, b, n); }
float sum(const float* x, int n) { ELBERTO_DISPATCH_RET(sum, x, n); }
double sum(const double* x, int n) { ELBERTO_DISPATCH_RET(sum, x, n); }
void axpy(float alpha, const float* x, float* y, int n) { ELBERTO_DISPATCH(axpy, alpha, x, y, n); }
void axpy(double alpha, const double* x, double* y, int n) {
    ELBERTO_DISPATCH(axpy, alpha, x, y, n);
}
void scale(float* x, float alpha, int n) { ELBERTO_DISPATCH(scale, x, alpha, n); }
void scale(double* x, double alpha, int n) { ELBERTO_DISPATCH(scale, x, alpha, n); }
void adam_update(float* p, const float* g, float* m, float* v, int n, float lr, float beta1,
                 float beta2, float eps, float bc1, float bc2) {
    ELBERTO_DISPATCH(adam_update, p, g, m, v, n, lr, beta1, beta2, eps, bc1, bc2);
}
void adam_update(double* p, const double* g, double* m, double* v, int n, double lr, double beta1,
                 double beta2, double eps, double bc1, double bc2) {
    ELBERTO_DISPATCH(adam_update, p, g, m, v, n, lr, beta1, beta2, eps, bc1, bc2);
}

namespace {

template <typename T>
void softmax_row_impl(T* x, int n) {
    T mx = -std::numeric_limits<T>::infinity();
    for (int i = 0; i < n; ++i) mx = x[i] > mx ? x[i] : mx;
    for (int i = 0; i < n; ++i) x[i] = std::exp(x[i] - mx);
    const T s = sum(x, n);
    scale(x, T(1) / s, n);
}

}  // namespace

void softmax_row(float* x, int n) { softmax_row_impl(x, n); }
void softmax_row(double* x, int n) { softmax_row_impl(x, n); }

}  // namespace elberto::kernels
