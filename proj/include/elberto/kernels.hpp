#pragma once

// Arithmetic inner loops used by the encoder, the heads and the optimizer.
// Every kernel has a scalar reference implementation and, when the binary is
// built with AVX2 support, a vectorized variant selected once at runtime.
// ELBERTO_SIMD=scalar|avx2|auto overrides the selection.

namespace elberto::kernels {

enum class Isa { scalar, avx2 };

Isa active_isa();
const char* isa_name(Isa isa);

// C[m x n] = A[m x k] * B[k x n]; += when accumulate is set
void matmul_nn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);

// C[m x n] = A[m x k] * B^T where B is [n x k]
void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);

// C[k x n] = A^T * B where A is [m x k], B is [m x n]
void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);

float dot(const float* a, const float* b, int n);
double dot(const double* a, const double* b, int n);

float sum(const float* x, int n);
double sum(const double* x, int n);

// y += alpha * x
void axpy(float alpha, const float* x, float* y, int n);
void axpy(double alpha, const double* x, double* y, int n);

void scale(float* x, float alpha, int n);
void scale(double* x, double alpha, int n);

// In-place max-subtracted softmax over one row. -inf entries map to 0.
void softmax_row(float* x, int n);
void softmax_row(double* x, int n);

// Bias-corrected Adam step over one tensor. bc1 = 1/(1-beta1^t), bc2 = 1/(1-beta2^t).
void adam_update(float* p, const float* g, float* m, float* v, int n, float lr, float beta1,
                 float beta2, float eps, float bc1, float bc2);
void adam_update(double* p, const double* g, double* m, double* v, int n, double lr, double beta1,
                 double beta2, double eps, double bc1, double bc2);

// Per-variant entry points, exposed so the equivalence tests can pin both sides.
namespace detail {

template <typename T>
void matmul_nn_scalar(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);
template <typename T>
void matmul_nt_scalar(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);
template <typename T>
void matmul_tn_scalar(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);
template <typename T>
T dot_scalar(const T* a, const T* b, int n);
template <typename T>
T sum_scalar(const T* x, int n);
template <typename T>
void axpy_scalar(T alpha, const T* x, T* y, int n);
template <typename T>
void scale_scalar(T* x, T alpha, int n);
template <typename T>
void adam_update_scalar(T* p, const T* g, T* m, T* v, int n, T lr, T beta1, T beta2, T eps, T bc1,
                        T bc2);

#if defined(ELBERTO_HAVE_AVX2)
void matmul_nn_avx2(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void matmul_nn_avx2(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_nt_avx2(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void matmul_nt_avx2(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_tn_avx2(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void matmul_tn_avx2(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
float dot_avx2(const float* a, const float* b, int n);
double dot_avx2(const double* a, const double* b, int n);
float sum_avx2(const float* x, int n);
double sum_avx2(const double* x, int n);
void axpy_avx2(float alpha, const float* x, float* y, int n);
void axpy_avx2(double alpha, const double* x, double* y, int n);
void scale_avx2(float* x, float alpha, int n);
void scale_avx2(double* x, double alpha, int n);
void adam_update_avx2(float* p, const float* g, float* m, float* v, int n, float lr, float beta1,
                      float beta2, float eps, float bc1, float bc2);
void adam_update_avx2(double* p, const double* g, double* m, double* v, int n, double lr,
                      double beta1, double beta2, double eps, double bc1, double bc2);
#endif

}  // namespace detail

}  // namespace elberto::kernels
