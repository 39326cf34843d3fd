#include <algorithm>
#include <cmath>

#include "elberto/kernels.hpp"

namespace elberto::kernels::detail {

template <typename T>
void matmul_nn_scalar(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, T(0));
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<size_t>(i) * k;
        T* crow = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void matmul_nt_scalar(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<size_t>(i) * k;
        T* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* brow = b + static_cast<size_t>(j) * k;
            T acc = T(0);
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

template <typename T>
void matmul_tn_scalar(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<size_t>(k) * n, T(0));
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<size_t>(i) * k;
        const T* brow = b + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            T* crow = c + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
T dot_scalar(const T* a, const T* b, int n) {
    T acc = T(0);
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <typename T>
T sum_scalar(const T* x, int n) {
    T acc = T(0);
    for (int i = 0; i < n; ++i) acc += x[i];
    return acc;
}

template <typename T>
void axpy_scalar(T alpha, const T* x, T* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale_scalar(T* x, T alpha, int n) {
    for (int i = 0; i < n; ++i) x[i] *= alpha;
}

template <typename T>
void adam_update_scalar(T* p, const T* g, T* m, T* v, int n, T lr, T beta1, T beta2, T eps, T bc1,
                        T bc2) {
    for (int i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
        v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
        const T mhat = m[i] * bc1;
        const T vhat = v[i] * bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

template void matmul_nn_scalar<float>(const float*, const float*, float*, int, int, int, bool);
template void matmul_nn_scalar<double>(const double*, const double*, double*, int, int, int, bool);
template void matmul_nt_scalar<float>(const float*, const float*, float*, int, int, int, bool);
template void matmul_nt_scalar<double>(const double*, const double*, double*, int, int, int, bool);
template void matmul_tn_scalar<float>(const float*, const float*, float*, int, int, int, bool);
template void matmul_tn_scalar<double>(const double*, const double*, double*, int, int, int, bool);
template float dot_scalar<float>(const float*, const float*, int);
template double dot_scalar<double>(const double*, const double*, int);
template float sum_scalar<float>(const float*, int);
template double sum_scalar<double>(const double*, int);
template void axpy_scalar<float>(float, const float*, float*, int);
template void axpy_scalar<double>(double, const double*, double*, int);
template void scale_scalar<float>(float*, float, int);
template void scale_scalar<double>(double*, double, int);
template void adam_update_scalar<float>(float*, const float*, float*, float*, int, float, float,
                                        float, float, float, float);
template void adam_update_scalar<double>(double*, const double*, double*, double*, int, double,
                                         double, double, double, double, double);

}  // namespace elberto::kernels::detail
