// AVX2 + FMA kernel variants. This translation unit is the only one compiled
// with -mavx2 -mfma; it must not be entered unless the CPU reports support.

#if defined(ELBERTO_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "elberto/kernels.hpp"

namespace elberto::kernels::detail {

namespace {

inline float hsum8(__m256 x) {
    const __m128 lo = _mm256_castps256_ps128(x);
    const __m128 hi = _mm256_extractf128_ps(x, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
}

inline double hsum4(__m256d x) {
    const __m128d lo = _mm256_castpd256_pd128(x);
    const __m128d hi = _mm256_extractf128_pd(x, 1);
    __m128d s = _mm_add_pd(lo, hi);
    s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
    return _mm_cvtsd_f64(s);
}

}  // namespace

void matmul_nn_avx2(const float* a, const float* b, float* c, int m, int k, int n,
                    bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, 0.0f);
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        float* crow = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const __m256 av = _mm256_set1_ps(arow[p]);
            const float* brow = b + static_cast<size_t>(p) * n;
            int j = 0;
            for (; j + 8 <= n; j += 8) {
                const __m256 bj = _mm256_loadu_ps(brow + j);
                __m256 cj = _mm256_loadu_ps(crow + j);
                cj = _mm256_fmadd_ps(av, bj, cj);
                _mm256_storeu_ps(crow + j, cj);
            }
            for (; j < n; ++j) crow[j] += arow[p] * brow[j];
        }
    }
}

void matmul_nn_avx2(const double* a, const double* b, double* c, int m, int k, int n,
                    bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const __m256d av = _mm256_set1_pd(arow[p]);
            const double* brow = b + static_cast<size_t>(p) * n;
            int j = 0;
            for (; j + 4 <= n; j += 4) {
                const __m256d bj = _mm256_loadu_pd(brow + j);
                __m256d cj = _mm256_loadu_pd(crow + j);
                cj = _mm256_fmadd_pd(av, bj, cj);
                _mm256_storeu_pd(crow + j, cj);
            }
            for (; j < n; ++j) crow[j] += arow[p] * brow[j];
        }
    }
}

void matmul_nt_avx2(const float* a, const float* b, float* c, int m, int k, int n,
                    bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        float* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const float* brow = b + static_cast<size_t>(j) * k;
            __m256 acc = _mm256_setzero_ps();
            int p = 0;
            for (; p + 8 <= k; p += 8) {
                acc = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p), _mm256_loadu_ps(brow + p), acc);
            }
            float s = hsum8(acc);
            for (; p < k; ++p) s += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + s : s;
        }
    }
}

void matmul_nt_avx2(const double* a, const double* b, double* c, int m, int k, int n,
                    bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<size_t>(j) * k;
            __m256d acc = _mm256_setzero_pd();
            int p = 0;
            for (; p + 4 <= k; p += 4) {
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p), _mm256_loadu_pd(brow + p), acc);
            }
            double s = hsum4(acc);
            for (; p < k; ++p) s += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + s : s;
        }
    }
}

void matmul_tn_avx2(const float* a, const float* b, float* c, int m, int k, int n,
                    bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<size_t>(k) * n, 0.0f);
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        const float* brow = b + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const __m256 av = _mm256_set1_ps(arow[p]);
            float* crow = c + static_cast<size_t>(p) * n;
            int j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 cj = _mm256_loadu_ps(crow + j);
                cj = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + j), cj);
                _mm256_storeu_ps(crow + j, cj);
            }
            for (; j < n; ++j) crow[j] += arow[p] * brow[j];
        }
    }
}

void matmul_tn_avx2(const double* a, const double* b, double* c, int m, int k, int n,
                    bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<size_t>(k) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        const double* brow = b + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const __m256d av = _mm256_set1_pd(arow[p]);
            double* crow = c + static_cast<size_t>(p) * n;
            int j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d cj = _mm256_loadu_pd(crow + j);
                cj = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cj);
                _mm256_storeu_pd(crow + j, cj);
            }
            for (; j < n; ++j) crow[j] += arow[p] * brow[j];
        }
    }
}

float dot_avx2(const float* a, const float* b, int n) {
    __m256 acc = _mm256_setzero_ps();
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
    }
    float s = hsum8(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double dot_avx2(const double* a, const double* b, int n) {
    __m256d acc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    }
    double s = hsum4(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

float sum_avx2(const float* x, int n) {
    __m256 acc = _mm256_setzero_ps();
    int i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float s = hsum8(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double sum_avx2(const double* x, int n) {
    __m256d acc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum4(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

void axpy_avx2(float alpha, const float* x, float* y, int n) {
    const __m256 av = _mm256_set1_ps(alpha);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 yi = _mm256_loadu_ps(y + i);
        yi = _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), yi);
        _mm256_storeu_ps(y + i, yi);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_avx2(double alpha, const double* x, double* y, int n) {
    const __m256d av = _mm256_set1_pd(alpha);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yi = _mm256_loadu_pd(y + i);
        yi = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yi);
        _mm256_storeu_pd(y + i, yi);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(float* x, float alpha, int n) {
    const __m256 av = _mm256_set1_ps(alpha);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(x + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
    }
    for (; i < n; ++i) x[i] *= alpha;
}

void scale_avx2(double* x, double alpha, int n) {
    const __m256d av = _mm256_set1_pd(alpha);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) x[i] *= alpha;
}

void adam_update_avx2(float* p, const float* g, float* m, float* v, int n, float lr, float beta1,
                      float beta2, float eps, float bc1, float bc2) {
    const __m256 vb1 = _mm256_set1_ps(beta1);
    const __m256 vb2 = _mm256_set1_ps(beta2);
    const __m256 vomb1 = _mm256_set1_ps(1.0f - beta1);
    const __m256 vomb2 = _mm256_set1_ps(1.0f - beta2);
    const __m256 vlr = _mm256_set1_ps(lr);
    const __m256 veps = _mm256_set1_ps(eps);
    const __m256 vbc1 = _mm256_set1_ps(bc1);
    const __m256 vbc2 = _mm256_set1_ps(bc2);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gi = _mm256_loadu_ps(g + i);
        __m256 mi = _mm256_loadu_ps(m + i);
        __m256 vi = _mm256_loadu_ps(v + i);
        mi = _mm256_fmadd_ps(vomb1, gi, _mm256_mul_ps(vb1, mi));
        vi = _mm256_fmadd_ps(vomb2, _mm256_mul_ps(gi, gi), _mm256_mul_ps(vb2, vi));
        _mm256_storeu_ps(m + i, mi);
        _mm256_storeu_ps(v + i, vi);
        const __m256 mhat = _mm256_mul_ps(mi, vbc1);
        const __m256 vhat = _mm256_mul_ps(vi, vbc2);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
        const __m256 upd = _mm256_div_ps(_mm256_mul_ps(vlr, mhat), denom);
        _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), upd));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] * bc1) / (std::sqrt(v[i] * bc2) + eps);
    }
}

void adam_update_avx2(double* p, const double* g, double* m, double* v, int n, double lr,
                      double beta1, double beta2, double eps, double bc1, double bc2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vomb1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d vomb2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vbc1 = _mm256_set1_pd(bc1);
    const __m256d vbc2 = _mm256_set1_pd(bc2);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        __m256d mi = _mm256_loadu_pd(m + i);
        __m256d vi = _mm256_loadu_pd(v + i);
        mi = _mm256_fmadd_pd(vomb1, gi, _mm256_mul_pd(vb1, mi));
        vi = _mm256_fmadd_pd(vomb2, _mm256_mul_pd(gi, gi), _mm256_mul_pd(vb2, vi));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d mhat = _mm256_mul_pd(mi, vbc1);
        const __m256d vhat = _mm256_mul_pd(vi, vbc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d upd = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), upd));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] * bc1) / (std::sqrt(v[i] * bc2) + eps);
    }
}

}  // namespace elberto::kernels::detail

#endif  // ELBERTO_HAVE_AVX2
