// AVX2+FMA float kernels. This translation unit is the only one compiled
// with -mavx2 -mfma; it must not be entered unless cpu_has_avx2() is true.

#include "kernels_avx2.hpp"

#include <cmath>

#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
#define ULWB_X86 1
#include <immintrin.h>
#else
#define ULWB_X86 0
#endif

namespace ulwb::kernels::avx2 {

#if ULWB_X86

namespace {

inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 0x55));
    return _mm_cvtss_f32(lo);
}

} // namespace

void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<long>(i) * ldc;
        if (!accumulate) {
            int j = 0;
            __m256 z = _mm256_setzero_ps();
            for (; j + 8 <= n; j += 8) _mm256_storeu_ps(crow + j, z);
            for (; j < n; ++j) crow[j] = 0.0f;
        }
        const float* arow = a + static_cast<long>(i) * lda;
        int p = 0;
        // two k-steps per pass to cut the load/store traffic on crow
        for (; p + 2 <= k; p += 2) {
            __m256 av0 = _mm256_set1_ps(arow[p]);
            __m256 av1 = _mm256_set1_ps(arow[p + 1]);
            const float* brow0 = b + static_cast<long>(p) * ldb;
            const float* brow1 = brow0 + ldb;
            int j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 cv = _mm256_loadu_ps(crow + j);
                cv = _mm256_fmadd_ps(av0, _mm256_loadu_ps(brow0 + j), cv);
                cv = _mm256_fmadd_ps(av1, _mm256_loadu_ps(brow1 + j), cv);
                _mm256_storeu_ps(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] += arow[p] * brow0[j] + arow[p + 1] * brow1[j];
        }
        for (; p < k; ++p) {
            __m256 av = _mm256_set1_ps(arow[p]);
            const float* brow = b + static_cast<long>(p) * ldb;
            int j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 cv = _mm256_loadu_ps(crow + j);
                cv = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + j), cv);
                _mm256_storeu_ps(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] += arow[p] * brow[j];
        }
    }
}

void gemm_nt(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<long>(i) * lda;
        float* crow = c + static_cast<long>(i) * ldc;
        int j = 0;
        // four output columns at a time share the A-row loads
        for (; j + 4 <= n; j += 4) {
            const float* b0 = b + static_cast<long>(j) * ldb;
            const float* b1 = b0 + ldb;
            const float* b2 = b1 + ldb;
            const float* b3 = b2 + ldb;
            __m256 acc0 = _mm256_setzero_ps();
            __m256 acc1 = _mm256_setzero_ps();
            __m256 acc2 = _mm256_setzero_ps();
            __m256 acc3 = _mm256_setzero_ps();
            int p = 0;
            for (; p + 8 <= k; p += 8) {
                __m256 av = _mm256_loadu_ps(arow + p);
                acc0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b0 + p), acc0);
                acc1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b1 + p), acc1);
                acc2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b2 + p), acc2);
                acc3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b3 + p), acc3);
            }
            float s0 = hsum8(acc0), s1 = hsum8(acc1), s2 = hsum8(acc2), s3 = hsum8(acc3);
            for (; p < k; ++p) {
                float av = arow[p];
                s0 += av * b0[p];
                s1 += av * b1[p];
                s2 += av * b2[p];
                s3 += av * b3[p];
            }
            if (accumulate) {
                crow[j] += s0; crow[j + 1] += s1; crow[j + 2] += s2; crow[j + 3] += s3;
            } else {
                crow[j] = s0; crow[j + 1] = s1; crow[j + 2] = s2; crow[j + 3] = s3;
            }
        }
        for (; j < n; ++j) {
            const float* brow = b + static_cast<long>(j) * ldb;
            __m256 acc = _mm256_setzero_ps();
            int p = 0;
            for (; p + 8 <= k; p += 8)
                acc = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p), _mm256_loadu_ps(brow + p), acc);
            float s = hsum8(acc);
            for (; p < k; ++p) s += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + s : s;
        }
    }
}

void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate) {
    if (!accumulate) {
        for (int i = 0; i < m; ++i) {
            float* crow = c + static_cast<long>(i) * ldc;
            int j = 0;
            __m256 z = _mm256_setzero_ps();
            for (; j + 8 <= n; j += 8) _mm256_storeu_ps(crow + j, z);
            for (; j < n; ++j) crow[j] = 0.0f;
        }
    }
    for (int p = 0; p < k; ++p) {
        const float* arow = a + static_cast<long>(p) * lda; // a is KxM
        const float* brow = b + static_cast<long>(p) * ldb;
        for (int i = 0; i < m; ++i) {
            float av = arow[i];
            if (av == 0.0f) continue;
            __m256 avv = _mm256_set1_ps(av);
            float* crow = c + static_cast<long>(i) * ldc;
            int j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 cv = _mm256_loadu_ps(crow + j);
                cv = _mm256_fmadd_ps(avv, _mm256_loadu_ps(brow + j), cv);
                _mm256_storeu_ps(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

float dot(const float* x, const float* y, int n) {
    __m256 acc = _mm256_setzero_ps();
    int i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc);
    float s = hsum8(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double sumsq(const float* x, int n) {
    // accumulate in double lanes so the global grad norm is stable
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_loadu_ps(x + i);
        __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(v));
        __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1));
        acc0 = _mm256_fmadd_pd(lo, lo, acc0);
        acc1 = _mm256_fmadd_pd(hi, hi, acc1);
    }
    __m256d acc = _mm256_add_pd(acc0, acc1);
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    lo = _mm_add_pd(lo, hi);
    double s = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
    for (; i < n; ++i) s += static_cast<double>(x[i]) * x[i];
    return s;
}

void axpy(int n, float a, const float* x, float* y) {
    __m256 av = _mm256_set1_ps(a);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 yv = _mm256_loadu_ps(y + i);
        yv = _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), yv);
        _mm256_storeu_ps(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale(int n, float a, float* x) {
    __m256 av = _mm256_set1_ps(a);
    int i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(x + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void adamw_update(int n, float* p, const float* g, float* m, float* v,
                  float lr_t, float beta1, float beta2, float eps,
                  float inv_bc1, float inv_bc2, float wd_t) {
    __m256 b1 = _mm256_set1_ps(beta1);
    __m256 b2 = _mm256_set1_ps(beta2);
    __m256 one_m_b1 = _mm256_set1_ps(1.0f - beta1);
    __m256 one_m_b2 = _mm256_set1_ps(1.0f - beta2);
    __m256 lr = _mm256_set1_ps(lr_t);
    __m256 ev = _mm256_set1_ps(eps);
    __m256 c1 = _mm256_set1_ps(inv_bc1);
    __m256 c2 = _mm256_set1_ps(inv_bc2);
    __m256 keep = _mm256_set1_ps(1.0f - wd_t);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 gv = _mm256_loadu_ps(g + i);
        __m256 mv = _mm256_fmadd_ps(one_m_b1, gv, _mm256_mul_ps(b1, _mm256_loadu_ps(m + i)));
        __m256 vv = _mm256_fmadd_ps(one_m_b2, _mm256_mul_ps(gv, gv),
                                    _mm256_mul_ps(b2, _mm256_loadu_ps(v + i)));
        _mm256_storeu_ps(m + i, mv);
        _mm256_storeu_ps(v + i, vv);
        __m256 mhat = _mm256_mul_ps(mv, c1);
        __m256 vhat = _mm256_mul_ps(vv, c2);
        __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), ev);
        __m256 upd = _mm256_div_ps(_mm256_mul_ps(lr, mhat), denom);
        __m256 pv = _mm256_mul_ps(keep, _mm256_loadu_ps(p + i));
        _mm256_storeu_ps(p + i, _mm256_sub_ps(pv, upd));
    }
    for (; i < n; ++i) {
        float gi = g[i];
        m[i] = beta1 * m[i] + (1.0f - beta1) * gi;
        v[i] = beta2 * v[i] + (1.0f - beta2) * gi * gi;
        float mhat = m[i] * inv_bc1;
        float vhat = v[i] * inv_bc2;
        p[i] = p[i] * (1.0f - wd_t) - lr_t * mhat / (std::sqrt(vhat) + eps);
    }
}

#else // !ULWB_X86

// Non-x86 builds never select this backend; provide stubs so the TU links.
void gemm_nn(int, int, int, const float*, int, const float*, int, float*, int, bool) {}
void gemm_nt(int, int, int, const float*, int, const float*, int, float*, int, bool) {}
void gemm_tn(int, int, int, const float*, int, const float*, int, float*, int, bool) {}
float dot(const float*, const float*, int) { return 0.0f; }
double sumsq(const float*, int) { return 0.0; }
void axpy(int, float, const float*, float*) {}
void scale(int, float, float*) {}
void adamw_update(int, float*, const float*, float*, float*, float, float, float, float,
                  float, float, float) {}

#endif

} // namespace ulwb::kernels::avx2
