#pragma once
// Scalar reference kernels, templated on the scalar type. These define the
// semantics the SIMD variants are tested against.

#include <cmath>

namespace ulwb::kernels::ref {

template <class T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<long>(i) * ldc;
        if (!accumulate) {
            for (int j = 0; j < n; ++j) crow[j] = T(0);
        }
        const T* arow = a + static_cast<long>(i) * lda;
        for (int p = 0; p < k; ++p) {
            T av = arow[p];
            const T* brow = b + static_cast<long>(p) * ldb;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <class T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<long>(i) * lda;
        T* crow = c + static_cast<long>(i) * ldc;
        for (int j = 0; j < n; ++j) {
            const T* brow = b + static_cast<long>(j) * ldb;
            T acc = T(0);
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

template <class T>
void gemm_tn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
    if (!accumulate) {
        for (int i = 0; i < m; ++i) {
            T* crow = c + static_cast<long>(i) * ldc;
            for (int j = 0; j < n; ++j) crow[j] = T(0);
        }
    }
    for (int p = 0; p < k; ++p) {
        const T* arow = a + static_cast<long>(p) * lda; // a is KxM
        const T* brow = b + static_cast<long>(p) * ldb;
        for (int i = 0; i < m; ++i) {
            T av = arow[i];
            if (av == T(0)) continue;
            T* crow = c + static_cast<long>(i) * ldc;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <class T>
T dot(const T* x, const T* y, int n) {
    T acc = T(0);
    for (int i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

template <class T>
double sumsq(const T* x, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double v = static_cast<double>(x[i]);
        acc += v * v;
    }
    return acc;
}

template <class T>
void axpy(int n, T a, const T* x, T* y) {
    for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
void scale(int n, T a, T* x) {
    for (int i = 0; i < n; ++i) x[i] *= a;
}

template <class T>
void adamw_update(int n, T* p, const T* g, T* m, T* v,
                  T lr_t, T beta1, T beta2, T eps,
                  T inv_bc1, T inv_bc2, T wd_t) {
    using std::sqrt;
    for (int i = 0; i < n; ++i) {
        T gi = g[i];
        m[i] = beta1 * m[i] + (T(1) - beta1) * gi;
        v[i] = beta2 * v[i] + (T(1) - beta2) * gi * gi;
        T mhat = m[i] * inv_bc1;
        T vhat = v[i] * inv_bc2;
        p[i] = p[i] * (T(1) - wd_t) - lr_t * mhat / (sqrt(vhat) + eps);
    }
}

} // namespace ulwb::kernels::ref
