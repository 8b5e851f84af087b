#include "ulwb/kernels/kernels.hpp"

#include "kernels_avx2.hpp"
#include "kernels_ref.hpp"

#include <cstdlib>
#include <cstring>

namespace ulwb::kernels {

namespace {

struct Table {
    void (*gemm_nn)(int, int, int, const float*, int, const float*, int, float*, int, bool);
    void (*gemm_nt)(int, int, int, const float*, int, const float*, int, float*, int, bool);
    void (*gemm_tn)(int, int, int, const float*, int, const float*, int, float*, int, bool);
    float (*dot)(const float*, const float*, int);
    double (*sumsq)(const float*, int);
    void (*axpy)(int, float, const float*, float*);
    void (*scale)(int, float, float*);
    void (*adamw)(int, float*, const float*, float*, float*, float, float, float, float,
                  float, float, float);
};

constexpr Table kScalarTable{
    &ref::gemm_nn<float>, &ref::gemm_nt<float>, &ref::gemm_tn<float>,
    &ref::dot<float>,     &ref::sumsq<float>,   &ref::axpy<float>,
    &ref::scale<float>,   &ref::adamw_update<float>,
};

constexpr Table kAvx2Table{
    &avx2::gemm_nn, &avx2::gemm_nt, &avx2::gemm_tn, &avx2::dot,
    &avx2::sumsq,   &avx2::axpy,    &avx2::scale,   &avx2::adamw_update,
};

Table g_table = kScalarTable;
Backend g_backend = Backend::scalar;
bool g_initialized = false;

} // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void init() {
    if (g_initialized) return;
    g_initialized = true;
    Backend want = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
    // ULWB_KERNELS=scalar|avx2 overrides detection (used by equivalence tests
    // and for pinning down numeric discrepancies in the field).
    if (const char* env = std::getenv("ULWB_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) want = Backend::scalar;
        else if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) want = Backend::avx2;
    }
    set_backend(want);
}

bool set_backend(Backend b) {
    g_initialized = true;
    if (b == Backend::avx2) {
        if (!cpu_has_avx2()) return false;
        g_table = kAvx2Table;
    } else {
        g_table = kScalarTable;
    }
    g_backend = b;
    return true;
}

Backend active_backend() {
    init();
    return g_backend;
}

const char* backend_name() {
    init();
    return g_backend == Backend::avx2 ? "avx2" : "scalar";
}

void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate) {
    init();
    g_table.gemm_nn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
void gemm_nt(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate) {
    init();
    g_table.gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate) {
    init();
    g_table.gemm_tn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
float dot(const float* x, const float* y, int n) {
    init();
    return g_table.dot(x, y, n);
}
double sumsq(const float* x, int n) {
    init();
    return g_table.sumsq(x, n);
}
void axpy(int n, float a, const float* x, float* y) {
    init();
    g_table.axpy(n, a, x, y);
}
void scale(int n, float a, float* x) {
    init();
    g_table.scale(n, a, x);
}
void adamw_update(int n, float* p, const float* g, float* m, float* v,
                  float lr_t, float beta1, float beta2, float eps,
                  float inv_bc1, float inv_bc2, float wd_t) {
    init();
    g_table.adamw(n, p, g, m, v, lr_t, beta1, beta2, eps, inv_bc1, inv_bc2, wd_t);
}

// double overloads: always the scalar reference path
void gemm_nn(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
             double* c, int ldc, bool accumulate) {
    ref::gemm_nn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
void gemm_nt(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
             double* c, int ldc, bool accumulate) {
    ref::gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
void gemm_tn(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
             double* c, int ldc, bool accumulate) {
    ref::gemm_tn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
double dot(const double* x, const double* y, int n) { return ref::dot(x, y, n); }
double sumsq(const double* x, int n) { return ref::sumsq(x, n); }
void axpy(int n, double a, const double* x, double* y) { ref::axpy(n, a, x, y); }
void scale(int n, double a, double* x) { ref::scale(n, a, x); }
void adamw_update(int n, double* p, const double* g, double* m, double* v,
                  double lr_t, double beta1, double beta2, double eps,
                  double inv_bc1, double inv_bc2, double wd_t) {
    ref::adamw_update(n, p, g, m, v, lr_t, beta1, beta2, eps, inv_bc1, inv_bc2, wd_t);
}

} // namespace ulwb::kernels
