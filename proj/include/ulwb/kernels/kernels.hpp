#pragma once
// Data-parallel inner loops behind the model: dense matrix products,
// reductions, and the fused optimizer update. Each float kernel has a scalar
// reference implementation and an AVX2 variant; the active variant is chosen
// at runtime from CPU features (overridable for equivalence testing). The
// double overloads always run the scalar reference path and exist for the
// high-precision oracles in the test suite.
//
// All matrices are row-major with an explicit leading dimension.

#include <cstdint>

namespace ulwb::kernels {

enum class Backend { scalar, avx2 };

/// Detects CPU features and installs the fastest available backend.
/// Called lazily by the dispatch table; safe to call more than once.
void init();

Backend active_backend();
const char* backend_name();

/// Force a specific backend. Returns false (and leaves the current backend
/// in place) if the requested one is not usable on this CPU.
bool set_backend(Backend b);

bool cpu_has_avx2();

// C(MxN) = A(MxK) * B(KxN), optionally accumulating into C.
void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate);
// C(MxN) = A(MxK) * B(NxK)^T
void gemm_nt(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate);
// C(MxN) = A(KxM)^T * B(KxN)
void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate);

float dot(const float* x, const float* y, int n);
/// Sum of squares, accumulated in double.
double sumsq(const float* x, int n);
/// y += a * x
void axpy(int n, float a, const float* x, float* y);
/// x *= a
void scale(int n, float a, float* x);

/// One AdamW step over a flat parameter block. `g` is the already-clipped
/// gradient; `lr_t` is the schedule-scaled learning rate; `wd_t` the
/// schedule-scaled decay (applied to the parameter directly, independent of
/// the gradient moments); `inv_bc1`/`inv_bc2` are the 1/(1-beta^t) bias
/// corrections.
void adamw_update(int n, float* p, const float* g, float* m, float* v,
                  float lr_t, float beta1, float beta2, float eps,
                  float inv_bc1, float inv_bc2, float wd_t);

// ---- double precision (scalar only, oracle path) ----
void gemm_nn(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
             double* c, int ldc, bool accumulate);
void gemm_nt(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
             double* c, int ldc, bool accumulate);
void gemm_tn(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
             double* c, int ldc, bool accumulate);
double dot(const double* x, const double* y, int n);
double sumsq(const double* x, int n);
void axpy(int n, double a, const double* x, double* y);
void scale(int n, double a, double* x);
void adamw_update(int n, double* p, const double* g, double* m, double* v,
                  double lr_t, double beta1, double beta2, double eps,
                  double inv_bc1, double inv_bc2, double wd_t);

} // namespace ulwb::kernels
