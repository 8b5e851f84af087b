#pragma once
// Internal: AVX2 float kernel entry points (see kernels_avx2.cpp).

namespace ulwb::kernels::avx2 {

void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate);
void gemm_nt(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate);
void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate);
float dot(const float* x, const float* y, int n);
double sumsq(const float* x, int n);
void axpy(int n, float a, const float* x, float* y);
void scale(int n, float a, float* x);
void adamw_update(int n, float* p, const float* g, float* m, float* v,
                  float lr_t, float beta1, float beta2, float eps,
                  float inv_bc1, float inv_bc2, float wd_t);

} // namespace ulwb::kernels::avx2
