// Scalar/AVX2 kernel equivalence. The scalar reference defines the
// semantics; the AVX2 variants must agree within float reassociation
// tolerance on shapes with and without vector-width remainders.

#include <doctest.h>

#include "ulwb/kernels/kernels.hpp"
#include "ulwb/util/rng.hpp"

#include <cmath>
#include <string>
#include <tuple>
#include <vector>

using namespace ulwb;
namespace k = ulwb::kernels;

namespace {

std::vector<float> random_vec(Rng& rng, int n, float scale = 1.0f) {
    std::vector<float> v(static_cast<size_t>(n));
    for (auto& x : v) x = static_cast<float>(rng.uniform(-scale, scale));
    return v;
}

void check_close(const std::vector<float>& a, const std::vector<float>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        double denom = std::max(1.0, std::abs(static_cast<double>(a[i])));
        CHECK(std::abs(static_cast<double>(a[i]) - b[i]) / denom < tol);
    }
}

struct BackendGuard {
    k::Backend saved;
    BackendGuard() : saved(k::active_backend()) {}
    ~BackendGuard() { k::set_backend(saved); }
};

} // namespace

TEST_CASE("gemm variants match the scalar reference on awkward shapes") {
    if (!k::cpu_has_avx2()) return; // nothing to compare on this host
    BackendGuard guard;
    Rng rng(123);
    // includes vocab-size-260 style non-multiples of 8
    const int shapes[][3] = {{1, 1, 1},   {3, 5, 7},    {8, 8, 8},     {17, 260, 128},
                             {128, 64, 260}, {33, 31, 129}, {12, 260, 37}, {2, 9, 16}};
    for (const auto& s : shapes) {
        const int m = s[0], n = s[1], kk = s[2];
        auto a = random_vec(rng, m * kk);
        auto bt = random_vec(rng, n * kk); // for nt: B is (n x k)
        auto bn = random_vec(rng, kk * n); // for nn: B is (k x n)
        auto at = random_vec(rng, kk * m); // for tn: A is (k x m)
        auto c0 = random_vec(rng, m * n);

        for (bool acc : {false, true}) {
            std::vector<float> c_scalar, c_avx2;

            k::set_backend(k::Backend::scalar);
            c_scalar = c0;
            k::gemm_nt(m, n, kk, a.data(), kk, bt.data(), kk, c_scalar.data(), n, acc);
            k::set_backend(k::Backend::avx2);
            c_avx2 = c0;
            k::gemm_nt(m, n, kk, a.data(), kk, bt.data(), kk, c_avx2.data(), n, acc);
            check_close(c_scalar, c_avx2, 2e-5);

            k::set_backend(k::Backend::scalar);
            c_scalar = c0;
            k::gemm_nn(m, n, kk, a.data(), kk, bn.data(), n, c_scalar.data(), n, acc);
            k::set_backend(k::Backend::avx2);
            c_avx2 = c0;
            k::gemm_nn(m, n, kk, a.data(), kk, bn.data(), n, c_avx2.data(), n, acc);
            check_close(c_scalar, c_avx2, 2e-5);

            k::set_backend(k::Backend::scalar);
            c_scalar = c0;
            k::gemm_tn(m, n, kk, at.data(), m, bn.data(), n, c_scalar.data(), n, acc);
            k::set_backend(k::Backend::avx2);
            c_avx2 = c0;
            k::gemm_tn(m, n, kk, at.data(), m, bn.data(), n, c_avx2.data(), n, acc);
            check_close(c_scalar, c_avx2, 2e-5);
        }
    }
}

TEST_CASE("gemm against a plain double-precision triple loop") {
    Rng rng(7);
    const int m = 9, n = 13, kk = 21;
    auto a = random_vec(rng, m * kk);
    auto b = random_vec(rng, kk * n);
    std::vector<float> c(static_cast<size_t>(m * n), 0.0f);
    k::gemm_nn(m, n, kk, a.data(), kk, b.data(), n, c.data(), n, false);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double want = 0.0;
            for (int p = 0; p < kk; ++p)
                want += static_cast<double>(a[static_cast<size_t>(i * kk + p)]) *
                        b[static_cast<size_t>(p * n + j)];
            CHECK(std::abs(want - c[static_cast<size_t>(i * n + j)]) < 1e-4);
        }
    }
}

TEST_CASE("reductions and elementwise kernels agree across backends") {
    if (!k::cpu_has_avx2()) return;
    BackendGuard guard;
    Rng rng(55);
    for (int n : {1, 7, 8, 9, 255, 256, 1000}) {
        auto x = random_vec(rng, n);
        auto y = random_vec(rng, n);

        k::set_backend(k::Backend::scalar);
        float dot_s = k::dot(x.data(), y.data(), n);
        double ss_s = k::sumsq(x.data(), n);
        auto ax_s = y;
        k::axpy(n, 0.37f, x.data(), ax_s.data());
        auto sc_s = x;
        k::scale(n, -1.25f, sc_s.data());

        k::set_backend(k::Backend::avx2);
        float dot_a = k::dot(x.data(), y.data(), n);
        double ss_a = k::sumsq(x.data(), n);
        auto ax_a = y;
        k::axpy(n, 0.37f, x.data(), ax_a.data());
        auto sc_a = x;
        k::scale(n, -1.25f, sc_a.data());

        CHECK(std::abs(dot_s - dot_a) < 1e-4);
        CHECK(std::abs(ss_s - ss_a) < 1e-9);
        check_close(ax_s, ax_a, 1e-6);
        check_close(sc_s, sc_a, 1e-6); // scale is elementwise, should be exact
        for (size_t i = 0; i < sc_s.size(); ++i) CHECK(sc_s[i] == sc_a[i]);
    }
}

TEST_CASE("adamw update agrees across backends") {
    if (!k::cpu_has_avx2()) return;
    BackendGuard guard;
    Rng rng(99);
    const int n = 1003;
    auto p0 = random_vec(rng, n);
    auto g = random_vec(rng, n, 0.1f);
    auto m0 = random_vec(rng, n, 0.01f);
    auto v0 = random_vec(rng, n, 0.001f);
    for (auto& v : v0) v = std::abs(v);

    auto run = [&](k::Backend b) {
        k::set_backend(b);
        auto p = p0;
        auto m = m0;
        auto v = v0;
        k::adamw_update(n, p.data(), g.data(), m.data(), v.data(), 1e-3f, 0.9f, 0.999f, 1e-8f,
                        1.0f / (1.0f - 0.9f), 1.0f / (1.0f - 0.999f), 1e-4f);
        return std::make_tuple(p, m, v);
    };
    auto [ps, ms, vs] = run(k::Backend::scalar);
    auto [pa, ma, va] = run(k::Backend::avx2);
    check_close(ps, pa, 1e-6);
    check_close(ms, ma, 1e-6);
    check_close(vs, va, 1e-6);
}

TEST_CASE("backend dispatch reports and honors overrides") {
    BackendGuard guard;
    CHECK(k::set_backend(k::Backend::scalar));
    CHECK(std::string(k::backend_name()) == "scalar");
    if (k::cpu_has_avx2()) {
        CHECK(k::set_backend(k::Backend::avx2));
        CHECK(std::string(k::backend_name()) == "avx2");
    }
}
