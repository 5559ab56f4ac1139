#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <vector>

#include "ia/common.hpp"
#include "ia/kernels.hpp"

using namespace ia;

namespace {

std::vector<double> random_vec(SplitMix64& rng, int n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("omp kernels match serial references bitwise") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 4; ++trial) {
        const int m = 3 + static_cast<int>(rng.below(30));
        const int k = 1 + static_cast<int>(rng.below(30));
        const int n = 1 + static_cast<int>(rng.below(30));
        auto a = random_vec(rng, m * k);
        auto b = random_vec(rng, k * n);
        std::vector<double> c1(m * n), c2(m * n);
        kern::ref::matmul_nn(a.data(), b.data(), c1.data(), m, k, n);
        kern::matmul_nn(a.data(), b.data(), c2.data(), m, k, n);
        CHECK(bitwise_equal(c1, c2));

        auto bt = random_vec(rng, n * k);
        kern::ref::matmul_nt(a.data(), bt.data(), c1.data(), m, k, n);
        kern::matmul_nt(a.data(), bt.data(), c2.data(), m, k, n);
        CHECK(bitwise_equal(c1, c2));

        auto at = random_vec(rng, k * m);
        kern::ref::matmul_tn(at.data(), b.data(), c1.data(), m, k, n);
        kern::matmul_tn(at.data(), b.data(), c2.data(), m, k, n);
        CHECK(bitwise_equal(c1, c2));
    }

    const int h = 37, w = 53;
    std::vector<kern::Pt> pts;
    for (int i = 0; i < 9; ++i) pts.push_back({rng.uniform(0, w), rng.uniform(0, h)});
    std::vector<double> g1(h * w), g2(h * w);
    kern::ref::gaussian_splat(pts.data(), 9, 3.5, g1.data(), h, w);
    kern::gaussian_splat(pts.data(), 9, 3.5, g2.data(), h, w);
    CHECK(bitwise_equal(g1, g2));

    auto src = random_vec(rng, h * w, 0.0, 1.0);
    std::vector<double> r1(128 * 96), r2(128 * 96);
    kern::ref::bilinear_resize(src.data(), h, w, r1.data(), 96, 128);
    kern::bilinear_resize(src.data(), h, w, r2.data(), 96, 128);
    CHECK(bitwise_equal(r1, r2));

    std::vector<double> p1(8 * 8), p2(8 * 8);
    kern::ref::adaptive_max_pool(src.data(), h, w, p1.data(), 8, 8, nullptr);
    kern::adaptive_max_pool(src.data(), h, w, p2.data(), 8, 8, nullptr);
    CHECK(bitwise_equal(p1, p2));

    auto sm1 = random_vec(rng, 17 * 23);
    auto sm2 = sm1;
    kern::ref::softmax_rows(sm1.data(), 17, 23);
    kern::softmax_rows(sm2.data(), 17, 23);
    CHECK(bitwise_equal(sm1, sm2));
}

TEST_CASE("matmul against naive triple loop") {
    SplitMix64 rng(5);
    const int m = 7, k = 5, n = 6;
    auto a = random_vec(rng, m * k);
    auto b = random_vec(rng, k * n);
    std::vector<double> c(m * n);
    kern::matmul_nn(a.data(), b.data(), c.data(), m, k, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int t = 0; t < k; ++t) s += a[i * k + t] * b[t * n + j];
            CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("softmax rows are normalized and order-preserving") {
    SplitMix64 rng(9);
    auto x = random_vec(rng, 4 * 11, -5, 5);
    auto orig = x;
    kern::softmax_rows(x.data(), 4, 11);
    for (int i = 0; i < 4; ++i) {
        double s = 0;
        for (int j = 0; j < 11; ++j) {
            CHECK(x[i * 11 + j] > 0.0);
            s += x[i * 11 + j];
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        for (int j = 1; j < 11; ++j) {
            const bool bigger_in = orig[i * 11 + j] > orig[i * 11 + j - 1];
            const bool bigger_out = x[i * 11 + j] > x[i * 11 + j - 1];
            CHECK(bigger_in == bigger_out);
        }
    }
}

TEST_CASE("bilinear resize: identity and constant preservation") {
    SplitMix64 rng(13);
    auto src = random_vec(rng, 6 * 9, 0, 1);
    std::vector<double> same(6 * 9);
    kern::bilinear_resize(src.data(), 6, 9, same.data(), 6, 9);
    CHECK(bitwise_equal(src, same));

    std::vector<double> constant(4 * 4, 0.37), out(11 * 7);
    kern::bilinear_resize(constant.data(), 4, 4, out.data(), 7, 11);
    for (double v : out) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("adaptive max pool worked example and upsample degenerate bins") {
    std::vector<double> src = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
    std::vector<double> dst(4);
    kern::adaptive_max_pool(src.data(), 4, 4, dst.data(), 2, 2, nullptr);
    CHECK(dst == std::vector<double>{6, 8, 14, 16});

    // Output larger than input: every bin still sees at least one element.
    std::vector<double> up(8 * 8);
    kern::adaptive_max_pool(src.data(), 4, 4, up.data(), 8, 8, nullptr);
    for (double v : up) {
        CHECK(v >= 1.0);
        CHECK(v <= 16.0);
    }
}
