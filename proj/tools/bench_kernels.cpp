// Times the OpenMP kernels against their serial references and checks the
// outputs agree bitwise. Run: ia-bench [--reps N]
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ia/common.hpp"
#include "ia/kernels.hpp"

using ia::kern::Pt;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double omp_ms, bool equal) {
    std::printf("%-18s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   %s\n", name, serial_ms,
                omp_ms, serial_ms / omp_ms, equal ? "bitwise-equal" : "MISMATCH");
}

bool same(const std::vector<double>& a, const std::vector<double>& b) {
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
    int reps = 5;
    if (argc == 3 && std::string(argv[1]) == "--reps") reps = std::atoi(argv[2]);
#ifdef _OPENMP
    std::printf("threads: %d, reps: %d\n", omp_get_max_threads(), reps);
#endif
    ia::SplitMix64 rng(7);

    {
        const int n = 384;
        std::vector<double> a(n * n), b(n * n), c1(n * n), c2(n * n);
        for (auto& x : a) x = rng.uniform(-1, 1);
        for (auto& x : b) x = rng.uniform(-1, 1);
        const double ts = time_ms([&] { ia::kern::ref::matmul_nn(a.data(), b.data(), c1.data(), n, n, n); }, reps);
        const double tp = time_ms([&] { ia::kern::matmul_nn(a.data(), b.data(), c2.data(), n, n, n); }, reps);
        report("matmul 384^3", ts, tp, same(c1, c2));
    }
    {
        const int h = 480, w = 640, npts = 64;
        std::vector<Pt> pts(npts);
        for (auto& p : pts) p = {rng.uniform(0, w), rng.uniform(0, h)};
        std::vector<double> m1(h * w), m2(h * w);
        const double ts = time_ms([&] { ia::kern::ref::gaussian_splat(pts.data(), npts, 19.0, m1.data(), h, w); }, reps);
        const double tp = time_ms([&] { ia::kern::gaussian_splat(pts.data(), npts, 19.0, m2.data(), h, w); }, reps);
        report("gaussian 640x480", ts, tp, same(m1, m2));
    }
    {
        const int sh = 64, sw = 64, dh = 512, dw = 512;
        std::vector<double> src(sh * sw), d1(dh * dw), d2(dh * dw);
        for (auto& x : src) x = rng.u01();
        const double ts = time_ms([&] { ia::kern::ref::bilinear_resize(src.data(), sh, sw, d1.data(), dh, dw); }, reps);
        const double tp = time_ms([&] { ia::kern::bilinear_resize(src.data(), sh, sw, d2.data(), dh, dw); }, reps);
        report("bilinear 64->512", ts, tp, same(d1, d2));
    }
    {
        const int sh = 512, sw = 512, dh = 16, dw = 16;
        std::vector<double> src(sh * sw), d1(dh * dw), d2(dh * dw);
        for (auto& x : src) x = rng.u01();
        const double ts = time_ms([&] { ia::kern::ref::adaptive_max_pool(src.data(), sh, sw, d1.data(), dh, dw, nullptr); }, reps);
        const double tp = time_ms([&] { ia::kern::adaptive_max_pool(src.data(), sh, sw, d2.data(), dh, dw, nullptr); }, reps);
        report("maxpool 512->16", ts, tp, same(d1, d2));
    }
    {
        const int rows = 4096, cols = 256;
        std::vector<double> base(rows * cols);
        for (auto& x : base) x = rng.uniform(-4, 4);
        std::vector<double> x1, x2;
        const double ts = time_ms([&] { x1 = base; ia::kern::ref::softmax_rows(x1.data(), rows, cols); }, reps);
        const double tp = time_ms([&] { x2 = base; ia::kern::softmax_rows(x2.data(), rows, cols); }, reps);
        report("softmax 4096x256", ts, tp, same(x1, x2));
    }
    return 0;
}
