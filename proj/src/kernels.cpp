#include "ia/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace ia::kern {

namespace detail {

inline void matmul_nn_row(const double* a, const double* b, double* c, int i, int k, int n) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) ci[j] = 0.0;
    for (int t = 0; t < k; ++t) {
        const double av = ai[t];
        const double* bt = b + static_cast<std::size_t>(t) * n;
        for (int j = 0; j < n; ++j) ci[j] += av * bt[j];
    }
}

inline void matmul_nt_row(const double* a, const double* b, double* c, int i, int k, int n) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        const double* bj = b + static_cast<std::size_t>(j) * k;
        double s = 0.0;
        for (int t = 0; t < k; ++t) s += ai[t] * bj[t];
        ci[j] = s;
    }
}

inline void matmul_tn_row(const double* a, const double* b, double* c, int i, int m, int k,
                          int n) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int t = 0; t < k; ++t)
            s += a[static_cast<std::size_t>(t) * m + i] * b[static_cast<std::size_t>(t) * n + j];
        ci[j] = s;
    }
}

inline double gauss_at(const Pt* pts, int npts, double inv2s2, int x, int y) {
    double s = 0.0;
    for (int p = 0; p < npts; ++p) {
        const double dx = x - pts[p].x;
        const double dy = y - pts[p].y;
        s += std::exp(-(dx * dx + dy * dy) * inv2s2);
    }
    return s;
}

inline double bilerp_at(const double* src, int sh, int sw, int dh, int dw, int i, int j) {
    const double ys = (i + 0.5) * static_cast<double>(sh) / dh - 0.5;
    const double xs = (j + 0.5) * static_cast<double>(sw) / dw - 0.5;
    const int y0 = static_cast<int>(std::floor(ys));
    const int x0 = static_cast<int>(std::floor(xs));
    const double fy = ys - y0;
    const double fx = xs - x0;
    const int y0c = std::clamp(y0, 0, sh - 1);
    const int y1c = std::clamp(y0 + 1, 0, sh - 1);
    const int x0c = std::clamp(x0, 0, sw - 1);
    const int x1c = std::clamp(x0 + 1, 0, sw - 1);
    const double v00 = src[static_cast<std::size_t>(y0c) * sw + x0c];
    const double v01 = src[static_cast<std::size_t>(y0c) * sw + x1c];
    const double v10 = src[static_cast<std::size_t>(y1c) * sw + x0c];
    const double v11 = src[static_cast<std::size_t>(y1c) * sw + x1c];
    return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11);
}

inline void max_bin(const double* src, int sh, int sw, int dh, int dw, int i, int j,
                    double* out, int* arg) {
    const int r0 = static_cast<int>(static_cast<long long>(i) * sh / dh);
    const int r1 = static_cast<int>(static_cast<long long>(i + 1) * sh / dh);
    const int c0 = static_cast<int>(static_cast<long long>(j) * sw / dw);
    const int c1 = static_cast<int>(static_cast<long long>(j + 1) * sw / dw);
    double best = src[static_cast<std::size_t>(r0) * sw + c0];
    int best_idx = r0 * sw + c0;
    for (int r = r0; r < std::max(r1, r0 + 1); ++r) {
        for (int c = c0; c < std::max(c1, c0 + 1); ++c) {
            const double v = src[static_cast<std::size_t>(r) * sw + c];
            if (v > best) {
                best = v;
                best_idx = r * sw + c;
            }
        }
    }
    *out = best;
    if (arg) *arg = best_idx;
}

inline void softmax_row(double* row, int n) {
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < n; ++j) row[j] *= inv;
}

}  // namespace detail

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) detail::matmul_nn_row(a, b, c, i, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) detail::matmul_nt_row(a, b, c, i, k, n);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) detail::matmul_tn_row(a, b, c, i, m, k, n);
}

void gaussian_splat(const Pt* pts, int npts, double sigma, double* out, int h, int w) {
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<std::size_t>(y) * w + x] = detail::gauss_at(pts, npts, inv2s2, x, y);
}

void bilinear_resize(const double* src, int sh, int sw, double* dst, int dh, int dw) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < dh; ++i)
        for (int j = 0; j < dw; ++j)
            dst[static_cast<std::size_t>(i) * dw + j] = detail::bilerp_at(src, sh, sw, dh, dw, i, j);
}

void adaptive_max_pool(const double* src, int sh, int sw, double* dst, int dh, int dw,
                       int* argmax) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < dh; ++i)
        for (int j = 0; j < dw; ++j)
            detail::max_bin(src, sh, sw, dh, dw, i, j, &dst[static_cast<std::size_t>(i) * dw + j],
                            argmax ? &argmax[static_cast<std::size_t>(i) * dw + j] : nullptr);
}

void softmax_rows(double* x, int rows, int cols) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rows; ++i) detail::softmax_row(x + static_cast<std::size_t>(i) * cols, cols);
}

namespace ref {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) detail::matmul_nn_row(a, b, c, i, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) detail::matmul_nt_row(a, b, c, i, k, n);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) detail::matmul_tn_row(a, b, c, i, m, k, n);
}

void gaussian_splat(const Pt* pts, int npts, double sigma, double* out, int h, int w) {
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<std::size_t>(y) * w + x] = detail::gauss_at(pts, npts, inv2s2, x, y);
}

void bilinear_resize(const double* src, int sh, int sw, double* dst, int dh, int dw) {
    for (int i = 0; i < dh; ++i)
        for (int j = 0; j < dw; ++j)
            dst[static_cast<std::size_t>(i) * dw + j] = detail::bilerp_at(src, sh, sw, dh, dw, i, j);
}

void adaptive_max_pool(const double* src, int sh, int sw, double* dst, int dh, int dw,
                       int* argmax) {
    for (int i = 0; i < dh; ++i)
        for (int j = 0; j < dw; ++j)
            detail::max_bin(src, sh, sw, dh, dw, i, j, &dst[static_cast<std::size_t>(i) * dw + j],
                            argmax ? &argmax[static_cast<std::size_t>(i) * dw + j] : nullptr);
}

void softmax_rows(double* x, int rows, int cols) {
    for (int i = 0; i < rows; ++i) detail::softmax_row(x + static_cast<std::size_t>(i) * cols, cols);
}

}  // namespace ref

}  // namespace ia::kern
