#pragma once

#include <cstdint>

namespace ia::kern {

// Hot inner loops, each in two variants with identical per-element arithmetic:
// the default OpenMP-parallel version and a serial reference under kern::ref.
// Parallelism is only ever over independent output elements, so both variants
// produce bitwise-identical results for any thread count; tests assert this
// and tools/bench_kernels compares their throughput.

struct Pt {
    double x;
    double y;
};

// c(m×n) = a(m×k) @ b(k×n)
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);
// c(m×n) = a(m×k) @ b(n×k)^T
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
// c(m×n) = a(k×m)^T @ b(k×n)
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);

// out(h×w) += is NOT implied: out is overwritten with the sum over points of
// exp(-((x-px)^2+(y-py)^2) / (2 sigma^2)), sampled at integer pixel centers.
void gaussian_splat(const Pt* pts, int npts, double sigma, double* out, int h, int w);

// align_corners=false bilinear resampling with edge clamping.
void bilinear_resize(const double* src, int sh, int sw, double* dst, int dh, int dw);

// Bin (i,j) covers rows floor(i*sh/dh)..floor((i+1)*sh/dh) (exclusive), same
// for columns; dst gets the max per bin. argmax (optional, dh*dw entries)
// receives the flat source index of each bin maximum.
void adaptive_max_pool(const double* src, int sh, int sw, double* dst, int dh, int dw,
                       int* argmax);

// In-place row-wise softmax with max subtraction.
void softmax_rows(double* x, int rows, int cols);

namespace ref {
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);
void gaussian_splat(const Pt* pts, int npts, double sigma, double* out, int h, int w);
void bilinear_resize(const double* src, int sh, int sw, double* dst, int dh, int dw);
void adaptive_max_pool(const double* src, int sh, int sw, double* dst, int dh, int dw,
                       int* argmax);
void softmax_rows(double* x, int rows, int cols);
}  // namespace ref

}  // namespace ia::kern
