#pragma once

#include <algorithm>
#include <cassert>
#include <vector>

namespace ia {

// Dense row-major 2-D double tensor. Vectors are 1×n, token matrices M×D,
// spatial grids rows×cols. Everything in the model runs in double precision;
// 32-bit floats appear only in file formats.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> d;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0)
        : rows(r), cols(c), d(static_cast<std::size_t>(r) * c, fill) {}

    static Tensor row(const std::vector<double>& v) {
        Tensor t(1, static_cast<int>(v.size()));
        t.d = v;
        return t;
    }

    int size() const { return rows * cols; }

    double& at(int i, int j) { return d[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return d[static_cast<std::size_t>(i) * cols + j]; }

    double* data() { return d.data(); }
    const double* data() const { return d.data(); }

    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double x) { std::fill(d.begin(), d.end(), x); }
};

}  // namespace ia
