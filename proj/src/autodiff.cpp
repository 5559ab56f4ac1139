#include "ia/autodiff.hpp"

#include <cmath>

#include "ia/common.hpp"
#include "ia/kernels.hpp"

namespace ia::ad {

namespace {

void check(bool ok, const char* msg) {
    if (!ok) throw RuntimeFailure(std::string("autodiff: ") + msg);
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

NodePtr Tape::make(Tensor v, std::vector<NodePtr> parents, std::function<void(Node&)> back) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->back = std::move(back);
    order_.push_back(n);
    return n;
}

NodePtr Tape::constant(Tensor v) { return make(std::move(v), {}, nullptr); }

NodePtr Tape::param(Param& p) {
    auto n = make(p.value, {}, nullptr);
    n->requires_grad = true;
    bindings_.emplace_back(&p, n);
    return n;
}

NodePtr Tape::matmul(const NodePtr& a, const NodePtr& b) {
    check(a->val.cols == b->val.rows, "matmul shape mismatch");
    const int m = a->val.rows, k = a->val.cols, n = b->val.cols;
    Tensor out(m, n);
    kern::matmul_nn(a->val.data(), b->val.data(), out.data(), m, k, n);
    return make(std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& a = *self.parents[0];
        Node& b = *self.parents[1];
        if (a.requires_grad) {
            Tensor da(m, k);
            kern::matmul_nt(self.grad.data(), b.val.data(), da.data(), m, n, k);
            for (int i = 0; i < da.size(); ++i) a.grad.d[i] += da.d[i];
        }
        if (b.requires_grad) {
            Tensor db(k, n);
            kern::matmul_tn(a.val.data(), self.grad.data(), db.data(), k, m, n);
            for (int i = 0; i < db.size(); ++i) b.grad.d[i] += db.d[i];
        }
    });
}

NodePtr Tape::matmul_nt(const NodePtr& a, const NodePtr& b) {
    check(a->val.cols == b->val.cols, "matmul_nt shape mismatch");
    const int m = a->val.rows, k = a->val.cols, n = b->val.rows;
    Tensor out(m, n);
    kern::matmul_nt(a->val.data(), b->val.data(), out.data(), m, k, n);
    return make(std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& a = *self.parents[0];
        Node& b = *self.parents[1];
        if (a.requires_grad) {
            Tensor da(m, k);  // g(m×n) @ b(n×k)
            kern::matmul_nn(self.grad.data(), b.val.data(), da.data(), m, n, k);
            for (int i = 0; i < da.size(); ++i) a.grad.d[i] += da.d[i];
        }
        if (b.requires_grad) {
            Tensor db(n, k);  // g^T(n×m) @ a(m×k)
            kern::matmul_tn(self.grad.data(), a.val.data(), db.data(), n, m, k);
            for (int i = 0; i < db.size(); ++i) b.grad.d[i] += db.d[i];
        }
    });
}

NodePtr Tape::add(const NodePtr& a, const NodePtr& b) {
    check(a->val.same_shape(b->val), "add shape mismatch");
    Tensor out = a->val;
    for (int i = 0; i < out.size(); ++i) out.d[i] += b->val.d[i];
    return make(std::move(out), {a, b}, [](Node& self) {
        for (int pi = 0; pi < 2; ++pi) {
            Node& p = *self.parents[pi];
            if (!p.requires_grad) continue;
            for (int i = 0; i < self.grad.size(); ++i) p.grad.d[i] += self.grad.d[i];
        }
    });
}

NodePtr Tape::add_rowvec(const NodePtr& a, const NodePtr& b) {
    check(b->val.rows == 1 && b->val.cols == a->val.cols, "add_rowvec shape mismatch");
    Tensor out = a->val;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) += b->val.d[j];
    return make(std::move(out), {a, b}, [](Node& self) {
        Node& a = *self.parents[0];
        Node& b = *self.parents[1];
        if (a.requires_grad)
            for (int i = 0; i < self.grad.size(); ++i) a.grad.d[i] += self.grad.d[i];
        if (b.requires_grad)
            for (int i = 0; i < self.grad.rows; ++i)
                for (int j = 0; j < self.grad.cols; ++j) b.grad.d[j] += self.grad.at(i, j);
    });
}

NodePtr Tape::mul_rowvec(const NodePtr& a, const NodePtr& b) {
    check(b->val.rows == 1 && b->val.cols == a->val.cols, "mul_rowvec shape mismatch");
    Tensor out = a->val;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) *= b->val.d[j];
    return make(std::move(out), {a, b}, [](Node& self) {
        Node& a = *self.parents[0];
        Node& b = *self.parents[1];
        if (a.requires_grad)
            for (int i = 0; i < self.grad.rows; ++i)
                for (int j = 0; j < self.grad.cols; ++j)
                    a.grad.at(i, j) += self.grad.at(i, j) * b.val.d[j];
        if (b.requires_grad)
            for (int i = 0; i < self.grad.rows; ++i)
                for (int j = 0; j < self.grad.cols; ++j)
                    b.grad.d[j] += self.grad.at(i, j) * a.val.at(i, j);
    });
}

NodePtr Tape::scale(const NodePtr& a, double s) {
    Tensor out = a->val;
    for (double& x : out.d) x *= s;
    return make(std::move(out), {a}, [s](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        for (int i = 0; i < self.grad.size(); ++i) a.grad.d[i] += s * self.grad.d[i];
    });
}

NodePtr Tape::concat_rows(const std::vector<NodePtr>& parts) {
    check(!parts.empty(), "concat_rows: empty");
    const int cols = parts[0]->val.cols;
    int rows = 0;
    for (const auto& p : parts) {
        check(p->val.cols == cols, "concat_rows: column mismatch");
        rows += p->val.rows;
    }
    Tensor out(rows, cols);
    int r = 0;
    for (const auto& p : parts) {
        std::copy(p->val.d.begin(), p->val.d.end(), out.d.begin() + static_cast<std::size_t>(r) * cols);
        r += p->val.rows;
    }
    return make(std::move(out), parts, [cols](Node& self) {
        int r = 0;
        for (auto& pp : self.parents) {
            Node& p = *pp;
            if (p.requires_grad)
                for (int i = 0; i < p.val.size(); ++i)
                    p.grad.d[i] += self.grad.d[static_cast<std::size_t>(r) * cols + i];
            r += p.val.rows;
        }
    });
}

NodePtr Tape::slice_rows(const NodePtr& a, int r0, int r1) {
    check(0 <= r0 && r0 < r1 && r1 <= a->val.rows, "slice_rows out of range");
    const int cols = a->val.cols;
    Tensor out(r1 - r0, cols);
    std::copy(a->val.d.begin() + static_cast<std::size_t>(r0) * cols,
              a->val.d.begin() + static_cast<std::size_t>(r1) * cols, out.d.begin());
    return make(std::move(out), {a}, [r0, cols](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        for (int i = 0; i < self.grad.size(); ++i)
            a.grad.d[static_cast<std::size_t>(r0) * cols + i] += self.grad.d[i];
    });
}

NodePtr Tape::concat_cols(const std::vector<NodePtr>& parts) {
    check(!parts.empty(), "concat_cols: empty");
    const int rows = parts[0]->val.rows;
    int cols = 0;
    for (const auto& p : parts) {
        check(p->val.rows == rows, "concat_cols: row mismatch");
        cols += p->val.cols;
    }
    Tensor out(rows, cols);
    int c = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < p->val.cols; ++j) out.at(i, c + j) = p->val.at(i, j);
        c += p->val.cols;
    }
    return make(std::move(out), parts, [](Node& self) {
        int c = 0;
        for (auto& pp : self.parents) {
            Node& p = *pp;
            if (p.requires_grad)
                for (int i = 0; i < p.val.rows; ++i)
                    for (int j = 0; j < p.val.cols; ++j) p.grad.at(i, j) += self.grad.at(i, c + j);
            c += p.val.cols;
        }
    });
}

NodePtr Tape::slice_cols(const NodePtr& a, int c0, int c1) {
    check(0 <= c0 && c0 < c1 && c1 <= a->val.cols, "slice_cols out of range");
    Tensor out(a->val.rows, c1 - c0);
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) = a->val.at(i, c0 + j);
    return make(std::move(out), {a}, [c0](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        for (int i = 0; i < self.grad.rows; ++i)
            for (int j = 0; j < self.grad.cols; ++j) a.grad.at(i, c0 + j) += self.grad.at(i, j);
    });
}

NodePtr Tape::relu(const NodePtr& a) {
    Tensor out = a->val;
    for (double& x : out.d) x = x > 0.0 ? x : 0.0;
    return make(std::move(out), {a}, [](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        for (int i = 0; i < self.grad.size(); ++i)
            if (a.val.d[i] > 0.0) a.grad.d[i] += self.grad.d[i];
    });
}

NodePtr Tape::gelu(const NodePtr& a) {
    Tensor out = a->val;
    for (double& x : out.d) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    return make(std::move(out), {a}, [](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        for (int i = 0; i < self.grad.size(); ++i) {
            const double x = a.val.d[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            a.grad.d[i] += self.grad.d[i] * (cdf + x * pdf);
        }
    });
}

NodePtr Tape::sigmoid(const NodePtr& a) {
    Tensor out = a->val;
    for (double& x : out.d) x = 1.0 / (1.0 + std::exp(-x));
    return make(std::move(out), {a}, [](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        for (int i = 0; i < self.grad.size(); ++i) {
            const double y = self.val.d[i];
            a.grad.d[i] += self.grad.d[i] * y * (1.0 - y);
        }
    });
}

NodePtr Tape::softmax_rows(const NodePtr& a) {
    Tensor out = a->val;
    kern::softmax_rows(out.data(), out.rows, out.cols);
    return make(std::move(out), {a}, [](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        const int n = self.val.cols;
        for (int i = 0; i < self.val.rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += self.grad.at(i, j) * self.val.at(i, j);
            for (int j = 0; j < n; ++j)
                a.grad.at(i, j) += self.val.at(i, j) * (self.grad.at(i, j) - dot);
        }
    });
}

NodePtr Tape::layer_norm(const NodePtr& x, const NodePtr& gamma, const NodePtr& beta,
                         double eps) {
    const int rows = x->val.rows, cols = x->val.cols;
    check(gamma->val.rows == 1 && gamma->val.cols == cols, "layer_norm gamma shape");
    check(beta->val.rows == 1 && beta->val.cols == cols, "layer_norm beta shape");
    Tensor out(rows, cols);
    Tensor xhat(rows, cols);
    std::vector<double> inv_std(rows);
    for (int i = 0; i < rows; ++i) {
        double mu = 0.0;
        for (int j = 0; j < cols; ++j) mu += x->val.at(i, j);
        mu /= cols;
        double var = 0.0;
        for (int j = 0; j < cols; ++j) {
            const double dx = x->val.at(i, j) - mu;
            var += dx * dx;
        }
        var /= cols;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (int j = 0; j < cols; ++j) {
            const double h = (x->val.at(i, j) - mu) * is;
            xhat.at(i, j) = h;
            out.at(i, j) = gamma->val.d[j] * h + beta->val.d[j];
        }
    }
    return make(std::move(out), {x, gamma, beta},
                [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                    Node& x = *self.parents[0];
                    Node& gamma = *self.parents[1];
                    Node& beta = *self.parents[2];
                    const int rows = self.val.rows, cols = self.val.cols;
                    if (gamma.requires_grad)
                        for (int i = 0; i < rows; ++i)
                            for (int j = 0; j < cols; ++j)
                                gamma.grad.d[j] += self.grad.at(i, j) * xhat.at(i, j);
                    if (beta.requires_grad)
                        for (int i = 0; i < rows; ++i)
                            for (int j = 0; j < cols; ++j) beta.grad.d[j] += self.grad.at(i, j);
                    if (x.requires_grad) {
                        for (int i = 0; i < rows; ++i) {
                            double mean_h = 0.0, mean_hx = 0.0;
                            for (int j = 0; j < cols; ++j) {
                                const double h = self.grad.at(i, j) * gamma.val.d[j];
                                mean_h += h;
                                mean_hx += h * xhat.at(i, j);
                            }
                            mean_h /= cols;
                            mean_hx /= cols;
                            for (int j = 0; j < cols; ++j) {
                                const double h = self.grad.at(i, j) * gamma.val.d[j];
                                x.grad.at(i, j) +=
                                    inv_std[i] * (h - mean_h - xhat.at(i, j) * mean_hx);
                            }
                        }
                    }
                });
}

NodePtr Tape::batch_norm_tokens(const NodePtr& x, const NodePtr& gamma, const NodePtr& beta,
                                Tensor& running_mean, Tensor& running_var, bool training,
                                bool update_stats, double momentum, double eps) {
    const int rows = x->val.rows, cols = x->val.cols;
    check(gamma->val.cols == cols && beta->val.cols == cols, "batch_norm param shape");
    check(running_mean.cols == cols && running_var.cols == cols, "batch_norm buffer shape");
    Tensor out(rows, cols);
    Tensor xhat(rows, cols);
    std::vector<double> inv_std(cols);
    if (training) {
        for (int j = 0; j < cols; ++j) {
            double mu = 0.0;
            for (int i = 0; i < rows; ++i) mu += x->val.at(i, j);
            mu /= rows;
            double var = 0.0;
            for (int i = 0; i < rows; ++i) {
                const double dx = x->val.at(i, j) - mu;
                var += dx * dx;
            }
            var /= rows;
            const double is = 1.0 / std::sqrt(var + eps);
            inv_std[j] = is;
            for (int i = 0; i < rows; ++i) {
                const double h = (x->val.at(i, j) - mu) * is;
                xhat.at(i, j) = h;
                out.at(i, j) = gamma->val.d[j] * h + beta->val.d[j];
            }
            if (update_stats) {
                running_mean.d[j] = (1.0 - momentum) * running_mean.d[j] + momentum * mu;
                running_var.d[j] = (1.0 - momentum) * running_var.d[j] + momentum * var;
            }
        }
        return make(std::move(out), {x, gamma, beta},
                    [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                        Node& x = *self.parents[0];
                        Node& gamma = *self.parents[1];
                        Node& beta = *self.parents[2];
                        const int rows = self.val.rows, cols = self.val.cols;
                        if (gamma.requires_grad)
                            for (int i = 0; i < rows; ++i)
                                for (int j = 0; j < cols; ++j)
                                    gamma.grad.d[j] += self.grad.at(i, j) * xhat.at(i, j);
                        if (beta.requires_grad)
                            for (int i = 0; i < rows; ++i)
                                for (int j = 0; j < cols; ++j) beta.grad.d[j] += self.grad.at(i, j);
                        if (x.requires_grad) {
                            for (int j = 0; j < cols; ++j) {
                                double mean_g = 0.0, mean_gx = 0.0;
                                for (int i = 0; i < rows; ++i) {
                                    mean_g += self.grad.at(i, j);
                                    mean_gx += self.grad.at(i, j) * xhat.at(i, j);
                                }
                                mean_g /= rows;
                                mean_gx /= rows;
                                const double scale = gamma.val.d[j] * inv_std[j];
                                for (int i = 0; i < rows; ++i)
                                    x.grad.at(i, j) += scale * (self.grad.at(i, j) - mean_g -
                                                                xhat.at(i, j) * mean_gx);
                            }
                        }
                    });
    }
    // Eval: frozen statistics behave as a per-channel affine map.
    for (int j = 0; j < cols; ++j) {
        const double is = 1.0 / std::sqrt(running_var.d[j] + eps);
        inv_std[j] = is;
        for (int i = 0; i < rows; ++i) {
            const double h = (x->val.at(i, j) - running_mean.d[j]) * is;
            xhat.at(i, j) = h;
            out.at(i, j) = gamma->val.d[j] * h + beta->val.d[j];
        }
    }
    return make(std::move(out), {x, gamma, beta},
                [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                    Node& x = *self.parents[0];
                    Node& gamma = *self.parents[1];
                    Node& beta = *self.parents[2];
                    const int rows = self.val.rows, cols = self.val.cols;
                    if (gamma.requires_grad)
                        for (int i = 0; i < rows; ++i)
                            for (int j = 0; j < cols; ++j)
                                gamma.grad.d[j] += self.grad.at(i, j) * xhat.at(i, j);
                    if (beta.requires_grad)
                        for (int i = 0; i < rows; ++i)
                            for (int j = 0; j < cols; ++j) beta.grad.d[j] += self.grad.at(i, j);
                    if (x.requires_grad)
                        for (int i = 0; i < rows; ++i)
                            for (int j = 0; j < cols; ++j)
                                x.grad.at(i, j) += self.grad.at(i, j) * gamma.val.d[j] * inv_std[j];
                });
}

NodePtr Tape::mean_all(const NodePtr& a) {
    Tensor out(1, 1);
    double s = 0.0;
    for (double x : a->val.d) s += x;
    out.d[0] = s / a->val.size();
    return make(std::move(out), {a}, [](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        const double g = self.grad.d[0] / a.val.size();
        for (int i = 0; i < a.val.size(); ++i) a.grad.d[i] += g;
    });
}

NodePtr Tape::mean_rows(const NodePtr& a) {
    Tensor out(1, a->val.cols);
    for (int i = 0; i < a->val.rows; ++i)
        for (int j = 0; j < a->val.cols; ++j) out.d[j] += a->val.at(i, j);
    for (double& x : out.d) x /= a->val.rows;
    return make(std::move(out), {a}, [](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        for (int i = 0; i < a.val.rows; ++i)
            for (int j = 0; j < a.val.cols; ++j)
                a.grad.at(i, j) += self.grad.d[j] / a.val.rows;
    });
}

NodePtr Tape::minmax_norm(const NodePtr& a) {
    const int n = a->val.size();
    check(n > 0, "minmax_norm: empty");
    int imin = 0, imax = 0;
    for (int i = 1; i < n; ++i) {
        if (a->val.d[i] < a->val.d[imin]) imin = i;
        if (a->val.d[i] > a->val.d[imax]) imax = i;
    }
    const double mn = a->val.d[imin];
    const double r = a->val.d[imax] - mn;
    if (r <= 0.0) {
        // Degenerate range: identity (same convention as the plain op).
        Tensor out = a->val;
        return make(std::move(out), {a}, [](Node& self) {
            Node& a = *self.parents[0];
            if (!a.requires_grad) return;
            for (int i = 0; i < self.grad.size(); ++i) a.grad.d[i] += self.grad.d[i];
        });
    }
    Tensor out = a->val;
    for (double& x : out.d) x = (x - mn) / r;
    return make(std::move(out), {a}, [imin, imax, r](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        // f_i = (v_i - mn)/r; df_i/dmn = (f_i - 1)/r, df_i/dmx = -f_i/r.
        double g_mn = 0.0, g_mx = 0.0;
        for (int i = 0; i < self.grad.size(); ++i) {
            const double g = self.grad.d[i];
            a.grad.d[i] += g / r;
            g_mn += g * (self.val.d[i] - 1.0) / r;
            g_mx += g * (-self.val.d[i]) / r;
        }
        a.grad.d[imin] += g_mn;
        a.grad.d[imax] += g_mx;
    });
}

NodePtr Tape::reshape(const NodePtr& a, int r, int c) {
    check(r * c == a->val.size(), "reshape size mismatch");
    Tensor out(r, c);
    out.d = a->val.d;
    return make(std::move(out), {a}, [](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        for (int i = 0; i < self.grad.size(); ++i) a.grad.d[i] += self.grad.d[i];
    });
}

NodePtr Tape::bilinear_up(const NodePtr& a, int out_h, int out_w) {
    const int sh = a->val.rows, sw = a->val.cols;
    Tensor out(out_h, out_w);
    kern::bilinear_resize(a->val.data(), sh, sw, out.data(), out_h, out_w);
    return make(std::move(out), {a}, [sh, sw, out_h, out_w](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        // Transpose of the interpolation: scatter each output gradient onto
        // its four source cells. Serial; the grids involved are small.
        for (int i = 0; i < out_h; ++i) {
            for (int j = 0; j < out_w; ++j) {
                const double g = self.grad.at(i, j);
                if (g == 0.0) continue;
                const double ys = (i + 0.5) * static_cast<double>(sh) / out_h - 0.5;
                const double xs = (j + 0.5) * static_cast<double>(sw) / out_w - 0.5;
                const int y0 = static_cast<int>(std::floor(ys));
                const int x0 = static_cast<int>(std::floor(xs));
                const double fy = ys - y0;
                const double fx = xs - x0;
                const int y0c = std::clamp(y0, 0, sh - 1);
                const int y1c = std::clamp(y0 + 1, 0, sh - 1);
                const int x0c = std::clamp(x0, 0, sw - 1);
                const int x1c = std::clamp(x0 + 1, 0, sw - 1);
                a.grad.at(y0c, x0c) += g * (1.0 - fy) * (1.0 - fx);
                a.grad.at(y0c, x1c) += g * (1.0 - fy) * fx;
                a.grad.at(y1c, x0c) += g * fy * (1.0 - fx);
                a.grad.at(y1c, x1c) += g * fy * fx;
            }
        }
    });
}

NodePtr Tape::bce_mean(const NodePtr& pred, const Tensor& target, double eps) {
    check(pred->val.same_shape(target), "bce shape mismatch");
    const int n = pred->val.size();
    Tensor out(1, 1);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double p = std::clamp(pred->val.d[i], eps, 1.0 - eps);
        const double y = target.d[i];
        s += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
    out.d[0] = s / n;
    return make(std::move(out), {pred}, [target, eps, n](Node& self) {
        Node& pred = *self.parents[0];
        if (!pred.requires_grad) return;
        const double g = self.grad.d[0] / n;
        for (int i = 0; i < n; ++i) {
            const double raw = pred.val.d[i];
            if (raw <= eps || raw >= 1.0 - eps) continue;  // clamped: zero slope
            const double y = target.d[i];
            pred.grad.d[i] += g * (-(y / raw) + (1.0 - y) / (1.0 - raw));
        }
    });
}

NodePtr Tape::softmax_xent(const NodePtr& logits, int label) {
    check(logits->val.rows == 1, "softmax_xent expects a 1×C row");
    check(label >= 0 && label < logits->val.cols, "softmax_xent label range");
    const int c = logits->val.cols;
    double mx = logits->val.d[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, logits->val.d[j]);
    double lse = 0.0;
    for (int j = 0; j < c; ++j) lse += std::exp(logits->val.d[j] - mx);
    lse = mx + std::log(lse);
    Tensor out(1, 1);
    out.d[0] = lse - logits->val.d[label];
    std::vector<double> probs(c);
    for (int j = 0; j < c; ++j) probs[j] = std::exp(logits->val.d[j] - lse);
    return make(std::move(out), {logits}, [probs = std::move(probs), label](Node& self) {
        Node& logits = *self.parents[0];
        if (!logits.requires_grad) return;
        const double g = self.grad.d[0];
        for (int j = 0; j < logits.val.cols; ++j)
            logits.grad.d[j] += g * (probs[j] - (j == label ? 1.0 : 0.0));
    });
}

void Tape::backward(const NodePtr& root) {
    check(root->val.rows == 1 && root->val.cols == 1, "backward root must be scalar");
    for (auto& n : order_) {
        n->grad = Tensor(n->val.rows, n->val.cols);
    }
    root->grad.d[0] = 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        Node& n = **it;
        if (n.requires_grad && n.back) n.back(n);
    }
}

void Tape::add_param_grads() {
    for (auto& [p, node] : bindings_) {
        for (int i = 0; i < p->grad.size(); ++i) p->grad.d[i] += node->grad.d[i];
    }
}

}  // namespace ia::ad
