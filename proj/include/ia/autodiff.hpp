#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ia/tensor.hpp"

namespace ia::ad {

// Minimal reverse-mode tape over 2-D tensors. A Tape owns the nodes of one
// forward pass; backward() walks the recording in reverse. Gradients of the
// whole model are validated against central finite differences in the tests,
// so every op here carries an exact analytic backward.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Tensor val;
    Tensor grad;
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> back;
};

// A named trainable tensor. Lives outside any tape; Tape::param() binds it
// into a graph and add_param_grads() accumulates back into `grad`.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool decay = true;  // participates in decoupled weight decay

    Param(std::string n, int rows, int cols, bool dec)
        : name(std::move(n)), value(rows, cols), grad(rows, cols), decay(dec) {}
};

class Tape {
public:
    NodePtr constant(Tensor v);
    NodePtr param(Param& p);

    NodePtr matmul(const NodePtr& a, const NodePtr& b);     // a(m×k) @ b(k×n)
    NodePtr matmul_nt(const NodePtr& a, const NodePtr& b);  // a(m×k) @ b(n×k)^T
    NodePtr add(const NodePtr& a, const NodePtr& b);
    NodePtr add_rowvec(const NodePtr& a, const NodePtr& b);  // a(M×D) + b(1×D)
    NodePtr mul_rowvec(const NodePtr& a, const NodePtr& b);  // a(M×D) * b(1×D) per column
    NodePtr scale(const NodePtr& a, double s);
    NodePtr concat_rows(const std::vector<NodePtr>& parts);
    NodePtr slice_rows(const NodePtr& a, int r0, int r1);
    NodePtr concat_cols(const std::vector<NodePtr>& parts);
    NodePtr slice_cols(const NodePtr& a, int c0, int c1);
    NodePtr relu(const NodePtr& a);
    NodePtr gelu(const NodePtr& a);
    NodePtr sigmoid(const NodePtr& a);
    NodePtr softmax_rows(const NodePtr& a);
    NodePtr layer_norm(const NodePtr& x, const NodePtr& gamma, const NodePtr& beta,
                       double eps = 1e-5);
    // Per-channel normalization over the M token rows (1x1-conv batch norm).
    // In training mode uses batch statistics and, when update_stats is set,
    // refreshes the running buffers in place; in eval mode uses the buffers.
    NodePtr batch_norm_tokens(const NodePtr& x, const NodePtr& gamma, const NodePtr& beta,
                              Tensor& running_mean, Tensor& running_var, bool training,
                              bool update_stats, double momentum = 0.1, double eps = 1e-5);
    NodePtr mean_all(const NodePtr& a);   // 1×1
    NodePtr mean_rows(const NodePtr& a);  // column means, 1×cols
    // (v - min) / (max - min); a constant input passes through unchanged.
    NodePtr minmax_norm(const NodePtr& a);
    NodePtr reshape(const NodePtr& a, int r, int c);
    NodePtr bilinear_up(const NodePtr& a, int out_h, int out_w);
    // Mean binary cross-entropy with the prediction clamped to [eps, 1-eps].
    NodePtr bce_mean(const NodePtr& pred, const Tensor& target, double eps = 1e-7);
    // Softmax cross-entropy over a 1×C logits row.
    NodePtr softmax_xent(const NodePtr& logits, int label);

    void backward(const NodePtr& root);
    void add_param_grads();

private:
    NodePtr make(Tensor v, std::vector<NodePtr> parents, std::function<void(Node&)> back);
    std::vector<NodePtr> order_;
    std::vector<std::pair<Param*, NodePtr>> bindings_;
};

}  // namespace ia::ad
