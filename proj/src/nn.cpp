#include "ia/nn.hpp"

#include <cmath>

namespace ia::nn {

ad::Param* ParamStore::add(const std::string& name, int rows, int cols, bool decay) {
    if (find(name)) throw RuntimeFailure("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<ad::Param>(name, rows, cols, decay));
    return params_.back().get();
}

ad::Param* ParamStore::find(const std::string& name) {
    for (auto& p : params_)
        if (p->name == name) return p.get();
    return nullptr;
}

const ad::Param* ParamStore::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p->name == name) return p.get();
    return nullptr;
}

ad::Param& ParamStore::at(const std::string& name) {
    ad::Param* p = find(name);
    if (!p) throw RuntimeFailure("missing parameter: " + name);
    return *p;
}

Tensor& ParamStore::add_buffer(const std::string& name, int rows, int cols, double fill) {
    buffer_storage_.push_back(std::make_unique<Tensor>(rows, cols, fill));
    buffers_.emplace_back(name, buffer_storage_.back().get());
    return *buffer_storage_.back();
}

Tensor& ParamStore::buffer(const std::string& name) {
    for (auto& [n, t] : buffers_)
        if (n == name) return *t;
    throw RuntimeFailure("missing buffer: " + name);
}

const Tensor& ParamStore::buffer(const std::string& name) const {
    for (const auto& [n, t] : buffers_)
        if (n == name) return *t;
    throw RuntimeFailure("missing buffer: " + name);
}

void ParamStore::zero_grads() {
    for (auto& p : params_) p->grad.fill(0.0);
}

std::vector<std::string> ParamStore::census() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->name);
    return out;
}

void init_fan_in(Tensor& w, int fan_in, SplitMix64& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : w.d) x = rng.uniform(-s, s);
}

LinearP make_linear(ParamStore& ps, const std::string& prefix, int in, int out,
                    SplitMix64& rng, bool zero_out) {
    LinearP p;
    p.w = ps.add(prefix + ".w", in, out, true);
    p.b = ps.add(prefix + ".b", 1, out, false);
    if (!zero_out) init_fan_in(p.w->value, in, rng);
    return p;
}

ad::NodePtr linear(ad::Tape& t, const ad::NodePtr& x, const LinearP& p) {
    return t.add_rowvec(t.matmul(x, t.param(*p.w)), t.param(*p.b));
}

LayerNormP make_layer_norm(ParamStore& ps, const std::string& prefix, int dim) {
    LayerNormP p;
    p.gamma = ps.add(prefix + ".gamma", 1, dim, false);
    p.gamma->value.fill(1.0);
    p.beta = ps.add(prefix + ".beta", 1, dim, false);
    return p;
}

ad::NodePtr layer_norm(ad::Tape& t, const ad::NodePtr& x, const LayerNormP& p) {
    return t.layer_norm(x, t.param(*p.gamma), t.param(*p.beta));
}

MhaP make_mha(ParamStore& ps, const std::string& prefix, int dim, int heads, SplitMix64& rng,
              bool zero_out_proj) {
    if (dim % heads != 0) throw ValidationError("attention width not divisible by head count");
    MhaP p;
    p.q = make_linear(ps, prefix + ".q", dim, dim, rng);
    p.k = make_linear(ps, prefix + ".k", dim, dim, rng);
    p.v = make_linear(ps, prefix + ".v", dim, dim, rng);
    p.o = make_linear(ps, prefix + ".o", dim, dim, rng, zero_out_proj);
    p.heads = heads;
    p.dim = dim;
    return p;
}

MhaOut mha(ad::Tape& t, const ad::NodePtr& q_in, const ad::NodePtr& kv_in, const MhaP& p,
           bool want_attn) {
    const int dh = p.dim / p.heads;
    auto q = linear(t, q_in, p.q);
    auto k = linear(t, kv_in, p.k);
    auto v = linear(t, kv_in, p.v);
    std::vector<ad::NodePtr> head_outs, head_attns;
    for (int h = 0; h < p.heads; ++h) {
        auto qh = t.slice_cols(q, h * dh, (h + 1) * dh);
        auto kh = t.slice_cols(k, h * dh, (h + 1) * dh);
        auto vh = t.slice_cols(v, h * dh, (h + 1) * dh);
        auto scores = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
        auto attn = t.softmax_rows(scores);
        head_outs.push_back(t.matmul(attn, vh));
        if (want_attn) head_attns.push_back(attn);
    }
    MhaOut out;
    out.out = linear(t, t.concat_cols(head_outs), p.o);
    if (want_attn) out.attn = t.concat_rows(head_attns);
    return out;
}

EncoderLayerP make_encoder_layer(ParamStore& ps, const std::string& prefix, int dim, int heads,
                                 int hidden, SplitMix64& rng) {
    EncoderLayerP p;
    p.ln1 = make_layer_norm(ps, prefix + ".ln1", dim);
    p.attn = make_mha(ps, prefix + ".attn", dim, heads, rng, /*zero_out_proj=*/true);
    p.ln2 = make_layer_norm(ps, prefix + ".ln2", dim);
    p.mlp1 = make_linear(ps, prefix + ".mlp1", dim, hidden, rng);
    p.mlp2 = make_linear(ps, prefix + ".mlp2", hidden, dim, rng, /*zero_out=*/true);
    return p;
}

ad::NodePtr encoder_layer(ad::Tape& t, const ad::NodePtr& x, const EncoderLayerP& p) {
    auto n1 = layer_norm(t, x, p.ln1);
    auto y = t.add(x, mha(t, n1, n1, p.attn).out);
    auto n2 = layer_norm(t, y, p.ln2);
    auto h = t.gelu(linear(t, n2, p.mlp1));
    return t.add(y, linear(t, h, p.mlp2));
}

}  // namespace ia::nn
