#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ia/autodiff.hpp"
#include "ia/common.hpp"

namespace ia::nn {

// Owns every trainable tensor of a model plus non-trainable buffers
// (batch-norm running statistics). Ordered by insertion so checkpoints,
// optimizer state and the parameter census are all deterministic.
class ParamStore {
public:
    ad::Param* add(const std::string& name, int rows, int cols, bool decay);
    ad::Param* find(const std::string& name);
    const ad::Param* find(const std::string& name) const;
    ad::Param& at(const std::string& name);

    Tensor& add_buffer(const std::string& name, int rows, int cols, double fill = 0.0);
    Tensor& buffer(const std::string& name);
    const Tensor& buffer(const std::string& name) const;

    std::vector<std::unique_ptr<ad::Param>>& params() { return params_; }
    const std::vector<std::unique_ptr<ad::Param>>& params() const { return params_; }
    std::vector<std::pair<std::string, Tensor*>>& buffers() { return buffers_; }
    const std::vector<std::pair<std::string, Tensor*>>& buffers() const { return buffers_; }

    void zero_grads();
    // (name, rows, cols) for every parameter, insertion order.
    std::vector<std::string> census() const;

private:
    std::vector<std::unique_ptr<ad::Param>> params_;
    std::vector<std::pair<std::string, Tensor*>> buffers_;
    std::vector<std::unique_ptr<Tensor>> buffer_storage_;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_fan_in(Tensor& w, int fan_in, SplitMix64& rng);

struct LinearP {
    ad::Param* w = nullptr;  // in×out
    ad::Param* b = nullptr;  // 1×out
};

// zero_out marks residual-branch output projections: weights stay zero at
// init so the surrounding block starts as the identity.
LinearP make_linear(ParamStore& ps, const std::string& prefix, int in, int out,
                    SplitMix64& rng, bool zero_out = false);
ad::NodePtr linear(ad::Tape& t, const ad::NodePtr& x, const LinearP& p);

struct LayerNormP {
    ad::Param* gamma = nullptr;
    ad::Param* beta = nullptr;
};
LayerNormP make_layer_norm(ParamStore& ps, const std::string& prefix, int dim);
ad::NodePtr layer_norm(ad::Tape& t, const ad::NodePtr& x, const LayerNormP& p);

struct MhaP {
    LinearP q, k, v, o;
    int heads = 1;
    int dim = 0;
};
MhaP make_mha(ParamStore& ps, const std::string& prefix, int dim, int heads, SplitMix64& rng,
              bool zero_out_proj);

struct MhaOut {
    ad::NodePtr out;   // M×D
    ad::NodePtr attn;  // (heads·M)×N softmax rows, only when requested
};
MhaOut mha(ad::Tape& t, const ad::NodePtr& q_in, const ad::NodePtr& kv_in, const MhaP& p,
           bool want_attn = false);

// Pre-norm transformer encoder layer: x + Attn(LN(x)), then y + MLP(LN(y)).
struct EncoderLayerP {
    LayerNormP ln1, ln2;
    MhaP attn;
    LinearP mlp1, mlp2;
};
EncoderLayerP make_encoder_layer(ParamStore& ps, const std::string& prefix, int dim, int heads,
                                 int hidden, SplitMix64& rng);
ad::NodePtr encoder_layer(ad::Tape& t, const ad::NodePtr& x, const EncoderLayerP& p);

}  // namespace ia::nn
