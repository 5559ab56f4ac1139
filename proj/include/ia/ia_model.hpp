#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ia/data_model.hpp"
#include "ia/encoders.hpp"
#include "ia/nn.hpp"

namespace ia {

// Scene-adaptive text-side vectors guiding the cognitive blocks. Produced
// per sample, never cached across samples.
struct KnowledgePrototypes {
    std::vector<double> k_human;
    std::vector<double> k_object;
    std::vector<double> k_interaction;
};

struct IAConfig {
    int model_width = 32;        // D
    int fourier_dim = 32;        // 4 coords × 2 trig fns × n_bands
    int n_heads = 4;
    int mlp_hidden = 64;
    int decoder_mid_channels = 16;
    int patch_size = 16;
    int image_size = 64;
    int text_dim = 64;
    int visual_dim = 64;
    std::set<std::string> ablation;  // subset of {"PA","VA","HOCB","ICB"}

    int n_bands() const { return fourier_dim / 8; }
    int grid() const { return image_size / patch_size; }
    int tokens() const { return grid() * grid(); }
    bool ablated(const std::string& unit) const { return ablation.count(unit) > 0; }

    void validate() const;
    nlohmann::json to_json() const;
    static IAConfig from_json(const nlohmann::json& j);

    // Desk scale: trains in seconds on synthetic fixtures.
    static IAConfig desk();
    // Full scale, matching the pretrained encoder profiles.
    static IAConfig full_base();
    static IAConfig full_large();
};

// (sin(2^k π c), cos(2^k π c)) for every coordinate and band, coords first,
// bands inner, sin before cos. Coordinates must lie in [0,1].
std::vector<double> fourier_embed(const std::vector<double>& coords, int n_bands);

// Mean binary cross-entropy; prediction clamped to [1e-7, 1-1e-7].
double bce_loss(const AttentionMap& pred, const AttentionMap& target);

// The IA network. All trainable state lives in `store`; graph builders make
// one tape per forward so concurrent inference over samples stays pure.
class IAModel {
public:
    IAConfig cfg;
    nn::ParamStore store;

    static IAModel init(const IAConfig& cfg, std::uint64_t seed);

    // Graph builders, composable for tests and ablations.
    struct Prototypes {
        ad::NodePtr human, object, interaction;
    };
    Prototypes build_prototypes(ad::Tape& t, const TextTriplet& trip,
                                const std::array<double, 4>& human_box_norm,
                                const std::array<double, 4>& object_box_norm);
    ad::NodePtr build_visual(ad::Tape& t, const VisualTokens& vt);
    ad::NodePtr build_hocb(ad::Tape& t, const ad::NodePtr& v_prime, const ad::NodePtr& k_human,
                           const ad::NodePtr& k_object);
    ad::NodePtr build_icb(ad::Tape& t, const ad::NodePtr& v_ho, const ad::NodePtr& k_inter);
    ad::NodePtr build_decode(ad::Tape& t, const ad::NodePtr& v_hoi, int out_h, int out_w,
                             bool training, bool update_stats);
    // prompts → triplet → PA/VA → HOCB → ICB → decode.
    ad::NodePtr build_map(ad::Tape& t, const HOISample& s, const TextTriplet& trip,
                          const VisualTokens& vt, bool training, bool update_stats);

    // Plain-tensor entry points (fresh tape per call, eval mode).
    KnowledgePrototypes positional_adapter(const TextTriplet& trip,
                                           const std::array<double, 4>& human_box_norm,
                                           const std::array<double, 4>& object_box_norm);
    VisualTokens visual_adapter(const VisualTokens& vt);
    VisualTokens hocb(const VisualTokens& v_prime, const KnowledgePrototypes& k);
    VisualTokens icb(const VisualTokens& v_ho, const std::vector<double>& k_interaction);
    AttentionMap decode(const VisualTokens& v_hoi, int out_h, int out_w, bool training = false);
    // Runs the post-adapter pipeline from explicitly given prototypes.
    AttentionMap forward_from_prototypes(const KnowledgePrototypes& k, const VisualTokens& raw,
                                         int out_h, int out_w);

    AttentionMap predict(const HOISample& s, const Image& img, const EncoderBackend& backend);

    bool has_cross_attention() const;

private:
    nn::LinearP pa_h1_, pa_h2_, pa_o1_, pa_o2_, pa_i1_, pa_i2_;
    nn::LinearP vproj_;
    std::vector<nn::EncoderLayerP> va_layers_;
    nn::MhaP hocb_attn_;
    nn::MhaP icb_cross_, icb_self_;
    ad::Param* icb_gate_ = nullptr;
    nn::LinearP dec1_, dec2_;
    ad::Param* bn_gamma_ = nullptr;
    ad::Param* bn_beta_ = nullptr;

    ad::NodePtr pa_mlp(ad::Tape& t, const nn::LinearP& l1, const nn::LinearP& l2,
                       const ad::NodePtr& in);
};

std::array<double, 4> normalized_box(const std::array<double, 4>& box, int width, int height);

// Composition used by training and the CLI: encode, forward, squash to map.
AttentionMap ia_forward(const HOISample& s, const Image& img, const EncoderBackend& backend,
                        IAModel& model, bool training = false);

}  // namespace ia
