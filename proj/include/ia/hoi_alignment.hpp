#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ia/training.hpp"

namespace ia {

struct AlignmentConfig {
    enum class Source { none, human, ia_pseudo };
    double lambda1 = 1.0;
    double lambda2 = 10.0;  // the one-stage default; two-stage hosts use 6
    Source source = Source::human;

    void validate() const;
};

AlignmentConfig::Source alignment_source_from_string(const std::string& s);
std::string to_string(AlignmentConfig::Source s);

// Attention supervision for a host model: the target (max-normalized, any
// resolution) is pooled down to the probe's size by adaptive max pooling,
// the probe map is min-max normalized, and the two meet in BCE. This is the
// human-attention alignment term when source=human and the pseudo-label term
// when source=ia_pseudo; the formula is identical.
double alignment_loss(const AttentionMap& m_hoi, const AttentionMap& target);

// lambda1 * l_raw + lambda2 * l_align.
double combined_loss(double l_raw, double l_align, const AlignmentConfig& cfg);

// IA inference over a dataset, refusing to run when any sample id appears in
// the checkpoint's recorded training ids (label leakage guard).
std::map<std::string, AttentionMap> pseudo_label(LoadedCheckpoint& ckpt, const Dataset& data,
                                                 const std::vector<Image>& images,
                                                 const EncoderBackend& backend);

// ---- toy host model ------------------------------------------------------

// Synthetic stand-in for a full HOI detector: patch encoder, query decoder
// with one cross-attention layer, interaction classifier head. The planted
// cue patch fully determines the label, so supervising attention onto the
// cue mask is genuinely informative.
struct ToySample {
    std::string id;
    Image image;       // 64×64 grayscale
    int label = 0;     // 0..3
    AttentionMap cue_mask;  // 64×64, 1 inside the cue box
};

std::vector<ToySample> make_toy_dataset(int n, std::uint64_t seed);

class ToyHOIModel {
public:
    static constexpr int kImage = 64;
    static constexpr int kPatch = 8;
    static constexpr int kGrid = kImage / kPatch;
    static constexpr int kClasses = 4;
    static constexpr int kDim = 16;
    static constexpr int kHeads = 2;
    static constexpr int kHidden = 32;
    static constexpr int kQueries = 4;

    nn::ParamStore store;

    static ToyHOIModel init(std::uint64_t seed);

    struct Built {
        ad::NodePtr logits;    // 1×4
        ad::NodePtr attn_map;  // kGrid×kGrid, heads and queries averaged
    };
    Built build(ad::Tape& t, const Image& img);

    // HostAttentionProbe contract: decoder cross-attention of the last layer,
    // averaged over heads and queries.
    AttentionMap attention_map(const Image& img);
    int predict_label(const Image& img);

private:
    nn::LinearP patch_embed_;
    nn::EncoderLayerP enc_;
    ad::Param* queries_ = nullptr;
    nn::EncoderLayerP dec_self_;
    nn::LayerNormP dec_ln_;
    nn::MhaP dec_cross_;
    nn::LayerNormP dec_ln2_;
    nn::LinearP dec_mlp1_, dec_mlp2_;
    nn::LinearP head_;
};

struct ToyTrainConfig {
    int epochs = 30;
    double lr = 3e-3;
    int batch_size = 8;
    double weight_decay = 1e-4;
};

struct ToyRunResult {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    // Mean over test samples of attention mass inside the pooled cue mask.
    double in_mask_fraction = 0.0;
    std::vector<std::pair<std::string, AttentionMap>> test_attention;
    std::uint64_t params_hash = 0;  // for bit-for-bit run comparisons
    std::vector<double> epoch_loss;
};

// Trains the toy host with combined_loss. Targets: cue masks for
// source=human, entries of `pseudo_targets` for source=ia_pseudo. With
// lambda2 == 0 or source == none the alignment branch is not built at all,
// so the run is bit-for-bit the plain classifier run.
ToyRunResult train_toy_hoi(const std::vector<ToySample>& train_set,
                           const std::vector<ToySample>& test_set, const AlignmentConfig& cfg,
                           std::uint64_t seed, const ToyTrainConfig& ttc = {},
                           const std::map<std::string, AttentionMap>* pseudo_targets = nullptr);

}  // namespace ia
