#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ia/data_model.hpp"
#include "ia/image_io.hpp"
#include "ia/tensor.hpp"

namespace ia {

struct Prompts {
    std::string human;
    std::string object;
    std::string interaction;
};

struct TextTriplet {
    std::vector<double> t_human;
    std::vector<double> t_object;
    std::vector<double> t_interaction;
};

// Patch tokens on a grid_rows×grid_cols grid; tokens is M×visual_dim with
// M = grid_rows*grid_cols, row-major over the grid.
struct VisualTokens {
    int grid_rows = 0;
    int grid_cols = 0;
    Tensor tokens;
};

// Frozen text/image encoder contract. Implementations must be deterministic:
// equal inputs give bitwise-equal outputs. encode_text returns a unit vector.
class EncoderBackend {
public:
    virtual ~EncoderBackend() = default;
    virtual std::string name() const = 0;
    virtual int text_dim() const = 0;
    virtual int visual_dim() const = 0;
    virtual int patch_size() const = 0;
    // Square model resolution images are resampled to before encoding.
    virtual int image_size() const = 0;
    virtual std::vector<double> encode_text(const std::string& prompt) const = 0;
    virtual VisualTokens encode_image(const Image& img) const = 0;
    // Patch tokens projected into the text embedding space, for similarity
    // maps. Defaults to encode_image when the two widths already agree.
    virtual VisualTokens encode_image_joint(const Image& img) const;
};

// "person" / object label / "a photo of a person {interaction} {object}",
// with underscores in labels replaced by spaces.
Prompts build_prompts(const std::string& object_label, const std::string& interaction_label);

TextTriplet encode_triplet(const EncoderBackend& b, const std::string& object_label,
                           const std::string& interaction_label);

// Keyed-hash test double for the pretrained encoder: splitmix64 seeded with
// fnv1a64(prompt) XOR seed, each draw mapped to [-1,1), then L2-normalized.
std::vector<double> mock_encode(std::uint64_t seed, const std::string& prompt, int dim);

// Per-token cosine similarity against the text embedding, min-max normalized
// onto the token grid. A constant similarity field degenerates to all zeros.
AttentionMap clip_similarity_map(const EncoderBackend& b, const Image& img,
                                 const std::string& prompt);

class MockBackend : public EncoderBackend {
public:
    MockBackend(std::uint64_t seed, int dims = 64, int patch = 16, int img_size = 64)
        : seed_(seed), dims_(dims), patch_(patch), img_size_(img_size) {}

    std::string name() const override { return "mock"; }
    int text_dim() const override { return dims_; }
    int visual_dim() const override { return dims_; }
    int patch_size() const override { return patch_; }
    int image_size() const override { return img_size_; }
    std::vector<double> encode_text(const std::string& prompt) const override;
    VisualTokens encode_image(const Image& img) const override;

private:
    std::uint64_t seed_;
    int dims_;
    int patch_;
    int img_size_;
};

// Full-scale backend fed from a directory of precomputed features (see
// README): text_<fnv1a64 of prompt>.igts and img_<content hash>.igts /
// img_<content hash>_joint.igts produced by an external CLIP exporter.
class CachedClipBackend : public EncoderBackend {
public:
    struct Profile {
        std::string name;
        int text_dim;
        int visual_dim;
        int patch;
        int image_size;
    };

    CachedClipBackend(const Profile& profile, std::string cache_dir);

    std::string name() const override { return profile_.name; }
    int text_dim() const override { return profile_.text_dim; }
    int visual_dim() const override { return profile_.visual_dim; }
    int patch_size() const override { return profile_.patch; }
    int image_size() const override { return profile_.image_size; }
    std::vector<double> encode_text(const std::string& prompt) const override;
    VisualTokens encode_image(const Image& img) const override;
    VisualTokens encode_image_joint(const Image& img) const override;

    static Profile base_profile();
    static Profile large_profile();

private:
    Tensor load_entry(const std::string& file, int expect_cols) const;
    Profile profile_;
    std::string cache_dir_;
};

// backend key: mock | pretrained-base | pretrained-large. cache_dir falls
// back to $IA_CACHE_DIR for the pretrained profiles.
std::unique_ptr<EncoderBackend> make_backend(const std::string& key, std::uint64_t seed,
                                             const std::string& cache_dir = "",
                                             int mock_image_size = 64);

}  // namespace ia
