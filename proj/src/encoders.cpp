#include "ia/encoders.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "ia/common.hpp"
#include "ia/formats.hpp"

namespace ia {

namespace {

std::string spaces_for_underscores(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (c == '_') c = ' ';
    return out;
}

void l2_normalize(std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-12) {
        v.assign(v.size(), 0.0);
        if (!v.empty()) v[0] = 1.0;
        return;
    }
    for (double& x : v) x /= n;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

}  // namespace

VisualTokens EncoderBackend::encode_image_joint(const Image& img) const {
    if (visual_dim() != text_dim())
        throw RuntimeFailure("backend " + name() +
                             ": no joint-space tokens available (visual_dim != text_dim)");
    return encode_image(img);
}

Prompts build_prompts(const std::string& object_label, const std::string& interaction_label) {
    if (object_label.empty() || interaction_label.empty())
        throw ValidationError("build_prompts: labels must be non-empty");
    Prompts p;
    p.human = "person";
    p.object = spaces_for_underscores(object_label);
    p.interaction =
        "a photo of a person " + spaces_for_underscores(interaction_label) + " " + p.object;
    return p;
}

TextTriplet encode_triplet(const EncoderBackend& b, const std::string& object_label,
                           const std::string& interaction_label) {
    const Prompts p = build_prompts(object_label, interaction_label);
    TextTriplet t;
    try {
        t.t_human = b.encode_text(p.human);
        t.t_object = b.encode_text(p.object);
        t.t_interaction = b.encode_text(p.interaction);
    } catch (const std::exception& e) {
        throw RuntimeFailure("encoder backend '" + b.name() + "' failed: " + e.what());
    }
    return t;
}

std::vector<double> mock_encode(std::uint64_t seed, const std::string& prompt, int dim) {
    if (dim <= 0) throw ValidationError("mock_encode: dim must be positive");
    SplitMix64 rng(fnv1a64(prompt) ^ seed);
    std::vector<double> v(dim);
    for (double& x : v) x = 2.0 * rng.u01() - 1.0;
    l2_normalize(v);
    return v;
}

AttentionMap clip_similarity_map(const EncoderBackend& b, const Image& img,
                                 const std::string& prompt) {
    const std::vector<double> text = b.encode_text(prompt);
    const VisualTokens vt = b.encode_image_joint(img);
    const int m = vt.tokens.rows;
    const int d = vt.tokens.cols;
    if (static_cast<int>(text.size()) != d)
        throw RuntimeFailure("similarity map: text/visual dimension mismatch");
    AttentionMap out(vt.grid_rows, vt.grid_cols);
    for (int i = 0; i < m; ++i) {
        double dot = 0.0, nv = 0.0;
        for (int j = 0; j < d; ++j) {
            dot += vt.tokens.at(i, j) * text[j];
            nv += vt.tokens.at(i, j) * vt.tokens.at(i, j);
        }
        out.v[i] = nv > 0.0 ? dot / std::sqrt(nv) : 0.0;  // text is unit norm
    }
    double mn = out.v[0], mx = out.v[0];
    for (double x : out.v) {
        mn = std::min(mn, x);
        mx = std::max(mx, x);
    }
    if (mx - mn <= 0.0) {
        for (double& x : out.v) x = 0.0;
        return out;
    }
    for (double& x : out.v) x = (x - mn) / (mx - mn);
    return out;
}

std::vector<double> MockBackend::encode_text(const std::string& prompt) const {
    return mock_encode(seed_, prompt, dims_);
}

VisualTokens MockBackend::encode_image(const Image& img) const {
    if (img.width <= 0 || img.height <= 0) throw ValidationError("encode_image: empty image");
    const Image resized = (img.width == img_size_ && img.height == img_size_)
                              ? img
                              : resize_image(img, img_size_, img_size_);
    const int grid = img_size_ / patch_;
    if (grid * patch_ != img_size_)
        throw ValidationError("mock backend: image size not divisible by patch size");
    VisualTokens vt;
    vt.grid_rows = grid;
    vt.grid_cols = grid;
    vt.tokens = Tensor(grid * grid, dims_);
    for (int gy = 0; gy < grid; ++gy) {
        for (int gx = 0; gx < grid; ++gx) {
            // Keyed hash over the raw patch bytes plus the patch index, so
            // tokens are content- and position-dependent but deterministic.
            std::uint64_t h = fnv1a64("patch");
            const int idx = gy * grid + gx;
            h = fnv1a64(&idx, sizeof idx, h);
            for (int py = 0; py < patch_; ++py) {
                const std::uint8_t* row =
                    resized.pixels.data() +
                    (static_cast<std::size_t>(gy * patch_ + py) * img_size_ +
                     static_cast<std::size_t>(gx) * patch_) *
                        resized.channels;
                h = fnv1a64(row, static_cast<std::size_t>(patch_) * resized.channels, h);
            }
            SplitMix64 rng(h ^ seed_);
            for (int j = 0; j < dims_; ++j) vt.tokens.at(idx, j) = 2.0 * rng.u01() - 1.0;
        }
    }
    return vt;
}

CachedClipBackend::CachedClipBackend(const Profile& profile, std::string cache_dir)
    : profile_(profile), cache_dir_(std::move(cache_dir)) {
    if (cache_dir_.empty()) {
        if (const char* env = std::getenv("IA_CACHE_DIR")) cache_dir_ = env;
    }
    if (cache_dir_.empty())
        throw ValidationError("backend " + profile_.name +
                              " needs a feature cache; set --cache-dir or IA_CACHE_DIR");
    if (!std::filesystem::is_directory(cache_dir_))
        throw ValidationError("feature cache directory not found: " + cache_dir_);
}

CachedClipBackend::Profile CachedClipBackend::base_profile() {
    return {"pretrained-base", 512, 768, 16, 224};
}

CachedClipBackend::Profile CachedClipBackend::large_profile() {
    return {"pretrained-large", 768, 1024, 14, 224};
}

Tensor CachedClipBackend::load_entry(const std::string& file, int expect_cols) const {
    const std::string path = (std::filesystem::path(cache_dir_) / file).string();
    if (!std::filesystem::exists(path))
        throw ValidationError("backend " + profile_.name + ": missing cached feature " + path +
                              "; export it with tools/export_clip_features.py");
    auto tensors = load_tensor_file(path);
    if (tensors.size() != 1)
        throw ValidationError("feature file must hold exactly one tensor: " + path);
    if (tensors[0].t.cols != expect_cols)
        throw ValidationError("feature width mismatch in " + path + ": got " +
                              std::to_string(tensors[0].t.cols) + ", want " +
                              std::to_string(expect_cols));
    return tensors[0].t;
}

std::vector<double> CachedClipBackend::encode_text(const std::string& prompt) const {
    Tensor t = load_entry("text_" + hex64(fnv1a64(prompt)) + ".igts", profile_.text_dim);
    if (t.rows != 1) throw ValidationError("text feature must be a single row");
    std::vector<double> v = t.d;
    l2_normalize(v);
    return v;
}

VisualTokens CachedClipBackend::encode_image(const Image& img) const {
    const Image resized = (img.width == profile_.image_size && img.height == profile_.image_size)
                              ? img
                              : resize_image(img, profile_.image_size, profile_.image_size);
    Tensor t = load_entry("img_" + hex64(image_content_hash(resized)) + ".igts",
                          profile_.visual_dim);
    const int grid = profile_.image_size / profile_.patch;
    if (t.rows != grid * grid)
        throw ValidationError("cached image tokens have wrong count: expected " +
                              std::to_string(grid * grid));
    VisualTokens vt;
    vt.grid_rows = grid;
    vt.grid_cols = grid;
    vt.tokens = std::move(t);
    return vt;
}

VisualTokens CachedClipBackend::encode_image_joint(const Image& img) const {
    const Image resized = (img.width == profile_.image_size && img.height == profile_.image_size)
                              ? img
                              : resize_image(img, profile_.image_size, profile_.image_size);
    Tensor t = load_entry("img_" + hex64(image_content_hash(resized)) + "_joint.igts",
                          profile_.text_dim);
    const int grid = profile_.image_size / profile_.patch;
    if (t.rows != grid * grid)
        throw ValidationError("cached joint tokens have wrong count: expected " +
                              std::to_string(grid * grid));
    VisualTokens vt;
    vt.grid_rows = grid;
    vt.grid_cols = grid;
    vt.tokens = std::move(t);
    return vt;
}

std::unique_ptr<EncoderBackend> make_backend(const std::string& key, std::uint64_t seed,
                                             const std::string& cache_dir, int mock_image_size) {
    if (key == "mock") return std::make_unique<MockBackend>(seed, 64, 16, mock_image_size);
    if (key == "pretrained-base")
        return std::make_unique<CachedClipBackend>(CachedClipBackend::base_profile(), cache_dir);
    if (key == "pretrained-large")
        return std::make_unique<CachedClipBackend>(CachedClipBackend::large_profile(), cache_dir);
    throw ValidationError("unknown encoder backend: " + key +
                          " (expected mock, pretrained-base or pretrained-large)");
}

}  // namespace ia
