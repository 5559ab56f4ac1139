#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ia/common.hpp"

namespace ia {

// One image with one human-object pair. Boxes are absolute pixel
// coordinates (x1,y1,x2,y2); they are normalized to [0,1] only at the
// positional-adapter input.
struct HOISample {
    std::string sample_id;
    std::string image_path;
    int width = 0;
    int height = 0;
    std::array<double, 4> human_box{};
    std::array<double, 4> object_box{};
    std::string object_label;
    std::string interaction_label;
};

struct FixPoint {
    double x = 0.0;
    double y = 0.0;
    std::string observer_id;
};

// Click-simulated gaze fixations for one sample. May be empty only for
// unlabeled samples; training-set validation rejects empty sets.
struct FixationSet {
    std::string sample_id;
    std::vector<FixPoint> points;
};

// Dense heatmap, row-major. Values are doubles in memory; the IGHM file
// format stores 32-bit floats.
struct AttentionMap {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    AttentionMap() = default;
    AttentionMap(int r, int c, double fill = 0.0)
        : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    int size() const { return rows * cols; }
};

enum class CategoryKey { interaction_pair, action_only };

std::string to_string(CategoryKey k);
CategoryKey category_key_from_string(const std::string& s);

// Train/test partition whose category sets are disjoint under the key.
struct SplitManifest {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    CategoryKey category_key = CategoryKey::interaction_pair;
    std::uint64_t seed = 0;
};

using Dataset = std::vector<std::pair<HOISample, FixationSet>>;

void validate_sample(const HOISample& s);
void validate_fixations(const HOISample& s, const FixationSet& f);

// JSON-lines manifest, one object per sample. Preserves file order.
Dataset load_dataset(const std::string& manifest_path);
void save_dataset(const std::string& manifest_path, const Dataset& data);

// Sum of isotropic Gaussians at the fixation points, sampled at integer
// pixel centers, then max-normalized. Empty set gives an all-zeros map.
AttentionMap fixations_to_heatmap(const FixationSet& f, int width, int height, double sigma);

// 19 px at 640 px width, scaled linearly.
double default_sigma(int width);

std::string category_of(const HOISample& s, CategoryKey key);

// Deterministic per seed. The test side receives ceil(test_fraction * K)
// of the K categories; samples follow their category.
SplitManifest make_zeroshot_split(const std::vector<HOISample>& samples, CategoryKey key,
                                  std::uint64_t seed, double test_fraction = 0.2);
void validate_split(const std::vector<HOISample>& samples, const SplitManifest& m);

enum class ResizeMode { bilinear, adaptive_max };

AttentionMap resize_map(const AttentionMap& m, int rows, int cols, ResizeMode mode);

void max_normalize(AttentionMap& m);
bool is_max_normalized(const AttentionMap& m, double tol = 1e-6);
// Non-negative values scaled to sum 1; throws on negatives or zero sum.
std::vector<double> sum_normalized(const AttentionMap& m);

}  // namespace ia
