#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ia/data_model.hpp"
#include "ia/image_io.hpp"

namespace ia {

// Synthetic HOI scenes: a person-like blob, a category-colored object blob,
// and fixation clusters in the interaction region between them. Deterministic
// per seed; used as desk-scale stand-ins for real data.
struct FixtureCorpus {
    Dataset data;
    std::vector<Image> images;
};

struct FixtureOptions {
    int image_size = 64;
    int points_per_observer = 2;
    int observers = 3;
    double cluster_jitter = 2.0;
    // When > 0, snap each fixation cluster center to the nearest bilinear
    // knot of a patch grid with this patch size (knots at p*(k+0.5)-0.5), so
    // the target heatmaps are representable by the decoder's upsampled grid.
    int snap_to_patch_grid = 0;
};

FixtureCorpus make_fixture_corpus(int n_samples, int n_categories, std::uint64_t seed,
                                  const FixtureOptions& opts = {});

// Writes images/<id>.ppm plus manifest.jsonl under dir; returns the manifest
// path.
std::string write_fixture_corpus(const std::string& dir, const FixtureCorpus& corpus);

}  // namespace ia
