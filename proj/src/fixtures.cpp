#include "ia/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace ia {

namespace {

const char* kActions[] = {"ride", "eat",  "hold",  "fly",  "kick",
                          "push", "cut",  "throw", "wash", "carry"};
const char* kObjects[] = {"bicycle", "apple", "kite",    "ball", "surfboard",
                          "dog",     "knife", "frisbee", "car",  "cup"};

struct Rect {
    int x, y, w, h;
};

Rect random_rect(SplitMix64& rng, int img, int min_side, int max_side) {
    const int w = min_side + static_cast<int>(rng.below(max_side - min_side + 1));
    const int h = min_side + static_cast<int>(rng.below(max_side - min_side + 1));
    const int x = static_cast<int>(rng.below(img - w));
    const int y = static_cast<int>(rng.below(img - h));
    return {x, y, w, h};
}

void fill_rect(Image& im, const Rect& r, std::uint8_t cr, std::uint8_t cg, std::uint8_t cb,
               SplitMix64& rng) {
    for (int y = r.y; y < r.y + r.h; ++y)
        for (int x = r.x; x < r.x + r.w; ++x) {
            const int jitter = static_cast<int>(rng.below(21)) - 10;
            im.at(y, x, 0) = static_cast<std::uint8_t>(std::clamp(cr + jitter, 0, 255));
            im.at(y, x, 1) = static_cast<std::uint8_t>(std::clamp(cg + jitter, 0, 255));
            im.at(y, x, 2) = static_cast<std::uint8_t>(std::clamp(cb + jitter, 0, 255));
        }
}

}  // namespace

FixtureCorpus make_fixture_corpus(int n_samples, int n_categories, std::uint64_t seed,
                                  const FixtureOptions& opts) {
    if (n_samples < 1 || n_categories < 1)
        throw ValidationError("fixture corpus: need at least one sample and category");
    if (n_categories > 100) throw ValidationError("fixture corpus: at most 100 categories");
    FixtureCorpus out;
    SplitMix64 rng(mix64(seed ^ 0xf17e5eedc0ffee00ULL));
    const int img = opts.image_size;
    for (int i = 0; i < n_samples; ++i) {
        const int cat = i % n_categories;
        HOISample s;
        s.sample_id = "fix-" + std::to_string(i);
        s.image_path = "images/" + s.sample_id + ".ppm";
        s.width = img;
        s.height = img;
        s.interaction_label = kActions[cat % 10];
        s.object_label = kObjects[cat / 10];

        Image im;
        im.width = img;
        im.height = img;
        im.channels = 3;
        im.pixels.resize(static_cast<std::size_t>(img) * img * 3);
        for (int y = 0; y < img; ++y)
            for (int x = 0; x < img; ++x) {
                const int base = 60 + (y * 60) / img + static_cast<int>(rng.below(16));
                im.at(y, x, 0) = static_cast<std::uint8_t>(base);
                im.at(y, x, 1) = static_cast<std::uint8_t>(base + 10);
                im.at(y, x, 2) = static_cast<std::uint8_t>(base + 20);
            }

        const Rect human = random_rect(rng, img, img / 4, img / 3 + img / 8);
        fill_rect(im, human, 205, 160, 120, rng);
        Rect object = random_rect(rng, img, img / 6, img / 4);
        // Object color keyed by category so appearance tracks the label.
        const std::uint64_t ch = mix64(static_cast<std::uint64_t>(cat) + 17);
        fill_rect(im, object, static_cast<std::uint8_t>(80 + (ch & 0x7f)),
                  static_cast<std::uint8_t>(80 + ((ch >> 8) & 0x7f)),
                  static_cast<std::uint8_t>(80 + ((ch >> 16) & 0x7f)), rng);

        s.human_box = {static_cast<double>(human.x), static_cast<double>(human.y),
                       static_cast<double>(human.x + human.w),
                       static_cast<double>(human.y + human.h)};
        s.object_box = {static_cast<double>(object.x), static_cast<double>(object.y),
                        static_cast<double>(object.x + object.w),
                        static_cast<double>(object.y + object.h)};

        // Fixations cluster where hand would meet object: midpoint of the two
        // blob centers plus jitter.
        const double hx = human.x + human.w / 2.0, hy = human.y + human.h / 2.0;
        const double ox = object.x + object.w / 2.0, oy = object.y + object.h / 2.0;
        double cx = (hx + ox) / 2.0, cy = (hy + oy) / 2.0;
        if (opts.snap_to_patch_grid > 0) {
            const int p = opts.snap_to_patch_grid;
            const int cells = img / p;
            auto snap = [&](double c) {
                int k = static_cast<int>(std::lround((c + 0.5) / p - 0.5));
                k = std::clamp(k, 0, cells - 1);
                return p * (k + 0.5) - 0.5;
            };
            cx = snap(cx);
            cy = snap(cy);
        }
        FixationSet f;
        f.sample_id = s.sample_id;
        for (int o = 0; o < opts.observers; ++o) {
            for (int k = 0; k < opts.points_per_observer; ++k) {
                FixPoint p;
                p.x = std::clamp(cx + opts.cluster_jitter * rng.normal(), 0.0,
                                 static_cast<double>(img));
                p.y = std::clamp(cy + opts.cluster_jitter * rng.normal(), 0.0,
                                 static_cast<double>(img));
                p.observer_id = "obs-" + std::to_string(o);
                f.points.push_back(std::move(p));
            }
        }
        validate_sample(s);
        validate_fixations(s, f);
        out.data.emplace_back(std::move(s), std::move(f));
        out.images.push_back(std::move(im));
    }
    return out;
}

std::string write_fixture_corpus(const std::string& dir, const FixtureCorpus& corpus) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "images");
    for (std::size_t i = 0; i < corpus.data.size(); ++i) {
        const auto& s = corpus.data[i].first;
        save_ppm((fs::path(dir) / s.image_path).string(), corpus.images[i]);
    }
    const std::string manifest = (fs::path(dir) / "manifest.jsonl").string();
    save_dataset(manifest, corpus.data);
    return manifest;
}

}  // namespace ia
