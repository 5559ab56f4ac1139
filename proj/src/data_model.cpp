#include "ia/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ia/kernels.hpp"

namespace ia {

using nlohmann::json;

std::string to_string(CategoryKey k) {
    return k == CategoryKey::interaction_pair ? "interaction_pair" : "action_only";
}

CategoryKey category_key_from_string(const std::string& s) {
    if (s == "interaction_pair") return CategoryKey::interaction_pair;
    if (s == "action_only") return CategoryKey::action_only;
    throw ValidationError("unknown category key: " + s);
}

namespace {

void validate_box(const std::array<double, 4>& b, int w, int h, const std::string& id,
                  const char* which) {
    const auto [x1, y1, x2, y2] = b;
    if (!(x1 >= 0.0 && x1 < x2 && x2 <= w && y1 >= 0.0 && y1 < y2 && y2 <= h))
        throw ValidationError("sample " + id + ": " + which +
                              " box violates 0 <= x1 < x2 <= width, 0 <= y1 < y2 <= height");
    for (double v : b)
        if (!std::isfinite(v)) throw ValidationError("sample " + id + ": non-finite box coord");
}

std::array<double, 4> box_from_json(const json& j, const std::string& id) {
    if (!j.is_array() || j.size() != 4)
        throw ValidationError("sample " + id + ": box must be an array of 4 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

}  // namespace

void validate_sample(const HOISample& s) {
    if (s.sample_id.empty()) throw ValidationError("sample with empty sample_id");
    if (s.width <= 0 || s.height <= 0)
        throw ValidationError("sample " + s.sample_id + ": non-positive image dimensions");
    if (s.object_label.empty() || s.interaction_label.empty())
        throw ValidationError("sample " + s.sample_id + ": empty label");
    validate_box(s.human_box, s.width, s.height, s.sample_id, "human");
    validate_box(s.object_box, s.width, s.height, s.sample_id, "object");
}

void validate_fixations(const HOISample& s, const FixationSet& f) {
    for (const auto& p : f.points) {
        if (!(p.x >= 0.0 && p.x <= s.width && p.y >= 0.0 && p.y <= s.height) ||
            !std::isfinite(p.x) || !std::isfinite(p.y))
            throw ValidationError("sample " + s.sample_id + ": fixation point (" +
                                  std::to_string(p.x) + "," + std::to_string(p.y) +
                                  ") outside image bounds");
    }
}

Dataset load_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ValidationError("cannot open manifest: " + manifest_path);
    Dataset out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError("manifest " + manifest_path + " line " +
                                  std::to_string(lineno) + ": " + e.what());
        }
        HOISample s;
        FixationSet f;
        try {
            s.sample_id = j.at("sample_id").get<std::string>();
            s.image_path = j.at("image_path").get<std::string>();
            s.width = j.at("width").get<int>();
            s.height = j.at("height").get<int>();
            s.human_box = box_from_json(j.at("human_box"), s.sample_id);
            s.object_box = box_from_json(j.at("object_box"), s.sample_id);
            s.object_label = j.at("object_label").get<std::string>();
            s.interaction_label = j.at("interaction_label").get<std::string>();
            f.sample_id = s.sample_id;
            for (const auto& pj : j.at("fixations")) {
                FixPoint p;
                p.x = pj.at("x").get<double>();
                p.y = pj.at("y").get<double>();
                p.observer_id = pj.at("observer_id").get<std::string>();
                f.points.push_back(std::move(p));
            }
        } catch (const json::exception& e) {
            throw ValidationError("manifest " + manifest_path + " line " +
                                  std::to_string(lineno) + ": " + e.what());
        }
        validate_sample(s);
        validate_fixations(s, f);
        out.emplace_back(std::move(s), std::move(f));
    }
    return out;
}

void save_dataset(const std::string& manifest_path, const Dataset& data) {
    std::ofstream out(manifest_path);
    if (!out) throw RuntimeFailure("cannot write manifest: " + manifest_path);
    for (const auto& [s, f] : data) {
        json j;
        j["sample_id"] = s.sample_id;
        j["image_path"] = s.image_path;
        j["width"] = s.width;
        j["height"] = s.height;
        j["human_box"] = s.human_box;
        j["object_box"] = s.object_box;
        j["object_label"] = s.object_label;
        j["interaction_label"] = s.interaction_label;
        json fixations = json::array();
        for (const auto& p : f.points)
            fixations.push_back({{"x", p.x}, {"y", p.y}, {"observer_id", p.observer_id}});
        j["fixations"] = fixations;
        out << j.dump() << "\n";
    }
}

AttentionMap fixations_to_heatmap(const FixationSet& f, int width, int height, double sigma) {
    if (sigma <= 0.0) throw ValidationError("fixations_to_heatmap: sigma must be positive");
    if (width <= 0 || height <= 0)
        throw ValidationError("fixations_to_heatmap: non-positive dimensions");
    AttentionMap m(height, width);
    if (f.points.empty()) return m;
    std::vector<kern::Pt> pts(f.points.size());
    for (std::size_t i = 0; i < f.points.size(); ++i) pts[i] = {f.points[i].x, f.points[i].y};
    kern::gaussian_splat(pts.data(), static_cast<int>(pts.size()), sigma, m.v.data(), height,
                         width);
    max_normalize(m);
    return m;
}

double default_sigma(int width) { return 19.0 * static_cast<double>(width) / 640.0; }

std::string category_of(const HOISample& s, CategoryKey key) {
    if (key == CategoryKey::action_only) return s.interaction_label;
    return s.interaction_label + "\x1f" + s.object_label;
}

SplitManifest make_zeroshot_split(const std::vector<HOISample>& samples, CategoryKey key,
                                  std::uint64_t seed, double test_fraction) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ValidationError("test fraction must be in (0,1)");
    std::set<std::string> cat_set;
    for (const auto& s : samples) cat_set.insert(category_of(s, key));
    if (cat_set.size() < 2)
        throw ValidationError("zero-shot split needs at least 2 distinct categories, found " +
                              std::to_string(cat_set.size()));
    std::vector<std::string> cats(cat_set.begin(), cat_set.end());
    // Fisher-Yates over the sorted category list; independent of sample order.
    SplitMix64 rng(mix64(seed ^ 0x5a5a5a5a12345678ULL));
    for (std::size_t i = cats.size() - 1; i > 0; --i) {
        const std::size_t j = rng.below(i + 1);
        std::swap(cats[i], cats[j]);
    }
    const auto n_test = static_cast<std::size_t>(
        std::ceil(test_fraction * static_cast<double>(cats.size())));
    std::set<std::string> test_cats(cats.begin(), cats.begin() + std::min(n_test, cats.size() - 1));
    SplitManifest m;
    m.category_key = key;
    m.seed = seed;
    for (const auto& s : samples) {
        if (test_cats.count(category_of(s, key)))
            m.test_ids.push_back(s.sample_id);
        else
            m.train_ids.push_back(s.sample_id);
    }
    return m;
}

void validate_split(const std::vector<HOISample>& samples, const SplitManifest& m) {
    std::set<std::string> train(m.train_ids.begin(), m.train_ids.end());
    std::set<std::string> test(m.test_ids.begin(), m.test_ids.end());
    for (const auto& id : test)
        if (train.count(id)) throw ValidationError("split: sample " + id + " on both sides");
    std::set<std::string> train_cats, test_cats;
    for (const auto& s : samples) {
        if (train.count(s.sample_id)) train_cats.insert(category_of(s, m.category_key));
        if (test.count(s.sample_id)) test_cats.insert(category_of(s, m.category_key));
    }
    for (const auto& c : test_cats)
        if (train_cats.count(c))
            throw ValidationError("split: category present on both sides");
}

AttentionMap resize_map(const AttentionMap& m, int rows, int cols, ResizeMode mode) {
    if (rows <= 0 || cols <= 0) throw ValidationError("resize_map: target dims must be positive");
    if (m.rows <= 0 || m.cols <= 0) throw ValidationError("resize_map: empty source map");
    AttentionMap out(rows, cols);
    if (mode == ResizeMode::bilinear)
        kern::bilinear_resize(m.v.data(), m.rows, m.cols, out.v.data(), rows, cols);
    else
        kern::adaptive_max_pool(m.v.data(), m.rows, m.cols, out.v.data(), rows, cols, nullptr);
    return out;
}

void max_normalize(AttentionMap& m) {
    double mx = 0.0;
    for (double x : m.v) mx = std::max(mx, x);
    if (mx <= 0.0) return;
    for (double& x : m.v) x /= mx;
}

bool is_max_normalized(const AttentionMap& m, double tol) {
    double mx = 0.0, mn = 0.0;
    for (double x : m.v) {
        mx = std::max(mx, x);
        mn = std::min(mn, x);
    }
    return mn >= 0.0 && std::abs(mx - 1.0) <= tol;
}

std::vector<double> sum_normalized(const AttentionMap& m) {
    double sum = 0.0;
    for (double x : m.v) {
        if (x < 0.0) throw ValidationError("map has negative values; cannot sum-normalize");
        if (!std::isfinite(x)) throw ValidationError("map has non-finite values");
        sum += x;
    }
    if (sum <= 0.0) throw ValidationError("map sums to zero; cannot sum-normalize");
    std::vector<double> out(m.v);
    for (double& x : out) x /= sum;
    return out;
}

}  // namespace ia
