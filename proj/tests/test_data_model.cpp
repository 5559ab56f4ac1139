#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "ia/data_model.hpp"
#include "ia/fixtures.hpp"
#include "ia/formats.hpp"
#include "test_util.hpp"

using namespace ia;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
    auto p = fs::temp_directory_path() / (std::string("ia_dm_") + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

HOISample sample_640() {
    HOISample s;
    s.sample_id = "s0";
    s.image_path = "img.ppm";
    s.width = 640;
    s.height = 480;
    s.human_box = {10, 20, 200, 400};
    s.object_box = {300, 100, 420, 260};
    s.object_label = "bicycle";
    s.interaction_label = "ride";
    return s;
}

}  // namespace

TEST_CASE("load_dataset: empty file, one record, invariant violations") {
    const auto dir = temp_dir("load");
    const auto path = (dir / "m.jsonl").string();
    {
        std::ofstream out(path);
    }
    CHECK(load_dataset(path).empty());

    Dataset data;
    data.emplace_back(sample_640(), FixationSet{"s0", {{320, 240, "o1"}}});
    save_dataset(path, data);
    auto loaded = load_dataset(path);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].first.sample_id == "s0");
    CHECK(loaded[0].first.human_box == sample_640().human_box);

    // x2 < x1
    {
        std::ofstream out(path);
        out << R"({"sample_id":"bad","image_path":"i.ppm","width":640,"height":480,)"
            << R"("human_box":[200,20,10,400],"object_box":[300,100,420,260],)"
            << R"("object_label":"bicycle","interaction_label":"ride","fixations":[]})"
            << "\n";
    }
    CHECK_THROWS_AS(load_dataset(path), ValidationError);
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("bad"), ValidationError);

    // Malformed JSON names the line number.
    {
        std::ofstream out(path);
        out << "{}\n{not json\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("line 1"), ValidationError);
}

TEST_CASE("dataset round-trip reproduces samples exactly") {
    const auto dir = temp_dir("rt");
    auto corpus = make_fixture_corpus(12, 5, 99);
    const auto path = (dir / "m.jsonl").string();
    save_dataset(path, corpus.data);
    auto loaded = load_dataset(path);
    REQUIRE(loaded.size() == corpus.data.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].first.sample_id == corpus.data[i].first.sample_id);
        CHECK(loaded[i].first.human_box == corpus.data[i].first.human_box);
        CHECK(loaded[i].first.object_box == corpus.data[i].first.object_box);
        REQUIRE(loaded[i].second.points.size() == corpus.data[i].second.points.size());
        for (std::size_t k = 0; k < loaded[i].second.points.size(); ++k) {
            CHECK(loaded[i].second.points[k].x == corpus.data[i].second.points[k].x);
            CHECK(loaded[i].second.points[k].y == corpus.data[i].second.points[k].y);
        }
    }
}

TEST_CASE("fixations_to_heatmap: empty, single point, coincident points") {
    FixationSet empty{"e", {}};
    auto zeros = fixations_to_heatmap(empty, 32, 24, 5.0);
    CHECK(zeros.rows == 24);
    CHECK(zeros.cols == 32);
    for (double v : zeros.v) CHECK(v == 0.0);

    FixationSet center{"c", {{16, 12, "o1"}}};
    auto single = fixations_to_heatmap(center, 32, 24, 3.0);
    int argmax = 0;
    for (int i = 1; i < single.size(); ++i)
        if (single.v[i] > single.v[argmax]) argmax = i;
    CHECK(argmax == 12 * 32 + 16);
    CHECK(single.v[argmax] == 1.0);

    FixationSet twice{"t", {{9.5, 7.25, "o1"}, {9.5, 7.25, "o2"}}};
    FixationSet once{"o", {{9.5, 7.25, "o1"}}};
    auto m2 = fixations_to_heatmap(twice, 20, 20, 2.5);
    auto m1 = fixations_to_heatmap(once, 20, 20, 2.5);
    CHECK(m1.v == m2.v);

    CHECK_THROWS_AS(fixations_to_heatmap(once, 20, 20, 0.0), ValidationError);
}

TEST_CASE("heatmap oracle: brute-force gaussian sum") {
    FixationSet f{"g", {{3.0, 4.0, "a"}, {10.5, 2.0, "a"}, {7.0, 9.0, "b"}}};
    const double sigma = 2.0;
    auto m = fixations_to_heatmap(f, 14, 12, sigma);
    // Independent pixel-wise evaluation.
    std::vector<double> raw(12 * 14);
    double mx = 0;
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 14; ++x) {
            double s = 0;
            for (const auto& p : f.points)
                s += std::exp(-((x - p.x) * (x - p.x) + (y - p.y) * (y - p.y)) /
                              (2 * sigma * sigma));
            raw[y * 14 + x] = s;
            mx = std::max(mx, s);
        }
    for (int i = 0; i < m.size(); ++i)
        CHECK(m.v[i] == doctest::Approx(raw[i] / mx).epsilon(1e-12));
}

TEST_CASE("heatmap is permutation-invariant in fixation order") {
    SplitMix64 rng(7);
    FixationSet f{"p", {}};
    for (int i = 0; i < 7; ++i)
        f.points.push_back({rng.uniform(0, 30), rng.uniform(0, 20), "o"});
    auto a = fixations_to_heatmap(f, 30, 20, 3.0);
    std::reverse(f.points.begin(), f.points.end());
    auto b = fixations_to_heatmap(f, 30, 20, 3.0);
    for (int i = 0; i < a.size(); ++i) CHECK(a.v[i] == doctest::Approx(b.v[i]).epsilon(1e-12));
}

TEST_CASE("make_zeroshot_split: forced split, determinism, brute-force disjointness") {
    auto corpus = make_fixture_corpus(2, 2, 5);
    std::vector<HOISample> two{corpus.data[0].first, corpus.data[1].first};
    auto m = make_zeroshot_split(two, CategoryKey::interaction_pair, 3);
    CHECK(m.train_ids.size() == 1);
    CHECK(m.test_ids.size() == 1);

    auto corpus4 = make_fixture_corpus(4, 2, 6);
    std::vector<HOISample> four;
    for (auto& [s, f] : corpus4.data) four.push_back(s);
    auto m1 = make_zeroshot_split(four, CategoryKey::action_only, 42);
    auto m2 = make_zeroshot_split(four, CategoryKey::action_only, 42);
    CHECK(m1.train_ids == m2.train_ids);
    CHECK(m1.test_ids == m2.test_ids);

    auto corpus100 = make_fixture_corpus(100, 10, 7);
    std::vector<HOISample> hundred;
    for (auto& [s, f] : corpus100.data) hundred.push_back(s);
    auto big = make_zeroshot_split(hundred, CategoryKey::interaction_pair, 11);
    // Exhaustive category-set intersection.
    std::set<std::string> train_cats, test_cats;
    std::set<std::string> train_ids(big.train_ids.begin(), big.train_ids.end());
    for (const auto& s : hundred)
        (train_ids.count(s.sample_id) ? train_cats : test_cats)
            .insert(category_of(s, CategoryKey::interaction_pair));
    for (const auto& c : test_cats) CHECK(train_cats.count(c) == 0);
    CHECK(big.train_ids.size() + big.test_ids.size() == 100);

    // Single category: split error.
    auto corpus1 = make_fixture_corpus(3, 1, 8);
    std::vector<HOISample> one;
    for (auto& [s, f] : corpus1.data) one.push_back(s);
    CHECK_THROWS_AS(make_zeroshot_split(one, CategoryKey::interaction_pair, 1), ValidationError);
}

TEST_CASE("split property: disjoint categories for many seeds and corpora") {
    SplitMix64 rng(31337);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 5 + static_cast<int>(rng.below(40));
        const int k = 2 + static_cast<int>(rng.below(9));
        auto corpus = make_fixture_corpus(n, k, rng.next());
        std::vector<HOISample> samples;
        for (auto& [s, f] : corpus.data) samples.push_back(s);
        const auto key =
            trial % 2 == 0 ? CategoryKey::interaction_pair : CategoryKey::action_only;
        auto m = make_zeroshot_split(samples, key, rng.next());
        CHECK_NOTHROW(validate_split(samples, m));
        CHECK(m.train_ids.size() + m.test_ids.size() == samples.size());
        CHECK(!m.test_ids.empty());
        CHECK(!m.train_ids.empty());
    }
}

TEST_CASE("resize_map: worked example, identity, constants, properties") {
    AttentionMap m(4, 4);
    for (int i = 0; i < 16; ++i) m.v[i] = i + 1;
    auto pooled = resize_map(m, 2, 2, ResizeMode::adaptive_max);
    CHECK(pooled.v == std::vector<double>{6, 8, 14, 16});

    for (auto mode : {ResizeMode::bilinear, ResizeMode::adaptive_max}) {
        auto same = resize_map(m, 4, 4, mode);
        CHECK(same.v == m.v);
    }

    AttentionMap c(3, 5, 0.42);
    auto up = resize_map(c, 9, 11, ResizeMode::bilinear);
    for (double v : up.v) CHECK(v == doctest::Approx(0.42).epsilon(1e-15));

    // adaptive_max only emits source values and is monotone.
    SplitMix64 rng(3);
    auto a = test_util::random_map(rng, 9, 7);
    auto b = a;
    for (double& x : b.v) x += rng.u01();  // pointwise larger
    auto pa = resize_map(a, 4, 3, ResizeMode::adaptive_max);
    auto pb = resize_map(b, 4, 3, ResizeMode::adaptive_max);
    std::set<double> source_values(a.v.begin(), a.v.end());
    for (int i = 0; i < pa.size(); ++i) {
        CHECK(source_values.count(pa.v[i]) == 1);
        CHECK(pb.v[i] >= pa.v[i]);
    }

    CHECK_THROWS_AS(resize_map(m, 0, 2, ResizeMode::bilinear), ValidationError);
}

TEST_CASE("IGHM binary round trip and PNG export") {
    const auto dir = temp_dir("ighm");
    SplitMix64 rng(17);
    auto m = test_util::random_map(rng, 9, 13);
    const auto path = (dir / "m.ighm").string();
    save_heatmap_ighm(path, m);
    auto loaded = load_heatmap_ighm(path);
    CHECK(loaded.rows == 9);
    CHECK(loaded.cols == 13);
    for (int i = 0; i < m.size(); ++i)
        CHECK(loaded.v[i] == doctest::Approx(m.v[i]).epsilon(1e-7));

    // Byte-exact header: magic + LE dims.
    std::ifstream in(path, std::ios::binary);
    char head[12];
    in.read(head, 12);
    CHECK(std::string(head, 4) == "IGHM");
    CHECK(static_cast<unsigned char>(head[4]) == 9);
    CHECK(static_cast<unsigned char>(head[8]) == 13);

    save_heatmap_png((dir / "m.png").string(), m);
    CHECK(fs::file_size(dir / "m.png") > 60);

    // Serialization is deterministic byte for byte.
    save_heatmap_ighm((dir / "m2.ighm").string(), m);
    CHECK(file_content_hash(path) == file_content_hash((dir / "m2.ighm").string()));
}

TEST_CASE("split manifest JSON round trip") {
    const auto dir = temp_dir("split");
    SplitManifest m;
    m.train_ids = {"a", "b"};
    m.test_ids = {"c"};
    m.category_key = CategoryKey::action_only;
    m.seed = 77;
    const auto path = (dir / "split.json").string();
    save_split(path, m);
    auto loaded = load_split(path);
    CHECK(loaded.train_ids == m.train_ids);
    CHECK(loaded.test_ids == m.test_ids);
    CHECK(loaded.category_key == m.category_key);
    CHECK(loaded.seed == 77);
}

TEST_CASE("default sigma scales linearly with width") {
    CHECK(default_sigma(640) == doctest::Approx(19.0));
    CHECK(default_sigma(320) == doctest::Approx(9.5));
    CHECK(default_sigma(64) == doctest::Approx(1.9));
}

TEST_CASE("fixation bounds are validated") {
    auto s = sample_640();
    FixationSet f{"s0", {{1000, 10, "o"}}};
    CHECK_THROWS_AS(validate_fixations(s, f), ValidationError);
}
