#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "ia/fixtures.hpp"
#include "ia/hoi_alignment.hpp"
#include "test_util.hpp"

using namespace ia;
namespace fs = std::filesystem;

TEST_CASE("alignment_loss: perfect match, uniform half, composed pooling oracle") {
    // Probe map already equal to the pooled target: tiny loss.
    AttentionMap target(4, 4);
    target.v = {1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0};
    AttentionMap pooled = resize_map(target, 2, 2, ResizeMode::adaptive_max);
    CHECK(alignment_loss(pooled, target) <= 1e-5);

    // Uniform 0.5 probe: ln 2 regardless of the target.
    AttentionMap half(2, 2, 0.5);
    CHECK(alignment_loss(half, target) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    AttentionMap other_target(8, 8);
    other_target.v[5] = 1.0;
    other_target.v[40] = 0.7;
    CHECK(alignment_loss(half, other_target) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // Composed oracle: the worked 4×4→2×2 adaptive-max example feeding BCE.
    AttentionMap worked(4, 4);
    for (int i = 0; i < 16; ++i) worked.v[i] = (i + 1) / 16.0;  // max-normalized
    AttentionMap probe(2, 2);
    probe.v = {0.2, 0.9, 0.4, 0.7};
    // Pooled target is [[6,8],[14,16]]/16.
    const double pooled_t[4] = {6 / 16.0, 8 / 16.0, 14 / 16.0, 16 / 16.0};
    // min-max of the probe: (v - 0.2) / 0.7
    double expect = 0.0;
    constexpr double eps = 1e-7;
    for (int i = 0; i < 4; ++i) {
        const double p = std::clamp((probe.v[i] - 0.2) / 0.7, eps, 1.0 - eps);
        expect += -(pooled_t[i] * std::log(p) + (1 - pooled_t[i]) * std::log(1 - p));
    }
    expect /= 4.0;
    CHECK(alignment_loss(probe, worked) == doctest::Approx(expect).epsilon(1e-9));

    // Target must be max-normalized.
    AttentionMap unnormalized(2, 2, 0.3);
    CHECK_THROWS_AS(alignment_loss(probe, unnormalized), ValidationError);
}

TEST_CASE("alignment_loss invariant to max-preserving target upsampling") {
    SplitMix64 rng(5);
    AttentionMap target(4, 4);
    for (double& v : target.v) v = rng.u01();
    max_normalize(target);
    AttentionMap probe = test_util::random_map(rng, 2, 2);

    // Nearest-neighbour 2x upsample preserves per-bin maxima.
    AttentionMap doubled(8, 8);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) doubled.at(r, c) = target.at(r / 2, c / 2);
    CHECK(alignment_loss(probe, target) ==
          doctest::Approx(alignment_loss(probe, doubled)).epsilon(1e-12));
}

TEST_CASE("combined_loss is exact linear combination") {
    AlignmentConfig cfg;
    cfg.lambda1 = 1.0;
    cfg.lambda2 = 10.0;
    CHECK(combined_loss(0.5, 0.1, cfg) == doctest::Approx(1.5).epsilon(1e-15));

    cfg.lambda2 = 0.0;
    CHECK(combined_loss(0.7, 123.0, cfg) == doctest::Approx(0.7).epsilon(1e-15));

    cfg.lambda1 = 2.0;
    cfg.lambda2 = 6.0;
    SplitMix64 rng(3);
    for (int t = 0; t < 10; ++t) {
        const double a = rng.uniform(0, 2), b = rng.uniform(0, 2);
        CHECK(combined_loss(a, b, cfg) == 2.0 * a + 6.0 * b);
    }

    cfg.lambda1 = -1.0;
    CHECK_THROWS_AS(combined_loss(1, 1, cfg), ValidationError);
}

TEST_CASE("pseudo_label: empty dataset, determinism, leakage guard") {
    auto corpus = make_fixture_corpus(3, 2, 21);
    MockBackend backend(21, 64, 16, 64);
    IAConfig cfg = IAConfig::desk();
    IAModel model = IAModel::init(cfg, 21);
    TrainConfig tc;
    tc.seed = 21;

    const auto dir = fs::temp_directory_path() / "ia_pseudo_test";
    fs::create_directories(dir);
    const std::string path = (dir / "ck.iackpt").string();
    CheckpointMeta meta;
    meta.train_ids = {"train-a", "train-b"};
    save_model_checkpoint(path, model, tc, nullptr, meta);

    LoadedCheckpoint ckpt = load_model_checkpoint(path);
    Dataset empty;
    std::vector<Image> no_images;
    CHECK(pseudo_label(ckpt, empty, no_images, backend).empty());

    auto maps1 = pseudo_label(ckpt, corpus.data, corpus.images, backend);
    auto maps2 = pseudo_label(ckpt, corpus.data, corpus.images, backend);
    REQUIRE(maps1.size() == 3);
    for (const auto& [id, m] : maps1) CHECK(m.v == maps2.at(id).v);

    // One shared id triggers the leakage error.
    Dataset leaky = corpus.data;
    leaky[1].first.sample_id = "train-b";
    CHECK_THROWS_WITH_AS(pseudo_label(ckpt, leaky, corpus.images, backend),
                         doctest::Contains("train-b"), LeakageError);
}

TEST_CASE("toy dataset: planted cues are deterministic and labeled") {
    auto a = make_toy_dataset(6, 9);
    auto b = make_toy_dataset(6, 9);
    REQUIRE(a.size() == 6);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image.pixels == b[i].image.pixels);
        CHECK(a[i].label == b[i].label);
        CHECK(a[i].label >= 0);
        CHECK(a[i].label < 4);
        double mask_sum = 0;
        for (double v : a[i].cue_mask.v) mask_sum += v;
        CHECK(mask_sum == 144.0);  // 12×12 cue
        CHECK(is_max_normalized(a[i].cue_mask));
    }
}

TEST_CASE("toy model: probe rows are softmax-normalized and non-negative") {
    auto data = make_toy_dataset(2, 33);
    ToyHOIModel model = ToyHOIModel::init(33);
    ad::Tape t;
    auto built = model.build(t, data[0].image);
    CHECK(built.logits->val.cols == 4);
    // The probe map averages softmax rows: non-negative, sums to 1.
    double sum = 0;
    for (double v : built.attn_map->val.d) {
        CHECK(v >= 0.0);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(built.attn_map->val.rows == ToyHOIModel::kGrid);

    auto probe = model.attention_map(data[0].image);
    CHECK(probe.rows == 8);
    CHECK(probe.cols == 8);
}

TEST_CASE("toy gradient check through the alignment branch") {
    auto data = make_toy_dataset(1, 41);
    ToyHOIModel model = ToyHOIModel::init(41);
    // Spread the cross-attention scores: at fresh init the 64 attention
    // values are nearly uniform and the min-max picks flip under the
    // finite-difference probes.
    for (double& x : model.store.at("dec.l1.cross.q.w").value.d) x *= 6.0;
    for (double& x : model.store.at("dec.l1.cross.k.w").value.d) x *= 6.0;
    const AttentionMap pooled =
        resize_map(data[0].cue_mask, ToyHOIModel::kGrid, ToyHOIModel::kGrid,
                   ResizeMode::adaptive_max);
    Tensor pooled_t(pooled.rows, pooled.cols);
    pooled_t.d = pooled.v;

    auto eval = [&] {
        ad::Tape t;
        auto built = model.build(t, data[0].image);
        auto l_raw = t.softmax_xent(built.logits, data[0].label);
        auto l_align = t.bce_mean(t.minmax_norm(built.attn_map), pooled_t);
        return t.add(t.scale(l_raw, 1.0), t.scale(l_align, 10.0))->val.d[0];
    };
    model.store.zero_grads();
    {
        ad::Tape t;
        auto built = model.build(t, data[0].image);
        auto l_raw = t.softmax_xent(built.logits, data[0].label);
        auto l_align = t.bce_mean(t.minmax_norm(built.attn_map), pooled_t);
        auto loss = t.add(t.scale(l_raw, 1.0), t.scale(l_align, 10.0));
        t.backward(loss);
        t.add_param_grads();
    }
    auto res = test_util::central_difference_check(model.store, eval);
    CAPTURE(res.worst_element);
    CHECK(res.worst_ratio < 1.0);
}

TEST_CASE("lambda2=0 toy run is bitwise the plain run") {
    auto all = make_toy_dataset(24, 55);
    std::vector<ToySample> train_set(all.begin(), all.begin() + 16);
    std::vector<ToySample> test_set(all.begin() + 16, all.end());
    ToyTrainConfig ttc;
    ttc.epochs = 4;

    AlignmentConfig plain;
    plain.source = AlignmentConfig::Source::none;
    plain.lambda2 = 0.0;
    auto r_plain = train_toy_hoi(train_set, test_set, plain, 5, ttc);

    AlignmentConfig zero_lambda;
    zero_lambda.source = AlignmentConfig::Source::human;
    zero_lambda.lambda2 = 0.0;
    auto r_zero = train_toy_hoi(train_set, test_set, zero_lambda, 5, ttc);

    CHECK(r_plain.params_hash == r_zero.params_hash);
    CHECK(r_plain.test_accuracy == r_zero.test_accuracy);
    CHECK(r_plain.epoch_loss == r_zero.epoch_loss);

    AlignmentConfig aligned = zero_lambda;
    aligned.lambda2 = 4.0;
    auto r_aligned = train_toy_hoi(train_set, test_set, aligned, 5, ttc);
    CHECK(r_aligned.params_hash != r_plain.params_hash);
    CHECK(r_aligned.in_mask_fraction > r_plain.in_mask_fraction);
}

TEST_CASE("ia_pseudo source requires targets and uses them") {
    auto all = make_toy_dataset(8, 66);
    std::vector<ToySample> train_set(all.begin(), all.begin() + 6);
    std::vector<ToySample> test_set(all.begin() + 6, all.end());
    AlignmentConfig cfg;
    cfg.source = AlignmentConfig::Source::ia_pseudo;
    cfg.lambda2 = 2.0;
    ToyTrainConfig ttc;
    ttc.epochs = 1;
    CHECK_THROWS_AS(train_toy_hoi(train_set, test_set, cfg, 1, ttc, nullptr), ValidationError);

    std::map<std::string, AttentionMap> pseudo;
    for (const auto& s : train_set) pseudo[s.id] = s.cue_mask;
    CHECK_NOTHROW(train_toy_hoi(train_set, test_set, cfg, 1, ttc, &pseudo));

    pseudo.erase(train_set[0].id);
    CHECK_THROWS_WITH_AS(train_toy_hoi(train_set, test_set, cfg, 1, ttc, &pseudo),
                         doctest::Contains(train_set[0].id.c_str()), ValidationError);
}
