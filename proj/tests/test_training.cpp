#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "ia/fixtures.hpp"
#include "ia/training.hpp"

using namespace ia;
namespace fs = std::filesystem;

namespace {

struct TrainWorld {
    FixtureCorpus corpus;
    MockBackend backend;
    IAConfig cfg;
    TrainConfig tc;
    TrainOptions opts;

    explicit TrainWorld(int n_samples, std::uint64_t seed)
        : corpus(make_fixture_corpus(n_samples, 2, seed)), backend(seed, 64, 16, 64) {
        cfg = IAConfig::desk();
        tc.seed = seed;
        tc.epochs = 3;
        tc.batch_size = 2;
        tc.lr = 1e-3;
        opts.sigma = 6.0;
    }
};

std::uint64_t params_digest(const IAModel& m) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const auto& p : m.store.params())
        h = fnv1a64(p->value.d.data(), p->value.d.size() * sizeof(double), h);
    for (const auto& [name, t] : m.store.buffers())
        h = fnv1a64(t->d.data(), t->d.size() * sizeof(double), h);
    return h;
}

}  // namespace

TEST_CASE("train config validation") {
    TrainConfig tc;
    tc.epochs = 0;
    CHECK_THROWS_AS(tc.validate(), ValidationError);
    tc = TrainConfig{};
    tc.lr = 0.0;
    CHECK_THROWS_AS(tc.validate(), ValidationError);
    tc = TrainConfig{};
    tc.lr_decay_factor = 1.0;
    CHECK_THROWS_AS(tc.validate(), ValidationError);
    tc = TrainConfig{};
    CHECK_NOTHROW(tc.validate());
    CHECK(TrainConfig::from_json(tc.to_json()).to_json() == tc.to_json());
}

TEST_CASE("learning rate schedule follows the closed form") {
    TrainConfig tc;
    tc.lr = 1e-4;
    tc.lr_decay_every = 20;
    tc.lr_decay_factor = 10.0;
    for (int e = 0; e < 85; ++e) {
        const double expect = 1e-4 / std::pow(10.0, static_cast<double>(e / 20));
        CHECK(lr_at_epoch(tc, e) == expect);
    }
    CHECK(lr_at_epoch(tc, 0) == 1e-4);
    CHECK(lr_at_epoch(tc, 19) == 1e-4);
    CHECK(lr_at_epoch(tc, 20) == doctest::Approx(1e-5).epsilon(1e-15));
    CHECK(lr_at_epoch(tc, 80) == doctest::Approx(1e-8).epsilon(1e-15));
}

TEST_CASE("training rejects empty datasets and fixation-free samples") {
    TrainWorld w(2, 1);
    IAModel model = IAModel::init(w.cfg, 1);
    AdamState adam = AdamState::for_model(model);
    Dataset empty;
    std::vector<Image> no_images;
    CHECK_THROWS_AS(train(model, empty, no_images, w.backend, w.tc, adam, w.opts),
                    ValidationError);

    Dataset data = w.corpus.data;
    data[0].second.points.clear();
    CHECK_THROWS_WITH_AS(train(model, data, w.corpus.images, w.backend, w.tc, adam, w.opts),
                         doctest::Contains("fix-0"), ValidationError);
}

TEST_CASE("same seed twice gives identical loss logs and parameters") {
    TrainWorld w(4, 7);
    IAModel m1 = IAModel::init(w.cfg, w.tc.seed);
    AdamState a1 = AdamState::for_model(m1);
    auto r1 = train(m1, w.corpus.data, w.corpus.images, w.backend, w.tc, a1, w.opts);

    IAModel m2 = IAModel::init(w.cfg, w.tc.seed);
    AdamState a2 = AdamState::for_model(m2);
    auto r2 = train(m2, w.corpus.data, w.corpus.images, w.backend, w.tc, a2, w.opts);

    REQUIRE(r1.log.size() == r2.log.size());
    for (std::size_t i = 0; i < r1.log.size(); ++i) {
        CHECK(r1.log[i].mean_loss == r2.log[i].mean_loss);
        CHECK(r1.log[i].lr == r2.log[i].lr);
    }
    CHECK(params_digest(m1) == params_digest(m2));
}

TEST_CASE("loss decreases on a small overfit run") {
    TrainWorld w(4, 3);
    w.tc.epochs = 40;
    w.tc.lr = 3e-3;
    IAModel model = IAModel::init(w.cfg, w.tc.seed);
    AdamState adam = AdamState::for_model(model);
    auto r = train(model, w.corpus.data, w.corpus.images, w.backend, w.tc, adam, w.opts);
    CHECK(r.log.back().mean_loss < r.log.front().mean_loss);
}

TEST_CASE("checkpoint round trip: resume equals uninterrupted bit for bit") {
    TrainWorld w(4, 11);
    w.tc.epochs = 4;

    // Uninterrupted run.
    IAModel full = IAModel::init(w.cfg, w.tc.seed);
    AdamState full_adam = AdamState::for_model(full);
    TrainConfig tc_full = w.tc;
    train(full, w.corpus.data, w.corpus.images, w.backend, tc_full, full_adam, w.opts);

    // Train 2 epochs, checkpoint, reload, train 2 more.
    IAModel part = IAModel::init(w.cfg, w.tc.seed);
    AdamState part_adam = AdamState::for_model(part);
    TrainConfig tc_part = w.tc;
    tc_part.epochs = 2;
    train(part, w.corpus.data, w.corpus.images, w.backend, tc_part, part_adam, w.opts);

    const auto dir = fs::temp_directory_path() / "ia_ckpt_test";
    fs::create_directories(dir);
    const std::string path = (dir / "ck.iackpt").string();
    CheckpointMeta meta;
    meta.seed = w.tc.seed;
    meta.epochs_done = 2;
    for (const auto& [s, f] : w.corpus.data) meta.train_ids.push_back(s.sample_id);
    save_model_checkpoint(path, part, tc_part, &part_adam, meta);

    LoadedCheckpoint resumed = load_model_checkpoint(path);
    CHECK(resumed.has_optimizer);
    CHECK(resumed.meta.epochs_done == 2);
    CHECK(resumed.meta.train_ids.size() == 4);
    TrainOptions resume_opts = w.opts;
    resume_opts.start_epoch = resumed.meta.epochs_done;
    TrainConfig tc_resume = resumed.train_config;
    tc_resume.epochs = 2;
    train(resumed.model, w.corpus.data, w.corpus.images, w.backend, tc_resume, resumed.adam,
          resume_opts);

    CHECK(params_digest(full) == params_digest(resumed.model));
    CHECK(full_adam.step == resumed.adam.step);
}

TEST_CASE("checkpoint loader rejects config mismatch and unknown tensors") {
    TrainWorld w(2, 13);
    IAModel model = IAModel::init(w.cfg, 13);
    const auto dir = fs::temp_directory_path() / "ia_ckpt_test2";
    fs::create_directories(dir);
    const std::string path = (dir / "ck.iackpt").string();
    save_model_checkpoint(path, model, w.tc, nullptr, {});

    IAConfig other = w.cfg;
    other.model_width = 64;
    CHECK_THROWS_AS(load_model_checkpoint(path, &other), ValidationError);
    CHECK_NOTHROW(load_model_checkpoint(path, &w.cfg));

    // A checkpoint written for an ablated config cannot load into the full one.
    IAConfig ablated = w.cfg;
    ablated.ablation = {"ICB"};
    IAModel small = IAModel::init(ablated, 1);
    const std::string path2 = (dir / "ck2.iackpt").string();
    save_model_checkpoint(path2, small, w.tc, nullptr, {});
    CHECK_THROWS_AS(load_model_checkpoint(path2, &w.cfg), ValidationError);
}

TEST_CASE("weight decay exclusions cover norms, biases, and the gate") {
    IAModel model = IAModel::init(IAConfig::desk(), 1);
    const auto excluded = decay_excluded_names(model.store);
    auto is_excluded = [&](const std::string& n) {
        return std::find(excluded.begin(), excluded.end(), n) != excluded.end();
    };
    for (const auto& p : model.store.params()) {
        const std::string& n = p->name;
        const bool should_skip = n.size() > 2 && (n.substr(n.size() - 2) == ".b") ||
                                 n.find("gamma") != std::string::npos ||
                                 n.find("beta") != std::string::npos || n == "icb.gate";
        CHECK(is_excluded(n) == should_skip);
    }
    CHECK(is_excluded("icb.gate"));
    CHECK(is_excluded("dec.bn.gamma"));
    CHECK(!is_excluded("vproj.w"));
}

TEST_CASE("adamw decoupled decay shrinks only decayed parameters") {
    nn::ParamStore ps;
    auto* w = ps.add("w", 1, 1, true);
    auto* b = ps.add("b", 1, 1, false);
    w->value.d[0] = 1.0;
    b->value.d[0] = 1.0;
    AdamState st = AdamState::for_store(ps);
    TrainConfig tc;
    tc.weight_decay = 0.25;
    // Zero gradients: the Adam term vanishes, only decay acts.
    adamw_step(ps, st, 0.1, tc);
    CHECK(w->value.d[0] == doctest::Approx(1.0 - 0.1 * 0.25).epsilon(1e-12));
    CHECK(b->value.d[0] == 1.0);
}

TEST_CASE("nan loss aborts with diagnostics") {
    TrainWorld w(2, 17);
    IAModel model = IAModel::init(w.cfg, 17);
    // Poison a post-ReLU parameter so NaN reaches the loss.
    model.store.at("dec.conv2.w").value.d[0] = std::numeric_limits<double>::quiet_NaN();
    AdamState adam = AdamState::for_model(model);
    CHECK_THROWS_WITH_AS(
        train(model, w.corpus.data, w.corpus.images, w.backend, w.tc, adam, w.opts),
        doctest::Contains("epoch"), RuntimeFailure);
}

TEST_CASE("ablation harness: five variants, census, degenerate list") {
    TrainWorld w(4, 19);
    w.tc.epochs = 2;
    auto rows = ablate(w.cfg, w.corpus.data, w.corpus.images, w.corpus.data, w.corpus.images,
                       w.backend, w.tc, kAblationVariants, w.opts);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].variant == "full");
    for (const auto& r : rows) CHECK(r.report.n_samples == 4);

    // The w/o ICB variant has no cross-attention parameters.
    IAConfig no_icb = w.cfg;
    no_icb.ablation = ablation_units_for_variant("w/o ICB");
    IAModel census_model = IAModel::init(no_icb, 1);
    CHECK_FALSE(census_model.has_cross_attention());

    CHECK_THROWS_AS(ablation_units_for_variant("w/o BRAIN"), ValidationError);

    // {full} alone equals a plain train+evaluate.
    auto only_full = ablate(w.cfg, w.corpus.data, w.corpus.images, w.corpus.data,
                            w.corpus.images, w.backend, w.tc, {"full"}, w.opts);
    REQUIRE(only_full.size() == 1);
    CHECK(only_full[0].report.cc == rows[0].report.cc);
    CHECK(only_full[0].report.kldiv == rows[0].report.kldiv);
}

TEST_CASE("deterministic shuffling differs across epochs but not runs") {
    std::vector<int> a{0, 1, 2, 3, 4, 5, 6, 7};
    auto b = a;
    shuffle_indices(a, 42, 0);
    shuffle_indices(b, 42, 0);
    CHECK(a == b);
    auto c = b;
    shuffle_indices(c, 42, 1);
    CHECK(c != b);
}
