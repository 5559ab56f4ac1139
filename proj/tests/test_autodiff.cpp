#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ia/autodiff.hpp"
#include "ia/nn.hpp"
#include "test_util.hpp"

using namespace ia;

namespace {

Tensor random_tensor(SplitMix64& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
    Tensor t(r, c);
    for (double& x : t.d) x = rng.uniform(lo, hi);
    return t;
}

// Builds a scalar loss from a composite graph touching most ops, then checks
// analytic gradients of every parameter against central differences.
double run_composite(nn::ParamStore& ps, const Tensor& input, const Tensor& target,
                     bool accumulate_grads) {
    ad::Tape t;
    auto x = t.constant(input);
    auto w1 = t.param(ps.at("w1"));
    auto b1 = t.param(ps.at("b1"));
    auto gamma = t.param(ps.at("gamma"));
    auto beta = t.param(ps.at("beta"));
    auto gate = t.param(ps.at("gate"));
    auto w2 = t.param(ps.at("w2"));

    auto h = t.add_rowvec(t.matmul(x, w1), b1);              // 6×8
    h = t.layer_norm(h, gamma, beta);
    h = t.gelu(h);
    auto attn = t.softmax_rows(t.scale(t.matmul_nt(h, h), 0.35));  // 6×6
    auto mixed = t.matmul(attn, h);                                 // 6×8
    mixed = t.mul_rowvec(mixed, gate);
    auto joined = t.concat_rows({t.slice_rows(mixed, 0, 3), t.slice_rows(mixed, 3, 6)});
    auto cols = t.concat_cols({t.slice_cols(joined, 0, 5), t.slice_cols(joined, 5, 8)});
    auto logits = t.matmul(cols, w2);                               // 6×1
    auto grid = t.reshape(t.sigmoid(logits), 2, 3);
    auto up = t.bilinear_up(grid, 5, 7);
    // Squeeze the normalized map into [0.1, 0.9] so the BCE clamp kinks at
    // exactly 0 and 1 stay away from the finite-difference probes.
    auto muted = t.add(t.scale(t.minmax_norm(up), 0.8), t.constant(Tensor(5, 7, 0.1)));
    auto loss = t.bce_mean(muted, target);

    if (accumulate_grads) {
        t.backward(loss);
        t.add_param_grads();
    }
    return loss->val.d[0];
}

}  // namespace

TEST_CASE("composite graph gradients match central differences") {
    SplitMix64 rng(21);
    nn::ParamStore ps;
    nn::init_fan_in(ps.add("w1", 4, 8, true)->value, 4, rng);
    nn::init_fan_in(ps.add("b1", 1, 8, false)->value, 8, rng);
    ps.add("gamma", 1, 8, false)->value.fill(1.1);
    nn::init_fan_in(ps.add("beta", 1, 8, false)->value, 8, rng);
    nn::init_fan_in(ps.add("gate", 1, 8, false)->value, 2, rng);
    nn::init_fan_in(ps.add("w2", 8, 1, true)->value, 8, rng);

    const Tensor input = random_tensor(rng, 6, 4);
    Tensor target(5, 7);
    for (double& x : target.d) x = rng.u01();

    ps.zero_grads();
    run_composite(ps, input, target, true);
    auto res = test_util::central_difference_check(
        ps, [&] { return run_composite(ps, input, target, false); });
    CAPTURE(res.worst_element);
    CHECK(res.elements > 50);
    CHECK(res.worst_ratio < 1.0);
}

TEST_CASE("batch norm gradients, train and eval modes") {
    SplitMix64 rng(33);
    nn::ParamStore ps;
    nn::init_fan_in(ps.add("w", 3, 4, true)->value, 3, rng);
    ps.add("g", 1, 4, false)->value.fill(0.9);
    nn::init_fan_in(ps.add("b", 1, 4, false)->value, 4, rng);
    Tensor rm(1, 4), rv(1, 4, 1.0);
    rm.d = {0.1, -0.2, 0.05, 0.3};
    rv.d = {1.1, 0.7, 1.4, 0.9};
    const Tensor input = random_tensor(rng, 5, 3);
    Tensor target(5, 4);
    for (double& x : target.d) x = rng.u01();

    for (bool training : {true, false}) {
        auto eval = [&] {
            ad::Tape t;
            auto h = t.matmul(t.constant(input), t.param(ps.at("w")));
            h = t.batch_norm_tokens(h, t.param(ps.at("g")), t.param(ps.at("b")), rm, rv,
                                    training, /*update_stats=*/false);
            return t.bce_mean(t.sigmoid(h), target);
        };
        ps.zero_grads();
        {
            ad::Tape t;
            auto h = t.matmul(t.constant(input), t.param(ps.at("w")));
            h = t.batch_norm_tokens(h, t.param(ps.at("g")), t.param(ps.at("b")), rm, rv,
                                    training, false);
            auto loss = t.bce_mean(t.sigmoid(h), target);
            t.backward(loss);
            t.add_param_grads();
        }
        auto res = test_util::central_difference_check(ps, [&] {
            ad::Tape t;
            auto h = t.matmul(t.constant(input), t.param(ps.at("w")));
            h = t.batch_norm_tokens(h, t.param(ps.at("g")), t.param(ps.at("b")), rm, rv,
                                    training, false);
            return t.bce_mean(t.sigmoid(h), target)->val.d[0];
        });
        CAPTURE(training);
        CAPTURE(res.worst_element);
        CHECK(res.worst_ratio < 1.0);
        (void)eval;
    }
}

TEST_CASE("batch norm running statistics update only when asked") {
    SplitMix64 rng(4);
    Tensor rm(1, 2), rv(1, 2, 1.0);
    const Tensor x = random_tensor(rng, 8, 2);
    nn::ParamStore ps;
    ps.add("g", 1, 2, false)->value.fill(1.0);
    ps.add("b", 1, 2, false);

    ad::Tape t;
    t.batch_norm_tokens(t.constant(x), t.param(ps.at("g")), t.param(ps.at("b")), rm, rv, true,
                        /*update_stats=*/false);
    CHECK(rm.d[0] == 0.0);
    CHECK(rv.d[0] == 1.0);

    ad::Tape t2;
    t2.batch_norm_tokens(t2.constant(x), t2.param(ps.at("g")), t2.param(ps.at("b")), rm, rv,
                         true, /*update_stats=*/true);
    CHECK(rm.d[0] != 0.0);

    // Eval mode never touches the buffers.
    const Tensor rm_copy = rm, rv_copy = rv;
    ad::Tape t3;
    t3.batch_norm_tokens(t3.constant(x), t3.param(ps.at("g")), t3.param(ps.at("b")), rm, rv,
                         false, true);
    CHECK(rm.d == rm_copy.d);
    CHECK(rv.d == rv_copy.d);
}

TEST_CASE("softmax cross entropy against log-sum-exp identity") {
    nn::ParamStore ps;
    auto* logits_p = ps.add("l", 1, 4, true);
    logits_p->value.d = {0.2, -1.0, 2.5, 0.7};
    for (int label = 0; label < 4; ++label) {
        ad::Tape t;
        auto loss = t.softmax_xent(t.param(*logits_p), label);
        double lse = 0;
        for (double v : logits_p->value.d) lse += std::exp(v);
        const double expect = std::log(lse) - logits_p->value.d[label];
        CHECK(loss->val.d[0] == doctest::Approx(expect).epsilon(1e-12));
    }
    ps.zero_grads();
    {
        ad::Tape t;
        auto loss = t.softmax_xent(t.param(*logits_p), 2);
        t.backward(loss);
        t.add_param_grads();
    }
    auto res = test_util::central_difference_check(ps, [&] {
        ad::Tape t;
        return t.softmax_xent(t.param(*logits_p), 2)->val.d[0];
    });
    CHECK(res.worst_ratio < 1.0);
}

TEST_CASE("encoder layer is the identity at zero residual init") {
    SplitMix64 rng(77);
    nn::ParamStore ps;
    auto layer = nn::make_encoder_layer(ps, "enc", 8, 2, 16, rng);
    const Tensor x = random_tensor(rng, 5, 8);
    ad::Tape t;
    auto out = nn::encoder_layer(t, t.constant(x), layer);
    CHECK(out->val.d == x.d);
}

TEST_CASE("mha over a single key gives uniform weights") {
    SplitMix64 rng(31);
    nn::ParamStore ps;
    auto p = nn::make_mha(ps, "mha", 6, 2, rng, false);
    const Tensor q = random_tensor(rng, 4, 6);
    const Tensor kv = random_tensor(rng, 1, 6);
    ad::Tape t;
    auto out = nn::mha(t, t.constant(q), t.constant(kv), p, /*want_attn=*/true);
    for (double a : out.attn->val.d) CHECK(a == 1.0);
    CHECK(out.out->val.rows == 4);
    for (double v : out.out->val.d) CHECK(std::isfinite(v));
}
