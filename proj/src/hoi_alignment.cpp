#include "ia/hoi_alignment.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ia/kernels.hpp"

namespace ia {

void AlignmentConfig::validate() const {
    if (lambda1 < 0.0 || lambda2 < 0.0)
        throw ValidationError("alignment config: lambdas must be non-negative");
}

AlignmentConfig::Source alignment_source_from_string(const std::string& s) {
    if (s == "none") return AlignmentConfig::Source::none;
    if (s == "human") return AlignmentConfig::Source::human;
    if (s == "ia") return AlignmentConfig::Source::ia_pseudo;
    throw ValidationError("unknown alignment source: " + s + " (expected none, human or ia)");
}

std::string to_string(AlignmentConfig::Source s) {
    switch (s) {
        case AlignmentConfig::Source::none: return "none";
        case AlignmentConfig::Source::human: return "human";
        case AlignmentConfig::Source::ia_pseudo: return "ia";
    }
    return "?";
}

double alignment_loss(const AttentionMap& m_hoi, const AttentionMap& target) {
    if (m_hoi.size() == 0 || target.size() == 0)
        throw ValidationError("alignment_loss: empty map");
    if (!is_max_normalized(target))
        throw ValidationError("alignment_loss: target must be max-normalized");
    const AttentionMap pooled = resize_map(target, m_hoi.rows, m_hoi.cols,
                                           ResizeMode::adaptive_max);
    AttentionMap pred = m_hoi;
    double mn = pred.v[0], mx = pred.v[0];
    for (double x : pred.v) {
        mn = std::min(mn, x);
        mx = std::max(mx, x);
    }
    if (mx - mn > 0.0)
        for (double& x : pred.v) x = (x - mn) / (mx - mn);
    // Degenerate range: keep values as-is; bce_loss clamps into [eps, 1-eps].
    return bce_loss(pred, pooled);
}

double combined_loss(double l_raw, double l_align, const AlignmentConfig& cfg) {
    cfg.validate();
    if (!std::isfinite(l_raw) || !std::isfinite(l_align))
        throw ValidationError("combined_loss: non-finite inputs");
    return cfg.lambda1 * l_raw + cfg.lambda2 * l_align;
}

std::map<std::string, AttentionMap> pseudo_label(LoadedCheckpoint& ckpt, const Dataset& data,
                                                 const std::vector<Image>& images,
                                                 const EncoderBackend& backend) {
    if (images.size() != data.size())
        throw ValidationError("pseudo_label: image list does not match dataset");
    const std::set<std::string> train_ids(ckpt.meta.train_ids.begin(),
                                          ckpt.meta.train_ids.end());
    std::string leaked;
    for (const auto& [s, f] : data)
        if (train_ids.count(s.sample_id)) leaked += " " + s.sample_id;
    if (!leaked.empty())
        throw LeakageError("pseudo_label: dataset overlaps the checkpoint's training ids:" +
                           leaked);
    const int n = static_cast<int>(data.size());
    std::vector<AttentionMap> maps(n);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i)
        maps[i] = ia_forward(data[i].first, images[i], backend, ckpt.model, false);
    std::map<std::string, AttentionMap> out;
    for (int i = 0; i < n; ++i) out[data[i].first.sample_id] = std::move(maps[i]);
    return out;
}

std::vector<ToySample> make_toy_dataset(int n, std::uint64_t seed) {
    constexpr int kImg = ToyHOIModel::kImage;
    constexpr int kCue = 12;
    std::vector<ToySample> out;
    out.reserve(n);
    SplitMix64 rng(mix64(seed ^ 0x70f1e57daa11beefULL));
    for (int i = 0; i < n; ++i) {
        ToySample s;
        s.id = "toy-" + std::to_string(i);
        s.label = static_cast<int>(rng.below(ToyHOIModel::kClasses));
        s.image.width = kImg;
        s.image.height = kImg;
        s.image.channels = 1;
        s.image.pixels.resize(static_cast<std::size_t>(kImg) * kImg);
        for (auto& px : s.image.pixels)
            px = static_cast<std::uint8_t>(100 + rng.below(56));  // background noise
        const int cy = static_cast<int>(rng.below(kImg - kCue + 1));
        const int cx = static_cast<int>(rng.below(kImg - kCue + 1));
        // Two label-independent distractor patches compete for attention;
        // they never overlap the cue, so alignment supervision has room to
        // pull attention off them.
        int dpos[2][2];
        for (auto& d : dpos) {
            do {
                d[0] = static_cast<int>(rng.below(kImg - kCue + 1));
                d[1] = static_cast<int>(rng.below(kImg - kCue + 1));
            } while (std::abs(d[0] - cy) < kCue && std::abs(d[1] - cx) < kCue);
        }
        s.cue_mask = AttentionMap(kImg, kImg);
        for (int y = 0; y < kCue; ++y) {
            for (int x = 0; x < kCue; ++x) {
                std::uint8_t v = 0;
                switch (s.label) {
                    case 0: v = 235; break;                                  // solid bright
                    case 1: v = (y / 2) % 2 == 0 ? 235 : 20; break;          // horizontal bands
                    case 2: v = (x / 2) % 2 == 0 ? 235 : 20; break;          // vertical bands
                    default: v = ((x / 3) + (y / 3)) % 2 == 0 ? 235 : 20;    // checkerboard
                }
                s.image.at(cy + y, cx + x, 0) = v;
                s.cue_mask.at(cy + y, cx + x) = 1.0;
                // Diagonal stripes, unlike any class texture.
                s.image.at(dpos[0][0] + y, dpos[0][1] + x, 0) =
                    static_cast<std::uint8_t>(((x + y) / 2) % 2 == 0 ? 235 : 20);
                s.image.at(dpos[1][0] + y, dpos[1][1] + x, 0) =
                    static_cast<std::uint8_t>(((x + y) / 2) % 2 == 0 ? 20 : 235);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

ToyHOIModel ToyHOIModel::init(std::uint64_t seed) {
    ToyHOIModel m;
    SplitMix64 rng(mix64(seed ^ 0x7041e0571a2b3c4dULL));
    auto& ps = m.store;
    m.patch_embed_ = nn::make_linear(ps, "patch_embed", kPatch * kPatch, kDim, rng);
    m.enc_ = nn::make_encoder_layer(ps, "enc.l0", kDim, kHeads, kHidden, rng);
    m.queries_ = ps.add("dec.queries", kQueries, kDim, true);
    nn::init_fan_in(m.queries_->value, kDim, rng);
    m.dec_self_ = nn::make_encoder_layer(ps, "dec.l0", kDim, kHeads, kHidden, rng);
    m.dec_ln_ = nn::make_layer_norm(ps, "dec.l1.ln1", kDim);
    m.dec_cross_ = nn::make_mha(ps, "dec.l1.cross", kDim, kHeads, rng, false);
    // Fan-in init leaves the cross-attention scores nearly uniform over the
    // 64 tokens; the min-max in the alignment loss then amplifies a
    // microscopic range into wild gradients. Widen the score distribution.
    for (double& x : m.dec_cross_.q.w->value.d) x *= 4.0;
    for (double& x : m.dec_cross_.k.w->value.d) x *= 4.0;
    m.dec_ln2_ = nn::make_layer_norm(ps, "dec.l1.ln2", kDim);
    m.dec_mlp1_ = nn::make_linear(ps, "dec.l1.mlp1", kDim, kHidden, rng);
    m.dec_mlp2_ = nn::make_linear(ps, "dec.l1.mlp2", kHidden, kDim, rng);
    m.head_ = nn::make_linear(ps, "head", kDim, kClasses, rng);
    return m;
}

ToyHOIModel::Built ToyHOIModel::build(ad::Tape& t, const Image& img) {
    if (img.width != kImage || img.height != kImage || img.channels != 1)
        throw ValidationError("toy model expects 64×64 grayscale images");
    Tensor patches(kGrid * kGrid, kPatch * kPatch);
    for (int gy = 0; gy < kGrid; ++gy)
        for (int gx = 0; gx < kGrid; ++gx)
            for (int py = 0; py < kPatch; ++py)
                for (int px = 0; px < kPatch; ++px)
                    patches.at(gy * kGrid + gx, py * kPatch + px) =
                        img.at(gy * kPatch + py, gx * kPatch + px, 0) / 255.0 - 0.5;
    auto tokens = nn::linear(t, t.constant(std::move(patches)), patch_embed_);
    tokens = nn::encoder_layer(t, tokens, enc_);

    auto q = t.param(*queries_);
    q = nn::encoder_layer(t, q, dec_self_);
    // Final decoder layer: pre-norm cross-attention into the image tokens
    // (this is the probed map), then the MLP.
    auto qn = nn::layer_norm(t, q, dec_ln_);
    auto cross = nn::mha(t, qn, tokens, dec_cross_, /*want_attn=*/true);
    q = t.add(q, cross.out);
    auto qn2 = nn::layer_norm(t, q, dec_ln2_);
    auto h = t.gelu(nn::linear(t, qn2, dec_mlp1_));
    q = t.add(q, nn::linear(t, h, dec_mlp2_));

    Built b;
    b.logits = nn::linear(t, t.mean_rows(q), head_);
    b.attn_map = t.reshape(t.mean_rows(cross.attn), kGrid, kGrid);
    return b;
}

AttentionMap ToyHOIModel::attention_map(const Image& img) {
    ad::Tape t;
    auto b = build(t, img);
    AttentionMap m(kGrid, kGrid);
    m.v = b.attn_map->val.d;
    return m;
}

int ToyHOIModel::predict_label(const Image& img) {
    ad::Tape t;
    auto b = build(t, img);
    int best = 0;
    for (int j = 1; j < kClasses; ++j)
        if (b.logits->val.d[j] > b.logits->val.d[best]) best = j;
    return best;
}

namespace {

std::uint64_t hash_params(const nn::ParamStore& store) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const auto& p : store.params())
        h = fnv1a64(p->value.d.data(), p->value.d.size() * sizeof(double), h);
    return h;
}

const AttentionMap& target_for(const ToySample& s, const AlignmentConfig& cfg,
                               const std::map<std::string, AttentionMap>* pseudo) {
    if (cfg.source == AlignmentConfig::Source::ia_pseudo) {
        if (!pseudo) throw ValidationError("train_toy_hoi: ia_pseudo source needs pseudo maps");
        auto it = pseudo->find(s.id);
        if (it == pseudo->end())
            throw ValidationError("train_toy_hoi: no pseudo-label for sample " + s.id);
        return it->second;
    }
    return s.cue_mask;
}

double in_mask_fraction_of(const AttentionMap& attn, const AttentionMap& cue_mask) {
    const AttentionMap pooled =
        resize_map(cue_mask, attn.rows, attn.cols, ResizeMode::adaptive_max);
    double inside = 0.0, total = 0.0;
    for (int i = 0; i < attn.size(); ++i) {
        total += attn.v[i];
        if (pooled.v[i] >= 0.5) inside += attn.v[i];
    }
    return total > 0.0 ? inside / total : 0.0;
}

}  // namespace

ToyRunResult train_toy_hoi(const std::vector<ToySample>& train_set,
                           const std::vector<ToySample>& test_set, const AlignmentConfig& cfg,
                           std::uint64_t seed, const ToyTrainConfig& ttc,
                           const std::map<std::string, AttentionMap>* pseudo_targets) {
    cfg.validate();
    if (train_set.empty()) throw ValidationError("train_toy_hoi: empty training set");
    const bool align = cfg.source != AlignmentConfig::Source::none && cfg.lambda2 > 0.0;

    ToyHOIModel model = ToyHOIModel::init(seed);
    AdamState adam = AdamState::for_store(model.store);
    TrainConfig opt;  // reuse the AdamW defaults; schedule stays flat here
    opt.lr = ttc.lr;
    opt.weight_decay = ttc.weight_decay;

    // Alignment targets pooled once: they are constants of the run.
    std::vector<Tensor> pooled_targets(train_set.size());
    if (align) {
        for (std::size_t i = 0; i < train_set.size(); ++i) {
            const AttentionMap& tgt = target_for(train_set[i], cfg, pseudo_targets);
            if (!is_max_normalized(tgt))
                throw ValidationError("train_toy_hoi: alignment target for " + train_set[i].id +
                                      " is not max-normalized");
            const AttentionMap pooled =
                resize_map(tgt, ToyHOIModel::kGrid, ToyHOIModel::kGrid, ResizeMode::adaptive_max);
            Tensor tt(pooled.rows, pooled.cols);
            tt.d = pooled.v;
            pooled_targets[i] = std::move(tt);
        }
    }

    ToyRunResult result;
    const int n = static_cast<int>(train_set.size());
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int epoch = 0; epoch < ttc.epochs; ++epoch) {
        shuffle_indices(idx, seed, epoch);
        double epoch_loss = 0.0;
        for (int b0 = 0; b0 < n; b0 += ttc.batch_size) {
            const int b1 = std::min(n, b0 + ttc.batch_size);
            model.store.zero_grads();
            for (int k = b0; k < b1; ++k) {
                const ToySample& s = train_set[idx[k]];
                ad::Tape t;
                auto built = model.build(t, s.image);
                auto l_raw = t.softmax_xent(built.logits, s.label);
                ad::NodePtr loss;
                if (align) {
                    auto pred = t.minmax_norm(built.attn_map);
                    auto l_align = t.bce_mean(pred, pooled_targets[idx[k]]);
                    loss = t.add(t.scale(l_raw, cfg.lambda1), t.scale(l_align, cfg.lambda2));
                } else {
                    loss = t.scale(l_raw, cfg.lambda1);
                }
                const double lv = loss->val.d[0];
                if (!std::isfinite(lv))
                    throw RuntimeFailure("train_toy_hoi: non-finite loss at epoch " +
                                         std::to_string(epoch));
                epoch_loss += lv;
                t.backward(loss);
                t.add_param_grads();
            }
            const double inv_b = 1.0 / static_cast<double>(b1 - b0);
            for (auto& p : model.store.params())
                for (double& g : p->grad.d) g *= inv_b;
            adamw_step(model.store, adam, ttc.lr, opt);
        }
        result.epoch_loss.push_back(epoch_loss / n);
    }

    int correct = 0;
    for (const auto& s : train_set)
        if (model.predict_label(s.image) == s.label) ++correct;
    result.train_accuracy = static_cast<double>(correct) / train_set.size();

    correct = 0;
    double mask_frac = 0.0;
    for (const auto& s : test_set) {
        if (model.predict_label(s.image) == s.label) ++correct;
        AttentionMap attn = model.attention_map(s.image);
        mask_frac += in_mask_fraction_of(attn, s.cue_mask);
        result.test_attention.emplace_back(s.id, std::move(attn));
    }
    result.test_accuracy = test_set.empty() ? 0.0 : static_cast<double>(correct) / test_set.size();
    result.in_mask_fraction = test_set.empty() ? 0.0 : mask_frac / test_set.size();
    result.params_hash = hash_params(model.store);
    return result;
}

}  // namespace ia
