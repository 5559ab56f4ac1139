#include "ia/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "ia/formats.hpp"

namespace ia {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ValidationError("train config: lr must be positive");
    if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
    if (!(lr_decay_factor > 1.0))
        throw ValidationError("train config: lr_decay_factor must be > 1");
    if (lr_decay_every < 1) throw ValidationError("train config: lr_decay_every must be >= 1");
    if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        throw ValidationError("train config: betas must lie in [0,1)");
    for (const auto& a : ablation)
        if (a != "PA" && a != "VA" && a != "HOCB" && a != "ICB")
            throw ValidationError("train config: unknown ablation unit " + a);
}

json TrainConfig::to_json() const {
    json j;
    j["lr"] = lr;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["adam_eps"] = adam_eps;
    j["weight_decay"] = weight_decay;
    j["epochs"] = epochs;
    j["lr_decay_every"] = lr_decay_every;
    j["lr_decay_factor"] = lr_decay_factor;
    j["batch_size"] = batch_size;
    j["seed"] = seed;
    j["ablation"] = std::vector<std::string>(ablation.begin(), ablation.end());
    return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.lr_decay_every = j.at("lr_decay_every").get<int>();
    c.lr_decay_factor = j.at("lr_decay_factor").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& a : j.at("ablation")) c.ablation.insert(a.get<std::string>());
    return c;
}

double lr_at_epoch(const TrainConfig& tc, int epoch) {
    const int k = epoch / tc.lr_decay_every;
    return tc.lr / std::pow(tc.lr_decay_factor, static_cast<double>(k));
}

AdamState AdamState::for_store(const nn::ParamStore& store) {
    AdamState st;
    for (const auto& p : store.params()) {
        st.m.emplace_back(p->value.rows, p->value.cols);
        st.v.emplace_back(p->value.rows, p->value.cols);
    }
    return st;
}

AdamState AdamState::for_model(const IAModel& model) { return for_store(model.store); }

void adamw_step(nn::ParamStore& store, AdamState& st, double lr, const TrainConfig& tc) {
    const auto& params = store.params();
    if (st.m.size() != params.size() || st.v.size() != params.size())
        throw RuntimeFailure("optimizer state does not match parameter census");
    st.step += 1;
    const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        ad::Param& p = *params[i];
        Tensor& m = st.m[i];
        Tensor& v = st.v[i];
        for (int j = 0; j < p.value.size(); ++j) {
            const double g = p.grad.d[j];
            m.d[j] = tc.beta1 * m.d[j] + (1.0 - tc.beta1) * g;
            v.d[j] = tc.beta2 * v.d[j] + (1.0 - tc.beta2) * g * g;
            const double mhat = m.d[j] / bc1;
            const double vhat = v.d[j] / bc2;
            p.value.d[j] -= lr * mhat / (std::sqrt(vhat) + tc.adam_eps);
            if (p.decay) p.value.d[j] -= lr * tc.weight_decay * p.value.d[j];
        }
    }
}

std::vector<std::string> decay_excluded_names(const nn::ParamStore& store) {
    std::vector<std::string> out;
    for (const auto& p : store.params())
        if (!p->decay) out.push_back(p->name);
    return out;
}

void shuffle_indices(std::vector<int>& idx, std::uint64_t seed, int epoch) {
    if (idx.empty()) return;
    // Pure function of (seed, epoch): the order must not depend on previous
    // epochs, or resuming from a checkpoint would diverge.
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    SplitMix64 rng(
        mix64(seed ^ (0x9d2c5680u + static_cast<std::uint64_t>(epoch) * 0x2545f4914f6cdd1dULL)));
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
        const std::size_t j = rng.below(i + 1);
        std::swap(idx[i], idx[j]);
    }
}

namespace {

struct PreparedSample {
    TextTriplet triplet;
    VisualTokens tokens;
    AttentionMap target;
};

}  // namespace

TrainResult train(IAModel& model, const Dataset& data, const std::vector<Image>& images,
                  const EncoderBackend& backend, const TrainConfig& tc, AdamState& adam,
                  const TrainOptions& opts) {
    tc.validate();
    if (data.empty()) throw ValidationError("train: dataset is empty");
    if (images.size() != data.size())
        throw ValidationError("train: image list does not match dataset");
    for (const auto& [s, f] : data)
        if (f.points.empty())
            throw ValidationError("train: sample " + s.sample_id +
                                  " has no fixations; training targets need at least one");

    const int n = static_cast<int>(data.size());
    std::vector<PreparedSample> prep(n);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        const auto& [s, f] = data[i];
        PreparedSample ps;
        ps.triplet = encode_triplet(backend, s.object_label, s.interaction_label);
        ps.tokens = backend.encode_image(images[i]);
        const double sg = opts.sigma > 0.0 ? opts.sigma : default_sigma(s.width);
        ps.target = fixations_to_heatmap(f, s.width, s.height, sg);
        prep[i] = std::move(ps);
    }

    TrainResult result;
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;

    for (int local = 0; local < tc.epochs; ++local) {
        const int epoch = opts.start_epoch + local;
        const double lr = lr_at_epoch(tc, epoch);
        shuffle_indices(idx, tc.seed, epoch);
        double epoch_loss = 0.0;
        int step = 0;
        for (int b0 = 0; b0 < n; b0 += tc.batch_size, ++step) {
            const int b1 = std::min(n, b0 + tc.batch_size);
            model.store.zero_grads();
            double batch_loss = 0.0;
            for (int k = b0; k < b1; ++k) {
                const int i = idx[k];
                const auto& s = data[i].first;
                ad::Tape t;
                auto map = model.build_map(t, s, prep[i].triplet, prep[i].tokens,
                                           /*training=*/true, /*update_stats=*/true);
                Tensor target(prep[i].target.rows, prep[i].target.cols);
                target.d = prep[i].target.v;
                auto loss = t.bce_mean(map, target);
                const double lv = loss->val.d[0];
                if (!std::isfinite(lv))
                    throw RuntimeFailure("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + " step " + std::to_string(step) +
                                         " sample " + s.sample_id);
                batch_loss += lv;
                epoch_loss += lv;
                t.backward(loss);
                t.add_param_grads();
            }
            const double inv_b = 1.0 / static_cast<double>(b1 - b0);
            for (auto& p : model.store.params())
                for (double& g : p->grad.d) g *= inv_b;
            adamw_step(model.store, adam, lr, tc);
            (void)batch_loss;
        }
        result.log.push_back({epoch, lr, epoch_loss / n});
    }
    return result;
}

void save_model_checkpoint(const std::string& path, const IAModel& model, const TrainConfig& tc,
                           const AdamState* adam, const CheckpointMeta& meta) {
    CheckpointFile ck;
    ck.config["format"] = "ia-checkpoint";
    ck.config["model"] = model.cfg.to_json();
    ck.config["train"] = tc.to_json();
    ck.config["encoder"] = {{"backend", meta.encoder_backend}, {"seed", meta.encoder_seed}};
    ck.config["seed"] = meta.seed;
    ck.config["train_ids"] = meta.train_ids;
    ck.config["epochs_done"] = meta.epochs_done;
    ck.config["init"] = "fan-in uniform; residual output projections and icb gate zero";
    ck.config["weight_decay_excluded"] = decay_excluded_names(model.store);
    ck.config["optimizer_state"] = adam != nullptr;
    if (adam) ck.config["optimizer_step"] = adam->step;
    for (const auto& p : model.store.params())
        ck.tensors.push_back({"param/" + p->name, p->value, true});
    for (const auto& [name, t] : model.store.buffers())
        ck.tensors.push_back({"buffer/" + name, *t, true});
    if (adam) {
        const auto& params = model.store.params();
        for (std::size_t i = 0; i < params.size(); ++i) {
            ck.tensors.push_back({"opt/m/" + params[i]->name, adam->m[i], true});
            ck.tensors.push_back({"opt/v/" + params[i]->name, adam->v[i], true});
        }
    }
    save_checkpoint_file(path, ck);
}

LoadedCheckpoint load_model_checkpoint(const std::string& path, const IAConfig* expected) {
    CheckpointFile ck = load_checkpoint_file(path);
    if (ck.config.value("format", "") != "ia-checkpoint")
        throw ValidationError("not an IA checkpoint: " + path);
    IAConfig cfg = IAConfig::from_json(ck.config.at("model"));
    if (expected && cfg.to_json() != expected->to_json())
        throw ValidationError("checkpoint config mismatch: " + path);
    LoadedCheckpoint out{IAModel::init(cfg, 0), TrainConfig::from_json(ck.config.at("train")),
                         AdamState{}, false, CheckpointMeta{}};
    out.meta.encoder_backend = ck.config.at("encoder").at("backend").get<std::string>();
    out.meta.encoder_seed = ck.config.at("encoder").at("seed").get<std::uint64_t>();
    out.meta.seed = ck.config.at("seed").get<std::uint64_t>();
    out.meta.train_ids = ck.config.at("train_ids").get<std::vector<std::string>>();
    out.meta.epochs_done = ck.config.at("epochs_done").get<int>();
    out.has_optimizer = ck.config.value("optimizer_state", false);
    if (out.has_optimizer) {
        out.adam = AdamState::for_model(out.model);
        out.adam.step = ck.config.at("optimizer_step").get<long>();
    }

    std::size_t used = 0;
    auto take = [&](const std::string& name, Tensor& dst) {
        for (const auto& nt : ck.tensors) {
            if (nt.name != name) continue;
            if (nt.t.rows != dst.rows || nt.t.cols != dst.cols)
                throw ValidationError("checkpoint tensor shape mismatch for " + name);
            dst = nt.t;
            ++used;
            return;
        }
        throw ValidationError("checkpoint missing tensor " + name);
    };
    const auto& params = out.model.store.params();
    for (std::size_t i = 0; i < params.size(); ++i) take("param/" + params[i]->name, params[i]->value);
    for (auto& [name, t] : out.model.store.buffers()) take("buffer/" + name, *t);
    if (out.has_optimizer)
        for (std::size_t i = 0; i < params.size(); ++i) {
            take("opt/m/" + params[i]->name, out.adam.m[i]);
            take("opt/v/" + params[i]->name, out.adam.v[i]);
        }
    if (used != ck.tensors.size())
        throw ValidationError("checkpoint holds tensors unknown to this config: " + path);
    return out;
}

const std::vector<std::string> kAblationVariants = {"full", "w/o PA", "w/o VA", "w/o HOCB",
                                                    "w/o ICB"};

std::set<std::string> ablation_units_for_variant(const std::string& variant) {
    if (variant == "full") return {};
    if (variant == "w/o PA") return {"PA"};
    if (variant == "w/o VA") return {"VA"};
    if (variant == "w/o HOCB") return {"HOCB"};
    if (variant == "w/o ICB") return {"ICB"};
    throw ValidationError("unknown ablation variant: " + variant);
}

std::vector<AblationRow> ablate(const IAConfig& base_cfg, const Dataset& train_data,
                                const std::vector<Image>& train_images,
                                const Dataset& eval_data,
                                const std::vector<Image>& eval_images,
                                const EncoderBackend& backend, const TrainConfig& base_tc,
                                const std::vector<std::string>& variants,
                                const TrainOptions& opts) {
    std::vector<AblationRow> rows;
    for (const auto& variant : variants) {
        IAConfig cfg = base_cfg;
        cfg.ablation = ablation_units_for_variant(variant);
        TrainConfig tc = base_tc;
        tc.ablation = cfg.ablation;
        IAModel model = IAModel::init(cfg, tc.seed);
        AdamState adam = AdamState::for_model(model);
        train(model, train_data, train_images, backend, tc, adam, opts);

        Predictor predictor = [&](const HOISample& s) -> AttentionMap {
            for (std::size_t i = 0; i < eval_data.size(); ++i)
                if (eval_data[i].first.sample_id == s.sample_id)
                    return ia_forward(s, eval_images[i], backend, model);
            throw RuntimeFailure("ablate: no image for sample " + s.sample_id);
        };
        AblationRow row;
        row.variant = variant;
        row.report = evaluate(eval_data, predictor, nullptr, opts.sigma, nullptr);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<Image> load_sample_images(const Dataset& data, const std::string& manifest_path) {
    namespace fs = std::filesystem;
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<Image> images;
    images.reserve(data.size());
    for (const auto& [s, f] : data) {
        fs::path p(s.image_path);
        if (p.is_relative()) p = base / p;
        images.push_back(load_image(p.string()));
    }
    return images;
}

}  // namespace ia
