#include "ia/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"

#include "ia/fixtures.hpp"
#include "ia/formats.hpp"
#include "ia/hoi_alignment.hpp"
#include "ia/metrics.hpp"
#include "ia/plot.hpp"
#include "ia/training.hpp"

namespace ia {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string git_describe() {
    FILE* p = popen("git describe --always --dirty 2>/dev/null", "r");
    if (!p) return "unknown";
    char buf[128] = {0};
    std::string out;
    while (fgets(buf, sizeof buf, p)) out += buf;
    pclose(p);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out.empty() ? "unknown" : out;
}

std::string hex64_str(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Shared flags plus config-file handling. Precedence: CLI flag > config file
// > built-in default.
struct Common {
    std::string manifest;
    std::string out_dir;
    std::string config_path;
    std::string encoder = "mock";
    std::string cache_dir;
    std::uint64_t seed = 0;
    std::uint64_t encoder_seed = 0;
    bool encoder_seed_set = false;
    int jobs = 0;
    double sigma = 0.0;

    CLI::Option* encoder_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* sigma_opt = nullptr;

    json file_config;

    void add_to(CLI::App* cmd, bool with_manifest = true) {
        if (with_manifest)
            cmd->add_option("--manifest", manifest, "dataset manifest (JSON lines)");
        cmd->add_option("--out", out_dir, "output directory")->required();
        cmd->add_option("--config", config_path, "JSON config file");
        encoder_opt = cmd->add_option("--encoder", encoder,
                                      "encoder backend: mock, pretrained-base, pretrained-large");
        cmd->add_option("--cache-dir", cache_dir,
                        "feature cache for pretrained backends ($IA_CACHE_DIR)");
        seed_opt = cmd->add_option("--seed", seed, "random seed");
        cmd->add_option("--jobs", jobs, "max parallel threads (0 = all)");
        sigma_opt = cmd->add_option("--sigma", sigma, "fixation Gaussian sigma in pixels");
    }

    void finalize() {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ValidationError("cannot open config file: " + config_path);
            try {
                in >> file_config;
            } catch (const json::exception& e) {
                throw ValidationError("bad config JSON " + config_path + ": " + e.what());
            }
            if (encoder_opt && !*encoder_opt && file_config.contains("encoder") &&
                file_config["encoder"].contains("backend"))
                encoder = file_config["encoder"]["backend"].get<std::string>();
            if (seed_opt && !*seed_opt && file_config.contains("seed"))
                seed = file_config["seed"].get<std::uint64_t>();
            if (file_config.contains("encoder") && file_config["encoder"].contains("seed")) {
                encoder_seed = file_config["encoder"]["seed"].get<std::uint64_t>();
                encoder_seed_set = true;
            }
            if (sigma_opt && !*sigma_opt && file_config.contains("sigma"))
                sigma = file_config["sigma"].get<double>();
        }
        if (!encoder_seed_set) encoder_seed = seed;
#ifdef _OPENMP
        if (jobs > 0) omp_set_num_threads(jobs);
#endif
        if (!out_dir.empty()) fs::create_directories(out_dir);
    }

    std::unique_ptr<EncoderBackend> make_encoder(int mock_image_size) const {
        return make_backend(encoder, encoder_seed, cache_dir, mock_image_size);
    }

    IAConfig model_config() const {
        IAConfig cfg = IAConfig::desk();
        if (file_config.contains("model")) {
            const json& m = file_config["model"];
            if (m.contains("profile")) {
                const std::string p = m["profile"].get<std::string>();
                if (p == "desk")
                    cfg = IAConfig::desk();
                else if (p == "full-base")
                    cfg = IAConfig::full_base();
                else if (p == "full-large")
                    cfg = IAConfig::full_large();
                else
                    throw ValidationError("unknown model profile: " + p);
            }
            auto set_int = [&](const char* k, int& dst) {
                if (m.contains(k)) dst = m[k].get<int>();
            };
            set_int("model_width", cfg.model_width);
            set_int("fourier_dim", cfg.fourier_dim);
            set_int("n_heads", cfg.n_heads);
            set_int("mlp_hidden", cfg.mlp_hidden);
            set_int("decoder_mid_channels", cfg.decoder_mid_channels);
            set_int("patch_size", cfg.patch_size);
            set_int("image_size", cfg.image_size);
            set_int("text_dim", cfg.text_dim);
            set_int("visual_dim", cfg.visual_dim);
        }
        return cfg;
    }

    TrainConfig train_config() const {
        TrainConfig tc;
        tc.seed = seed;
        if (file_config.contains("train")) {
            const json& t = file_config["train"];
            if (t.contains("lr")) tc.lr = t["lr"].get<double>();
            if (t.contains("beta1")) tc.beta1 = t["beta1"].get<double>();
            if (t.contains("weight_decay")) tc.weight_decay = t["weight_decay"].get<double>();
            if (t.contains("epochs")) tc.epochs = t["epochs"].get<int>();
            if (t.contains("lr_decay_every")) tc.lr_decay_every = t["lr_decay_every"].get<int>();
            if (t.contains("lr_decay_factor"))
                tc.lr_decay_factor = t["lr_decay_factor"].get<double>();
            if (t.contains("batch_size")) tc.batch_size = t["batch_size"].get<int>();
        }
        return tc;
    }
};

struct RunRecorder {
    std::string out_dir;
    json meta;
    std::vector<std::string> artifacts;

    RunRecorder(const std::vector<std::string>& args, const std::string& subcommand) {
        std::string cmdline;
        for (const auto& a : args) cmdline += (cmdline.empty() ? "" : " ") + a;
        meta["command_line"] = cmdline;
        meta["subcommand"] = subcommand;
        meta["started_at"] = iso_now();
        meta["git_describe"] = git_describe();
    }

    void add_artifact(const std::string& p) { artifacts.push_back(p); }

    void finish(const Common& c, const json& effective_config, const std::string& status,
                const std::string& error = "") {
        if (c.out_dir.empty()) return;
        meta["finished_at"] = iso_now();
        meta["status"] = status;
        if (!error.empty()) meta["error"] = error;
        meta["seed"] = c.seed;
        meta["encoder_backend"] = c.encoder;
        meta["encoder_seed"] = c.encoder_seed;
        meta["encoder_embedding"] = c.encoder == "mock"
                                        ? "keyed-hash sentence embedding (mock)"
                                        : "pooled sentence embedding from the feature cache";
        meta["sigma"] = c.sigma;
        meta["effective_config"] = effective_config;
        meta["config_hash"] = hex64_str(fnv1a64(effective_config.dump()));
        meta["artifacts"] = artifacts;
        atomic_write_text((fs::path(c.out_dir) / "run_metadata.json").string(),
                          meta.dump(2) + "\n");
    }
};

json report_to_json(const MetricReport& r) {
    json j;
    j["cc"] = r.cc;
    j["kldiv"] = r.kldiv;
    j["sim"] = r.sim;
    j["auc"] = r.auc;
    j["auc_variant"] = "judd";
    j["n_samples"] = r.n_samples;
    return j;
}

Dataset filter_by_split(const Dataset& data, const SplitManifest& split, bool train_side) {
    std::set<std::string> keep(train_side ? split.train_ids.begin() : split.test_ids.begin(),
                               train_side ? split.train_ids.end() : split.test_ids.end());
    Dataset out;
    for (const auto& rec : data)
        if (keep.count(rec.first.sample_id)) out.push_back(rec);
    return out;
}

// ---- subcommand bodies ----------------------------------------------------

int cmd_convert_fixations(const Common& c, bool per_observer, RunRecorder& rec) {
    Dataset data = load_dataset(c.manifest);
    const fs::path dir = fs::path(c.out_dir) / "heatmaps";
    fs::create_directories(dir);
    for (const auto& [s, f] : data) {
        const double sg = c.sigma > 0.0 ? c.sigma : default_sigma(s.width);
        if (per_observer) {
            std::set<std::string> observers;
            for (const auto& p : f.points) observers.insert(p.observer_id);
            for (const auto& obs : observers) {
                FixationSet sub;
                sub.sample_id = f.sample_id;
                for (const auto& p : f.points)
                    if (p.observer_id == obs) sub.points.push_back(p);
                const AttentionMap m = fixations_to_heatmap(sub, s.width, s.height, sg);
                const std::string stem = (dir / (s.sample_id + "." + obs)).string();
                save_heatmap_ighm(stem + ".ighm", m);
                save_heatmap_png(stem + ".png", m);
                rec.add_artifact(stem + ".ighm");
            }
        } else {
            const AttentionMap m = fixations_to_heatmap(f, s.width, s.height, sg);
            const std::string stem = (dir / s.sample_id).string();
            save_heatmap_ighm(stem + ".ighm", m);
            save_heatmap_png(stem + ".png", m);
            rec.add_artifact(stem + ".ighm");
        }
    }
    return 0;
}

int cmd_split(const Common& c, const std::string& key, double test_frac, RunRecorder& rec) {
    Dataset data = load_dataset(c.manifest);
    std::vector<HOISample> samples;
    for (const auto& [s, f] : data) samples.push_back(s);
    SplitManifest m =
        make_zeroshot_split(samples, category_key_from_string(key), c.seed, test_frac);
    validate_split(samples, m);
    const std::string path = (fs::path(c.out_dir) / "split.json").string();
    save_split(path, m);
    rec.add_artifact(path);
    std::printf("split: %zu train / %zu test samples\n", m.train_ids.size(), m.test_ids.size());
    return 0;
}

int cmd_train(const Common& c, const std::string& split_path, const std::string& side,
              int epochs_flag, int batch_flag, double lr_flag, const std::string& ablation_csv,
              RunRecorder& rec, json& effective) {
    Dataset data = load_dataset(c.manifest);
    if (!split_path.empty()) {
        const SplitManifest split = load_split(split_path);
        data = filter_by_split(data, split, side != "test");
    }
    if (data.empty()) throw ValidationError("train: no samples selected");

    IAConfig cfg = c.model_config();
    TrainConfig tc = c.train_config();
    if (epochs_flag > 0) tc.epochs = epochs_flag;
    if (batch_flag > 0) tc.batch_size = batch_flag;
    if (lr_flag > 0.0) tc.lr = lr_flag;
    if (!ablation_csv.empty()) {
        std::stringstream ss(ablation_csv);
        std::string unit;
        while (std::getline(ss, unit, ',')) tc.ablation.insert(unit);
    }
    cfg.ablation = tc.ablation;
    tc.validate();
    cfg.validate();

    auto backend = c.make_encoder(cfg.image_size);
    if (backend->text_dim() != cfg.text_dim || backend->visual_dim() != cfg.visual_dim ||
        backend->patch_size() != cfg.patch_size || backend->image_size() != cfg.image_size)
        throw ValidationError("model config does not match the encoder backend profile");

    std::vector<Image> images = load_sample_images(data, c.manifest);
    IAModel model = IAModel::init(cfg, tc.seed);
    AdamState adam = AdamState::for_model(model);
    TrainOptions opts;
    opts.sigma = c.sigma;
    TrainResult result = train(model, data, images, *backend, tc, adam, opts);

    CheckpointMeta meta;
    meta.encoder_backend = c.encoder;
    meta.encoder_seed = c.encoder_seed;
    meta.seed = tc.seed;
    meta.epochs_done = tc.epochs;
    for (const auto& [s, f] : data) meta.train_ids.push_back(s.sample_id);
    const std::string ckpt = (fs::path(c.out_dir) / "checkpoint.iackpt").string();
    save_model_checkpoint(ckpt, model, tc, &adam, meta);
    rec.add_artifact(ckpt);

    const std::string log_path = (fs::path(c.out_dir) / "loss_log.csv").string();
    std::ofstream log(log_path);
    log << "epoch,lr,mean_loss\n";
    char buf[128];
    for (const auto& e : result.log) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.lr, e.mean_loss);
        log << buf;
    }
    rec.add_artifact(log_path);

    effective["model"] = cfg.to_json();
    effective["train"] = tc.to_json();
    std::printf("train: %d epochs on %zu samples, final mean loss %.6f\n", tc.epochs,
                data.size(), result.log.back().mean_loss);
    return 0;
}

int cmd_predict(const Common& c, const std::string& ckpt_path, RunRecorder& rec) {
    Dataset data = load_dataset(c.manifest);
    LoadedCheckpoint ckpt = load_model_checkpoint(ckpt_path);
    auto backend =
        make_backend(ckpt.meta.encoder_backend, ckpt.meta.encoder_seed, c.cache_dir,
                     ckpt.model.cfg.image_size);
    std::vector<Image> images = load_sample_images(data, c.manifest);
    const fs::path dir = fs::path(c.out_dir) / "predictions";
    fs::create_directories(dir);
    const int n = static_cast<int>(data.size());
    std::vector<AttentionMap> maps(n);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i)
        maps[i] = ia_forward(data[i].first, images[i], *backend, ckpt.model, false);
    for (int i = 0; i < n; ++i) {
        const std::string stem = (dir / data[i].first.sample_id).string();
        save_heatmap_ighm(stem + ".ighm", maps[i]);
        save_heatmap_png(stem + ".png", maps[i]);
        rec.add_artifact(stem + ".ighm");
    }
    return 0;
}

int cmd_evaluate(const Common& c, const std::string& pred_dir, const std::string& ckpt_path,
                 const std::string& split_path, RunRecorder& rec) {
    if (pred_dir.empty() == ckpt_path.empty())
        throw ValidationError("evaluate: pass exactly one of --pred or --checkpoint");
    Dataset data = load_dataset(c.manifest);
    SplitManifest split;
    const SplitManifest* split_ptr = nullptr;
    if (!split_path.empty()) {
        split = load_split(split_path);
        split_ptr = &split;
    }

    Predictor predictor;
    std::unique_ptr<LoadedCheckpoint> ckpt;
    std::unique_ptr<EncoderBackend> backend;
    std::vector<Image> images;
    if (!pred_dir.empty()) {
        predictor = [pred_dir](const HOISample& s) {
            const std::string path = (fs::path(pred_dir) / (s.sample_id + ".ighm")).string();
            if (!fs::exists(path))
                throw ValidationError("missing prediction " + path);
            return load_heatmap_ighm(path);
        };
    } else {
        ckpt = std::make_unique<LoadedCheckpoint>(load_model_checkpoint(ckpt_path));
        backend = make_backend(ckpt->meta.encoder_backend, ckpt->meta.encoder_seed, c.cache_dir,
                               ckpt->model.cfg.image_size);
        images = load_sample_images(data, c.manifest);
        auto* model = &ckpt->model;
        auto* be = backend.get();
        const Dataset* dref = &data;
        auto* imgs = &images;
        predictor = [model, be, dref, imgs](const HOISample& s) {
            for (std::size_t i = 0; i < dref->size(); ++i)
                if ((*dref)[i].first.sample_id == s.sample_id)
                    return ia_forward(s, (*imgs)[i], *be, *model, false);
            throw ValidationError("no image for sample " + s.sample_id);
        };
    }

    std::vector<PerSampleMetrics> rows;
    MetricReport rep = evaluate(data, predictor, split_ptr, c.sigma, &rows, c.jobs);
    const std::string report_path = (fs::path(c.out_dir) / "report.json").string();
    json j = report_to_json(rep);
    if (split_ptr) j["split"] = {{"test_ids", split.test_ids.size()}, {"seed", split.seed}};
    atomic_write_text(report_path, j.dump(2) + "\n");
    const std::string csv_path = (fs::path(c.out_dir) / "per_sample.csv").string();
    write_per_sample_csv(csv_path, rows);
    rec.add_artifact(report_path);
    rec.add_artifact(csv_path);
    std::printf("evaluate: n=%d cc=%.4f kldiv=%.4f sim=%.4f auc=%.4f\n", rep.n_samples, rep.cc,
                rep.kldiv, rep.sim, rep.auc);
    return 0;
}

int cmd_ablate(const Common& c, const std::string& variants_csv, int epochs_flag,
               RunRecorder& rec, json& effective) {
    Dataset data = load_dataset(c.manifest);
    std::vector<Image> images = load_sample_images(data, c.manifest);
    IAConfig cfg = c.model_config();
    TrainConfig tc = c.train_config();
    if (epochs_flag > 0) tc.epochs = epochs_flag;
    std::vector<std::string> variants = kAblationVariants;
    if (!variants_csv.empty()) {
        variants.clear();
        std::stringstream ss(variants_csv);
        std::string v;
        while (std::getline(ss, v, ',')) variants.push_back(v);
    }
    auto backend = c.make_encoder(cfg.image_size);
    TrainOptions opts;
    opts.sigma = c.sigma;
    auto rows = ablate(cfg, data, images, data, images, *backend, tc, variants, opts);

    const std::string csv_path = (fs::path(c.out_dir) / "ablation.csv").string();
    std::ofstream csv(csv_path);
    csv << "variant,cc,kldiv,sim,auc,n_samples\n";
    json jrows = json::array();
    for (const auto& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%d\n", r.variant.c_str(),
                      r.report.cc, r.report.kldiv, r.report.sim, r.report.auc,
                      r.report.n_samples);
        csv << buf;
        json jr = report_to_json(r.report);
        jr["variant"] = r.variant;
        jrows.push_back(jr);
    }
    const std::string json_path = (fs::path(c.out_dir) / "ablation.json").string();
    atomic_write_text(json_path, jrows.dump(2) + "\n");
    rec.add_artifact(csv_path);
    rec.add_artifact(json_path);
    effective["model"] = cfg.to_json();
    effective["train"] = tc.to_json();
    for (const auto& r : rows)
        std::printf("ablate: %-8s cc=%.4f kldiv=%.4f sim=%.4f auc=%.4f\n", r.variant.c_str(),
                    r.report.cc, r.report.kldiv, r.report.sim, r.report.auc);
    return 0;
}

int cmd_pseudo_label(const Common& c, const std::string& ckpt_path, RunRecorder& rec) {
    Dataset data = load_dataset(c.manifest);
    LoadedCheckpoint ckpt = load_model_checkpoint(ckpt_path);
    auto backend = make_backend(ckpt.meta.encoder_backend, ckpt.meta.encoder_seed, c.cache_dir,
                                ckpt.model.cfg.image_size);
    std::vector<Image> images = load_sample_images(data, c.manifest);
    auto maps = pseudo_label(ckpt, data, images, *backend);
    const fs::path dir = fs::path(c.out_dir) / "pseudo";
    fs::create_directories(dir);
    for (const auto& [id, m] : maps) {
        const std::string path = (dir / (id + ".ighm")).string();
        save_heatmap_ighm(path, m);
        rec.add_artifact(path);
    }
    std::printf("pseudo-label: wrote %zu maps\n", maps.size());
    return 0;
}

int cmd_train_toy(const Common& c, const std::string& align, double lambda1, double lambda2,
                  int epochs, int n_train, int n_test, const std::string& ia_ckpt_path,
                  RunRecorder& rec) {
    AlignmentConfig cfg;
    cfg.source = alignment_source_from_string(align);
    cfg.lambda1 = lambda1;
    cfg.lambda2 = lambda2;
    auto all = make_toy_dataset(n_train + n_test, c.seed);
    std::vector<ToySample> train_set(all.begin(), all.begin() + n_train);
    std::vector<ToySample> test_set(all.begin() + n_train, all.end());

    std::map<std::string, AttentionMap> pseudo;
    if (cfg.source == AlignmentConfig::Source::ia_pseudo) {
        if (ia_ckpt_path.empty())
            throw ValidationError("train-toy --align ia needs --ia-checkpoint");
        LoadedCheckpoint ckpt = load_model_checkpoint(ia_ckpt_path);
        auto backend = make_backend(ckpt.meta.encoder_backend, ckpt.meta.encoder_seed,
                                    c.cache_dir, ckpt.model.cfg.image_size);
        static const char* kToyInteractions[] = {"solid", "stripes_h", "stripes_v", "checker"};
        Dataset wrapped;
        std::vector<Image> imgs;
        for (const auto& ts : train_set) {
            HOISample s;
            s.sample_id = ts.id;
            s.image_path = "";
            s.width = ts.image.width;
            s.height = ts.image.height;
            // The cue box stands in for both participants of the pair.
            double x1 = ts.image.width, y1 = ts.image.height, x2 = 0, y2 = 0;
            for (int y = 0; y < ts.cue_mask.rows; ++y)
                for (int x = 0; x < ts.cue_mask.cols; ++x)
                    if (ts.cue_mask.at(y, x) > 0.5) {
                        x1 = std::min(x1, static_cast<double>(x));
                        y1 = std::min(y1, static_cast<double>(y));
                        x2 = std::max(x2, static_cast<double>(x + 1));
                        y2 = std::max(y2, static_cast<double>(y + 1));
                    }
            s.human_box = {x1, y1, x2, y2};
            s.object_box = {x1, y1, x2, y2};
            s.object_label = "cue";
            s.interaction_label = kToyInteractions[ts.label];
            wrapped.emplace_back(s, FixationSet{ts.id, {}});
            imgs.push_back(ts.image);
        }
        pseudo = pseudo_label(ckpt, wrapped, imgs, *backend);
        for (auto& [id, m] : pseudo) max_normalize(m);
    }

    ToyTrainConfig ttc;
    if (epochs > 0) ttc.epochs = epochs;
    ToyRunResult res = train_toy_hoi(train_set, test_set, cfg, c.seed, ttc,
                                     pseudo.empty() ? nullptr : &pseudo);

    json j;
    j["align"] = align;
    j["lambda1"] = lambda1;
    j["lambda2"] = lambda2;
    j["seed"] = c.seed;
    j["train_accuracy"] = res.train_accuracy;
    j["test_accuracy"] = res.test_accuracy;
    j["in_mask_fraction"] = res.in_mask_fraction;
    j["params_hash"] = hex64_str(res.params_hash);
    j["epochs"] = ttc.epochs;
    const std::string path = (fs::path(c.out_dir) / "toy_result.json").string();
    atomic_write_text(path, j.dump(2) + "\n");
    rec.add_artifact(path);

    const fs::path attn_dir = fs::path(c.out_dir) / "attention";
    fs::create_directories(attn_dir);
    for (std::size_t i = 0; i < res.test_attention.size() && i < 8; ++i) {
        const auto& [id, attn] = res.test_attention[i];
        AttentionMap shown = attn;
        max_normalize(shown);
        const auto& sample = test_set[i];
        save_panels_png((attn_dir / (id + ".png")).string(), sample.image,
                        {sample.cue_mask, shown}, {"CUE MASK", "HOI ATTENTION"});
        rec.add_artifact((attn_dir / (id + ".png")).string());
    }
    std::printf("train-toy: align=%s acc=%.3f in-mask=%.3f hash=%s\n", align.c_str(),
                res.test_accuracy, res.in_mask_fraction, hex64_str(res.params_hash).c_str());
    return 0;
}

int cmd_plot(const Common& c, const std::string& sample_id, const std::string& maps_csv,
             const std::string& labels_csv, const std::string& pred_dir, RunRecorder& rec) {
    Dataset data = load_dataset(c.manifest);
    const HOISample* sample = nullptr;
    const FixationSet* fix = nullptr;
    for (const auto& [s, f] : data)
        if (s.sample_id == sample_id) {
            sample = &s;
            fix = &f;
        }
    if (!sample) throw ValidationError("plot: sample " + sample_id + " not in manifest");
    fs::path img_path(sample->image_path);
    if (img_path.is_relative()) img_path = fs::path(c.manifest).parent_path() / img_path;
    const Image base = load_image(img_path.string());

    std::vector<AttentionMap> maps;
    std::vector<std::string> labels;
    if (!maps_csv.empty()) {
        std::stringstream ss(maps_csv);
        std::string p;
        while (std::getline(ss, p, ',')) maps.push_back(load_heatmap_ighm(p));
    }
    if (!pred_dir.empty()) {
        maps.push_back(
            load_heatmap_ighm((fs::path(pred_dir) / (sample_id + ".ighm")).string()));
        labels.push_back("PREDICTION");
    }
    if (maps.empty()) {
        // Default view: ground-truth heatmap from the manifest fixations.
        const double sg = c.sigma > 0.0 ? c.sigma : default_sigma(sample->width);
        maps.push_back(fixations_to_heatmap(*fix, sample->width, sample->height, sg));
        labels.push_back("HUMAN");
    }
    if (!labels_csv.empty()) {
        labels.clear();
        std::stringstream ss(labels_csv);
        std::string l;
        while (std::getline(ss, l, ',')) labels.push_back(l);
    }
    const std::string out_path = (fs::path(c.out_dir) / (sample_id + "_panels.png")).string();
    save_panels_png(out_path, base, maps, labels.empty() ? std::vector<std::string>{} : labels);
    rec.add_artifact(out_path);
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"interaction-oriented attention toolkit"};
    app.require_subcommand(1);

    Common c;
    std::string split_key = "interaction_pair", split_path, side = "train";
    std::string ckpt_path, pred_dir, variants_csv, ablation_csv;
    std::string align = "none", sample_id, maps_csv, labels_csv, ia_ckpt;
    double test_frac = 0.2, lambda1 = 1.0, lambda2 = 10.0;
    int epochs_flag = 0, batch_flag = 0, n_train = 48, n_test = 48;
    double lr_flag = 0.0;
    bool per_observer = false;

    auto* convert = app.add_subcommand("convert-fixations",
                                       "rasterize fixation points into IGHM/PNG heatmaps");
    auto* split_cmd = app.add_subcommand("split", "generate a zero-shot category split");
    auto* train_cmd = app.add_subcommand("train", "train the IA model");
    auto* predict = app.add_subcommand("predict", "write IA attention maps for a manifest");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "score predictions with CC/KL/SIM/AUC");
    auto* ablate_cmd = app.add_subcommand("ablate", "train and score ablation variants");
    auto* pseudo = app.add_subcommand("pseudo-label", "IA pseudo-labels with leakage guard");
    auto* toy = app.add_subcommand("train-toy", "toy host HOI model with attention alignment");
    auto* plot_cmd = app.add_subcommand("plot", "side-by-side attention panels");

    Common cc_common[9];
    // Each subcommand keeps its own Common so flag presence is per-command.
    Common& c0 = cc_common[0];
    c0.add_to(convert);
    convert->add_flag("--per-observer", per_observer, "one map per observer");
    Common& c1 = cc_common[1];
    c1.add_to(split_cmd);
    split_cmd->add_option("--key", split_key, "interaction_pair or action_only");
    split_cmd->add_option("--test-frac", test_frac, "fraction of categories on the test side");
    Common& c2 = cc_common[2];
    c2.add_to(train_cmd);
    train_cmd->add_option("--split", split_path, "restrict to one side of a split manifest");
    train_cmd->add_option("--side", side, "train or test (with --split)");
    train_cmd->add_option("--epochs", epochs_flag, "override epochs");
    train_cmd->add_option("--batch-size", batch_flag, "override batch size");
    train_cmd->add_option("--lr", lr_flag, "override learning rate");
    train_cmd->add_option("--ablation", ablation_csv, "comma list of PA,VA,HOCB,ICB to drop");
    Common& c3 = cc_common[3];
    c3.add_to(predict);
    predict->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    Common& c4 = cc_common[4];
    c4.add_to(evaluate_cmd);
    evaluate_cmd->add_option("--pred", pred_dir, "directory of <id>.ighm predictions");
    evaluate_cmd->add_option("--checkpoint", ckpt_path, "run the model instead of --pred");
    evaluate_cmd->add_option("--split", split_path, "evaluate the test side of this split");
    Common& c5 = cc_common[5];
    c5.add_to(ablate_cmd);
    ablate_cmd->add_option("--variants", variants_csv, "comma list; default all five");
    ablate_cmd->add_option("--epochs", epochs_flag, "override epochs");
    Common& c6 = cc_common[6];
    c6.add_to(pseudo);
    pseudo->add_option("--checkpoint", ckpt_path, "IA checkpoint")->required();
    Common& c7 = cc_common[7];
    c7.add_to(toy, /*with_manifest=*/false);
    toy->add_option("--align", align, "none, human or ia");
    toy->add_option("--lambda1", lambda1, "raw loss weight");
    toy->add_option("--lambda2", lambda2, "alignment loss weight");
    toy->add_option("--epochs", epochs_flag, "toy training epochs");
    toy->add_option("--n-train", n_train, "toy training samples");
    toy->add_option("--n-test", n_test, "toy held-out samples");
    toy->add_option("--ia-checkpoint", ia_ckpt, "IA checkpoint for --align ia");
    Common& c8 = cc_common[8];
    c8.add_to(plot_cmd);
    plot_cmd->add_option("--sample", sample_id, "sample id to plot")->required();
    plot_cmd->add_option("--maps", maps_csv, "comma list of .ighm files");
    plot_cmd->add_option("--labels", labels_csv, "comma list of captions");
    plot_cmd->add_option("--pred", pred_dir, "prediction directory to overlay");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // drop argv[0]
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    Common* active = nullptr;
    if (name == "convert-fixations") active = &c0;
    else if (name == "split") active = &c1;
    else if (name == "train") active = &c2;
    else if (name == "predict") active = &c3;
    else if (name == "evaluate") active = &c4;
    else if (name == "ablate") active = &c5;
    else if (name == "pseudo-label") active = &c6;
    else if (name == "train-toy") active = &c7;
    else active = &c8;

    RunRecorder rec(args, name);
    json effective;
    effective["subcommand"] = name;
    effective["seed"] = active->seed;
    effective["encoder"] = active->encoder;
    try {
        active->finalize();
        effective["seed"] = active->seed;
        effective["encoder"] = active->encoder;
        int rc = 2;
        if (name == "convert-fixations") rc = cmd_convert_fixations(*active, per_observer, rec);
        else if (name == "split") rc = cmd_split(*active, split_key, test_frac, rec);
        else if (name == "train")
            rc = cmd_train(*active, split_path, side, epochs_flag, batch_flag, lr_flag,
                           ablation_csv, rec, effective);
        else if (name == "predict") rc = cmd_predict(*active, ckpt_path, rec);
        else if (name == "evaluate")
            rc = cmd_evaluate(*active, pred_dir, ckpt_path, split_path, rec);
        else if (name == "ablate")
            rc = cmd_ablate(*active, variants_csv, epochs_flag, rec, effective);
        else if (name == "pseudo-label") rc = cmd_pseudo_label(*active, ckpt_path, rec);
        else if (name == "train-toy")
            rc = cmd_train_toy(*active, align, lambda1, lambda2, epochs_flag, n_train, n_test,
                               ia_ckpt, rec);
        else if (name == "plot")
            rc = cmd_plot(*active, sample_id, maps_csv, labels_csv, pred_dir, rec);
        rec.finish(*active, effective, "success");
        return rc;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        rec.finish(*active, effective, "failed", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime failure: %s\n", e.what());
        rec.finish(*active, effective, "failed", e.what());
        return 2;
    }
}

int dispatch(int argc, const char* const* argv) {
    return dispatch(std::vector<std::string>(argv, argv + argc));
}

}  // namespace ia
