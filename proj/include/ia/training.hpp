#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ia/encoders.hpp"
#include "ia/ia_model.hpp"
#include "ia/metrics.hpp"

namespace ia {

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9;   // the paper's "momentum" under AdamW
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 1e-4;
    int epochs = 80;
    int lr_decay_every = 20;      // epochs
    double lr_decay_factor = 10.0;
    int batch_size = 16;
    std::uint64_t seed = 0;
    std::set<std::string> ablation;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// lr at (global) epoch e: lr / factor^floor(e / every).
double lr_at_epoch(const TrainConfig& tc, int epoch);

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    long step = 0;

    static AdamState for_store(const nn::ParamStore& store);
    static AdamState for_model(const IAModel& model);
};

// Deterministic Fisher-Yates reshuffle for (seed, epoch).
void shuffle_indices(std::vector<int>& idx, std::uint64_t seed, int epoch);

// One decoupled-weight-decay adaptive-moment step over all parameters from
// the gradients accumulated in the store.
void adamw_step(nn::ParamStore& store, AdamState& st, double lr, const TrainConfig& tc);

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double mean_loss = 0.0;
};

struct TrainOptions {
    double sigma = 0.0;   // fixation rasterization sigma; <=0 = width default
    int start_epoch = 0;  // global epoch offset when resuming
};

struct TrainResult {
    std::vector<EpochLog> log;
};

// Deterministic given the seed: fixed init, fixed per-epoch shuffle, serial
// optimizer. Rejects empty datasets and samples without fixations. Aborts
// with diagnostics if the loss goes non-finite. `images` is aligned with
// `data` (see load_sample_images).
TrainResult train(IAModel& model, const Dataset& data, const std::vector<Image>& images,
                  const EncoderBackend& backend, const TrainConfig& tc, AdamState& adam,
                  const TrainOptions& opts = {});

// Names excluded from weight decay (norm scales/offsets, biases, the gate).
std::vector<std::string> decay_excluded_names(const nn::ParamStore& store);

// ---- checkpointing -------------------------------------------------------

struct CheckpointMeta {
    std::string encoder_backend = "mock";
    std::uint64_t encoder_seed = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> train_ids;
    int epochs_done = 0;
};

void save_model_checkpoint(const std::string& path, const IAModel& model, const TrainConfig& tc,
                           const AdamState* adam, const CheckpointMeta& meta);

struct LoadedCheckpoint {
    IAModel model;
    TrainConfig train_config;
    AdamState adam;
    bool has_optimizer = false;
    CheckpointMeta meta;
};

// expected: when non-null the stored model config must match exactly.
LoadedCheckpoint load_model_checkpoint(const std::string& path,
                                       const IAConfig* expected = nullptr);

// ---- ablation harness ----------------------------------------------------

struct AblationRow {
    std::string variant;
    MetricReport report;
};

extern const std::vector<std::string> kAblationVariants;  // full + four w/o rows

std::set<std::string> ablation_units_for_variant(const std::string& variant);

// Trains every requested variant identically (same seed and schedule) and
// evaluates it on eval_data. Image vectors are aligned with the datasets.
std::vector<AblationRow> ablate(const IAConfig& base_cfg, const Dataset& train_data,
                                const std::vector<Image>& train_images,
                                const Dataset& eval_data,
                                const std::vector<Image>& eval_images,
                                const EncoderBackend& backend, const TrainConfig& base_tc,
                                const std::vector<std::string>& variants,
                                const TrainOptions& opts = {});

// Loads every sample image once, resolving paths relative to the manifest.
std::vector<Image> load_sample_images(const Dataset& data, const std::string& manifest_path);

}  // namespace ia
