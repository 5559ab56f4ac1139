#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ia/data_model.hpp"

namespace ia {

struct MetricReport {
    double cc = 0.0;
    double kldiv = 0.0;
    double sim = 0.0;
    double auc = 0.0;
    int n_samples = 0;
};

// Pearson correlation of the flattened maps. A constant argument is
// degenerate; returns 0 and logs a warning.
double metric_cc(const AttentionMap& pred, const AttentionMap& gt);

// Both maps sum-normalized, then sum of G * log(G/(P+eps) + eps) with the
// saliency-benchmark epsilon. Lower is better.
double metric_kldiv(const AttentionMap& pred, const AttentionMap& gt);

// Histogram intersection of the sum-normalized maps.
double metric_sim(const AttentionMap& pred, const AttentionMap& gt);

// AUC-Judd: fixated pixels (rounded, deduplicated) are positives, all other
// pixels negatives. Computed as the exact rank statistic
// P[pos > neg] + 0.5 P[pos = neg], which equals the full-threshold ROC area.
double metric_auc(const AttentionMap& pred, const FixationSet& fixations);

struct PerSampleMetrics {
    std::string sample_id;
    double cc = 0.0, kldiv = 0.0, sim = 0.0, auc = 0.0;
};

using Predictor = std::function<AttentionMap(const HOISample&)>;

// Per-sample metrics (ground truth rasterized at `sigma`, or the width
// default when sigma <= 0), averaged arithmetically. With a split, only
// test_ids are evaluated. Samples run in parallel; the reduction order is
// fixed by dataset order.
MetricReport evaluate(const Dataset& data, const Predictor& predictor,
                      const SplitManifest* split, double sigma,
                      std::vector<PerSampleMetrics>* per_sample, int jobs = 0);

void write_per_sample_csv(const std::string& path, const std::vector<PerSampleMetrics>& rows);

}  // namespace ia
