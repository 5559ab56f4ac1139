#include "ia/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ia {

namespace {

void check_shapes(const AttentionMap& a, const AttentionMap& b, const char* op) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw ValidationError(std::string(op) + ": shape mismatch");
    if (a.size() == 0) throw ValidationError(std::string(op) + ": empty maps");
}

// MIT saliency benchmark epsilon (double machine epsilon).
constexpr double kKlEps = 2.220446049250313e-16;

}  // namespace

double metric_cc(const AttentionMap& pred, const AttentionMap& gt) {
    check_shapes(pred, gt, "cc");
    const int n = pred.size();
    double mp = 0.0, mg = 0.0;
    for (int i = 0; i < n; ++i) {
        mp += pred.v[i];
        mg += gt.v[i];
    }
    mp /= n;
    mg /= n;
    double spp = 0.0, sgg = 0.0, spg = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dp = pred.v[i] - mp;
        const double dg = gt.v[i] - mg;
        spp += dp * dp;
        sgg += dg * dg;
        spg += dp * dg;
    }
    if (spp <= 0.0 || sgg <= 0.0) {
        std::fprintf(stderr, "[ia] warning: cc on constant map, returning 0\n");
        return 0.0;
    }
    return spg / std::sqrt(spp * sgg);
}

double metric_kldiv(const AttentionMap& pred, const AttentionMap& gt) {
    check_shapes(pred, gt, "kldiv");
    const auto p = sum_normalized(pred);
    const auto g = sum_normalized(gt);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        s += g[i] * std::log(g[i] / (p[i] + kKlEps) + kKlEps);
    return s;
}

double metric_sim(const AttentionMap& pred, const AttentionMap& gt) {
    check_shapes(pred, gt, "sim");
    const auto p = sum_normalized(pred);
    const auto g = sum_normalized(gt);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::min(p[i], g[i]);
    return s;
}

double metric_auc(const AttentionMap& pred, const FixationSet& fixations) {
    if (fixations.points.empty())
        throw ValidationError("auc: sample " + fixations.sample_id + " has no fixations");
    std::set<std::pair<int, int>> fixated;
    for (const auto& p : fixations.points) {
        const int c = std::clamp(static_cast<int>(std::lround(p.x)), 0, pred.cols - 1);
        const int r = std::clamp(static_cast<int>(std::lround(p.y)), 0, pred.rows - 1);
        fixated.insert({r, c});
    }
    std::vector<double> pos, neg;
    pos.reserve(fixated.size());
    neg.reserve(pred.size() - fixated.size());
    for (int r = 0; r < pred.rows; ++r)
        for (int c = 0; c < pred.cols; ++c)
            (fixated.count({r, c}) ? pos : neg).push_back(pred.at(r, c));
    if (neg.empty()) throw ValidationError("auc: every pixel fixated");
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    // Tie-aware rank accumulation: for each positive, count negatives below
    // plus half the ties. Two-pointer over the sorted arrays.
    double s = 0.0;
    std::size_t lo = 0, hi = 0;
    for (const double pv : pos) {
        while (lo < neg.size() && neg[lo] < pv) ++lo;
        if (hi < lo) hi = lo;
        while (hi < neg.size() && neg[hi] <= pv) ++hi;
        s += static_cast<double>(lo) + 0.5 * static_cast<double>(hi - lo);
    }
    return s / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

MetricReport evaluate(const Dataset& data, const Predictor& predictor,
                      const SplitManifest* split, double sigma,
                      std::vector<PerSampleMetrics>* per_sample, int jobs) {
    std::vector<int> selected;
    if (split) {
        std::set<std::string> test_ids(split->test_ids.begin(), split->test_ids.end());
        for (int i = 0; i < static_cast<int>(data.size()); ++i)
            if (test_ids.count(data[i].first.sample_id)) selected.push_back(i);
    } else {
        for (int i = 0; i < static_cast<int>(data.size()); ++i) selected.push_back(i);
    }
    if (selected.empty()) throw ValidationError("evaluate: no samples selected");

    std::vector<PerSampleMetrics> rows(selected.size());
    std::vector<std::string> failures(selected.size());
#ifdef _OPENMP
    const int prev = omp_get_max_threads();
    if (jobs > 0) omp_set_num_threads(jobs);
#endif
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < static_cast<int>(selected.size()); ++k) {
        const auto& [s, f] = data[selected[k]];
        try {
            const double sg = sigma > 0.0 ? sigma : default_sigma(s.width);
            const AttentionMap gt = fixations_to_heatmap(f, s.width, s.height, sg);
            const AttentionMap pred = predictor(s);
            PerSampleMetrics r;
            r.sample_id = s.sample_id;
            r.cc = metric_cc(pred, gt);
            r.kldiv = metric_kldiv(pred, gt);
            r.sim = metric_sim(pred, gt);
            r.auc = metric_auc(pred, f);
            rows[k] = r;
        } catch (const std::exception& e) {
            failures[k] = e.what();
        }
    }
#ifdef _OPENMP
    if (jobs > 0) omp_set_num_threads(prev);
#endif
    std::string failed;
    for (std::size_t k = 0; k < failures.size(); ++k)
        if (!failures[k].empty())
            failed += "\n  " + data[selected[k]].first.sample_id + ": " + failures[k];
    if (!failed.empty()) throw ValidationError("evaluate failed for samples:" + failed);

    MetricReport rep;
    rep.n_samples = static_cast<int>(rows.size());
    for (const auto& r : rows) {
        rep.cc += r.cc;
        rep.kldiv += r.kldiv;
        rep.sim += r.sim;
        rep.auc += r.auc;
    }
    rep.cc /= rep.n_samples;
    rep.kldiv /= rep.n_samples;
    rep.sim /= rep.n_samples;
    rep.auc /= rep.n_samples;
    if (per_sample) *per_sample = std::move(rows);
    return rep;
}

void write_per_sample_csv(const std::string& path, const std::vector<PerSampleMetrics>& rows) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write csv: " + path);
    out << "sample_id,cc,kldiv,sim,auc\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g\n", r.sample_id.c_str(), r.cc,
                      r.kldiv, r.sim, r.auc);
        out << buf;
    }
}

}  // namespace ia
