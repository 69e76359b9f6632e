#pragma once

// Displacement metrics, rank correlation and label-bijection fitting.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "groupnet/config.hpp"
#include "groupnet/sim.hpp"

namespace groupnet {

/// [agent][t] positions.
using AgentTracks = std::vector<std::vector<Vec2>>;

struct MetricReport {
    double min_ade = 0.0;
    double min_fde = 0.0;
    std::size_t k = 0;
    Reduction reduction = Reduction::per_agent;
};

/// Best-of-K ADE / FDE of one scene. `preds[k]` and `gt` are [agent][t].
inline MetricReport displacement_metrics(const std::vector<AgentTracks>& preds, const AgentTracks& gt,
                                         Reduction reduction = Reduction::per_agent) {
    if (preds.empty()) throw DimensionError("displacement_metrics: no predictions");
    const std::size_t n = gt.size();
    if (n == 0 || gt[0].empty()) throw DimensionError("displacement_metrics: empty ground truth");
    const std::size_t tf = gt[0].size();
    for (const auto& p : preds) {
        if (p.size() != n) throw DimensionError("displacement_metrics: agent count mismatch");
        for (std::size_t a = 0; a < n; ++a)
            if (p[a].size() != tf || gt[a].size() != tf) throw DimensionError("displacement_metrics: horizon mismatch");
    }
    const std::size_t k = preds.size();
    // ade[k][a], fde[k][a]
    std::vector<std::vector<double>> ade(k, std::vector<double>(n)), fde(k, std::vector<double>(n));
    for (std::size_t s = 0; s < k; ++s)
        for (std::size_t a = 0; a < n; ++a) {
            double acc = 0;
            for (std::size_t t = 0; t < tf; ++t) acc += (preds[s][a][t] - gt[a][t]).norm();
            ade[s][a] = acc / static_cast<double>(tf);
            fde[s][a] = (preds[s][a][tf - 1] - gt[a][tf - 1]).norm();
        }
    MetricReport r;
    r.k = k;
    r.reduction = reduction;
    if (reduction == Reduction::per_agent) {
        for (std::size_t a = 0; a < n; ++a) {
            double best_ade = ade[0][a], best_fde = fde[0][a];
            for (std::size_t s = 1; s < k; ++s) {
                best_ade = std::min(best_ade, ade[s][a]);
                best_fde = std::min(best_fde, fde[s][a]);
            }
            r.min_ade += best_ade / static_cast<double>(n);
            r.min_fde += best_fde / static_cast<double>(n);
        }
    } else {
        r.min_ade = r.min_fde = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < k; ++s) {
            r.min_ade = std::min(r.min_ade, std::accumulate(ade[s].begin(), ade[s].end(), 0.0) / static_cast<double>(n));
            r.min_fde = std::min(r.min_fde, std::accumulate(fde[s].begin(), fde[s].end(), 0.0) / static_cast<double>(n));
        }
    }
    return r;
}

/// Ranks starting at 1; ties share their average rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t q = i; q <= j; ++q) rank[order[q]] = avg;
        i = j + 1;
    }
    return rank;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

struct SpearmanResult {
    double rho = 0.0;
    bool degenerate = false;  // one side constant
};

inline SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DimensionError("spearman: length mismatch");
    if (x.size() < 2) return {0.0, true};
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const bool flat = std::all_of(rx.begin(), rx.end(), [&](double r) { return r == rx[0]; }) ||
                      std::all_of(ry.begin(), ry.end(), [&](double r) { return r == ry[0]; });
    if (flat) return {0.0, true};
    return {pearson(rx, ry), false};
}

/// Predicted-to-true label map maximising agreement. Both label sets are
/// padded to the same size so the map is a bijection; brute force over
/// permutations (sizes up to 8).
inline std::vector<std::size_t> best_label_mapping(const std::vector<std::size_t>& predicted,
                                                   const std::vector<std::size_t>& truth, std::size_t n_pred,
                                                   std::size_t n_true) {
    if (predicted.size() != truth.size()) throw DimensionError("best_label_mapping: length mismatch");
    const std::size_t l = std::max(n_pred, n_true);
    if (l > 8) throw ConfigError("best_label_mapping: more than 8 labels");
    std::vector<std::vector<std::size_t>> confusion(l, std::vector<std::size_t>(l, 0));
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] >= n_pred || truth[i] >= n_true) throw DimensionError("best_label_mapping: label out of range");
        ++confusion[predicted[i]][truth[i]];
    }
    std::vector<std::size_t> perm(l), best;
    std::iota(perm.begin(), perm.end(), 0);
    long best_score = -1;
    do {
        long score = 0;
        for (std::size_t p = 0; p < l; ++p) score += static_cast<long>(confusion[p][perm[p]]);
        if (score > best_score) {
            best_score = score;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    best.resize(n_pred);
    return best;
}

inline double mapped_accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth,
                              const std::vector<std::size_t>& mapping) {
    if (predicted.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hit += mapping.at(predicted[i]) == truth[i];
    return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

}  // namespace groupnet
