#pragma once

// Scale ablation: the same experiment trained once per (scale set, seed)
// and scored by minADE / minFDE on an evaluation set.

#include <string>
#include <vector>

#include "groupnet/probes.hpp"

namespace groupnet {

struct SweepRow {
    std::vector<std::size_t> scales;
    std::uint64_t seed = 0;
    double min_ade = 0.0;
    double min_fde = 0.0;
};

/// "2,3" style key; the empty set reads "none".
inline std::string scales_key(const std::vector<std::size_t>& scales) {
    if (scales.empty()) return "none";
    std::string s;
    for (std::size_t i = 0; i < scales.size(); ++i) s += (i ? "," : "") + std::to_string(scales[i]);
    return s;
}

inline std::vector<std::size_t> parse_scales_key(const std::string& key) {
    std::vector<std::size_t> out;
    if (key == "none" || key.empty()) return out;
    std::size_t pos = 0;
    while (pos <= key.size()) {
        const std::size_t comma = std::min(key.find(',', pos), key.size());
        const std::string tok = key.substr(pos, comma - pos);
        try {
            std::size_t used = 0;
            const long v = std::stol(tok, &used);
            if (used != tok.size() || v < 2) throw std::invalid_argument(tok);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ConfigError("bad scale list '" + key + "' (expected e.g. 2,3 or none)");
        }
        pos = comma + 1;
    }
    return out;
}

struct SweepOptions {
    std::vector<std::vector<std::size_t>> scale_sets;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path out_dir;  // per-run model directories when set
    std::function<void(const SweepRow&)> on_row;
};

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const Dataset& train_ds, const Dataset& eval_ds,
                                       const SweepOptions& opt) {
    if (opt.scale_sets.empty() || opt.seeds.empty()) throw ConfigError("sweep: need at least one scale set and seed");
    std::vector<SweepRow> rows;
    for (const auto& scales : opt.scale_sets)
        for (std::uint64_t seed : opt.seeds) {
            ExperimentConfig cfg = base;
            cfg.model.scales = scales;
            cfg.seed = seed;
            TrainOptions to;
            if (!opt.out_dir.empty()) to.out_dir = opt.out_dir / ("scales_" + scales_key(scales) + "_seed" + std::to_string(seed));
            const TrainedModel tm = train(cfg, train_ds, to);
            const auto preds = predict(tm, eval_ds, cfg.eval.k, seed);
            const auto m = evaluate_predictions(preds, eval_ds, cfg.eval.reduction);
            rows.push_back({scales, seed, m.mean.min_ade, m.mean.min_fde});
            if (opt.on_row) opt.on_row(rows.back());
        }
    return rows;
}

/// Mean minADE of the rows with the given scale set.
inline double mean_ade(const std::vector<SweepRow>& rows, const std::vector<std::size_t>& scales) {
    double s = 0;
    std::size_t n = 0;
    for (const auto& r : rows)
        if (r.scales == scales) {
            s += r.min_ade;
            ++n;
        }
    if (n == 0) throw ConfigError("no sweep rows for scales " + scales_key(scales));
    return s / static_cast<double>(n);
}

}  // namespace groupnet
