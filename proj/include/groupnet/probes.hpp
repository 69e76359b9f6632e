#pragma once

// Relational-reasoning probes on a trained model plus dataset-level
// displacement evaluation. The past encoder runs in evaluation mode
// (no Gumbel noise).

#include <map>
#include <set>

#include "groupnet/metrics.hpp"
#include "groupnet/train.hpp"

namespace groupnet {

/// Past-encoder pass over every scene of a dataset, in batches.
struct EncodedScene {
    MultiscaleHypergraph topology;
    std::vector<Tensor<float>> strength;  // per scale, (M_s, 1)
    std::vector<Tensor<float>> category;  // per scale, (M_s, L)
    std::vector<std::size_t> group_size;  // per scale
};

inline std::vector<EncodedScene> encode_scenes(const TrainedModel& tm, const Dataset& ds, std::size_t batch = 64) {
    check_dataset_matches(tm, ds);
    const std::size_t n = tm.shape.n_agents;
    std::vector<EncodedScene> out;
    out.reserve(ds.samples.size());
    for (std::size_t start = 0; start < ds.samples.size(); start += batch) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(ds.samples.size(), start + batch); ++i) idx.push_back(i);
        const SceneBatch sb = make_batch(ds, idx, tm.norm);
        const auto enc = tm.model.past_encoder().forward(tm.store, constant(sb.past), n, nullptr);
        for (std::size_t b = 0; b < idx.size(); ++b) {
            EncodedScene e;
            e.topology = enc.topology[b];
            for (std::size_t s = 0; s < enc.traces.size(); ++s) {
                const auto& tr = enc.traces[s];
                const std::size_t m = tr.strength.rows() / idx.size();
                const std::size_t l = tr.category.cols();
                Tensor<float> r({m, 1}), c({m, l});
                for (std::size_t j = 0; j < m; ++j) {
                    r[j] = tr.strength.value()[b * m + j];
                    for (std::size_t q = 0; q < l; ++q) c.at(j, q) = tr.category.value().at(b * m + j, q);
                }
                e.strength.push_back(std::move(r));
                e.category.push_back(std::move(c));
                e.group_size.push_back(tr.group_size);
            }
            out.push_back(std::move(e));
        }
    }
    return out;
}

/// Scale whose hyperedges have the given size: the first s >= 1 with K = size,
/// else scale 0 for pairs. -1 when none matches.
inline int matching_scale(const std::vector<std::size_t>& group_sizes, std::size_t size) {
    for (std::size_t s = 1; s < group_sizes.size(); ++s)
        if (group_sizes[s] == size) return static_cast<int>(s);
    if (size == 2 && !group_sizes.empty()) return 0;
    return -1;
}

// ---------------------------------------------------------------------------

struct CategoryReport {
    double accuracy = 0.0;
    std::vector<std::string> labels;   // true label names, index order
    std::vector<std::size_t> mapping;  // predicted category -> true label index
    std::size_t n_mapping = 0;
    std::size_t n_test = 0;
    std::size_t misses = 0;  // groups with no matching hyperedge
    std::vector<std::size_t> predicted, truth;  // per scored group, mapping split first
};

/// Predicted category of every labelled group (size >= 2), read from the
/// hyperedges equal to the group at the matching scale; c is averaged over
/// duplicate hyperedges before the argmax.
inline CategoryReport category_probe(const TrainedModel& tm, const Dataset& ds, double mapping_fraction) {
    if (!(mapping_fraction > 0 && mapping_fraction < 1)) throw ConfigError("category_probe: mapping_fraction in (0, 1)");
    const auto enc = encode_scenes(tm, ds);
    CategoryReport rep;
    std::vector<std::string> labels = ds.scene.category_types;
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    rep.labels = labels;
    const std::size_t l = tm.config.model.categories;
    std::vector<int> sample_of;  // which sample each scored group belongs to
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& smp = ds.samples[i];
        for (std::size_t g = 0; g < smp.groups.size(); ++g) {
            const auto& members = smp.groups[g];
            if (members.size() < 2) continue;
            auto it = std::find(labels.begin(), labels.end(), smp.types[g]);
            if (it == labels.end()) continue;
            const int s = matching_scale(enc[i].group_size, members.size());
            std::vector<double> c(l, 0.0);
            std::size_t found = 0;
            if (s >= 0) {
                const auto& edges = enc[i].topology.scales[static_cast<std::size_t>(s)].edges;
                for (std::size_t j = 0; j < edges.size(); ++j)
                    if (edges[j].members == members) {
                        ++found;
                        for (std::size_t q = 0; q < l; ++q) c[q] += enc[i].category[static_cast<std::size_t>(s)].at(j, q);
                    }
            }
            if (found == 0) {
                ++rep.misses;
                continue;
            }
            rep.predicted.push_back(static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin()));
            rep.truth.push_back(static_cast<std::size_t>(it - labels.begin()));
            sample_of.push_back(static_cast<int>(i));
        }
    }
    // mapping split: groups from the first fraction of samples
    const auto cut_sample = static_cast<int>(std::ceil(mapping_fraction * static_cast<double>(ds.samples.size())));
    std::vector<std::size_t> mp, mt, tp, tt;
    for (std::size_t k = 0; k < rep.predicted.size(); ++k) {
        if (sample_of[k] < cut_sample) {
            mp.push_back(rep.predicted[k]);
            mt.push_back(rep.truth[k]);
        } else {
            tp.push_back(rep.predicted[k]);
            tt.push_back(rep.truth[k]);
        }
    }
    rep.n_mapping = mp.size();
    rep.n_test = tp.size();
    rep.mapping = best_label_mapping(mp, mt, l, labels.size());
    rep.accuracy = mapped_accuracy(tp, tt, rep.mapping);
    return rep;
}

// ---------------------------------------------------------------------------

struct StrengthReport {
    std::vector<std::pair<double, double>> points;  // (charge, strength)
    SpearmanResult spearman;
};

/// Mean r over scale-0 edges joining agents 0 and 1, paired with the charge.
inline StrengthReport strength_probe(const TrainedModel& tm, const Dataset& ds) {
    const auto enc = encode_scenes(tm, ds);
    StrengthReport rep;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (!ds.samples[i].charge) continue;
        const auto& edges = enc[i].topology.scales[0].edges;
        double acc = 0;
        std::size_t cnt = 0;
        for (std::size_t j = 0; j < edges.size(); ++j)
            if (edges[j].members == std::vector<std::size_t>{0, 1}) {
                acc += enc[i].strength[0][j];
                ++cnt;
            }
        if (cnt == 0) continue;
        rep.points.emplace_back(*ds.samples[i].charge, acc / static_cast<double>(cnt));
        x.push_back(*ds.samples[i].charge);
        y.push_back(acc / static_cast<double>(cnt));
    }
    rep.spearman = spearman(x, y);
    return rep;
}

// ---------------------------------------------------------------------------

struct GroupRecovery {
    std::size_t recovered = 0;
    std::size_t total = 0;
    std::size_t unscorable = 0;  // no scale of matching size
    double rate() const { return total ? static_cast<double>(recovered) / static_cast<double>(total) : 0.0; }
};

using GroupReport = std::map<std::string, GroupRecovery>;  // keyed by group type

/// A group counts as recovered when a hyperedge at the scale of matching size
/// equals its member set.
inline GroupReport score_groups(const std::vector<MultiscaleHypergraph>& topo, const std::vector<std::size_t>& group_sizes,
                                const Dataset& ds) {
    GroupReport rep;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& smp = ds.samples[i];
        for (std::size_t g = 0; g < smp.groups.size(); ++g) {
            const auto& members = smp.groups[g];
            if (members.size() < 2) continue;
            auto& r = rep[smp.types[g]];
            const int s = matching_scale(group_sizes, members.size());
            if (s < 0) {
                ++r.unscorable;
                continue;
            }
            ++r.total;
            const auto& edges = topo[i].scales[static_cast<std::size_t>(s)].edges;
            r.recovered += std::any_of(edges.begin(), edges.end(), [&](const Hyperedge& e) { return e.members == members; });
        }
    }
    return rep;
}

inline std::vector<std::size_t> scale_group_sizes(const ModelConfig& m) {
    std::vector<std::size_t> sizes{2};
    sizes.insert(sizes.end(), m.scales.begin(), m.scales.end());
    return sizes;
}

inline GroupReport group_probe(const TrainedModel& tm, const Dataset& ds) {
    const auto enc = encode_scenes(tm, ds);
    std::vector<MultiscaleHypergraph> topo;
    for (const auto& e : enc) topo.push_back(e.topology);
    return score_groups(topo, scale_group_sizes(tm.config.model), ds);
}

/// Same scoring on topologies inferred from random symmetric affinity matrices.
inline GroupReport random_group_baseline(const ModelConfig& m, const Dataset& ds, std::uint64_t seed) {
    Rng rng(seed, 6);
    const std::size_t n = ds.n_agents();
    std::vector<MultiscaleHypergraph> topo;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        AffinityMatrix a;
        a.n = n;
        a.values.assign(n * n, 0.0);
        for (std::size_t p = 0; p < n; ++p) {
            a(p, p) = 1.0;
            for (std::size_t q = p + 1; q < n; ++q) a(p, q) = a(q, p) = rng.uniform(-1.0, 1.0);
        }
        topo.push_back(infer_multiscale(a, m.k0 == 0 ? n - 1 : m.k0, m.scales, m.solver));
    }
    return score_groups(topo, scale_group_sizes(m), ds);
}

// ---------------------------------------------------------------------------

struct DatasetMetrics {
    MetricReport mean;
    std::vector<MetricReport> per_sample;
};

inline DatasetMetrics evaluate_predictions(const ScenePredictions& preds, const Dataset& ds, Reduction reduction) {
    if (preds.size() != ds.samples.size()) throw DimensionError("evaluate_predictions: scene count mismatch");
    DatasetMetrics out;
    const std::size_t tp = ds.t_past(), tf = ds.t_future();
    for (std::size_t i = 0; i < preds.size(); ++i) {
        AgentTracks gt;
        for (const auto& agent : ds.samples[i].traj) gt.emplace_back(agent.begin() + static_cast<std::ptrdiff_t>(tp),
                                                                    agent.begin() + static_cast<std::ptrdiff_t>(tp + tf));
        out.per_sample.push_back(displacement_metrics(preds[i], gt, reduction));
    }
    out.mean.reduction = reduction;
    out.mean.k = preds.empty() ? 0 : preds[0].size();
    for (const auto& m : out.per_sample) {
        out.mean.min_ade += m.min_ade / static_cast<double>(preds.size());
        out.mean.min_fde += m.min_fde / static_cast<double>(preds.size());
    }
    return out;
}

}  // namespace groupnet
