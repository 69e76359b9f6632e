#pragma once

// GroupNet encoder: trajectory embedding, topology inference and per-scale
// node-to-hyperedge / hyperedge-to-node message passing. All scenes of a
// mini-batch are processed together; hyperedges become flat membership lists
// (member row, edge id) so every phase is a gather or a segment sum.

#include <optional>
#include <string>
#include <vector>

#include "groupnet/nn.hpp"
#include "groupnet/topology.hpp"

namespace groupnet {

struct NmpConfig {
    std::size_t d = 32;
    std::size_t hidden = 64;
    std::size_t categories = 2;  // L
    double tau = 0.5;
    std::size_t iters = 3;
    std::size_t k0 = 0;  // 0 selects N - 1
    std::vector<std::size_t> scales{2, 3};
    HyperedgeSolver solver = HyperedgeSolver::automatic;
    bool gumbel_noise = true;  // training-time noise on the category head

    void validate() const {
        if (d < 1 || hidden < 1) throw ConfigError("model: widths must be positive");
        if (categories < 1) throw ConfigError("model: category count L must be at least 1");
        if (!(tau > 0.0)) throw DomainError("model: temperature tau must be positive");
        if (iters < 1) throw ConfigError("model: iters must be at least 1");
        for (std::size_t s = 0; s < scales.size(); ++s) {
            if (scales[s] < 2) throw ConfigError("model: scale group sizes must be at least 2");
            if (s > 0 && scales[s] <= scales[s - 1]) throw ConfigError("model: scales must be strictly increasing");
        }
    }

    std::size_t k0_for(std::size_t n_agents) const { return k0 == 0 ? n_agents - 1 : k0; }
    std::size_t output_width() const { return d * (scales.size() + 1); }
};

/// Test hooks that pin the relational heads.
struct NmpOverrides {
    std::optional<double> strength;
    std::optional<std::size_t> category;
};

/// Flattened hyperedge membership for a batch: pair p says node row
/// `rows[p]` belongs to edge `edges[p]`.
struct Membership {
    std::vector<std::size_t> rows;
    std::vector<std::size_t> edges;
    std::size_t n_edges = 0;
    std::size_t n_rows = 0;
};

/// Scene b's edges occupy [b * M, (b + 1) * M); its nodes rows [b * N, (b + 1) * N).
inline Membership flatten_scale(const std::vector<MultiscaleHypergraph>& topo, std::size_t scale, std::size_t n_agents) {
    Membership m;
    m.n_rows = topo.size() * n_agents;
    for (std::size_t b = 0; b < topo.size(); ++b) {
        if (topo[b].n_nodes != n_agents) throw DimensionError("topology node count does not match the scene");
        if (scale >= topo[b].scales.size()) throw DimensionError("topology is missing scale " + std::to_string(scale));
        for (const auto& e : topo[b].scales[scale].edges) {
            if (e.members.empty()) throw ContractError("hyperedge with no members");
            for (std::size_t i : e.members) {
                if (i >= n_agents) throw DimensionError("hyperedge member out of range");
                m.rows.push_back(b * n_agents + i);
                m.edges.push_back(m.n_edges);
            }
            ++m.n_edges;
        }
    }
    return m;
}

/// w_j = F_w([v_j, sum_m v_m]); z = sum_j w_j v_j. Returns (z, w).
template <class T>
std::pair<Var<T>, Var<T>> collective_embedding(const ParameterStore<T>& store, const Mlp& f_w, const Var<T>& v,
                                               const Membership& m) {
    if (m.rows.empty()) throw ContractError("collective_embedding: empty member set");
    const Var<T> vm = gather_rows(v, m.rows);
    const Var<T> total = segment_sum(vm, m.edges, m.n_edges);
    const Var<T> w = f_w.forward(store, concat_cols<T>({vm, gather_rows(total, m.edges)}));
    const Var<T> z = segment_sum(mul_col(vm, w), m.edges, m.n_edges);
    return {z, w};
}

/// r = sigmoid(F_r(z)); c = gumbel_softmax(F_c(z), tau). `rng` null means no noise.
template <class T>
std::pair<Var<T>, Var<T>> relational_heads(const ParameterStore<T>& store, const Mlp& f_r, const Mlp& f_c,
                                           const Var<T>& z, double tau, Rng* rng) {
    if (!(tau > 0.0)) throw DomainError("relational_heads: temperature must be positive");
    return {sigmoid(f_r.forward(store, z)), gumbel_softmax(f_c.forward(store, z), tau, rng)};
}

/// e = r * sum_l c_l F_l(.); `per_category[l]` already holds F_l of the member sum.
template <class T>
Var<T> interaction_embedding(const Var<T>& r, const Var<T>& c, const std::vector<Var<T>>& per_category) {
    if (per_category.size() != c.cols())
        throw DimensionError("interaction_embedding: " + std::to_string(per_category.size()) +
                             " category outputs for " + std::to_string(c.cols()) + " categories");
    Var<T> mix;
    for (std::size_t l = 0; l < per_category.size(); ++l) {
        Var<T> term = mul_col(per_category[l], slice_cols(c, l, 1));
        mix = l == 0 ? term : add(mix, term);
    }
    return mul_col(mix, r);
}

/// v_i <- f_v([v_i, sum of e over edges containing i]).
template <class T>
Var<T> hyperedge_to_node(const ParameterStore<T>& store, const Mlp& f_v, const Var<T>& v, const Var<T>& e,
                         const Membership& m) {
    if (e.rows() != m.n_edges || v.rows() != m.n_rows)
        throw DimensionError("hyperedge_to_node: embeddings do not match the membership lists");
    const Var<T> agg = segment_sum(gather_rows(e, m.edges), m.rows, m.n_rows);
    return f_v.forward(store, concat_cols<T>({v, agg}));
}

/// Unshared per-scale layers.
struct ScaleLayers {
    Mlp f_w, f_r, f_c, f_v;
    std::vector<Mlp> f_cat;

    ScaleLayers() = default;
    ScaleLayers(const std::string& prefix, const NmpConfig& cfg)
        : f_w(mlp3(prefix + ".f_w", 2 * cfg.d, cfg.hidden, 1)),
          f_r(mlp3(prefix + ".f_r", cfg.d, cfg.hidden, 1)),
          f_c(mlp3(prefix + ".f_c", cfg.d, cfg.hidden, cfg.categories)),
          f_v(mlp3(prefix + ".f_v", 2 * cfg.d, cfg.hidden, cfg.d)) {
        for (std::size_t l = 0; l < cfg.categories; ++l)
            f_cat.push_back(mlp3(prefix + ".f_cat" + std::to_string(l), cfg.d, cfg.hidden, cfg.d));
    }

    template <class T>
    void register_params(ParameterStore<T>& store, Rng& rng) const {
        for (const Mlp* m : {&f_w, &f_r, &f_c, &f_v}) m->register_params(store, rng);
        for (const auto& m : f_cat) m.register_params(store, rng);
    }
};

/// Relational heads of one scale's final iteration, one row per hyperedge.
template <class T>
struct ScaleTrace {
    std::size_t group_size = 2;
    Var<T> strength;  // (M, 1)
    Var<T> category;  // (M, L)
    Var<T> weights;   // (P, 1), per membership pair
};

template <class T>
Var<T> run_scale(const ParameterStore<T>& store, const ScaleLayers& layers, const NmpConfig& cfg, const Membership& m,
                 const Var<T>& v0, Rng* rng, const NmpOverrides& ov = {}, ScaleTrace<T>* trace = nullptr) {
    if (cfg.iters < 1) throw ConfigError("run_scale: iters must be at least 1");
    if (v0.rows() != m.n_rows) throw DimensionError("run_scale: node count does not match the incidence");
    Var<T> v = v0;
    for (std::size_t it = 0; it < cfg.iters; ++it) {
        auto [z, w] = collective_embedding(store, layers.f_w, v, m);
        auto [r, c] = relational_heads(store, layers.f_r, layers.f_c, z, cfg.tau, cfg.gumbel_noise ? rng : nullptr);
        if (ov.strength) r = constant(Tensor<T>({m.n_edges, 1}, static_cast<T>(*ov.strength)));
        if (ov.category) {
            if (*ov.category >= cfg.categories) throw DimensionError("category override out of range");
            Tensor<T> onehot({m.n_edges, cfg.categories});
            for (std::size_t j = 0; j < m.n_edges; ++j) onehot.at(j, *ov.category) = T{1};
            c = constant(std::move(onehot));
        }
        const Var<T> member_sum = segment_sum(gather_rows(v, m.rows), m.edges, m.n_edges);
        std::vector<Var<T>> per_category;
        for (const auto& f : layers.f_cat) per_category.push_back(f.forward(store, member_sum));
        const Var<T> e = interaction_embedding(r, c, per_category);
        v = hyperedge_to_node(store, layers.f_v, v, e, m);
        if (trace && it + 1 == cfg.iters) {
            trace->strength = r;
            trace->category = c;
            trace->weights = w;
        }
    }
    return v;
}

template <class T>
struct GroupNetOutput {
    Var<T> v;  // (B N, d (S + 1))
    Var<T> q;  // (B N, d)
    std::vector<MultiscaleHypergraph> topology;
    std::vector<ScaleTrace<T>> traces;  // one per scale, scale 0 first
};

class GroupNetEncoder {
public:
    GroupNetEncoder() = default;
    GroupNetEncoder(std::string prefix, NmpConfig cfg, std::size_t t_in)
        : prefix_(std::move(prefix)), cfg_(std::move(cfg)), t_in_(t_in) {
        cfg_.validate();
        f_q_ = mlp3(prefix_ + ".f_q", 2 * t_in_, cfg_.hidden, cfg_.d);
        for (std::size_t s = 0; s <= cfg_.scales.size(); ++s)
            layers_.emplace_back(prefix_ + ".s" + std::to_string(s), cfg_);
    }

    template <class T>
    void register_params(ParameterStore<T>& store, Rng& rng) const {
        f_q_.register_params(store, rng);
        for (const auto& l : layers_) l.register_params(store, rng);
    }

    /// Topology of every scene from the embedding rows (no gradient).
    template <class T>
    std::vector<MultiscaleHypergraph> infer_topology(const Tensor<T>& q, std::size_t n_agents) const {
        if (n_agents < 2) throw ConfigError("topology inference needs at least two agents");
        if (q.rows() % n_agents != 0) throw DimensionError("embedding rows are not a multiple of the agent count");
        for (std::size_t k : cfg_.scales)
            if (k > n_agents)
                throw ConfigError("scale group size " + std::to_string(k) + " exceeds agent count " +
                                  std::to_string(n_agents));
        std::vector<MultiscaleHypergraph> out;
        for (std::size_t b = 0; b < q.rows() / n_agents; ++b)
            out.push_back(infer_multiscale(affinity(q, b * n_agents, n_agents), cfg_.k0_for(n_agents), cfg_.scales,
                                           cfg_.solver));
        return out;
    }

    /// `traj` rows are agents of consecutive scenes, each a flattened (T, 2) trajectory.
    template <class T>
    GroupNetOutput<T> forward(const ParameterStore<T>& store, const Var<T>& traj, std::size_t n_agents, Rng* rng,
                              const std::vector<MultiscaleHypergraph>* given = nullptr,
                              const NmpOverrides& ov = {}) const {
        if (traj.cols() != 2 * t_in_)
            throw DimensionError(prefix_ + ": trajectory width " + std::to_string(traj.cols()) + " expected " +
                                 std::to_string(2 * t_in_));
        if (n_agents == 0 || traj.rows() % n_agents != 0)
            throw DimensionError(prefix_ + ": rows are not a multiple of the agent count");
        GroupNetOutput<T> out;
        out.q = embed_trajectories(store, f_q_, traj);
        if (given) {
            if (given->size() != traj.rows() / n_agents) throw DimensionError(prefix_ + ": topology count mismatch");
            out.topology = *given;
        } else {
            out.topology = infer_topology(out.q.value(), n_agents);
        }
        std::vector<Var<T>> per_scale;
        for (std::size_t s = 0; s < layers_.size(); ++s) {
            const Membership m = flatten_scale(out.topology, s, n_agents);
            ScaleTrace<T> trace;
            trace.group_size = s == 0 ? 2 : cfg_.scales[s - 1];
            per_scale.push_back(run_scale(store, layers_[s], cfg_, m, out.q, rng, ov, &trace));
            out.traces.push_back(std::move(trace));
        }
        out.v = per_scale.size() == 1 ? per_scale.front() : concat_cols(per_scale);
        return out;
    }

    const NmpConfig& config() const noexcept { return cfg_; }
    std::size_t input_length() const noexcept { return t_in_; }
    std::size_t output_width() const { return cfg_.output_width(); }
    const Mlp& f_q() const noexcept { return f_q_; }
    const ScaleLayers& layers(std::size_t s) const { return layers_.at(s); }

private:
    std::string prefix_;
    NmpConfig cfg_;
    std::size_t t_in_ = 0;
    Mlp f_q_;
    std::vector<ScaleLayers> layers_;
};

}  // namespace groupnet
