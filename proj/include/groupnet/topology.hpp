#pragma once

// Multiscale hypergraph topology from agent embeddings: cosine affinity,
// scale-0 nearest-neighbour edges and one densest-submatrix hyperedge per
// seed node at every larger scale.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "groupnet/nn.hpp"

namespace groupnet {

struct DegenerateEmbeddingError : NumericError {
    using NumericError::NumericError;
};

/// Square matrix of cosine affinities, kept in double precision.
struct AffinityMatrix {
    std::size_t n = 0;
    std::vector<double> values;

    double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
    double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }

    static AffinityMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        AffinityMatrix a;
        a.n = rows.size();
        for (const auto& r : rows) {
            if (r.size() != a.n) throw DimensionError("affinity matrix must be square");
            a.values.insert(a.values.end(), r.begin(), r.end());
        }
        return a;
    }
};

struct Hyperedge {
    std::size_t seed = 0;
    std::vector<std::size_t> members;  // ascending

    friend bool operator==(const Hyperedge&, const Hyperedge&) = default;
};

struct HypergraphScale {
    std::size_t group_size = 2;  // K of the scale; 2 for the pairwise scale
    std::vector<Hyperedge> edges;

    /// Binary N x M incidence matrix.
    Tensor<float> incidence(std::size_t n_nodes) const {
        Tensor<float> h({n_nodes, edges.size()});
        for (std::size_t j = 0; j < edges.size(); ++j)
            for (std::size_t i : edges[j].members) h.at(i, j) = 1.0f;
        return h;
    }
};

/// scales[0] holds pairwise edges; scales[s >= 1] one hyperedge per node.
struct MultiscaleHypergraph {
    std::size_t n_nodes = 0;
    std::vector<HypergraphScale> scales;
};

enum class HyperedgeSolver { exact, greedy, automatic };

inline std::string to_string(HyperedgeSolver s) {
    switch (s) {
        case HyperedgeSolver::exact: return "exact";
        case HyperedgeSolver::greedy: return "greedy";
        case HyperedgeSolver::automatic: return "auto";
    }
    return "?";
}

inline HyperedgeSolver solver_from_string(const std::string& s) {
    if (s == "exact") return HyperedgeSolver::exact;
    if (s == "greedy") return HyperedgeSolver::greedy;
    if (s == "auto") return HyperedgeSolver::automatic;
    throw ConfigError("unknown hyperedge solver '" + s + "' (expected exact, greedy or auto)");
}

/// q_i = f_Q(flattened past trajectory of agent i). `traj` is (N, 2 T).
template <class T>
Var<T> embed_trajectories(const ParameterStore<T>& store, const Mlp& f_q, const Var<T>& traj) {
    if (traj.cols() != f_q.in_width())
        throw DimensionError("embed_trajectories: trajectory length " + std::to_string(traj.cols()) +
                             " does not match embedding input " + std::to_string(f_q.in_width()));
    return f_q.forward(store, traj);
}

/// A_ij = q_i . q_j / (|q_i| |q_j|) over rows [row0, row0 + n) of `q`.
template <class T>
AffinityMatrix affinity(const Tensor<T>& q, std::size_t row0 = 0, std::size_t n = 0) {
    if (n == 0) n = q.rows() - row0;
    if (row0 + n > q.rows()) throw DimensionError("affinity: row range exceeds embedding");
    const std::size_t d = q.cols();
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t k = 0; k < d; ++k) {
            const double v = q[(row0 + i) * d + k];
            s += v * v;
        }
        norms[i] = std::sqrt(s);
        if (!(norms[i] > 1e-8)) throw DegenerateEmbeddingError("affinity: zero-norm embedding for agent " + std::to_string(i));
    }
    AffinityMatrix a;
    a.n = n;
    a.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double dot = 0;
            for (std::size_t k = 0; k < d; ++k)
                dot += static_cast<double>(q[(row0 + i) * d + k]) * static_cast<double>(q[(row0 + j) * d + k]);
            const double v = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
            a(i, j) = v;
            a(j, i) = v;
        }
    }
    return a;
}

/// Each node links to its k0 highest-affinity neighbours (ties to the lower
/// index), giving N * k0 edges; mutual picks stay as duplicate columns.
inline HypergraphScale pairwise_edges(const AffinityMatrix& a, std::size_t k0) {
    const std::size_t n = a.n;
    if (n < 2 || k0 < 1 || k0 > n - 1)
        throw ConfigError("pairwise_edges: K0 = " + std::to_string(k0) + " outside [1, N-1] for N = " + std::to_string(n));
    HypergraphScale scale;
    scale.group_size = 2;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(j);
        std::stable_sort(others.begin(), others.end(), [&](std::size_t x, std::size_t y) { return a(i, x) > a(i, y); });
        for (std::size_t r = 0; r < k0; ++r) scale.edges.push_back({i, {std::min(i, others[r]), std::max(i, others[r])}});
    }
    return scale;
}

/// Sum of |A_ab| over a, b in the set.
inline double submatrix_abs_sum(const AffinityMatrix& a, const std::vector<std::size_t>& set) {
    double s = 0;
    for (std::size_t x : set)
        for (std::size_t y : set) s += std::abs(a(x, y));
    return s;
}

namespace detail {

inline void check_hyperedge_args(const AffinityMatrix& a, std::size_t seed, std::size_t k) {
    if (seed >= a.n) throw ConfigError("hyperedge: seed node out of range");
    if (k < 2 || k > a.n)
        throw ConfigError("hyperedge: group size " + std::to_string(k) + " outside [2, N] for N = " + std::to_string(a.n));
}

inline double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

}  // namespace detail

/// Exhaustive maximiser of the absolute submatrix sum over all K-sets
/// containing `seed`. Candidates are visited in lexicographic order and only a
/// strictly larger objective replaces the incumbent, so ties go to the
/// lexicographically smallest set.
inline std::vector<std::size_t> hyperedge_exact(const AffinityMatrix& a, std::size_t seed, std::size_t k) {
    detail::check_hyperedge_args(a, seed, k);
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < a.n; ++j)
        if (j != seed) others.push_back(j);
    const std::size_t pick = k - 1;
    std::vector<std::size_t> idx(pick);
    std::iota(idx.begin(), idx.end(), 0);

    std::vector<std::size_t> best;
    double best_val = -1.0;
    std::vector<std::size_t> set(k);
    while (true) {
        set.clear();
        set.push_back(seed);
        for (std::size_t i : idx) set.push_back(others[i]);
        std::sort(set.begin(), set.end());
        const double v = submatrix_abs_sum(a, set);
        if (v > best_val) {
            best_val = v;
            best = set;
        }
        // next combination in lexicographic order
        std::size_t i = pick;
        while (i > 0 && idx[i - 1] == others.size() - pick + (i - 1)) --i;
        if (i == 0) break;
        ++idx[i - 1];
        for (std::size_t j = i; j < pick; ++j) idx[j] = idx[j - 1] + 1;
    }
    return best;
}

/// Start from the seed and repeatedly add the unselected node with the
/// largest absolute affinity to the seed (ties to the lower index).
inline std::vector<std::size_t> hyperedge_greedy(const AffinityMatrix& a, std::size_t seed, std::size_t k) {
    detail::check_hyperedge_args(a, seed, k);
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < a.n; ++j)
        if (j != seed) others.push_back(j);
    std::stable_sort(others.begin(), others.end(),
                     [&](std::size_t x, std::size_t y) { return std::abs(a(seed, x)) > std::abs(a(seed, y)); });
    std::vector<std::size_t> set{seed};
    set.insert(set.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k - 1));
    std::sort(set.begin(), set.end());
    return set;
}

inline constexpr double kExactEnumerationLimit = 1e5;

inline MultiscaleHypergraph infer_multiscale(const AffinityMatrix& a, std::size_t k0,
                                             const std::vector<std::size_t>& scales, HyperedgeSolver solver) {
    for (std::size_t s = 0; s < scales.size(); ++s) {
        if (scales[s] < 2 || scales[s] > a.n)
            throw ConfigError("scale group size " + std::to_string(scales[s]) + " outside [2, N] for N = " +
                              std::to_string(a.n));
        if (s > 0 && scales[s] <= scales[s - 1]) throw ConfigError("scale group sizes must be strictly increasing");
    }
    MultiscaleHypergraph g;
    g.n_nodes = a.n;
    g.scales.push_back(pairwise_edges(a, k0));
    for (std::size_t k : scales) {
        bool exact = solver == HyperedgeSolver::exact;
        if (solver == HyperedgeSolver::automatic) exact = detail::binomial(a.n - 1, k - 1) <= kExactEnumerationLimit;
        HypergraphScale scale;
        scale.group_size = k;
        for (std::size_t i = 0; i < a.n; ++i)
            scale.edges.push_back({i, exact ? hyperedge_exact(a, i, k) : hyperedge_greedy(a, i, k)});
        g.scales.push_back(std::move(scale));
    }
    return g;
}

}  // namespace groupnet
