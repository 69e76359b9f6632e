#pragma once

// CVAE trajectory predictor: twin GroupNet encoders (past / future), a
// Gaussian latent, a residual two-block GRU decoder and the three-term loss.
// Coordinates inside the model are normalised with the dataset statistics.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "groupnet/config.hpp"
#include "groupnet/dataset.hpp"
#include "groupnet/nmp.hpp"

namespace groupnet {

struct ModelShape {
    std::size_t n_agents = 0;
    std::size_t t_past = 0;
    std::size_t t_future = 0;

    friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

template <class T>
struct LatentDistribution {
    Var<T> mu;         // (R, d_z)
    Var<T> log_sigma;  // (R, d_z)
    Var<T> sigma;
};

template <class T>
struct DecodeOutput {
    Var<T> future;  // (R, 2 T_f)
    Var<T> past;    // (R, 2 T_p)
    Var<T> future1, past1, future2, past2;
};

template <class T>
struct LossTerms {
    Var<T> total;
    Var<T> prediction;  // ||X^+ - X^+_hat||^2 of the first posterior decoding
    Var<T> kl;
    Var<T> rec;
    Var<T> variety;

    double elbo(const LossConfig& c) const {
        return c.alpha * static_cast<double>(prediction.item()) + c.beta * static_cast<double>(kl.item());
    }
};

/// Fixed hypergraphs for the two encoders (gradient checks).
struct FixedTopology {
    std::vector<MultiscaleHypergraph> past;
    std::vector<MultiscaleHypergraph> future;
};

/// sum over entries of KL(N(mu, sigma^2) || N(0, lambda)), divided by `denom`.
template <class T>
Var<T> gaussian_kl(const Var<T>& mu, const Var<T>& log_sigma, const Var<T>& sigma, double lambda, double denom = 1.0) {
    if (!(lambda > 0)) throw DomainError("gaussian_kl: lambda must be positive");
    const auto n = static_cast<double>(mu.size());
    const Var<T> quad = scale(add(square(sigma), square(mu)), static_cast<T>(1.0 / lambda));
    const Var<T> per = sub(quad, scale(log_sigma, T{2}));
    return add_scalar(scale(sum(per), static_cast<T>(0.5 / denom)),
                      static_cast<T>(0.5 * n * (std::log(lambda) - 1.0) / denom));
}

/// Squared error per scene of every stacked decoding: rows are laid out
/// sample-major (row = k * R + r, R = n_scenes * n_agents). Returns (K * n_scenes, 1).
template <class T>
Var<T> scene_squared_error(const Var<T>& pred, const Var<T>& target, std::size_t n_scenes, std::size_t n_agents) {
    const std::size_t r = n_scenes * n_agents;
    if (target.rows() != r || pred.cols() != target.cols() || pred.rows() % r != 0)
        throw DimensionError("scene_squared_error: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
    const std::size_t k = pred.rows() / r;
    std::vector<std::size_t> tile(pred.rows()), scene(pred.rows());
    for (std::size_t i = 0; i < pred.rows(); ++i) {
        tile[i] = i % r;
        scene[i] = (i / r) * n_scenes + (i % r) / n_agents;
    }
    const Var<T> err = row_sum(square(sub(pred, gather_rows(target, tile))));
    return segment_sum(err, scene, k * n_scenes);
}

/// mean over scenes of min over samples of the scene squared error.
template <class T>
Var<T> variety_loss(const Var<T>& pred, const Var<T>& target, std::size_t n_scenes, std::size_t n_agents) {
    const Var<T> per = scene_squared_error(pred, target, n_scenes, n_agents);
    const std::size_t k = per.rows() / n_scenes;
    std::vector<std::size_t> best(n_scenes);
    for (std::size_t b = 0; b < n_scenes; ++b) {
        std::size_t arg = b;
        for (std::size_t s = 1; s < k; ++s)
            if (per.value()[s * n_scenes + b] < per.value()[arg]) arg = s * n_scenes + b;
        best[b] = arg;
    }
    return scale(sum(gather_rows(per, best)), static_cast<T>(1.0 / static_cast<double>(n_scenes)));
}

/// Row indices repeating [0, r) `times` times.
inline std::vector<std::size_t> tiled_rows(std::size_t r, std::size_t times) {
    std::vector<std::size_t> idx(r * times);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i % r;
    return idx;
}

/// Z = mu + sigma * eps, `times` stacked draws (row = k * R + r).
template <class T>
Var<T> sample_latent(const LatentDistribution<T>& d, std::size_t times, Rng& rng) {
    if (d.mu.shape() != d.sigma.shape()) throw DimensionError("sample_latent: mu and sigma shapes differ");
    const std::size_t r = d.mu.rows();
    Tensor<T> eps({times * r, d.mu.cols()});
    for (auto& e : eps.storage()) e = static_cast<T>(rng.normal());
    const auto rows = tiled_rows(r, times);
    return add(gather_rows(d.mu, rows), mul(gather_rows(d.sigma, rows), constant(std::move(eps))));
}

class GroupNetModel {
public:
    GroupNetModel() = default;
    GroupNetModel(ModelConfig cfg, ModelShape shape) : cfg_(std::move(cfg)), shape_(shape) {
        cfg_.validate();
        if (shape_.n_agents < 2) throw ConfigError("model needs at least two agents");
        for (std::size_t k : cfg_.scales)
            if (k > shape_.n_agents)
                throw ConfigError("scale group size " + std::to_string(k) + " exceeds agent count " +
                                  std::to_string(shape_.n_agents));
        if (cfg_.k0 > shape_.n_agents - 1) throw ConfigError("K0 exceeds N - 1");
        const NmpConfig nmp = cfg_.nmp();
        m_p_ = GroupNetEncoder("m_p", nmp, shape_.t_past);
        m_f_ = GroupNetEncoder("m_f", nmp, shape_.t_future);
        const std::size_t w = nmp.output_width();
        f_mu_ = mlp3("f_mu", 2 * w, cfg_.hidden, cfg_.d_z);
        f_sigma_ = mlp3("f_sigma", 2 * w, cfg_.hidden, cfg_.d_z);
        const std::size_t wout = cfg_.d_z + w;
        for (int b = 0; b < 2; ++b) {
            const std::string p = "dec" + std::to_string(b + 1);
            blocks_[b].gru = Gru(p + ".gru", 2, cfg_.hidden);
            blocks_[b].cond = p + ".cond.weight";
            blocks_[b].future = mlp3(p + ".future", cfg_.hidden + wout, cfg_.hidden, 2 * shape_.t_future);
            blocks_[b].past = mlp3(p + ".past", cfg_.hidden + wout, cfg_.hidden, 2 * shape_.t_past);
        }
    }

    template <class T>
    void register_params(ParameterStore<T>& store, Rng& rng) const {
        m_p_.register_params(store, rng);
        m_f_.register_params(store, rng);
        f_mu_.register_params(store, rng);
        f_sigma_.register_params(store, rng);
        const std::size_t wout = vout_width();
        for (const auto& b : blocks_) {
            b.gru.register_params(store, rng);
            store.add(b.cond, init_weight<T>(wout, 3 * cfg_.hidden, rng));
            b.future.register_params(store, rng);
            b.past.register_params(store, rng);
        }
    }

    /// mu = F_mu([V^+, V^-]); sigma = exp(F_sigma([V^+, V^-])).
    template <class T>
    LatentDistribution<T> posterior(const ParameterStore<T>& store, const Var<T>& v_future, const Var<T>& v_past) const {
        const Var<T> h = concat_cols<T>({v_future, v_past});
        LatentDistribution<T> d;
        d.mu = f_mu_.forward(store, h);
        d.log_sigma = f_sigma_.forward(store, h);
        d.sigma = exp(d.log_sigma);
        return d;
    }

    /// Both residual blocks. `v_out` (R, d_z + W), `past` (R, 2 T_p).
    template <class T>
    DecodeOutput<T> decode(const ParameterStore<T>& store, const Var<T>& v_out, const Var<T>& past) const {
        if (v_out.cols() != vout_width() || past.cols() != 2 * shape_.t_past || v_out.rows() != past.rows())
            throw DimensionError("decode: V^out " + shape_str(v_out.shape()) + " with past " + shape_str(past.shape()));
        DecodeOutput<T> out;
        std::tie(out.future1, out.past1) = run_block(store, blocks_[0], v_out, past);
        std::tie(out.future2, out.past2) = run_block(store, blocks_[1], v_out, sub(past, out.past1));
        out.future = add(out.future1, out.future2);
        out.past = add(out.past1, out.past2);
        return out;
    }

    /// Training objective on a batch of normalised scenes.
    template <class T>
    LossTerms<T> loss(const ParameterStore<T>& store, const LossConfig& lc, const Var<T>& past, const Var<T>& future,
                      Rng& rng, const FixedTopology* topo = nullptr) const {
        lc.validate();
        const std::size_t r = past.rows();
        if (r == 0 || r % shape_.n_agents != 0 || future.rows() != r)
            throw DimensionError("loss: batch rows do not form whole scenes");
        const std::size_t n_scenes = r / shape_.n_agents;
        const auto enc_p = m_p_.forward(store, past, shape_.n_agents, &rng, topo ? &topo->past : nullptr);
        const auto enc_f = m_f_.forward(store, future, shape_.n_agents, &rng, topo ? &topo->future : nullptr);
        const auto dist = posterior(store, enc_f.v, enc_p.v);

        // 1 + K_variety posterior draws decoded in one stacked batch
        const std::size_t k = 1 + lc.k_variety;
        const auto rows = tiled_rows(r, k);
        const Var<T> z = sample_latent(dist, k, rng);
        const Var<T> v_out = concat_cols<T>({z, gather_rows(enc_p.v, rows)});
        const auto dec = decode(store, v_out, gather_rows(past, rows));

        std::vector<std::size_t> first(r), rest((k - 1) * r);
        std::iota(first.begin(), first.end(), 0);
        std::iota(rest.begin(), rest.end(), r);
        const T inv_b = static_cast<T>(1.0 / static_cast<double>(n_scenes));

        LossTerms<T> t;
        t.prediction = scale(sum(square(sub(gather_rows(dec.future, first), future))), inv_b);
        t.kl = gaussian_kl(dist.mu, dist.log_sigma, dist.sigma, lc.lambda, static_cast<double>(n_scenes));
        t.rec = scale(sum(square(sub(gather_rows(dec.past, first), past))), inv_b);
        t.variety = variety_loss(gather_rows(dec.future, rest), future, n_scenes, shape_.n_agents);
        t.total = add(add(scale(t.prediction, static_cast<T>(lc.alpha)), scale(t.kl, static_cast<T>(lc.beta))),
                      add(scale(t.rec, static_cast<T>(lc.gamma)), t.variety));
        return t;
    }

    /// K prior samples per scene in evaluation mode; rows sample-major (k * R + r).
    template <class T>
    Var<T> sample_future(const ParameterStore<T>& store, const Var<T>& past, std::size_t k, double lambda,
                         Rng& rng) const {
        if (k < 1) throw ConfigError("predict: K must be at least 1");
        if (!(lambda > 0)) throw DomainError("predict: lambda must be positive");
        const std::size_t r = past.rows();
        const auto enc_p = m_p_.forward(store, past, shape_.n_agents, nullptr);
        Tensor<T> z({k * r, cfg_.d_z});
        const double sd = std::sqrt(lambda);
        for (auto& e : z.storage()) e = static_cast<T>(rng.normal(0.0, sd));
        const auto rows = tiled_rows(r, k);
        const Var<T> v_out = concat_cols<T>({constant(std::move(z)), gather_rows(enc_p.v, rows)});
        return decode(store, v_out, gather_rows(past, rows)).future;
    }

    const ModelConfig& config() const noexcept { return cfg_; }
    const ModelShape& shape() const noexcept { return shape_; }
    const GroupNetEncoder& past_encoder() const noexcept { return m_p_; }
    const GroupNetEncoder& future_encoder() const noexcept { return m_f_; }
    std::size_t vout_width() const { return cfg_.d_z + cfg_.nmp().output_width(); }

private:
    struct Block {
        Gru gru;
        std::string cond;  // V^out contribution to the GRU input gates
        Mlp future, past;
    };

    template <class T>
    std::pair<Var<T>, Var<T>> run_block(const ParameterStore<T>& store, const Block& b, const Var<T>& v_out,
                                        const Var<T>& past) const {
        const Var<T> cond = matmul(v_out, store.get(b.cond));
        Var<T> h = constant(Tensor<T>({past.rows(), cfg_.hidden}));
        for (std::size_t t = 0; t < shape_.t_past; ++t) {
            const Var<T> gx = add(b.gru.input_gates(store, slice_cols(past, 2 * t, 2)), cond);
            h = b.gru.step_from_gates(store, gx, h);
        }
        const Var<T> feat = concat_cols<T>({h, v_out});
        return {b.future.forward(store, feat), b.past.forward(store, feat)};
    }

    ModelConfig cfg_;
    ModelShape shape_;
    GroupNetEncoder m_p_, m_f_;
    Mlp f_mu_, f_sigma_;
    std::array<Block, 2> blocks_;
};

// ---------------------------------------------------------------------------
// Data plumbing

struct Normalizer {
    std::array<double, 2> mean{0.0, 0.0};
    std::array<double, 2> std{1.0, 1.0};

    double forward(double v, std::size_t c) const { return (v - mean[c]) / std[c]; }
    double inverse(double v, std::size_t c) const { return v * std[c] + mean[c]; }
};

/// Agents of the selected scenes as rows of flattened, normalised (x, y) frames.
struct SceneBatch {
    Tensor<float> past;    // (B N, 2 T_p)
    Tensor<float> future;  // (B N, 2 T_f)
    std::size_t n_scenes = 0;
};

inline SceneBatch make_batch(const Dataset& ds, const std::vector<std::size_t>& scenes, const Normalizer& norm) {
    const std::size_t n = ds.n_agents(), tp = ds.t_past(), tf = ds.t_future();
    SceneBatch b;
    b.n_scenes = scenes.size();
    b.past = Tensor<float>({scenes.size() * n, 2 * tp});
    b.future = Tensor<float>({scenes.size() * n, 2 * tf});
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        const auto& traj = ds.samples.at(scenes[s]).traj;
        for (std::size_t a = 0; a < n; ++a) {
            const std::size_t row = s * n + a;
            for (std::size_t t = 0; t < tp + tf; ++t) {
                const Vec2 p = traj[a][t];
                float* dst = t < tp ? &b.past.at(row, 2 * t) : &b.future.at(row, 2 * (t - tp));
                dst[0] = static_cast<float>(norm.forward(p.x, 0));
                dst[1] = static_cast<float>(norm.forward(p.y, 1));
            }
        }
    }
    return b;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

}  // namespace groupnet
