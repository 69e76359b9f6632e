#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "groupnet/autograd.hpp"
#include "groupnet/rng.hpp"

namespace groupnet {

/// A trainable tensor plus its Adam moment buffers.
template <class T>
struct Parameter {
    Var<T> var;
    std::vector<T> m;
    std::vector<T> v;
};

/// Named trainable parameters. Names are dot-separated paths; iteration is
/// lexicographic so every pass over the store is deterministic.
template <class T>
class ParameterStore {
public:
    using Map = std::map<std::string, Parameter<T>>;

    Var<T>& add(const std::string& name, Tensor<T> init) {
        if (params_.contains(name)) throw ContractError("parameter registered twice: " + name);
        auto& p = params_[name];
        const std::size_t n = init.size();
        p.var = Var<T>(std::move(init), true);
        p.m.assign(n, T{0});
        p.v.assign(n, T{0});
        return p.var;
    }

    bool contains(const std::string& name) const { return params_.contains(name); }

    const Var<T>& get(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("unknown parameter: " + name);
        return it->second.var;
    }
    Var<T>& get(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("unknown parameter: " + name);
        return it->second.var;
    }

    Map& entries() { return params_; }
    const Map& entries() const { return params_; }
    std::size_t size() const { return params_.size(); }

    std::size_t numel() const {
        std::size_t n = 0;
        for (const auto& [_, p] : params_) n += p.var.size();
        return n;
    }

    /// Every parameter gets a zero-filled gradient buffer.
    void zero_grad() {
        for (auto& [_, p] : params_) p.var.mutable_grad().assign(p.var.size(), T{0});
        has_grad_ = false;
    }

    /// Called after backward so unreachable parameters report zero gradients.
    void mark_backward() {
        for (auto& [_, p] : params_)
            if (p.var.grad().empty()) p.var.mutable_grad().assign(p.var.size(), T{0});
        has_grad_ = true;
    }
    bool has_grad() const noexcept { return has_grad_; }

    void set_zero() {
        for (auto& [_, p] : params_) std::fill(p.var.mutable_value().storage().begin(),
                                               p.var.mutable_value().storage().end(), T{0});
    }

    template <class U>
    void copy_values_from(const ParameterStore<U>& other) {
        for (auto& [name, p] : params_) {
            const auto& src = other.get(name).value();
            if (src.shape() != p.var.shape())
                throw LoadError("shape mismatch for parameter " + name + ": " + shape_str(src.shape()) + " vs " +
                                shape_str(p.var.shape()));
            auto& dst = p.var.mutable_value().storage();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src[i]);
        }
    }

private:
    Map params_;
    bool has_grad_ = false;
};

template <class T>
void backward(const Var<T>& loss, ParameterStore<T>& store) {
    backward(loss);
    store.mark_backward();
}

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <class T>
Tensor<T> init_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Tensor<T> w({fan_in, fan_out});
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : w.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
    return w;
}

/// Multi-layer perceptron: Linear -> ReLU -> ... -> Linear.
/// Parameters live at `<prefix>.l<i>.weight` / `<prefix>.l<i>.bias`.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::string prefix, std::vector<std::size_t> widths) : prefix_(std::move(prefix)), widths_(std::move(widths)) {
        if (widths_.size() < 2) throw ConfigError("MLP needs at least an input and an output width");
    }

    template <class T>
    void register_params(ParameterStore<T>& store, Rng& rng) const {
        for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
            store.add(weight_name(i), init_weight<T>(widths_[i], widths_[i + 1], rng));
            // same range as the weights, so a dead hidden layer still yields a non-zero output
            Tensor<T> bias({widths_[i + 1]});
            const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[i]));
            for (auto& v : bias.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
            store.add(bias_name(i), std::move(bias));
        }
    }

    template <class T>
    Var<T> forward(const ParameterStore<T>& store, const Var<T>& x) const {
        if (x.cols() != widths_.front())
            throw DimensionError(prefix_ + ": input width " + std::to_string(x.cols()) + " expected " +
                                 std::to_string(widths_.front()));
        Var<T> h = x;
        for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
            h = linear(h, store.get(weight_name(i)), store.get(bias_name(i)));
            if (i + 2 < widths_.size()) h = relu(h);
        }
        return h;
    }

    const std::vector<std::size_t>& widths() const noexcept { return widths_; }
    std::size_t in_width() const { return widths_.front(); }
    std::size_t out_width() const { return widths_.back(); }
    const std::string& prefix() const noexcept { return prefix_; }

private:
    std::string weight_name(std::size_t i) const { return prefix_ + ".l" + std::to_string(i) + ".weight"; }
    std::string bias_name(std::size_t i) const { return prefix_ + ".l" + std::to_string(i) + ".bias"; }

    std::string prefix_;
    std::vector<std::size_t> widths_;
};

/// The usual 3-layer perceptron: in -> hidden -> hidden -> out.
inline Mlp mlp3(std::string prefix, std::size_t in, std::size_t hidden, std::size_t out) {
    return Mlp(std::move(prefix), {in, hidden, hidden, out});
}

template <class T>
Var<T> mlp_forward(const ParameterStore<T>& store, const std::string& prefix, const Var<T>& x,
                   const std::vector<std::size_t>& widths) {
    return Mlp(prefix, widths).forward(store, x);
}

/// GRU cell with gate convention
///   z = sigmoid(W_z [x, h] + b_z)        update gate
///   r = sigmoid(W_r [x, h] + b_r)        reset gate
///   n = tanh(W_n x + b_n + r * (U_n h + c_n))
///   h' = (1 - z) * n + z * h
/// The [x, h] products are split into an input part (`<prefix>.wx`, `.bx`)
/// and a recurrent part (`.wh`, `.bh`), each laid out as [z | r | n].
class Gru {
public:
    Gru() = default;
    Gru(std::string prefix, std::size_t input, std::size_t hidden)
        : prefix_(std::move(prefix)), input_(input), hidden_(hidden) {}

    template <class T>
    void register_params(ParameterStore<T>& store, Rng& rng) const {
        // fan_in of the full [x, h] product
        const std::size_t fan_in = input_ + hidden_;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Tensor<T> wx({input_, 3 * hidden_});
        for (auto& v : wx.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
        Tensor<T> wh({hidden_, 3 * hidden_});
        for (auto& v : wh.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
        store.add(prefix_ + ".wx", std::move(wx));
        store.add(prefix_ + ".bx", Tensor<T>({3 * hidden_}));
        store.add(prefix_ + ".wh", std::move(wh));
        store.add(prefix_ + ".bh", Tensor<T>({3 * hidden_}));
    }

    /// Input-side gate pre-activations; hoist out of a time loop when x is constant.
    template <class T>
    Var<T> input_gates(const ParameterStore<T>& store, const Var<T>& x) const {
        if (x.cols() != input_)
            throw DimensionError(prefix_ + ": input width " + std::to_string(x.cols()) + " expected " +
                                 std::to_string(input_));
        return linear(x, store.get(prefix_ + ".wx"), store.get(prefix_ + ".bx"));
    }

    template <class T>
    Var<T> step_from_gates(const ParameterStore<T>& store, const Var<T>& gx, const Var<T>& h) const {
        if (h.cols() != hidden_ || h.rows() != gx.rows())
            throw DimensionError(prefix_ + ": hidden state " + shape_str(h.shape()) + " expected (" +
                                 std::to_string(gx.rows()) + ", " + std::to_string(hidden_) + ")");
        Var<T> gh = linear(h, store.get(prefix_ + ".wh"), store.get(prefix_ + ".bh"));
        return gru_cell(gx, gh, h);
    }

    template <class T>
    Var<T> step(const ParameterStore<T>& store, const Var<T>& x, const Var<T>& h) const {
        if (x.rows() != h.rows())
            throw DimensionError(prefix_ + ": batch mismatch " + shape_str(x.shape()) + " vs " + shape_str(h.shape()));
        return step_from_gates(store, input_gates(store, x), h);
    }

    std::size_t input() const noexcept { return input_; }
    std::size_t hidden() const noexcept { return hidden_; }
    const std::string& prefix() const noexcept { return prefix_; }

private:
    std::string prefix_;
    std::size_t input_ = 0;
    std::size_t hidden_ = 0;
};

template <class T>
Var<T> gru_step(const ParameterStore<T>& store, const std::string& prefix, const Var<T>& x, const Var<T>& h) {
    return Gru(prefix, x.cols(), h.cols()).step(store, x, h);
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update; `step` counts from 1. Clears gradients.
template <class T>
void adam_step(ParameterStore<T>& store, double lr, long step, const AdamConfig& cfg = {}) {
    if (!store.has_grad()) throw ContractError("adam_step called before backward");
    if (step < 1) throw ContractError("adam step counter starts at 1");
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (auto& [_, p] : store.entries()) {
        auto& w = p.var.mutable_value().storage();
        auto& g = p.var.mutable_grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i];
            p.m[i] = static_cast<T>(cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * gi);
            p.v[i] = static_cast<T>(cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * gi * gi);
            const double mhat = p.m[i] / c1;
            const double vhat = p.v[i] / c2;
            w[i] = static_cast<T>(w[i] - lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
    store.zero_grad();
}

/// Learning rate after `epoch` completed epochs under step decay.
inline double decayed_lr(double base, double factor, int period, int epoch) {
    if (period <= 0) return base;
    return base * std::pow(factor, epoch / period);
}

/// Gumbel noise of the given shape; all zeros when `noise` is false.
template <class T>
Tensor<T> gumbel_noise(Shape shape, Rng* rng) {
    Tensor<T> g(std::move(shape));
    if (rng)
        for (auto& v : g.storage()) v = static_cast<T>(rng->gumbel());
    return g;
}

/// softmax((logits + g) / tau), row-wise. Pass rng == nullptr for noise-free evaluation.
template <class T>
Var<T> gumbel_softmax(const Var<T>& logits, double tau, Rng* rng) {
    if (!(tau > 0.0)) throw DomainError("gumbel_softmax: temperature must be positive");
    if (logits.cols() < 1) throw DimensionError("gumbel_softmax: empty logits");
    Var<T> x = logits;
    if (rng) x = add(x, constant(gumbel_noise<T>(logits.shape(), rng)));
    return softmax_rows(scale(x, static_cast<T>(1.0 / tau)));
}

/// Same as above with caller-supplied (frozen) noise.
template <class T>
Var<T> gumbel_softmax(const Var<T>& logits, double tau, const Tensor<T>& noise) {
    if (!(tau > 0.0)) throw DomainError("gumbel_softmax: temperature must be positive");
    return softmax_rows(scale(add(logits, constant(noise)), static_cast<T>(1.0 / tau)));
}

}  // namespace groupnet
