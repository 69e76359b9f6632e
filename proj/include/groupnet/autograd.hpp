#pragma once

// Tape-free reverse-mode differentiation: every op result holds pointers to its
// inputs and a closure that pushes its output gradient back into them.
// backward() walks the resulting DAG in reverse topological order.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "groupnet/tensor.hpp"

namespace groupnet {

template <class T>
struct Node {
    Tensor<T> value;
    std::vector<T> grad;  // empty until something flows into it
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::vector<T>& ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), T{0});
        return grad;
    }
};

template <class T>
class Var {
public:
    Var() = default;
    explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }
    explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Tensor<T>& value() const { return node_->value; }
    Tensor<T>& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    std::size_t rows() const { return node_->value.rows(); }
    std::size_t cols() const { return node_->value.cols(); }
    std::size_t size() const { return node_->value.size(); }
    bool requires_grad() const { return node_->requires_grad; }
    const std::vector<T>& grad() const { return node_->grad; }
    std::vector<T>& mutable_grad() { return node_->grad; }
    T item() const { return node_->value.item(); }

    const std::shared_ptr<Node<T>>& node() const noexcept { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

template <class T>
Var<T> constant(Tensor<T> value) {
    return Var<T>(std::move(value), false);
}

namespace detail {

template <class T>
Var<T> make_result(Tensor<T> out, std::initializer_list<const Var<T>*> inputs, const char* op,
                   std::function<void(Node<T>&)> backward) {
    if (!out.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
    Var<T> result(std::move(out), false);
    bool needs = false;
    for (const Var<T>* in : inputs) needs = needs || in->requires_grad();
    if (needs) {
        auto& node = *result.node();
        node.requires_grad = true;
        for (const Var<T>* in : inputs) node.parents.push_back(in->node());
        node.backward_fn = std::move(backward);
    }
    return result;
}

template <class T>
Var<T> make_result(Tensor<T> out, const std::vector<Var<T>>& inputs, const char* op,
                   std::function<void(Node<T>&)> backward) {
    if (!out.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
    Var<T> result(std::move(out), false);
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in.requires_grad();
    if (needs) {
        auto& node = *result.node();
        node.requires_grad = true;
        for (const auto& in : inputs) node.parents.push_back(in.node());
        node.backward_fn = std::move(backward);
    }
    return result;
}

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw DimensionError(msg);
}

// C[m,n] += A[m,k] * B[k,n]. Columns are processed in register-sized tiles;
// each output still accumulates over p in order.
template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    constexpr std::size_t tile = 16;
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        const T* arow = a + i * k;
        std::size_t j0 = 0;
        for (; j0 + tile <= n; j0 += tile) {
            T acc[tile];
            for (std::size_t q = 0; q < tile; ++q) acc[q] = crow[j0 + q];
            for (std::size_t p = 0; p < k; ++p) {
                const T av = arow[p];
                if (av == T{0}) continue;
                const T* brow = b + p * n + j0;
                for (std::size_t q = 0; q < tile; ++q) acc[q] += av * brow[q];
            }
            for (std::size_t q = 0; q < tile; ++q) crow[j0 + q] = acc[q];
        }
        const std::size_t rest = n - j0;
        if (rest == 0) continue;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T{0}) continue;
            const T* brow = b + p * n + j0;
            for (std::size_t q = 0; q < rest; ++q) crow[j0 + q] += av * brow[q];
        }
    }
}

// C[k,n] += A[m,k]^T * B[m,n]
template <class T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    std::vector<T> at(m * k);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
    gemm_nn(at.data(), b, c, k, m, n);
}

// C[m,k] += A[m,n] * B[k,n]^T
template <class T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
    std::vector<T> bt(n * k);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
    gemm_nn(a, bt.data(), c, m, n, k);
}

}  // namespace detail

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    const std::size_t m = a.rows(), k = a.cols();
    detail::require(b.value().rank() == 2 && b.value().dim(0) == k,
                    "matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const std::size_t n = b.cols();
    Tensor<T> out({m, n});
    detail::gemm_nn(a.value().data().data(), b.value().data().data(), out.data().data(), m, k, n);
    auto* an = a.node().get();
    auto* bn = b.node().get();
    return detail::make_result<T>(std::move(out), {&a, &b}, "matmul", [an, bn, m, k, n](Node<T>& self) {
        if (an->requires_grad)
            detail::gemm_nt(self.grad.data(), bn->value.data().data(), an->ensure_grad().data(), m, n, k);
        if (bn->requires_grad)
            detail::gemm_tn(an->value.data().data(), self.grad.data(), bn->ensure_grad().data(), m, k, n);
    });
}

/// x[m,k] * W[k,n] + b[n]
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const std::size_t m = x.rows(), k = x.cols();
    detail::require(w.value().rank() == 2 && w.value().dim(0) == k,
                    "linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
    const std::size_t n = w.cols();
    detail::require(b.size() == n, "linear: bias " + shape_str(b.shape()) + " vs width " + std::to_string(n));
    Tensor<T> out({m, n});
    T* o = out.data().data();
    const T* bv = b.value().data().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) o[i * n + j] = bv[j];
    detail::gemm_nn(x.value().data().data(), w.value().data().data(), o, m, k, n);
    auto* xn = x.node().get();
    auto* wn = w.node().get();
    auto* bnode = b.node().get();
    return detail::make_result<T>(std::move(out), {&x, &w, &b}, "linear", [xn, wn, bnode, m, k, n](Node<T>& self) {
        const T* g = self.grad.data();
        if (xn->requires_grad) detail::gemm_nt(g, wn->value.data().data(), xn->ensure_grad().data(), m, n, k);
        if (wn->requires_grad) detail::gemm_tn(xn->value.data().data(), g, wn->ensure_grad().data(), m, k, n);
        if (bnode->requires_grad) {
            auto& gb = bnode->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
    });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    detail::require(a.size() == b.size(), "add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
    auto* an = a.node().get();
    auto* bn = b.node().get();
    return detail::make_result<T>(std::move(out), {&a, &b}, "add", [an, bn](Node<T>& self) {
        for (auto* p : {an, bn}) {
            if (!p->requires_grad) continue;
            auto& g = p->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    detail::require(a.size() == b.size(), "sub: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
    auto* an = a.node().get();
    auto* bn = b.node().get();
    return detail::make_result<T>(std::move(out), {&a, &b}, "sub", [an, bn](Node<T>& self) {
        if (an->requires_grad) {
            auto& g = an->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            auto& g = bn->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

/// Elementwise product.
template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    detail::require(a.size() == b.size(), "mul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
    auto* an = a.node().get();
    auto* bn = b.node().get();
    return detail::make_result<T>(std::move(out), {&a, &b}, "mul", [an, bn](Node<T>& self) {
        if (an->requires_grad) {
            auto& g = an->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            auto& g = bn->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->value[i];
        }
    });
}

/// a[m,n] scaled row-wise by s[m,1].
template <class T>
Var<T> mul_col(const Var<T>& a, const Var<T>& s) {
    const std::size_t m = a.rows(), n = a.cols();
    detail::require(s.size() == m, "mul_col: " + shape_str(a.shape()) + " vs " + shape_str(s.shape()));
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.value()[i * n + j] * s.value()[i];
    auto* an = a.node().get();
    auto* sn = s.node().get();
    return detail::make_result<T>(std::move(out), {&a, &s}, "mul_col", [an, sn, m, n](Node<T>& self) {
        if (an->requires_grad) {
            auto& g = an->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * sn->value[i];
        }
        if (sn->requires_grad) {
            auto& g = sn->ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                T acc{0};
                for (std::size_t j = 0; j < n; ++j) acc += self.grad[i * n + j] * an->value[i * n + j];
                g[i] += acc;
            }
        }
    });
}

template <class T>
Var<T> scale(const Var<T>& a, T c) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * c;
    auto* an = a.node().get();
    return detail::make_result<T>(std::move(out), {&a}, "scale", [an, c](Node<T>& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * c;
    });
}

template <class T>
Var<T> add_scalar(const Var<T>& a, T c) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + c;
    auto* an = a.node().get();
    return detail::make_result<T>(std::move(out), {&a}, "add_scalar", [an](Node<T>& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

template <class T>
Var<T> relu(const Var<T>& a) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] > T{0} ? a.value()[i] : T{0};
    auto* an = a.node().get();
    return detail::make_result<T>(std::move(out), {&a}, "relu", [an](Node<T>& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (an->value[i] > T{0}) g[i] += self.grad[i];
    });
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = T{1} / (T{1} + std::exp(-a.value()[i]));
    auto* an = a.node().get();
    return detail::make_result<T>(std::move(out), {&a}, "sigmoid", [an](Node<T>& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T y = self.value[i];
            g[i] += self.grad[i] * y * (T{1} - y);
        }
    });
}

template <class T>
Var<T> tanh(const Var<T>& a) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.value()[i]);
    auto* an = a.node().get();
    return detail::make_result<T>(std::move(out), {&a}, "tanh", [an](Node<T>& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T y = self.value[i];
            g[i] += self.grad[i] * (T{1} - y * y);
        }
    });
}

template <class T>
Var<T> exp(const Var<T>& a) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.value()[i]);
    auto* an = a.node().get();
    return detail::make_result<T>(std::move(out), {&a}, "exp", [an](Node<T>& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.value[i];
    });
}

template <class T>
Var<T> square(const Var<T>& a) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * a.value()[i];
    auto* an = a.node().get();
    return detail::make_result<T>(std::move(out), {&a}, "square", [an](Node<T>& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * T{2} * an->value[i];
    });
}

/// Row-wise softmax over the last dimension.
template <class T>
Var<T> softmax_rows(const Var<T>& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < m; ++i) {
        const T* x = a.value().data().data() + i * n;
        T* y = out.data().data() + i * n;
        const T mx = *std::max_element(x, x + n);
        T total{0};
        for (std::size_t j = 0; j < n; ++j) total += (y[j] = std::exp(x[j] - mx));
        for (std::size_t j = 0; j < n; ++j) y[j] /= total;
    }
    auto* an = a.node().get();
    return detail::make_result<T>(std::move(out), {&a}, "softmax", [an, m, n](Node<T>& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
            const T* y = self.value.data().data() + i * n;
            const T* gy = self.grad.data() + i * n;
            T dot{0};
            for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
        }
    });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
    detail::require(!parts.empty(), "concat_cols: no inputs");
    const std::size_t m = parts.front().rows();
    std::size_t n = 0;
    for (const auto& p : parts) {
        detail::require(p.rows() == m, "concat_cols: row mismatch " + shape_str(p.shape()));
        n += p.cols();
    }
    Tensor<T> out({m, n});
    std::size_t off = 0;
    std::vector<std::pair<Node<T>*, std::size_t>> spans;
    for (const auto& p : parts) {
        const std::size_t w = p.cols();
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(p.value().data().data() + i * w, w, out.data().data() + i * n + off);
        spans.emplace_back(p.node().get(), off);
        off += w;
    }
    return detail::make_result<T>(std::move(out), parts, "concat_cols", [spans, m, n](Node<T>& self) {
        for (auto [p, start] : spans) {
            if (!p->requires_grad) continue;
            const std::size_t w = p->value.cols();
            auto& g = p->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j) g[i * w + j] += self.grad[i * n + start + j];
        }
    });
}

template <class T>
Var<T> slice_cols(const Var<T>& a, std::size_t start, std::size_t len) {
    const std::size_t m = a.rows(), n = a.cols();
    detail::require(start + len <= n, "slice_cols: range exceeds " + shape_str(a.shape()));
    Tensor<T> out({m, len});
    for (std::size_t i = 0; i < m; ++i)
        std::copy_n(a.value().data().data() + i * n + start, len, out.data().data() + i * len);
    auto* an = a.node().get();
    return detail::make_result<T>(std::move(out), {&a}, "slice_cols", [an, m, n, start, len](Node<T>& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < len; ++j) g[i * n + start + j] += self.grad[i * len + j];
    });
}

/// out[r] = a[index[r]]
template <class T>
Var<T> gather_rows(const Var<T>& a, std::vector<std::size_t> index) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor<T> out({index.size(), n});
    for (std::size_t r = 0; r < index.size(); ++r) {
        detail::require(index[r] < m, "gather_rows: index out of range");
        std::copy_n(a.value().data().data() + index[r] * n, n, out.data().data() + r * n);
    }
    auto* an = a.node().get();
    return detail::make_result<T>(std::move(out), {&a}, "gather_rows",
                                  [an, idx = std::move(index), n](Node<T>& self) {
                                      auto& g = an->ensure_grad();
                                      for (std::size_t r = 0; r < idx.size(); ++r)
                                          for (std::size_t j = 0; j < n; ++j)
                                              g[idx[r] * n + j] += self.grad[r * n + j];
                                  });
}

/// out[segment[r]] += a[r]; output has n_segments rows (empty segments are zero).
template <class T>
Var<T> segment_sum(const Var<T>& a, std::vector<std::size_t> segment, std::size_t n_segments) {
    const std::size_t m = a.rows(), n = a.cols();
    detail::require(segment.size() == m, "segment_sum: segment ids do not cover rows");
    Tensor<T> out({n_segments, n});
    for (std::size_t r = 0; r < m; ++r) {
        detail::require(segment[r] < n_segments, "segment_sum: segment id out of range");
        for (std::size_t j = 0; j < n; ++j) out[segment[r] * n + j] += a.value()[r * n + j];
    }
    auto* an = a.node().get();
    return detail::make_result<T>(std::move(out), {&a}, "segment_sum",
                                  [an, seg = std::move(segment), n](Node<T>& self) {
                                      auto& g = an->ensure_grad();
                                      for (std::size_t r = 0; r < seg.size(); ++r)
                                          for (std::size_t j = 0; j < n; ++j)
                                              g[r * n + j] += self.grad[seg[r] * n + j];
                                  });
}

/// Sum over the last dimension: (m, n) -> (m, 1).
template <class T>
Var<T> row_sum(const Var<T>& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor<T> out({m, 1});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i] += a.value()[i * n + j];
    auto* an = a.node().get();
    return detail::make_result<T>(std::move(out), {&a}, "row_sum", [an, m, n](Node<T>& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i];
    });
}

template <class T>
Var<T> sum(const Var<T>& a) {
    T total{0};
    for (T v : a.value().data()) total += v;
    auto* an = a.node().get();
    return detail::make_result<T>(Tensor<T>({1}, std::vector<T>{total}), {&a}, "sum", [an](Node<T>& self) {
        auto& g = an->ensure_grad();
        for (auto& v : g) v += self.grad[0];
    });
}

template <class T>
Var<T> reshape(const Var<T>& a, Shape shape) {
    Tensor<T> out = a.value().reshaped(std::move(shape));
    auto* an = a.node().get();
    return detail::make_result<T>(std::move(out), {&a}, "reshape", [an](Node<T>& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

/// Fused GRU update from precomputed gate pre-activations.
/// gx = W_x x + b_x and gh = W_h h + b_h, both laid out as [z | r | n].
///   z = sigmoid(gx_z + gh_z), r = sigmoid(gx_r + gh_r)
///   n = tanh(gx_n + r * gh_n)
///   h' = (1 - z) * n + z * h
template <class T>
Var<T> gru_cell(const Var<T>& gx, const Var<T>& gh, const Var<T>& h) {
    const std::size_t m = h.rows(), hd = h.cols();
    detail::require(gx.rows() == m && gx.cols() == 3 * hd && gh.rows() == m && gh.cols() == 3 * hd,
                    "gru_cell: gate shapes " + shape_str(gx.shape()) + ", " + shape_str(gh.shape()) +
                        " vs hidden " + shape_str(h.shape()));
    Tensor<T> out({m, hd});
    // cache z, r, n for the backward pass
    auto cache = std::make_shared<std::vector<T>>(3 * m * hd);
    const T* x = gx.value().data().data();
    const T* y = gh.value().data().data();
    const T* hv = h.value().data().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < hd; ++j) {
            const std::size_t b = i * 3 * hd;
            const T z = T{1} / (T{1} + std::exp(-(x[b + j] + y[b + j])));
            const T r = T{1} / (T{1} + std::exp(-(x[b + hd + j] + y[b + hd + j])));
            const T nn = std::tanh(x[b + 2 * hd + j] + r * y[b + 2 * hd + j]);
            (*cache)[b + j] = z;
            (*cache)[b + hd + j] = r;
            (*cache)[b + 2 * hd + j] = nn;
            out[i * hd + j] = (T{1} - z) * nn + z * hv[i * hd + j];
        }
    }
    auto* xn = gx.node().get();
    auto* yn = gh.node().get();
    auto* hn = h.node().get();
    return detail::make_result<T>(std::move(out), {&gx, &gh, &h}, "gru_cell",
                                  [xn, yn, hn, cache, m, hd](Node<T>& self) {
        T* gxg = xn->requires_grad ? xn->ensure_grad().data() : nullptr;
        T* ghg = yn->requires_grad ? yn->ensure_grad().data() : nullptr;
        T* hg = hn->requires_grad ? hn->ensure_grad().data() : nullptr;
        const T* yv = yn->value.data().data();
        const T* hv = hn->value.data().data();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < hd; ++j) {
                const std::size_t b = i * 3 * hd;
                const T z = (*cache)[b + j];
                const T r = (*cache)[b + hd + j];
                const T nn = (*cache)[b + 2 * hd + j];
                const T go = self.grad[i * hd + j];
                const T dn = go * (T{1} - z) * (T{1} - nn * nn);
                const T dz = go * (hv[i * hd + j] - nn) * z * (T{1} - z);
                const T dr = dn * yv[b + 2 * hd + j] * r * (T{1} - r);
                if (gxg) {
                    gxg[b + j] += dz;
                    gxg[b + hd + j] += dr;
                    gxg[b + 2 * hd + j] += dn;
                }
                if (ghg) {
                    ghg[b + j] += dz;
                    ghg[b + hd + j] += dr;
                    ghg[b + 2 * hd + j] += dn * r;
                }
                if (hg) hg[i * hd + j] += go * z;
            }
        }
    });
}

/// Populate gradients of every node reachable from a scalar loss.
template <class T>
void backward(const Var<T>& loss) {
    if (!loss.defined() || loss.size() != 1) throw ContractError("backward() requires a scalar loss");
    if (!std::isfinite(loss.item())) throw NumericError("backward() on non-finite loss");
    if (!loss.requires_grad()) return;

    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->ensure_grad()[0] += T{1};
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = *it;
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }
    // intermediate grads are only needed during the sweep
    for (Node<T>* node : order)
        if (node->backward_fn) std::vector<T>().swap(node->grad);
}

}  // namespace groupnet
