#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>

#include "groupnet/nn.hpp"

namespace groupnet {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t checked = 0;
};

/// Compare reverse-mode gradients with central differences.
/// `fn` must be deterministic in the parameter values (freeze any noise).
/// At most `max_per_param` entries of each tensor are probed (evenly strided);
/// zero probes everything. Relative errors use max(|fd|, |ad|, abs_floor) as
/// the denominator so entries at round-off level do not dominate.
template <class T>
GradCheckResult finite_diff_check(const std::function<Var<T>(const ParameterStore<T>&)>& fn,
                                  ParameterStore<T>& params, double eps, std::size_t max_per_param = 0,
                                  double abs_floor = 1e-8) {
    params.zero_grad();
    Var<T> loss = fn(params);
    if (!std::isfinite(static_cast<double>(loss.item()))) throw NumericError("finite_diff_check: non-finite loss");
    backward(loss, params);

    auto eval = [&]() {
        const double v = static_cast<double>(fn(params).item());
        if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite loss under perturbation");
        return v;
    };

    GradCheckResult res;
    for (auto& [name, p] : params.entries()) {
        auto& w = p.var.mutable_value().storage();
        const std::vector<T> analytic = p.var.grad();
        const std::size_t n = w.size();
        const std::size_t stride = (max_per_param == 0 || n <= max_per_param) ? 1 : n / max_per_param;
        for (std::size_t i = 0; i < n; i += stride) {
            const T saved = w[i];
            w[i] = static_cast<T>(saved + eps);
            const double up = eval();
            w[i] = static_cast<T>(saved - eps);
            const double down = eval();
            w[i] = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double ad = static_cast<double>(analytic[i]);
            const double rel = std::abs(ad - fd) / std::max({std::abs(fd), std::abs(ad), abs_floor});
            ++res.checked;
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_param = name;
                res.worst_index = i;
                res.analytic = ad;
                res.numeric = fd;
            }
        }
    }
    params.zero_grad();
    return res;
}

}  // namespace groupnet
