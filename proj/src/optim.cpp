#include "signflow/optim.hpp"

#include <algorithm>
#include <cmath>

#include "signflow/errors.hpp"

namespace signflow {

void AdamaxHyper::validate() const {
    if (!(lr > 0.0)) throw OptimizerError("learning rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw OptimizerError("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw OptimizerError("beta2 must lie in [0, 1)");
    if (!(eps > 0.0)) throw OptimizerError("eps must be > 0");
}

AdamaxState AdamaxState::for_params(ModelParams& params) {
    AdamaxState s;
    for (const auto& t : params.tensors()) {
        s.m.emplace_back(t.values.size(), 0.0);
        s.u.emplace_back(t.values.size(), 0.0);
    }
    return s;
}

void adamax_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                   std::span<double> u, std::uint64_t t, const AdamaxHyper& hyper) {
    const double step = hyper.lr / (1.0 - std::pow(hyper.beta1, static_cast<double>(t)));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * grad[i];
        u[i] = std::max(hyper.beta2 * u[i], std::abs(grad[i]));
        theta[i] -= step * m[i] / (u[i] + hyper.eps);
    }
}

void adamax_step(ModelParams& params, ModelParams& grads, AdamaxState& state, const AdamaxHyper& hyper) {
    hyper.validate();
    auto p = params.tensors();
    auto g = grads.tensors();
    if (p.size() != g.size() || p.size() != state.m.size() || p.size() != state.u.size())
        throw OptimizerError("parameter, gradient and state tensor counts differ");
    for (std::size_t k = 0; k < p.size(); ++k) {
        const auto n = p[k].values.size();
        if (g[k].values.size() != n || state.m[k].size() != n || state.u[k].size() != n)
            throw OptimizerError("shape mismatch in tensor " + p[k].name);
        if (!std::all_of(g[k].values.begin(), g[k].values.end(), [](double v) { return std::isfinite(v); }))
            throw OptimizerError("non-finite gradient in tensor " + g[k].name);
    }
    ++state.t;
    for (std::size_t k = 0; k < p.size(); ++k)
        adamax_update(p[k].values, g[k].values, state.m[k], state.u[k], state.t, hyper);
}

}  // namespace signflow
