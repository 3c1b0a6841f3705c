#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "signflow/nn.hpp"

namespace signflow {

struct AdamaxHyper {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;

    void validate() const;  // throws OptimizerError
};

/// First-moment and infinity-norm accumulators, one pair of buffers per tensor.
struct AdamaxState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> u;
    std::uint64_t t = 0;

    static AdamaxState for_params(ModelParams& params);
};

/// One Adamax update:
///   t += 1; m = b1 m + (1-b1) g; u = max(b2 u, |g|); theta -= lr/(1-b1^t) * m/(u+eps).
/// Throws OptimizerError on shape mismatch or a non-finite gradient; nothing is
/// modified in that case.
void adamax_step(ModelParams& params, ModelParams& grads, AdamaxState& state, const AdamaxHyper& hyper);

/// Flat-buffer form for a single tensor; the caller advances `t` beforehand.
void adamax_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                   std::span<double> u, std::uint64_t t, const AdamaxHyper& hyper);

}  // namespace signflow
