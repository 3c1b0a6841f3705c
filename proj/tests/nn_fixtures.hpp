#pragma once

#include <random>

#include "signflow/nn.hpp"

namespace signflow::testing {

/// D=8, T=5, LSTM 4/6/4, dense 4/3, C=3, relu cells.
inline ModelSpec tiny_spec() { return ModelSpec::stacked(5, 8, {4, 6, 4}, {4, 3}, 3); }

inline SeqBatch random_batch(std::size_t batch, std::size_t timesteps, std::size_t dim, std::uint64_t seed,
                             double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    SeqBatch b(timesteps, Matrix(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(dim)));
    for (auto& m : b)
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return b;
}

inline Matrix random_targets(std::size_t batch, std::size_t classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(classes));
    for (std::size_t b = 0; b < batch; ++b) y(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(rng() % classes)) = 1.0;
    return y;
}

/// Initialized parameters moved to a point where central differences are
/// trustworthy: kernels scaled by 1.5 and positive biases, so gates stay open,
/// relu units stay away from their kink, and no gradient falls to the ~1e-11
/// roundoff floor of an h = 1e-5 difference quotient.
inline ModelParams well_conditioned_params(const ModelSpec& spec, std::uint64_t seed) {
    ModelParams p = init_params(spec, seed);
    std::mt19937_64 rng(seed * 31);
    std::uniform_real_distribution<double> lstm_bias(0.5, 1.5), dense_bias(0.05, 0.3);
    for (auto& l : p.lstm) {
        l.wx *= 1.5;
        l.wh *= 1.5;
        for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = lstm_bias(rng);
    }
    for (auto& l : p.dense) {
        l.w *= 1.5;
        for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = dense_bias(rng);
    }
    return p;
}

}  // namespace signflow::testing
