#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "signflow/dataset.hpp"
#include "signflow/nn.hpp"
#include "signflow/optim.hpp"

namespace signflow {

struct TrainConfig {
    int epochs = 300;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    bool shuffle = true;
    std::optional<double> clip_norm;  // global L2 norm, off by default
    // All arithmetic is single-threaded and reproducible either way. When set,
    // epoch wall time is reported as 0 so that logs compare byte for byte.
    bool deterministic = true;

    void validate() const;
};

struct EpochMetrics {
    int epoch = 0;  // 1-based
    double loss = 0.0;
    double categorical_accuracy = 0.0;
    double seconds = 0.0;
    std::size_t steps = 0;
};

/// {"epoch", "loss", "categorical_accuracy", "seconds"} on one line.
std::string to_json_line(const EpochMetrics& m);

inline std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size) {
    return (n + batch_size - 1) / batch_size;
}

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Mini-batch Adamax training on mean categorical cross-entropy. Each epoch draws
/// its own shuffle stream from (seed, epoch); the last partial batch is kept.
/// Throws DivergenceError on a non-finite loss.
std::vector<EpochMetrics> fit(ModelParams& params, const TensorDataset& data, const TrainConfig& cfg,
                              const AdamaxHyper& hyper, const EpochCallback& on_epoch = {});

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes = 0) : classes_(classes), counts_(classes * classes, 0) {}

    void add(std::size_t truth, std::size_t predicted);
    std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * classes_ + predicted); }
    std::size_t classes() const noexcept { return classes_; }
    std::uint64_t total() const;
    std::uint64_t trace() const;
    double accuracy() const;  // trace / total

private:
    std::size_t classes_;
    std::vector<std::uint64_t> counts_;
};

struct EvalResult {
    double accuracy = 0.0;
    double loss = 0.0;
    ConfusionMatrix confusion;
};

/// Argmax with ties broken toward the lowest index.
std::size_t argmax(std::span<const double> p);

/// Scores precomputed probabilities (B x C) against one-hot targets.
EvalResult score_predictions(const Matrix& probs, const Matrix& targets);

EvalResult evaluate(const ModelParams& params, const TensorDataset& data, std::size_t batch_size = 64);

/// Percentage truncated to two decimals, e.g. 60/68 -> "88.23%".
std::string format_percent(double fraction);

}  // namespace signflow
