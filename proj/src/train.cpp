#include "signflow/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "signflow/errors.hpp"
#include "signflow/random.hpp"

namespace signflow {

void TrainConfig::validate() const {
    if (epochs < 1) throw Error("epochs must be >= 1");
    if (batch_size < 1) throw Error("batch size must be >= 1");
    if (clip_norm && !(*clip_norm > 0.0)) throw Error("clip threshold must be > 0");
}

std::string to_json_line(const EpochMetrics& m) {
    nlohmann::ordered_json j;
    j["epoch"] = m.epoch;
    j["loss"] = m.loss;
    j["categorical_accuracy"] = m.categorical_accuracy;
    j["seconds"] = m.seconds;
    return j.dump();
}

std::size_t argmax(std::span<const double> p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = i;
    return best;
}

namespace {

std::size_t row_argmax(const Matrix& m, Eigen::Index r) {
    RowVector row = m.row(r);
    return argmax(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
}

void clip_global_norm(ModelParams& grads, double max_norm) {
    double sq = 0.0;
    auto tensors = grads.tensors();
    for (const auto& t : tensors)
        for (double v : t.values) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (auto& t : tensors)
        for (double& v : t.values) v *= scale;
}

}  // namespace

std::vector<EpochMetrics> fit(ModelParams& params, const TensorDataset& data, const TrainConfig& cfg,
                              const AdamaxHyper& hyper, const EpochCallback& on_epoch) {
    cfg.validate();
    hyper.validate();
    if (data.n == 0) throw DatasetError("training set is empty");
    const auto& spec = params.spec;
    if (data.t != spec.timesteps || data.d != spec.input_dim || data.c != spec.classes())
        throw ShapeError("dataset shape (" + std::to_string(data.t) + "x" + std::to_string(data.d) + ", C=" +
                         std::to_string(data.c) + ") does not match the model (" + std::to_string(spec.timesteps) +
                         "x" + std::to_string(spec.input_dim) + ", C=" + std::to_string(spec.classes()) + ")");

    AdamaxState state = AdamaxState::for_params(params);
    std::vector<std::size_t> order(data.n);
    std::vector<EpochMetrics> history;
    history.reserve(static_cast<std::size_t>(cfg.epochs));

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (cfg.shuffle) {
            Rng rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(epoch));
            rng.shuffle(order.begin(), order.end());
        }
        double loss_sum = 0.0;
        std::size_t correct = 0, steps = 0;
        for (std::size_t begin = 0; begin < data.n; begin += cfg.batch_size) {
            const auto len = std::min(cfg.batch_size, data.n - begin);
            std::span<const std::size_t> rows(order.data() + begin, len);
            const SeqBatch batch = make_batch(data, rows);
            const Matrix y = make_targets(data, rows);

            ForwardCache cache;
            const Matrix probs = model_forward(params, batch, &cache);
            const double loss = cross_entropy(probs, y);
            if (!std::isfinite(loss))
                throw DivergenceError(epoch, static_cast<int>(steps + 1),
                                      "training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                          ", batch " + std::to_string(steps + 1));
            loss_sum += loss * static_cast<double>(len);
            for (Eigen::Index r = 0; r < probs.rows(); ++r)
                if (row_argmax(probs, r) == row_argmax(y, r)) ++correct;

            Gradients grads = model_backward(params, cache, y);
            if (cfg.clip_norm) clip_global_norm(grads, *cfg.clip_norm);
            try {
                adamax_step(params, grads, state, hyper);
            } catch (const OptimizerError& e) {
                throw DivergenceError(epoch, static_cast<int>(steps + 1), std::string("training diverged: ") + e.what());
            }
            ++steps;
        }
        EpochMetrics m;
        m.epoch = epoch;
        m.loss = loss_sum / static_cast<double>(data.n);
        m.categorical_accuracy = static_cast<double>(correct) / static_cast<double>(data.n);
        if (!cfg.deterministic)
            m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        m.steps = steps;
        history.push_back(m);
        if (on_epoch) on_epoch(m);
    }
    return history;
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
    if (truth >= classes_ || predicted >= classes_) throw ShapeError("confusion matrix index out of range");
    ++counts_[truth * classes_ + predicted];
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < classes_; ++i) s += counts_[i * classes_ + i];
    return s;
}

double ConfusionMatrix::accuracy() const {
    const auto n = total();
    return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
}

EvalResult score_predictions(const Matrix& probs, const Matrix& targets) {
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols())
        throw ShapeError("predictions and targets differ in shape");
    EvalResult r{0.0, 0.0, ConfusionMatrix(static_cast<std::size_t>(probs.cols()))};
    for (Eigen::Index i = 0; i < probs.rows(); ++i) r.confusion.add(row_argmax(targets, i), row_argmax(probs, i));
    r.accuracy = r.confusion.accuracy();
    r.loss = probs.rows() > 0 ? cross_entropy(probs, targets) : 0.0;
    return r;
}

EvalResult evaluate(const ModelParams& params, const TensorDataset& data, std::size_t batch_size) {
    if (data.n == 0) throw DatasetError("evaluation set is empty");
    if (data.t != params.spec.timesteps || data.d != params.spec.input_dim || data.c != params.spec.classes())
        throw ShapeError("evaluation data shape does not match the model");
    batch_size = std::max<std::size_t>(batch_size, 1);
    EvalResult r{0.0, 0.0, ConfusionMatrix(data.c)};
    double loss_sum = 0.0;
    std::vector<std::size_t> rows;
    for (std::size_t begin = 0; begin < data.n; begin += batch_size) {
        rows.resize(std::min(batch_size, data.n - begin));
        std::iota(rows.begin(), rows.end(), begin);
        const Matrix probs = model_forward(params, make_batch(data, rows));
        const Matrix y = make_targets(data, rows);
        loss_sum += cross_entropy(probs, y) * static_cast<double>(rows.size());
        for (Eigen::Index i = 0; i < probs.rows(); ++i) r.confusion.add(row_argmax(y, i), row_argmax(probs, i));
    }
    r.accuracy = r.confusion.accuracy();
    r.loss = loss_sum / static_cast<double>(data.n);
    return r;
}

std::string format_percent(double fraction) {
    // Truncated, not rounded: 60/68 reads 88.23%. The small nudge keeps values
    // such as 0.29, stored as 0.28999..., from dropping a hundredth.
    const double hundredths = std::trunc(fraction * 1e4 + std::copysign(1e-6, fraction));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", hundredths / 100.0);
    return buf;
}

}  // namespace signflow
