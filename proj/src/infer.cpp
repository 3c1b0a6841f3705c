#include "signflow/infer.hpp"

#include <algorithm>

#include "signflow/errors.hpp"
#include "signflow/train.hpp"

namespace signflow {

SlidingWindow::SlidingWindow(std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim), ring_(capacity * dim, 0.0f) {
    if (capacity == 0 || dim == 0) throw ShapeError("sliding window needs capacity and dim >= 1");
}

void SlidingWindow::push(std::span<const float> frame) {
    if (frame.size() != dim_)
        throw ShapeError("frame dim " + std::to_string(frame.size()) + " does not match model dim " +
                         std::to_string(dim_));
    const std::size_t slot = (head_ + size_) % capacity_;
    std::copy(frame.begin(), frame.end(), ring_.begin() + static_cast<std::ptrdiff_t>(slot * dim_));
    if (size_ < capacity_)
        ++size_;
    else
        head_ = (head_ + 1) % capacity_;
    ++seen_;
}

std::span<const float> SlidingWindow::frame(std::size_t i) const {
    if (i >= size_) throw ShapeError("window index out of range");
    return {ring_.data() + ((head_ + i) % capacity_) * dim_, dim_};
}

std::vector<float> SlidingWindow::contents() const {
    std::vector<float> out;
    out.reserve(size_ * dim_);
    for (std::size_t i = 0; i < size_; ++i) {
        auto f = frame(i);
        out.insert(out.end(), f.begin(), f.end());
    }
    return out;
}

Transcript::Transcript(TranscriptConfig cfg) : cfg_(cfg) {
    if (cfg_.stability == 0) throw Error("stability length must be >= 1");
}

std::optional<std::string> Transcript::update(const Prediction& pred) {
    history_.push_back(pred.label);
    if (history_.size() > cfg_.stability) history_.pop_front();
    if (history_.size() < cfg_.stability) return std::nullopt;
    if (!std::all_of(history_.begin(), history_.end(), [&](const std::string& l) { return l == pred.label; }))
        return std::nullopt;
    if (pred.top_probability < cfg_.threshold) return std::nullopt;
    if (!words_.empty() && words_.back() == pred.label) return std::nullopt;
    words_.push_back(pred.label);
    return pred.label;
}

Prediction classify_sequence(const ModelParams& params, const LabelMap& labels, std::span<const float> sequence) {
    const Matrix probs = model_forward(params, make_batch(sequence, params.spec.timesteps, params.spec.input_dim));
    Prediction p;
    p.probs.assign(probs.data(), probs.data() + probs.size());
    p.top = argmax(p.probs);
    p.top_probability = p.probs[p.top];
    p.label = labels.label(p.top);
    return p;
}

Recognizer::Recognizer(ModelParams params, LabelMap labels, TranscriptConfig cfg)
    : params_(std::move(params)),
      labels_(std::move(labels)),
      window_(params_.spec.timesteps, params_.spec.input_dim),
      transcript_(cfg) {
    if (labels_.size() != params_.spec.classes())
        throw ShapeError("label map size does not match the model's class count");
}

std::optional<Prediction> Recognizer::push_frame(std::span<const float> frame) {
    window_.push(frame);
    if (!window_.full()) return std::nullopt;
    return classify_sequence(params_, labels_, window_.contents());
}

RecognizerStep Recognizer::feed(std::span<const float> frame) {
    RecognizerStep step;
    step.prediction = push_frame(frame);
    if (step.prediction) step.word = transcript_.update(*step.prediction);
    return step;
}

}  // namespace signflow
