#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "signflow/dataset.hpp"
#include "signflow/nn.hpp"

namespace signflow {

/// Fixed-capacity ring of the most recent frames.
class SlidingWindow {
public:
    SlidingWindow(std::size_t capacity, std::size_t dim);

    void push(std::span<const float> frame);
    bool full() const noexcept { return size_ == capacity_; }
    std::size_t size() const noexcept { return size_; }
    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t dim() const noexcept { return dim_; }
    std::uint64_t frames_seen() const noexcept { return seen_; }

    /// Frame `i`, counted from the oldest held frame.
    std::span<const float> frame(std::size_t i) const;
    /// Held frames oldest to newest, frame-major.
    std::vector<float> contents() const;

private:
    std::size_t capacity_;
    std::size_t dim_;
    std::vector<float> ring_;
    std::size_t head_ = 0;  // slot of the oldest frame
    std::size_t size_ = 0;
    std::uint64_t seen_ = 0;
};

struct Prediction {
    std::vector<double> probs;
    std::size_t top = 0;
    std::string label;
    double top_probability = 0.0;
};

struct TranscriptConfig {
    double threshold = 0.5;     // minimum top probability to emit
    std::size_t stability = 10; // identical consecutive top labels required
};

/// Sentence assembly: a label is emitted once the last `stability` predictions
/// agree on it at or above the threshold and it differs from the previous word.
class Transcript {
public:
    explicit Transcript(TranscriptConfig cfg = {});

    std::optional<std::string> update(const Prediction& pred);

    const std::vector<std::string>& words() const noexcept { return words_; }
    const std::deque<std::string>& history() const noexcept { return history_; }
    const TranscriptConfig& config() const noexcept { return cfg_; }

private:
    TranscriptConfig cfg_;
    std::deque<std::string> history_;
    std::vector<std::string> words_;
};

struct RecognizerStep {
    std::optional<Prediction> prediction;
    std::optional<std::string> word;
};

/// Streaming recognizer over a loaded model. Single consumer; frames must be
/// pushed in stream order.
class Recognizer {
public:
    Recognizer(ModelParams params, LabelMap labels, TranscriptConfig cfg = {});

    /// Appends a frame; once the window is full, classifies it.
    std::optional<Prediction> push_frame(std::span<const float> frame);

    /// push_frame followed by transcript update.
    RecognizerStep feed(std::span<const float> frame);

    const SlidingWindow& window() const noexcept { return window_; }
    const Transcript& transcript() const noexcept { return transcript_; }
    const ModelParams& params() const noexcept { return params_; }
    const LabelMap& labels() const noexcept { return labels_; }

private:
    ModelParams params_;
    LabelMap labels_;
    SlidingWindow window_;
    Transcript transcript_;
};

/// Classifies one full sequence of frame-major floats.
Prediction classify_sequence(const ModelParams& params, const LabelMap& labels, std::span<const float> sequence);

}  // namespace signflow
