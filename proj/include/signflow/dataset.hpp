#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "signflow/landmarks.hpp"

namespace signflow {

/// Bijection label string <-> id in [0, C).
class LabelMap {
public:
    LabelMap() = default;

    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }

    const std::string& label(std::size_t id) const { return labels_.at(id); }
    std::optional<std::size_t> find(const std::string& label) const;
    std::size_t id(const std::string& label) const;  // throws DatasetError if unknown
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    /// JSON object {label: id}, keys in id order.
    std::string to_json() const;
    static LabelMap from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static LabelMap load(const std::filesystem::path& path);

    friend bool operator==(const LabelMap& a, const LabelMap& b) { return a.labels_ == b.labels_; }
    friend LabelMap build_label_map(std::span<const std::string> labels);

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::size_t> ids_;
};

/// Label i in input order receives id i. Throws DatasetError on empty input or a duplicate.
LabelMap build_label_map(std::span<const std::string> labels);

/// The 45 signs: A..Z followed by the 19 words and phrases.
std::vector<std::string> isl_labels();

struct LabelEntry {
    std::string label;
    std::vector<std::filesystem::path> files;  // sorted by index
};

struct DatasetIndex {
    std::filesystem::path root;
    std::vector<LabelEntry> entries;  // sorted by label directory name
    std::size_t feature_dim = 0;      // 0 when empty

    std::size_t file_count() const;
    /// Labels whose file count differs from the most common count.
    std::vector<std::string> short_labels() const;
};

/// Walks root/<label>/<NN>.lmk, decoding every file. Any dimension is accepted
/// but all files must agree.
DatasetIndex scan_dataset(const std::filesystem::path& root);

/// File name for video `index` inside a label directory ("07.lmk").
std::string video_file_name(std::size_t index);

/// N sequences of T frames by D features plus one-hot targets over C classes.
struct TensorDataset {
    std::size_t n = 0, t = 0, d = 0, c = 0;
    std::vector<float> x;  // n*t*d, sample-major then frame-major
    std::vector<float> y;  // n*c one-hot

    std::span<const float> sample(std::size_t i) const { return {x.data() + i * t * d, t * d}; }
    std::span<const float> target(std::size_t i) const { return {y.data() + i * c, c}; }
    std::size_t label_of(std::size_t i) const;

    /// Rows `rows` in the given order.
    TensorDataset select(std::span<const std::size_t> rows) const;
};

std::vector<float> one_hot(std::size_t id, std::size_t classes);

/// Stacks files in (label id, video index) order. Every file must hold exactly
/// `frames` frames; `labels` must contain every label in the index.
TensorDataset load_tensors(const DatasetIndex& index, const LabelMap& labels,
                           std::size_t frames = kSequenceFrames);

struct SplitConfig {
    double test_fraction = 0.05;
    std::uint64_t seed = 0;
};

/// ceil(test_fraction * n), tolerant of binary rounding in the product.
std::size_t test_size_for(std::size_t n, double test_fraction);

/// Seeded shuffle, then the first ceil(fraction*N) permuted rows form the test set.
std::pair<TensorDataset, TensorDataset> train_test_split(const TensorDataset& data, const SplitConfig& cfg);

struct SynthConfig {
    std::size_t classes = 10;
    std::size_t videos = 30;
    std::size_t frames = 30;
    std::size_t dims = 132;
    double noise_sd = 0.05;
    std::uint64_t seed = 0;
    double step = 0.1;  // max per-frame random-walk increment
};

/// Per class a clamped random-walk prototype; each video is the prototype plus
/// clamped Gaussian noise. Rows ordered class-major.
TensorDataset synth_gestures(const SynthConfig& cfg);

/// Writes a synthetic dataset in the corpus layout plus labels.json; returns the label map.
LabelMap write_corpus(const TensorDataset& data, const std::filesystem::path& root,
                      std::span<const std::string> label_names);

}  // namespace signflow
