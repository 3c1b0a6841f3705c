#include "signflow/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "signflow/errors.hpp"
#include "signflow/random.hpp"

namespace fs = std::filesystem;

namespace signflow {

std::optional<std::size_t> LabelMap::find(const std::string& label) const {
    auto it = ids_.find(label);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

std::size_t LabelMap::id(const std::string& label) const {
    if (auto id = find(label)) return *id;
    throw DatasetError("label '" + label + "' is not in the label map");
}

std::string LabelMap::to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < labels_.size(); ++i) j[labels_[i]] = i;
    return j.dump(2);
}

LabelMap LabelMap::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError(std::string("label map is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || j.empty()) throw DatasetError("label map must be a non-empty JSON object");
    std::vector<std::string> by_id(j.size());
    std::vector<bool> seen(j.size(), false);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_number_unsigned()) throw DatasetError("label map id for '" + it.key() + "' is not an unsigned integer");
        const auto id = it.value().get<std::size_t>();
        if (id >= by_id.size() || seen[id]) throw DatasetError("label map ids are not exactly 0..C-1");
        seen[id] = true;
        by_id[id] = it.key();
    }
    return build_label_map(by_id);
}

void LabelMap::save(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_json() << '\n';
}

LabelMap LabelMap::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

LabelMap build_label_map(std::span<const std::string> labels) {
    if (labels.empty()) throw DatasetError("label list is empty");
    LabelMap m;
    for (const auto& l : labels) {
        if (!m.ids_.emplace(l, m.labels_.size()).second) throw DatasetError("duplicate label '" + l + "'");
        m.labels_.push_back(l);
    }
    return m;
}

std::vector<std::string> isl_labels() {
    std::vector<std::string> out;
    for (char ch = 'A'; ch <= 'Z'; ++ch) out.emplace_back(1, ch);
    for (const char* w : {"Namaste", "Hello", "Bye-Bye", "Do not understand", "Good Afternoon", "Good Morning",
                          "How are you?", "I am fine", "My name is", "I/Me", "India/Indian", "Sign", "Language",
                          "Understand", "No", "Yes", "Sorry", "Thank you", "Welcome"})
        out.emplace_back(w);
    return out;
}

std::size_t DatasetIndex::file_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.files.size();
    return n;
}

std::vector<std::string> DatasetIndex::short_labels() const {
    std::map<std::size_t, std::size_t> freq;
    for (const auto& e : entries) ++freq[e.files.size()];
    if (freq.empty()) return {};
    // Most common count; ties go to the larger count.
    std::size_t mode = 0, best = 0;
    for (const auto& [count, times] : freq)
        if (times >= best) mode = count, best = times;
    std::vector<std::string> out;
    for (const auto& e : entries)
        if (e.files.size() < mode) out.push_back(e.label);
    return out;
}

std::string video_file_name(std::size_t index) {
    std::string s = std::to_string(index);
    if (s.size() < 2) s.insert(0, 2 - s.size(), '0');
    return s + ".lmk";
}

DatasetIndex scan_dataset(const fs::path& root) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw DatasetError("dataset root is not a readable directory: " + root.string());
    DatasetIndex index;
    index.root = root;
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root, ec))
        if (entry.is_directory()) dirs.push_back(entry.path());
    if (ec) throw DatasetError("cannot read " + root.string() + ": " + ec.message());
    std::sort(dirs.begin(), dirs.end());

    for (const auto& dir : dirs) {
        LabelEntry e{dir.filename().string(), {}};
        for (const auto& f : fs::directory_iterator(dir))
            if (f.is_regular_file() && f.path().extension() == ".lmk") e.files.push_back(f.path());
        // Zero-padded names sort numerically; longer names (100+) sort after.
        std::sort(e.files.begin(), e.files.end(), [](const fs::path& a, const fs::path& b) {
            const auto sa = a.filename().string(), sb = b.filename().string();
            return sa.size() != sb.size() ? sa.size() < sb.size() : sa < sb;
        });
        for (const auto& f : e.files) {
            GestureSequence seq;
            try {
                seq = read_sequence_file(f.string(), std::nullopt);
            } catch (const DataError& err) {
                throw DatasetError(std::string("indexing failed: ") + err.what());
            }
            if (index.feature_dim == 0) index.feature_dim = seq.dim();
            if (seq.dim() != index.feature_dim)
                throw DatasetError("indexing failed: " + f.string() + " has dim " + std::to_string(seq.dim()) +
                                   ", corpus dim is " + std::to_string(index.feature_dim));
        }
        index.entries.push_back(std::move(e));
    }
    return index;
}

std::size_t TensorDataset::label_of(std::size_t i) const {
    auto row = target(i);
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

TensorDataset TensorDataset::select(std::span<const std::size_t> rows) const {
    TensorDataset out{rows.size(), t, d, c, {}, {}};
    out.x.reserve(rows.size() * t * d);
    out.y.reserve(rows.size() * c);
    for (auto r : rows) {
        if (r >= n) throw ShapeError("row " + std::to_string(r) + " out of range");
        auto s = sample(r);
        auto y_row = target(r);
        out.x.insert(out.x.end(), s.begin(), s.end());
        out.y.insert(out.y.end(), y_row.begin(), y_row.end());
    }
    return out;
}

std::vector<float> one_hot(std::size_t id, std::size_t classes) {
    if (id >= classes)
        throw DatasetError("class id " + std::to_string(id) + " out of range for " + std::to_string(classes) +
                           " classes");
    std::vector<float> v(classes, 0.0f);
    v[id] = 1.0f;
    return v;
}

TensorDataset load_tensors(const DatasetIndex& index, const LabelMap& labels, std::size_t frames) {
    struct Item {
        std::size_t label_id;
        std::size_t order;
        fs::path path;
    };
    std::vector<Item> items;
    for (const auto& e : index.entries) {
        const auto id = labels.find(e.label);
        if (!id) throw DatasetError("label directory '" + e.label + "' is not in the label map");
        for (std::size_t k = 0; k < e.files.size(); ++k) items.push_back({*id, k, e.files[k]});
    }
    std::stable_sort(items.begin(), items.end(),
                     [](const Item& a, const Item& b) { return a.label_id < b.label_id; });

    TensorDataset out;
    out.n = items.size();
    out.t = frames;
    out.d = index.feature_dim;
    out.c = labels.size();
    out.x.reserve(out.n * out.t * out.d);
    out.y.reserve(out.n * out.c);
    for (const auto& item : items) {
        GestureSequence seq;
        try {
            seq = read_sequence_file(item.path.string(), out.d);
        } catch (const DataError& err) {
            throw DatasetError(std::string("load failed: ") + err.what());
        }
        if (seq.frame_count() != frames)
            throw DatasetError("load failed: " + item.path.string() + " has " + std::to_string(seq.frame_count()) +
                               " frames, expected " + std::to_string(frames));
        out.x.insert(out.x.end(), seq.data().begin(), seq.data().end());
        const auto y = one_hot(item.label_id, out.c);
        out.y.insert(out.y.end(), y.begin(), y.end());
    }
    return out;
}

std::size_t test_size_for(std::size_t n, double test_fraction) {
    const double raw = test_fraction * static_cast<double>(n);
    const double nearest = std::round(raw);
    if (std::abs(raw - nearest) < 1e-9 * std::max(1.0, raw)) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::ceil(raw));
}

std::pair<TensorDataset, TensorDataset> train_test_split(const TensorDataset& data, const SplitConfig& cfg) {
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
        throw DatasetError("test fraction must lie strictly between 0 and 1");
    if (data.n < 2) throw DatasetError("need at least 2 samples to split");
    const auto test_n = test_size_for(data.n, cfg.test_fraction);
    if (test_n == 0 || test_n >= data.n)
        throw DatasetError("split of " + std::to_string(data.n) + " samples leaves an empty partition");
    std::vector<std::size_t> perm(data.n);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng rng(cfg.seed);
    rng.shuffle(perm.begin(), perm.end());
    std::span<const std::size_t> all(perm);
    return {data.select(all.subspan(test_n)), data.select(all.first(test_n))};
}

TensorDataset synth_gestures(const SynthConfig& cfg) {
    if (cfg.classes == 0 || cfg.videos == 0 || cfg.frames == 0 || cfg.dims == 0)
        throw DatasetError("synthetic dataset dimensions must all be >= 1");
    if (!(cfg.noise_sd >= 0.0)) throw DatasetError("noise_sd must be >= 0");
    TensorDataset out;
    out.n = cfg.classes * cfg.videos;
    out.t = cfg.frames;
    out.d = cfg.dims;
    out.c = cfg.classes;
    out.x.reserve(out.n * out.t * out.d);
    out.y.reserve(out.n * out.c);
    const std::size_t len = cfg.frames * cfg.dims;
    for (std::size_t k = 0; k < cfg.classes; ++k) {
        Rng proto_rng = Rng::derive(cfg.seed, 2 * k);
        std::vector<double> proto(len);
        for (std::size_t j = 0; j < cfg.dims; ++j) proto[j] = proto_rng.uniform();
        for (std::size_t t = 1; t < cfg.frames; ++t)
            for (std::size_t j = 0; j < cfg.dims; ++j)
                proto[t * cfg.dims + j] =
                    std::clamp(proto[(t - 1) * cfg.dims + j] + proto_rng.uniform(-cfg.step, cfg.step), 0.0, 1.0);

        Rng noise_rng = Rng::derive(cfg.seed, 2 * k + 1);
        const auto y = one_hot(k, cfg.classes);
        for (std::size_t v = 0; v < cfg.videos; ++v) {
            for (std::size_t i = 0; i < len; ++i) {
                double value = proto[i];
                if (cfg.noise_sd > 0.0) value = std::clamp(value + cfg.noise_sd * noise_rng.normal(), 0.0, 1.0);
                out.x.push_back(static_cast<float>(value));
            }
            out.y.insert(out.y.end(), y.begin(), y.end());
        }
    }
    return out;
}

LabelMap write_corpus(const TensorDataset& data, const fs::path& root, std::span<const std::string> label_names) {
    if (label_names.size() != data.c) throw DatasetError("need one label name per class");
    auto labels = build_label_map(label_names);
    for (const auto& name : label_names)
        if (name.empty() || name.find('/') != std::string::npos || name == "." || name == "..")
            throw DatasetError("label '" + name + "' cannot be used as a directory name");
    fs::create_directories(root);
    std::vector<std::size_t> next(data.c, 0);
    for (std::size_t i = 0; i < data.n; ++i) {
        const auto k = data.label_of(i);
        const auto dir = root / labels.label(k);
        fs::create_directories(dir);
        auto s = data.sample(i);
        write_sequence_file((dir / video_file_name(next[k]++)).string(),
                            GestureSequence(data.d, std::vector<float>(s.begin(), s.end())));
    }
    labels.save(root / "labels.json");
    return labels;
}

}  // namespace signflow
