#include "signflow/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "signflow/dataset.hpp"
#include "signflow/errors.hpp"
#include "signflow/infer.hpp"
#include "signflow/landmarks.hpp"
#include "signflow/nn.hpp"
#include "signflow/optim.hpp"
#include "signflow/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace signflow {

namespace {

/// Bad flag values detected after parsing.
class UsageError : public Error {
public:
    using Error::Error;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("SIGNFLOW_SEED")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        throw UsageError(std::string("SIGNFLOW_SEED is not an unsigned integer: ") + env);
    }
    return 0;
}

LabelMap resolve_labels(const DatasetIndex& index, const std::string& labels_path) {
    if (!labels_path.empty()) return LabelMap::load(labels_path);
    const auto default_path = index.root / "labels.json";
    if (fs::exists(default_path)) return LabelMap::load(default_path);
    std::vector<std::string> names;
    for (const auto& e : index.entries) names.push_back(e.label);
    if (names.empty()) throw DatasetError("dataset at " + index.root.string() + " has no label directories");
    return build_label_map(names);
}

json confusion_json(const ConfusionMatrix& cm) {
    json rows = json::array();
    for (std::size_t i = 0; i < cm.classes(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < cm.classes(); ++j) row.push_back(cm.at(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

class FdStreamBuf : public std::streambuf {
public:
    explicit FdStreamBuf(int fd) : fd_(fd) {}
    ~FdStreamBuf() override { ::close(fd_); }
    FdStreamBuf(const FdStreamBuf&) = delete;
    FdStreamBuf& operator=(const FdStreamBuf&) = delete;

protected:
    int_type underflow() override {
        const ssize_t n = ::read(fd_, buf_, sizeof buf_);
        if (n <= 0) return traits_type::eof();
        setg(buf_, buf_, buf_ + n);
        return traits_type::to_int_type(buf_[0]);
    }

private:
    int fd_;
    char buf_[1 << 16];
};

/// Listens on HOST:PORT and returns the first accepted connection.
int accept_one(const std::string& address, std::ostream& err) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos) throw UsageError("--listen expects HOST:PORT");
    const std::string host = address.substr(0, colon), port = address.substr(colon + 1);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), port.c_str(), &hints, &res) != 0 || !res)
        throw UsageError("cannot resolve listen address " + address);
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);
    const int server = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (server < 0) throw Error("socket() failed");
    const int one = 1;
    ::setsockopt(server, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(server, res->ai_addr, res->ai_addrlen) != 0 || ::listen(server, 1) != 0) {
        ::close(server);
        throw Error("cannot listen on " + address);
    }
    err << "listening on " << address << '\n';
    const int client = ::accept(server, nullptr, nullptr);
    ::close(server);
    if (client < 0) throw Error("accept() failed");
    return client;
}

struct TrainArgs {
    std::string data, labels, model, log;
    int epochs = 300;
    std::size_t batch_size = 32;
    std::size_t frames = kSequenceFrames;
    double test_fraction = 0.05;
    AdamaxHyper hyper;
    std::optional<double> clip;
    bool no_shuffle = false;
    std::vector<std::size_t> lstm_units{64, 128, 64};
    std::vector<std::size_t> dense_units{64, 32};
};

int cmd_train(const TrainArgs& a, std::uint64_t seed, bool deterministic, std::ostream& out, std::ostream& err) {
    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.seed = seed;
    cfg.shuffle = !a.no_shuffle;
    cfg.clip_norm = a.clip;
    cfg.deterministic = deterministic;
    try {
        cfg.validate();
        a.hyper.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (a.lstm_units.empty()) throw UsageError("--lstm-units needs at least one layer");

    const auto index = scan_dataset(a.data);
    const auto labels = resolve_labels(index, a.labels);
    const auto data = load_tensors(index, labels, a.frames);
    const auto [train_set, test_set] = train_test_split(data, SplitConfig{a.test_fraction, seed});
    err << "loaded " << data.n << " sequences (" << data.t << "x" << data.d << ", " << data.c << " classes); train "
        << train_set.n << ", test " << test_set.n << '\n';

    ModelSpec spec;
    try {
        spec = ModelSpec::stacked(data.t, data.d, a.lstm_units, a.dense_units, data.c);
    } catch (const ShapeError& e) {
        throw UsageError(e.what());
    }
    ModelParams params = init_params(spec, seed);
    err << "model parameters: " << param_count(spec) << '\n';

    std::ofstream log;
    if (!a.log.empty()) {
        log.open(a.log, std::ios::trunc);
        if (!log) throw DataError("cannot write " + a.log);
    }
    fit(params, train_set, cfg, a.hyper, [&](const EpochMetrics& m) {
        const auto line = to_json_line(m);
        out << line << '\n';
        if (log) log << line << '\n';
        err << "epoch " << m.epoch << "/" << cfg.epochs << " - " << m.steps << " steps - loss " << m.loss
            << " - categorical_accuracy " << m.categorical_accuracy << '\n';
    });
    out.flush();
    save_model(a.model, params, labels, seed);
    const auto result = evaluate(params, test_set);
    err << "test accuracy " << format_percent(result.accuracy) << " on " << test_set.n << " samples; model written to "
        << a.model << '\n';
    return kExitOk;
}

struct EvalArgs {
    std::string data, model, split = "test";
    double test_fraction = 0.05;
    std::size_t frames = kSequenceFrames;
};

int cmd_eval(const EvalArgs& a, std::uint64_t seed, std::ostream& out, std::ostream& err) {
    const auto ck = load_model(a.model);
    const auto index = scan_dataset(a.data);
    const auto data = load_tensors(index, ck.labels, ck.params.spec.timesteps);
    TensorDataset subset;
    if (a.split == "all") {
        subset = data;
    } else {
        auto [train_set, test_set] = train_test_split(data, SplitConfig{a.test_fraction, seed});
        subset = a.split == "train" ? std::move(train_set) : std::move(test_set);
    }
    const auto r = evaluate(ck.params, subset);
    json j;
    j["split"] = a.split;
    j["samples"] = subset.n;
    j["correct"] = r.confusion.trace();
    j["accuracy"] = r.accuracy;
    j["accuracy_percent"] = format_percent(r.accuracy);
    j["loss"] = r.loss;
    j["labels"] = ck.labels.labels();
    j["confusion"] = confusion_json(r.confusion);
    out << j.dump() << '\n';
    err << a.split << " accuracy " << format_percent(r.accuracy) << " (" << r.confusion.trace() << "/" << subset.n << ")\n";
    return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& file, std::ostream& out) {
    const auto ck = load_model(model_path);
    const auto seq = read_sequence_file(file, ck.params.spec.input_dim);
    if (seq.frame_count() != ck.params.spec.timesteps)
        throw DataError(file + " has " + std::to_string(seq.frame_count()) + " frames, expected " +
                        std::to_string(ck.params.spec.timesteps));
    const auto p = classify_sequence(ck.params, ck.labels, seq.data());
    json j;
    j["file"] = file;
    j["label"] = p.label;
    j["id"] = p.top;
    j["p"] = p.top_probability;
    j["probs"] = p.probs;
    out << j.dump() << '\n';
    return kExitOk;
}

struct StreamArgs {
    std::string model, listen;
    TranscriptConfig transcript;
    bool verbose = false;
};

int cmd_stream(const StreamArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
    auto ck = load_model(a.model);
    if (ck.params.spec.input_dim != kFeatureDim)
        throw DataError("stream needs a model with input dim " + std::to_string(kFeatureDim) + ", this one has " +
                        std::to_string(ck.params.spec.input_dim));
    if (a.transcript.stability == 0) throw UsageError("--stability must be >= 1");
    Recognizer rec(std::move(ck.params), std::move(ck.labels), a.transcript);

    std::unique_ptr<FdStreamBuf> socket_buf;
    std::unique_ptr<std::istream> socket_in;
    std::istream* source = &in;
    if (!a.listen.empty()) {
        socket_buf = std::make_unique<FdStreamBuf>(accept_one(a.listen, err));
        socket_in = std::make_unique<std::istream>(socket_buf.get());
        source = socket_in.get();
    }
    while (auto frame = read_frame_record(*source)) {
        const auto step = rec.feed(frame->values());
        const auto t = rec.window().frames_seen();
        if (a.verbose && step.prediction) {
            json j;
            j["t"] = t;
            j["prediction"] = step.prediction->label;
            j["p"] = step.prediction->top_probability;
            out << j.dump() << '\n';
        }
        if (step.word) {
            json j;
            j["t"] = t;
            j["word"] = *step.word;
            j["p"] = step.prediction->top_probability;
            out << j.dump() << '\n' << std::flush;
        }
    }
    err << "stream ended after " << rec.window().frames_seen() << " frames; transcript:";
    for (const auto& w : rec.transcript().words()) err << ' ' << w;
    err << '\n';
    return kExitOk;
}

int cmd_inspect(const std::string& model_path, std::ostream& out) {
    const auto ck = load_model(model_path);
    json j;
    j["model"] = model_path;
    j["spec"] = json::parse(spec_to_json_string(ck.params.spec));
    j["classes"] = ck.params.spec.classes();
    j["labels"] = ck.labels.labels();
    j["seed"] = ck.seed;
    j["param_count"] = param_count(ck.params.spec);
    out << j.dump() << '\n';
    return kExitOk;
}

int cmd_scan(const std::string& root, std::ostream& out) {
    const auto index = scan_dataset(root);
    json per_label = json::object();
    for (const auto& e : index.entries) per_label[e.label] = e.files.size();
    json j;
    j["root"] = root;
    j["labels"] = index.entries.size();
    j["files"] = index.file_count();
    j["feature_dim"] = index.feature_dim;
    j["per_label"] = std::move(per_label);
    j["short_labels"] = index.short_labels();
    out << j.dump() << '\n';
    return kExitOk;
}

int cmd_synth(const std::string& root, SynthConfig cfg, std::uint64_t seed, std::ostream& out) {
    cfg.seed = seed;
    std::vector<std::string> names;
    for (std::size_t k = 0; k < cfg.classes; ++k) {
        const auto file = video_file_name(k);
        names.push_back("class_" + file.substr(0, file.size() - 4));
    }
    const auto data = synth_gestures(cfg);
    write_corpus(data, root, names);
    json j;
    j["root"] = root;
    j["classes"] = cfg.classes;
    j["videos"] = cfg.videos;
    j["frames"] = cfg.frames;
    j["dims"] = cfg.dims;
    j["files"] = data.n;
    j["seed"] = seed;
    out << j.dump() << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Continuous sign-language recognition from landmark sequences", "signflow"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "signflow 0.1.0");

    std::optional<std::uint64_t> seed_flag;
    bool deterministic = true;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed_flag, "RNG seed (falls back to SIGNFLOW_SEED, then 0)");
        sub->add_flag("--deterministic,!--no-deterministic", deterministic,
                      "Reproducible output (epoch timings logged as 0)");
    };

    auto* dataset = app.add_subcommand("dataset", "Corpus management");
    dataset->require_subcommand(1);
    std::string scan_root;
    auto* scan = dataset->add_subcommand("scan", "Index a corpus directory and report counts");
    scan->add_option("--root,root", scan_root, "Corpus root")->required();

    std::string synth_root;
    SynthConfig synth_cfg;
    auto* synth = dataset->add_subcommand("synth", "Write a synthetic gesture corpus");
    synth->add_option("--out", synth_root, "Output corpus root")->required();
    synth->add_option("--classes", synth_cfg.classes, "Class count")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--videos", synth_cfg.videos, "Videos per class")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--frames", synth_cfg.frames, "Frames per video")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--dims", synth_cfg.dims, "Feature dimension")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--noise", synth_cfg.noise_sd, "Noise standard deviation")->capture_default_str()->check(CLI::NonNegativeNumber);
    add_common(synth);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a model on a corpus");
    train->add_option("--data", train_args.data, "Corpus root")->required();
    train->add_option("--labels", train_args.labels, "Label map JSON (default: <data>/labels.json)");
    train->add_option("--model", train_args.model, "Checkpoint output path")->required();
    train->add_option("--log", train_args.log, "Also write the JSON-lines log here");
    train->add_option("--epochs", train_args.epochs)->capture_default_str();
    train->add_option("--batch-size", train_args.batch_size)->capture_default_str();
    train->add_option("--frames", train_args.frames, "Frames per sequence")->capture_default_str();
    train->add_option("--test-fraction", train_args.test_fraction)->capture_default_str();
    train->add_option("--lr", train_args.hyper.lr)->capture_default_str();
    train->add_option("--beta1", train_args.hyper.beta1)->capture_default_str();
    train->add_option("--beta2", train_args.hyper.beta2)->capture_default_str();
    train->add_option("--eps", train_args.hyper.eps)->capture_default_str();
    train->add_option("--clip", train_args.clip, "Clip gradients to this global L2 norm");
    train->add_flag("--no-shuffle", train_args.no_shuffle, "Keep sample order fixed across epochs");
    train->add_option("--lstm-units", train_args.lstm_units, "LSTM widths")->delimiter(',')->capture_default_str();
    train->add_option("--dense-units", train_args.dense_units, "Hidden dense widths")->delimiter(',')->capture_default_str();
    add_common(train);

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus split");
    eval->add_option("--data", eval_args.data, "Corpus root")->required();
    eval->add_option("--model", eval_args.model, "Checkpoint")->required();
    eval->add_option("--test-fraction", eval_args.test_fraction)->capture_default_str();
    eval->add_option("--split", eval_args.split)->check(CLI::IsMember({"test", "train", "all"}))->capture_default_str();
    add_common(eval);

    std::string predict_model, predict_file;
    auto* predict = app.add_subcommand("predict", "Classify one LMK1 sequence file");
    predict->add_option("--model", predict_model, "Checkpoint")->required();
    predict->add_option("file", predict_file, "LMK1 file")->required();

    StreamArgs stream_args;
    auto* stream = app.add_subcommand("stream", "Recognize a live frame-record stream");
    stream->add_option("--model", stream_args.model, "Checkpoint")->required();
    stream->add_option("--listen", stream_args.listen, "Accept one TCP connection on HOST:PORT instead of stdin");
    stream->add_option("--threshold", stream_args.transcript.threshold)->capture_default_str();
    stream->add_option("--stability", stream_args.transcript.stability)->capture_default_str();
    stream->add_flag("--verbose", stream_args.verbose, "Emit one line per prediction as well");

    std::string inspect_model;
    auto* inspect = app.add_subcommand("inspect", "Print checkpoint metadata");
    inspect->add_option("--model,model", inspect_model, "Checkpoint")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*scan) return cmd_scan(scan_root, out);
        if (*synth) return cmd_synth(synth_root, synth_cfg, resolve_seed(seed_flag), out);
        if (*train) return cmd_train(train_args, resolve_seed(seed_flag), deterministic, out, err);
        if (*eval) return cmd_eval(eval_args, resolve_seed(seed_flag), out, err);
        if (*predict) return cmd_predict(predict_model, predict_file, out);
        if (*stream) return cmd_stream(stream_args, in, out, err);
        if (*inspect) return cmd_inspect(inspect_model, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const ShapeError& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace signflow
