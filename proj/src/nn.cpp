#include "signflow/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "byte_io.hpp"
#include "signflow/errors.hpp"
#include "signflow/random.hpp"

namespace signflow {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix apply(Activation a, const Matrix& z) {
    if (a == Activation::Softmax) return softmax_rows(z);
    return z.unaryExpr([a](double v) { return apply_activation(a, v); });
}

Matrix derivative(Activation a, const Matrix& pre) {
    return pre.unaryExpr([a](double v) { return activation_derivative(a, v); });
}

Matrix sigmoid_of(const Matrix& z) {
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softmax: return "softmax";
        case Activation::Identity: return "linear";
    }
    return "?";
}

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "softmax") return Activation::Softmax;
    if (name == "linear" || name == "identity") return Activation::Identity;
    throw ShapeError("unknown activation '" + name + "'");
}

ModelSpec ModelSpec::standard(std::size_t classes, std::size_t timesteps, std::size_t input_dim) {
    return stacked(timesteps, input_dim, {64, 128, 64}, {64, 32}, classes);
}

ModelSpec ModelSpec::stacked(std::size_t timesteps, std::size_t input_dim, std::vector<std::size_t> lstm_units,
                             std::vector<std::size_t> dense_units, std::size_t classes, Activation cell) {
    ModelSpec s;
    s.timesteps = timesteps;
    s.input_dim = input_dim;
    for (std::size_t i = 0; i < lstm_units.size(); ++i)
        s.lstm.push_back({lstm_units[i], i + 1 < lstm_units.size(), cell});
    for (auto u : dense_units) s.dense.push_back({u, Activation::Relu});
    s.dense.push_back({classes, Activation::Softmax});
    s.validate();
    return s;
}

void ModelSpec::validate() const {
    require(timesteps >= 1 && input_dim >= 1, "model input dims must be >= 1");
    require(!lstm.empty(), "model needs at least one LSTM layer");
    require(!dense.empty(), "model needs at least one dense layer");
    for (std::size_t i = 0; i < lstm.size(); ++i) {
        require(lstm[i].units >= 1, "LSTM units must be >= 1");
        require(lstm[i].return_sequences == (i + 1 < lstm.size()),
                "only the last LSTM layer may drop sequences, and it must");
        require(lstm[i].activation != Activation::Softmax, "softmax is not a valid LSTM cell activation");
    }
    for (std::size_t i = 0; i < dense.size(); ++i) {
        require(dense[i].units >= 1, "dense units must be >= 1");
        require((dense[i].activation == Activation::Softmax) == (i + 1 == dense.size()),
                "softmax must be the final dense activation and only there");
    }
}

ModelParams ModelParams::zeros(const ModelSpec& spec) {
    spec.validate();
    ModelParams p;
    p.spec = spec;
    std::size_t d = spec.input_dim;
    for (const auto& l : spec.lstm) {
        const auto h = static_cast<Eigen::Index>(l.units);
        p.lstm.push_back({Matrix::Zero(4 * h, static_cast<Eigen::Index>(d)), Matrix::Zero(4 * h, h),
                          Vector::Zero(4 * h)});
        d = l.units;
    }
    for (const auto& l : spec.dense) {
        const auto u = static_cast<Eigen::Index>(l.units);
        p.dense.push_back({Matrix::Zero(u, static_cast<Eigen::Index>(d)), Vector::Zero(u)});
        d = l.units;
    }
    return p;
}

std::vector<TensorRef> ModelParams::tensors() {
    std::vector<TensorRef> out;
    auto add = [&out](std::string name, auto& t) {
        out.push_back({std::move(name), std::span<double>(t.data(), static_cast<std::size_t>(t.size()))});
    };
    for (std::size_t i = 0; i < lstm.size(); ++i) {
        const auto prefix = "lstm" + std::to_string(i);
        add(prefix + ".wx", lstm[i].wx);
        add(prefix + ".wh", lstm[i].wh);
        add(prefix + ".b", lstm[i].b);
    }
    for (std::size_t i = 0; i < dense.size(); ++i) {
        const auto prefix = "dense" + std::to_string(i);
        add(prefix + ".w", dense[i].w);
        add(prefix + ".b", dense[i].b);
    }
    return out;
}

std::size_t ModelParams::scalar_count() const {
    std::size_t n = 0;
    for (const auto& l : lstm) n += static_cast<std::size_t>(l.wx.size() + l.wh.size() + l.b.size());
    for (const auto& l : dense) n += static_cast<std::size_t>(l.w.size() + l.b.size());
    return n;
}

std::size_t param_count(const ModelSpec& spec) {
    std::size_t total = 0;
    std::size_t d = spec.input_dim;
    for (const auto& l : spec.lstm) {
        total += 4 * ((d + l.units) * l.units + l.units);
        d = l.units;
    }
    for (const auto& l : spec.dense) {
        total += (d + 1) * l.units;
        d = l.units;
    }
    return total;
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
    ModelParams p = ModelParams::zeros(spec);
    Rng rng(seed);
    auto glorot = [&rng](Matrix& w, double fan_in, double fan_out) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    };
    for (auto& l : p.lstm) {
        const auto h = l.wh.cols();
        glorot(l.wx, static_cast<double>(l.wx.cols()), static_cast<double>(l.wx.rows()));

        Matrix gauss(4 * h, h);
        for (Eigen::Index r = 0; r < gauss.rows(); ++r)
            for (Eigen::Index c = 0; c < gauss.cols(); ++c) gauss(r, c) = rng.normal();
        Eigen::HouseholderQR<Matrix> qr(gauss);
        Matrix q = qr.householderQ() * Matrix::Identity(4 * h, h);
        const Matrix& r = qr.matrixQR();
        for (Eigen::Index c = 0; c < h; ++c)
            if (r(c, c) < 0) q.col(c) *= -1.0;
        l.wh = q;

        l.b.segment(h, h).setOnes();
    }
    for (auto& l : p.dense) glorot(l.w, static_cast<double>(l.w.cols()), static_cast<double>(l.w.rows()));
    return p;
}

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Sigmoid: return sigmoid(x);
        case Activation::Identity: return x;
        case Activation::Softmax: break;
    }
    throw ShapeError("softmax is not an elementwise activation");
}

double activation_derivative(Activation a, double pre) {
    switch (a) {
        case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: {
            const double t = std::tanh(pre);
            return 1.0 - t * t;
        }
        case Activation::Sigmoid: {
            const double s = sigmoid(pre);
            return s * (1.0 - s);
        }
        case Activation::Identity: return 1.0;
        case Activation::Softmax: break;
    }
    throw ShapeError("softmax has no elementwise derivative");
}

Matrix softmax_rows(const Matrix& z) {
    Matrix out(z.rows(), z.cols());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        RowVector e = (z.row(r).array() - m).exp().matrix();
        out.row(r) = e / e.sum();
    }
    return out;
}

Vector softmax(const Vector& z) { return softmax_rows(z.transpose()).transpose(); }

double cross_entropy(std::span<const double> p, std::span<const double> y) {
    if (p.size() != y.size())
        throw ShapeError("cross_entropy length mismatch: " + std::to_string(p.size()) + " vs " +
                         std::to_string(y.size()));
    double loss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (y[i] != 0.0) loss -= y[i] * std::log(std::max(p[i], kProbabilityFloor));
    return loss;
}

double cross_entropy(const Matrix& probs, const Matrix& y) {
    require(probs.rows() == y.rows() && probs.cols() == y.cols(), "probs and targets differ in shape");
    require(probs.rows() > 0, "empty batch");
    double total = 0.0;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        RowVector pr = probs.row(r), yr = y.row(r);
        total += cross_entropy(std::span<const double>(pr.data(), static_cast<std::size_t>(pr.size())),
                               std::span<const double>(yr.data(), static_cast<std::size_t>(yr.size())));
    }
    return total / static_cast<double>(probs.rows());
}

SeqBatch make_batch(const TensorDataset& data, std::span<const std::size_t> rows) {
    SeqBatch batch(data.t, Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(data.d)));
    for (std::size_t b = 0; b < rows.size(); ++b) {
        if (rows[b] >= data.n) throw ShapeError("batch row out of range");
        auto s = data.sample(rows[b]);
        for (std::size_t t = 0; t < data.t; ++t)
            for (std::size_t j = 0; j < data.d; ++j)
                batch[t](static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) = s[t * data.d + j];
    }
    return batch;
}

SeqBatch make_batch(std::span<const float> sequence, std::size_t timesteps, std::size_t dim) {
    if (sequence.size() != timesteps * dim)
        throw ShapeError("sequence has " + std::to_string(sequence.size()) + " values, expected " +
                         std::to_string(timesteps * dim));
    SeqBatch batch(timesteps, Matrix(1, static_cast<Eigen::Index>(dim)));
    for (std::size_t t = 0; t < timesteps; ++t)
        for (std::size_t j = 0; j < dim; ++j) batch[t](0, static_cast<Eigen::Index>(j)) = sequence[t * dim + j];
    return batch;
}

Matrix make_targets(const TensorDataset& data, std::span<const std::size_t> rows) {
    Matrix y(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(data.c));
    for (std::size_t b = 0; b < rows.size(); ++b) {
        auto row = data.target(rows[b]);
        for (std::size_t k = 0; k < data.c; ++k) y(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = row[k];
    }
    return y;
}

LstmStepResult lstm_step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev, const LstmLayer& layer,
                         Activation act) {
    const auto h = layer.wh.cols();
    require(x.cols() == layer.wx.cols(), "lstm_step: input width " + std::to_string(x.cols()) + " != layer input " +
                                             std::to_string(layer.wx.cols()));
    require(h_prev.cols() == h && c_prev.cols() == h && h_prev.rows() == x.rows() && c_prev.rows() == x.rows(),
            "lstm_step: state shape mismatch");
    Matrix z = x * layer.wx.transpose();
    z.noalias() += h_prev * layer.wh.transpose();
    z.rowwise() += layer.b.transpose();

    LstmStepResult r;
    auto& s = r.cache;
    s.x = x;
    s.h_prev = h_prev;
    s.c_prev = c_prev;
    s.i = sigmoid_of(z.middleCols(0, h));
    s.f = sigmoid_of(z.middleCols(h, h));
    s.zg = z.middleCols(2 * h, h);
    s.g = apply(act, s.zg);
    s.o = sigmoid_of(z.middleCols(3 * h, h));
    s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
    r.c = s.c;
    r.h = s.o.cwiseProduct(apply(act, s.c));
    return r;
}

SeqBatch lstm_forward(const SeqBatch& seq, const LstmLayer& layer, bool return_sequences, Activation act,
                      LstmLayerCache* cache) {
    require(!seq.empty(), "lstm_forward: empty sequence");
    const auto rows = seq.front().rows();
    const auto h = layer.wh.cols();
    Matrix hs = Matrix::Zero(rows, h), cs = Matrix::Zero(rows, h);
    SeqBatch out;
    out.reserve(return_sequences ? seq.size() : 1);
    if (cache) cache->steps.clear();
    for (const auto& x : seq) {
        auto r = lstm_step(x, hs, cs, layer, act);
        hs = std::move(r.h);
        cs = std::move(r.c);
        if (return_sequences) out.push_back(hs);
        if (cache) cache->steps.push_back(std::move(r.cache));
    }
    if (!return_sequences) out.push_back(hs);
    return out;
}

Matrix dense_forward(const Matrix& x, const DenseLayer& layer, Activation act, Matrix* pre) {
    require(x.cols() == layer.w.cols(), "dense_forward: input width " + std::to_string(x.cols()) +
                                            " != layer input " + std::to_string(layer.w.cols()));
    Matrix z = x * layer.w.transpose();
    z.rowwise() += layer.b.transpose();
    Matrix out = apply(act, z);
    if (pre) *pre = std::move(z);
    return out;
}

Matrix model_forward(const ModelParams& params, const SeqBatch& batch, ForwardCache* cache) {
    const auto& spec = params.spec;
    require(batch.size() == spec.timesteps, "batch has " + std::to_string(batch.size()) + " time steps, model expects " +
                                                std::to_string(spec.timesteps));
    for (const auto& m : batch)
        require(m.cols() == static_cast<Eigen::Index>(spec.input_dim) && m.rows() == batch.front().rows(),
                "batch feature width does not match model input dim " + std::to_string(spec.input_dim));
    if (cache) {
        cache->lstm.assign(params.lstm.size(), {});
        cache->dense.assign(params.dense.size(), {});
    }
    const SeqBatch* in = &batch;
    SeqBatch cur;
    for (std::size_t i = 0; i < params.lstm.size(); ++i) {
        cur = lstm_forward(*in, params.lstm[i], spec.lstm[i].return_sequences, spec.lstm[i].activation,
                           cache ? &cache->lstm[i] : nullptr);
        in = &cur;
    }
    Matrix x = cur.back();
    for (std::size_t i = 0; i < params.dense.size(); ++i) {
        Matrix z;
        Matrix y = dense_forward(x, params.dense[i], spec.dense[i].activation, &z);
        if (cache) cache->dense[i] = {std::move(x), std::move(z)};
        x = std::move(y);
    }
    if (cache) cache->probs = x;
    return x;
}

Gradients model_backward(const ModelParams& params, const ForwardCache& cache, const Matrix& y) {
    const auto& spec = params.spec;
    require(cache.dense.size() == params.dense.size() && cache.lstm.size() == params.lstm.size(),
            "cache does not come from this model");
    require(y.rows() == cache.probs.rows() && y.cols() == cache.probs.cols(),
            "targets shape does not match cached probabilities");
    Gradients g = ModelParams::zeros(spec);
    const double batch = static_cast<double>(y.rows());

    Matrix dout;
    for (std::size_t k = params.dense.size(); k-- > 0;) {
        const auto& dc = cache.dense[k];
        Matrix dz = k + 1 == params.dense.size() ? Matrix((cache.probs - y) / batch)
                                                 : Matrix(dout.cwiseProduct(derivative(spec.dense[k].activation, dc.z)));
        g.dense[k].w.noalias() = dz.transpose() * dc.in;
        g.dense[k].b = dz.colwise().sum().transpose();
        dout = dz * params.dense[k].w;
    }

    // Gradient w.r.t. each layer's per-step outputs; the last LSTM only exposes its final step.
    const std::size_t steps = spec.timesteps;
    SeqBatch dh_seq(steps, Matrix::Zero(y.rows(), static_cast<Eigen::Index>(spec.lstm.back().units)));
    dh_seq.back() = dout;

    for (std::size_t k = params.lstm.size(); k-- > 0;) {
        const auto& layer = params.lstm[k];
        const auto& lc = cache.lstm[k];
        const auto act = spec.lstm[k].activation;
        const auto h = layer.wh.cols();
        auto& gl = g.lstm[k];
        Matrix dh_next = Matrix::Zero(y.rows(), h), dc_next = Matrix::Zero(y.rows(), h);
        SeqBatch dx(steps);
        Matrix dz(y.rows(), 4 * h);
        for (std::size_t t = steps; t-- > 0;) {
            const auto& s = lc.steps[t];
            const Matrix dh = dh_seq[t] + dh_next;
            const Matrix dout_gate = dh.cwiseProduct(apply(act, s.c));
            const Matrix dc = dc_next + dh.cwiseProduct(s.o).cwiseProduct(derivative(act, s.c));
            dz.middleCols(0, h) = dc.cwiseProduct(s.g).cwiseProduct(s.i.cwiseProduct((1.0 - s.i.array()).matrix()));
            dz.middleCols(h, h) =
                dc.cwiseProduct(s.c_prev).cwiseProduct(s.f.cwiseProduct((1.0 - s.f.array()).matrix()));
            dz.middleCols(2 * h, h) = dc.cwiseProduct(s.i).cwiseProduct(derivative(act, s.zg));
            dz.middleCols(3 * h, h) = dout_gate.cwiseProduct(s.o.cwiseProduct((1.0 - s.o.array()).matrix()));
            dc_next = dc.cwiseProduct(s.f);

            gl.wx.noalias() += dz.transpose() * s.x;
            gl.wh.noalias() += dz.transpose() * s.h_prev;
            gl.b += dz.colwise().sum().transpose();
            if (k > 0) dx[t] = dz * layer.wx;
            dh_next = dz * layer.wh;
        }
        if (k > 0) dh_seq = std::move(dx);
    }
    return g;
}

double batch_loss(const ModelParams& params, const SeqBatch& batch, const Matrix& y) {
    return cross_entropy(model_forward(params, batch), y);
}

std::vector<double> numerical_gradient(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> theta, double h) {
    if (!(h > 0.0)) throw ShapeError("finite-difference step must be > 0");
    std::vector<double> x(theta.begin(), theta.end()), grad(theta.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = f(x);
        x[i] = saved - h;
        const double down = f(x);
        x[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

Gradients numerical_gradient(const ModelParams& params, const SeqBatch& batch, const Matrix& y, double h) {
    if (!(h > 0.0)) throw ShapeError("finite-difference step must be > 0");
    ModelParams probe = params;
    Gradients g = ModelParams::zeros(params.spec);
    auto probe_tensors = probe.tensors();
    auto grad_tensors = g.tensors();
    for (std::size_t k = 0; k < probe_tensors.size(); ++k) {
        auto values = probe_tensors[k].values;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double up = batch_loss(probe, batch, y);
            values[i] = saved - h;
            const double down = batch_loss(probe, batch, y);
            values[i] = saved;
            grad_tensors[k].values[i] = (up - down) / (2.0 * h);
        }
    }
    return g;
}

double max_relative_error(ModelParams& analytic, ModelParams& numeric) {
    auto a = analytic.tensors();
    auto n = numeric.tensors();
    require(a.size() == n.size(), "gradient structures differ");
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        require(a[k].values.size() == n[k].values.size(), "gradient tensor sizes differ");
        for (std::size_t i = 0; i < a[k].values.size(); ++i) {
            const double x = a[k].values[i], y = n[k].values[i];
            const double denom = std::max({std::abs(x), std::abs(y), 1e-8});
            worst = std::max(worst, std::abs(x - y) / denom);
        }
    }
    return worst;
}

namespace {

constexpr std::array<char, 4> kModelMagic{'S', 'L', 'R', 'M'};

nlohmann::ordered_json spec_to_json(const ModelSpec& spec) {
    nlohmann::ordered_json j;
    j["timesteps"] = spec.timesteps;
    j["input_dim"] = spec.input_dim;
    j["lstm"] = nlohmann::ordered_json::array();
    for (const auto& l : spec.lstm)
        j["lstm"].push_back({{"units", l.units}, {"return_sequences", l.return_sequences},
                             {"activation", to_string(l.activation)}});
    j["dense"] = nlohmann::ordered_json::array();
    for (const auto& l : spec.dense) j["dense"].push_back({{"units", l.units}, {"activation", to_string(l.activation)}});
    return j;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
    ModelSpec s;
    s.timesteps = j.at("timesteps").get<std::size_t>();
    s.input_dim = j.at("input_dim").get<std::size_t>();
    for (const auto& l : j.at("lstm"))
        s.lstm.push_back({l.at("units").get<std::size_t>(), l.at("return_sequences").get<bool>(),
                          activation_from_string(l.at("activation").get<std::string>())});
    for (const auto& l : j.at("dense"))
        s.dense.push_back({l.at("units").get<std::size_t>(), activation_from_string(l.at("activation").get<std::string>())});
    s.validate();
    return s;
}

// Row-major element order within each tensor; gates are row blocks.
template <typename Fn>
void for_each_scalar_row_major(const ModelParams& p, Fn&& fn) {
    auto visit_matrix = [&fn](const Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) fn(m(r, c));
    };
    auto visit_vector = [&fn](const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) fn(v(i));
    };
    for (const auto& l : p.lstm) {
        visit_matrix(l.wx);
        visit_matrix(l.wh);
        visit_vector(l.b);
    }
    for (const auto& l : p.dense) {
        visit_matrix(l.w);
        visit_vector(l.b);
    }
}

}  // namespace

std::string spec_to_json_string(const ModelSpec& spec) { return spec_to_json(spec).dump(); }

std::vector<std::uint8_t> encode_model(const ModelParams& params, const LabelMap& labels, std::uint64_t seed) {
    params.spec.validate();
    if (labels.size() != params.spec.classes())
        throw ShapeError("label map has " + std::to_string(labels.size()) + " labels but the model has " +
                         std::to_string(params.spec.classes()) + " classes");
    nlohmann::ordered_json meta;
    meta["spec"] = spec_to_json(params.spec);
    meta["labels"] = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < labels.size(); ++i) meta["labels"][labels.label(i)] = i;
    meta["seed"] = seed;
    meta["param_count"] = param_count(params.spec);
    const std::string text = meta.dump();

    std::vector<std::uint8_t> out;
    out.reserve(10 + text.size() + 4 * params.scalar_count());
    out.insert(out.end(), kModelMagic.begin(), kModelMagic.end());
    detail::put_u16(out, kModelVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    for_each_scalar_row_major(params, [&out](double v) { detail::put_f32(out, static_cast<float>(v)); });
    return out;
}

Checkpoint decode_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || !std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin()))
        throw DecodeError(DecodeFault::BadMagic, "not an SLRM checkpoint (bad magic)");
    if (bytes.size() < 10) throw DecodeError(DecodeFault::Truncated, "truncated SLRM header");
    const auto version = detail::get_u16(bytes, 4);
    if (version != kModelVersion)
        throw DecodeError(DecodeFault::VersionMismatch, "unsupported SLRM version " + std::to_string(version));
    const std::size_t json_len = detail::get_u32(bytes, 6);
    if (bytes.size() - 10 < json_len) throw DecodeError(DecodeFault::Truncated, "truncated SLRM metadata");

    Checkpoint ck;
    try {
        const auto meta = nlohmann::json::parse(bytes.begin() + 10, bytes.begin() + 10 + static_cast<std::ptrdiff_t>(json_len));
        ck.params = ModelParams::zeros(spec_from_json(meta.at("spec")));
        ck.labels = LabelMap::from_json(meta.at("labels").dump());
        ck.seed = meta.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError(DecodeFault::Malformed, std::string("bad SLRM metadata: ") + e.what());
    } catch (const ShapeError& e) {
        throw DecodeError(DecodeFault::Malformed, std::string("bad SLRM model spec: ") + e.what());
    }
    if (ck.labels.size() != ck.params.spec.classes())
        throw DecodeError(DecodeFault::Malformed, "SLRM label map size does not match the class count");

    const std::size_t payload = bytes.size() - 10 - json_len;
    const std::size_t expected = 4 * param_count(ck.params.spec);
    if (payload < expected)
        throw DecodeError(DecodeFault::Truncated, "truncated SLRM payload: " + std::to_string(payload) + " of " +
                                                      std::to_string(expected) + " bytes");
    if (payload > expected)
        throw DecodeError(DecodeFault::DimMismatch, "SLRM payload of " + std::to_string(payload) +
                                                        " bytes does not match the spec's " +
                                                        std::to_string(expected));
    std::size_t at = 10 + json_len;
    auto read_matrix = [&](Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c, at += 4) m(r, c) = detail::get_f32(bytes, at);
    };
    auto read_vector = [&](Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i, at += 4) v(i) = detail::get_f32(bytes, at);
    };
    for (auto& l : ck.params.lstm) {
        read_matrix(l.wx);
        read_matrix(l.wh);
        read_vector(l.b);
    }
    for (auto& l : ck.params.dense) {
        read_matrix(l.w);
        read_vector(l.b);
    }
    return ck;
}

void save_model(const std::string& path, const ModelParams& params, const LabelMap& labels, std::uint64_t seed) {
    detail::write_file_bytes(path, encode_model(params, labels, seed));
}

Checkpoint load_model(const std::string& path) {
    const auto bytes = detail::read_file_bytes(path);
    try {
        return decode_model(bytes);
    } catch (const DecodeError& e) {
        throw DecodeError(e.fault(), path + ": " + e.what());
    }
}

}  // namespace signflow
