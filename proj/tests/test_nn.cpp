#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include "nn_fixtures.hpp"
#include "signflow/errors.hpp"
#include "signflow/nn.hpp"

using namespace signflow;
using namespace signflow::testing;

namespace {

LstmLayer zero_lstm(Eigen::Index d, Eigen::Index h) {
    return {Matrix::Zero(4 * h, d), Matrix::Zero(4 * h, h), Vector::Zero(4 * h)};
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("param_count") {
    CHECK(param_count(ModelSpec::standard()) == 598061);
    // per-layer terms
    CHECK(4 * ((1662 + 64) * 64 + 64) == 442112);
    CHECK(4 * ((64 + 128) * 128 + 128) == 98816);
    CHECK(4 * ((128 + 64) * 64 + 64) == 49408);
    CHECK((64 + 1) * 64 + (64 + 1) * 32 + (32 + 1) * 45 == 4160 + 2080 + 1485);

    ModelSpec one_lstm;
    one_lstm.input_dim = 1;
    one_lstm.timesteps = 1;
    one_lstm.lstm = {{1, false, Activation::Relu}};
    CHECK(param_count(one_lstm) == 12);

    ModelSpec one_dense;
    one_dense.input_dim = 1;
    one_dense.dense = {{1, Activation::Identity}};
    CHECK(param_count(one_dense) == 2);

    CHECK(ModelParams::zeros(ModelSpec::standard()).scalar_count() == 598061);
}

TEST_CASE("standard spec layout") {
    const auto s = ModelSpec::standard();
    REQUIRE(s.lstm.size() == 3);
    REQUIRE(s.dense.size() == 3);
    CHECK(s.lstm[0].units == 64);
    CHECK(s.lstm[1].units == 128);
    CHECK(s.lstm[2].units == 64);
    CHECK(s.lstm[0].return_sequences);
    CHECK(s.lstm[1].return_sequences);
    CHECK_FALSE(s.lstm[2].return_sequences);
    CHECK(s.dense[0].units == 64);
    CHECK(s.dense[1].units == 32);
    CHECK(s.dense[2].units == 45);
    CHECK(s.dense[2].activation == Activation::Softmax);
    CHECK(s.timesteps == 30);
    CHECK(s.input_dim == 1662);

    auto bad = s;
    bad.lstm[1].return_sequences = false;
    CHECK_THROWS_AS(bad.validate(), ShapeError);
    bad = s;
    bad.dense[1].activation = Activation::Softmax;
    CHECK_THROWS_AS(bad.validate(), ShapeError);
}

TEST_CASE("init_params") {
    const auto spec = ModelSpec::standard();
    const auto p = init_params(spec, 1234);
    std::size_t d = spec.input_dim;
    for (std::size_t k = 0; k < p.lstm.size(); ++k) {
        const auto& l = p.lstm[k];
        const auto h = l.wh.cols();
        const double limit = std::sqrt(6.0 / static_cast<double>(d + 4 * static_cast<std::size_t>(h)));
        CHECK(l.wx.cwiseAbs().maxCoeff() <= limit);
        CHECK(l.wx.cwiseAbs().maxCoeff() > 0.9 * limit);
        const Matrix gram = l.wh.transpose() * l.wh;
        CHECK((gram - Matrix::Identity(h, h)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(l.b.segment(0, h).isZero(0.0));
        CHECK((l.b.segment(h, h).array() == 1.0).all());
        CHECK(l.b.segment(2 * h, 2 * h).isZero(0.0));
        d = static_cast<std::size_t>(h);
    }
    for (const auto& l : p.dense) {
        const double limit = std::sqrt(6.0 / static_cast<double>(l.w.cols() + l.w.rows()));
        CHECK(l.w.cwiseAbs().maxCoeff() <= limit);
        CHECK(l.b.isZero(0.0));
    }
    const auto q = init_params(spec, 1234);
    CHECK(bitwise_equal(p.lstm[1].wh, q.lstm[1].wh));
    CHECK(bitwise_equal(p.dense[2].w, q.dense[2].w));
    const auto r = init_params(spec, 1235);
    CHECK_FALSE(bitwise_equal(p.lstm[0].wx, r.lstm[0].wx));
}

TEST_CASE("lstm_step hand-evaluated cases") {
    const auto layer = zero_lstm(3, 2);
    const Matrix x = Matrix::Zero(1, 3), h0 = Matrix::Zero(1, 2);

    SUBCASE("all zero") {
        const auto r = lstm_step(x, h0, Matrix::Zero(1, 2), layer, Activation::Relu);
        CHECK((r.cache.i.array() == 0.5).all());
        CHECK((r.cache.f.array() == 0.5).all());
        CHECK((r.cache.o.array() == 0.5).all());
        CHECK(r.cache.g.isZero(0.0));
        CHECK(r.c.isZero(0.0));
        CHECK(r.h.isZero(0.0));
    }
    SUBCASE("unit cell state") {
        const auto r = lstm_step(x, h0, Matrix::Ones(1, 2), layer, Activation::Relu);
        CHECK((r.c.array() == 0.5).all());
        CHECK((r.h.array() == 0.25).all());
    }
    SUBCASE("forget bias 1") {
        auto l = layer;
        l.b.segment(2, 2).setOnes();
        const auto r = lstm_step(x, h0, Matrix::Ones(1, 2), l, Activation::Relu);
        CHECK(r.c(0, 0) == doctest::Approx(0.73106).epsilon(1e-5));
        CHECK(r.h(0, 0) == doctest::Approx(0.36553).epsilon(1e-5));
        CHECK(r.c(0, 1) == doctest::Approx(0.7310585786300049).epsilon(1e-15));
        CHECK(r.h(0, 1) == doctest::Approx(0.36552928931500245).epsilon(1e-15));
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(lstm_step(Matrix::Zero(1, 4), h0, h0, layer, Activation::Relu), ShapeError);
    }
}

TEST_CASE("lstm_forward") {
    const auto spec = tiny_spec();
    const auto p = well_conditioned_params(spec, 3);
    const auto one = random_batch(2, 1, 8, 5);
    const auto seq = lstm_forward(one, p.lstm[0], true, Activation::Relu);
    const auto last = lstm_forward(one, p.lstm[0], false, Activation::Relu);
    REQUIRE(seq.size() == 1);
    REQUIRE(last.size() == 1);
    CHECK(bitwise_equal(seq[0], last[0]));

    const auto five = random_batch(2, 5, 8, 6);
    const auto all = lstm_forward(five, p.lstm[0], true, Activation::Relu);
    CHECK(all.size() == 5);
    CHECK(all[0].rows() == 2);
    CHECK(all[0].cols() == 4);
    CHECK(lstm_forward(five, p.lstm[0], false, Activation::Relu).size() == 1);
    CHECK(bitwise_equal(lstm_forward(five, p.lstm[0], false, Activation::Relu)[0], all.back()));

    const auto zeros = lstm_forward(SeqBatch(5, Matrix::Zero(2, 8)), zero_lstm(8, 4), true, Activation::Relu);
    for (const auto& m : zeros) CHECK(m.isZero(0.0));
}

TEST_CASE("dense_forward") {
    DenseLayer id{Matrix::Identity(2, 2), Vector::Zero(2)};
    Matrix x(1, 2);
    x << -1.0, 2.0;
    const Matrix r = dense_forward(x, id, Activation::Relu);
    CHECK(r(0, 0) == 0.0);
    CHECK(r(0, 1) == 2.0);

    DenseLayer zero{Matrix::Zero(45, 7), Vector::Zero(45)};
    const Matrix s = dense_forward(Matrix::Random(1, 7), zero, Activation::Softmax);
    for (Eigen::Index i = 0; i < 45; ++i) CHECK(s(0, i) == doctest::Approx(1.0 / 45).epsilon(1e-15));

    DenseLayer bias{Matrix::Zero(2, 3), Vector(2)};
    bias.b << 1.0, 2.0;
    const Matrix b = dense_forward(Matrix::Random(1, 3), bias, Activation::Identity);
    CHECK(b(0, 0) == 1.0);
    CHECK(b(0, 1) == 2.0);

    CHECK_THROWS_AS(dense_forward(Matrix::Zero(1, 3), id, Activation::Relu), ShapeError);
}

TEST_CASE("softmax") {
    Vector z = Vector::Zero(3);
    const Vector p = softmax(z);
    for (int i = 0; i < 3; ++i) CHECK(p(i) == doctest::Approx(1.0 / 3).epsilon(1e-15));

    Vector big(2);
    big << 1000.0, 0.0;
    const Vector q = softmax(big);
    CHECK(q(0) == 1.0);
    CHECK(q(1) == doctest::Approx(0.0).epsilon(1e-300));
    CHECK(std::isfinite(q(1)));

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int trial = 0; trial < 100; ++trial) {
        Vector v(7);
        for (int i = 0; i < 7; ++i) v(i) = u(rng);
        const double c = u(rng);
        const Vector a = softmax(v), b = softmax((v.array() + c).matrix());
        CHECK(std::abs(a.sum() - 1.0) < 1e-12);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(a.minCoeff() >= 0.0);
        CHECK(a.maxCoeff() <= 1.0);
    }
}

TEST_CASE("cross_entropy") {
    const std::vector<double> y{0, 1, 0};
    CHECK(cross_entropy(std::vector<double>{0, 1, 0}, y) == 0.0);
    std::vector<double> uniform(45, 1.0 / 45), y45(45, 0.0);
    y45[7] = 1.0;
    CHECK(cross_entropy(uniform, y45) == doctest::Approx(3.8066624897703196).epsilon(1e-14));
    CHECK(cross_entropy(std::vector<double>{1, 0, 0}, y) == doctest::Approx(16.11809565095832).epsilon(1e-14));
    CHECK_THROWS_AS(cross_entropy(std::vector<double>{1, 0}, y), ShapeError);
}

TEST_CASE("model_forward") {
    SUBCASE("standard spec, one sample") {
        const auto p = init_params(ModelSpec::standard(), 5);
        const auto batch = random_batch(1, 30, 1662, 9, 0.0, 1.0);
        const Matrix probs = model_forward(p, batch);
        CHECK(probs.rows() == 1);
        CHECK(probs.cols() == 45);
        CHECK(std::abs(probs.sum() - 1.0) < 1e-12);
        CHECK(bitwise_equal(probs, model_forward(p, batch)));
    }
    SUBCASE("zero parameters give uniform output") {
        const auto p = ModelParams::zeros(tiny_spec());
        const Matrix probs = model_forward(p, random_batch(4, 5, 8, 2));
        CHECK((probs.array() - 1.0 / 3).abs().maxCoeff() < 1e-15);
    }
    SUBCASE("row permutation") {
        const auto p = well_conditioned_params(tiny_spec(), 8);
        const auto batch = random_batch(5, 5, 8, 4);
        const std::vector<int> perm{3, 0, 4, 1, 2};
        SeqBatch permuted = batch;
        for (std::size_t t = 0; t < batch.size(); ++t)
            for (int r = 0; r < 5; ++r) permuted[t].row(r) = batch[t].row(perm[static_cast<std::size_t>(r)]);
        const Matrix a = model_forward(p, batch), b = model_forward(p, permuted);
        for (int r = 0; r < 5; ++r) CHECK((b.row(r) - a.row(perm[static_cast<std::size_t>(r)])).cwiseAbs().maxCoeff() < 1e-14);
        for (int r = 0; r < 5; ++r) CHECK(std::abs(a.row(r).sum() - 1.0) < 1e-12);
    }
    SUBCASE("shape mismatch") {
        const auto p = ModelParams::zeros(tiny_spec());
        CHECK_THROWS_AS(model_forward(p, random_batch(1, 4, 8, 1)), ShapeError);
        CHECK_THROWS_AS(model_forward(p, random_batch(1, 5, 9, 1)), ShapeError);
    }
}

TEST_CASE("numerical_gradient on a quadratic") {
    const std::vector<double> theta{3.0};
    const auto g = numerical_gradient([](std::span<const double> t) { return t[0] * t[0]; }, theta, 1e-5);
    CHECK(std::abs(g[0] - 6.0) < 1e-9);
    const std::vector<double> zero{0.0};
    const auto z = numerical_gradient([](std::span<const double> t) { return t[0] * t[0]; }, zero, 1e-5);
    CHECK(std::abs(z[0]) < 1e-12);
}

TEST_CASE("model_backward matches central differences") {
    const auto spec = tiny_spec();
    CHECK(param_count(spec) < 5000);
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        CAPTURE(seed);
        const auto p = well_conditioned_params(spec, seed);
        const auto batch = random_batch(4, 5, 8, seed + 10);
        const auto y = random_targets(4, 3, seed + 20);
        ForwardCache cache;
        model_forward(p, batch, &cache);
        auto analytic = model_backward(p, cache, y);
        auto numeric = numerical_gradient(p, batch, y, 1e-5);
        CHECK(max_relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("model_backward with tanh cells matches central differences") {
    const auto spec = ModelSpec::stacked(4, 5, {3, 4}, {3}, 2, Activation::Tanh);
    const auto p = well_conditioned_params(spec, 17);
    const auto batch = random_batch(2, 4, 5, 18);
    const auto y = random_targets(2, 2, 19);
    ForwardCache cache;
    model_forward(p, batch, &cache);
    auto analytic = model_backward(p, cache, y);
    auto numeric = numerical_gradient(p, batch, y, 1e-5);
    CHECK(max_relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("model_backward properties") {
    const auto spec = tiny_spec();
    const auto p = well_conditioned_params(spec, 4);
    const auto batch = random_batch(3, 5, 8, 40);

    SUBCASE("targets equal to predictions give zero gradients") {
        ForwardCache cache;
        const Matrix probs = model_forward(p, batch, &cache);
        auto g = model_backward(p, cache, probs);
        CHECK(g.dense.back().b.isZero(0.0));
        for (auto& t : g.tensors())
            for (double v : t.values) REQUIRE(v == 0.0);
    }
    SUBCASE("duplicating the batch leaves gradients unchanged") {
        const auto y = random_targets(3, 3, 41);
        SeqBatch doubled = batch;
        for (std::size_t t = 0; t < batch.size(); ++t) {
            doubled[t].resize(6, 8);
            doubled[t] << batch[t], batch[t];
        }
        Matrix yy(6, 3);
        yy << y, y;
        ForwardCache c1, c2;
        model_forward(p, batch, &c1);
        model_forward(p, doubled, &c2);
        auto g1 = model_backward(p, c1, y);
        auto g2 = model_backward(p, c2, yy);
        auto t1 = g1.tensors();
        auto t2 = g2.tensors();
        for (std::size_t k = 0; k < t1.size(); ++k)
            for (std::size_t i = 0; i < t1[k].values.size(); ++i)
                REQUIRE(std::abs(t1[k].values[i] - t2[k].values[i]) <= 1e-14 * std::max(1.0, std::abs(t1[k].values[i])));
    }
    SUBCASE("mismatched targets") {
        ForwardCache cache;
        model_forward(p, batch, &cache);
        CHECK_THROWS_AS(model_backward(p, cache, Matrix::Zero(2, 3)), ShapeError);
    }
}

TEST_CASE("SLRM checkpoint codec") {
    const auto spec = tiny_spec();
    const auto p = well_conditioned_params(spec, 77);
    const std::vector<std::string> names{"Hello", "Bye-Bye", "Yes"};
    const auto labels = build_label_map(names);
    const auto bytes = encode_model(p, labels, 77);
    CHECK(std::memcmp(bytes.data(), "SLRM", 4) == 0);

    const auto ck = decode_model(bytes);
    CHECK(ck.params.spec == spec);
    CHECK(ck.labels == labels);
    CHECK(ck.seed == 77);

    // Payload is exactly 4 * param_count after the metadata.
    const std::size_t json_len = bytes[6] | (bytes[7] << 8) | (bytes[8] << 16) | (bytes[9] << 24);
    CHECK(bytes.size() - 10 - json_len == 4 * param_count(spec));

    // Parameters survive to f32 precision; forward passes agree to f32 rounding.
    ModelParams rounded = p;
    for (auto& t : rounded.tensors())
        for (double& v : t.values) v = static_cast<double>(static_cast<float>(v));
    auto decoded = ck.params;
    auto dt = decoded.tensors();
    auto rt = rounded.tensors();
    for (std::size_t k = 0; k < dt.size(); ++k)
        CHECK(std::memcmp(dt[k].values.data(), rt[k].values.data(), dt[k].values.size() * sizeof(double)) == 0);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto batch = random_batch(2, 5, 8, 100 + s);
        CHECK((model_forward(ck.params, batch) - model_forward(p, batch)).cwiseAbs().maxCoeff() < 1e-5);
    }
    // Re-encoding the decoded model is byte-identical.
    CHECK(encode_model(ck.params, ck.labels, ck.seed) == bytes);

    SUBCASE("truncated") {
        auto t = bytes;
        t.pop_back();
        try {
            decode_model(t);
            FAIL("expected DecodeError");
        } catch (const DecodeError& e) {
            CHECK(e.fault() == DecodeFault::Truncated);
        }
    }
    SUBCASE("extra payload") {
        auto t = bytes;
        t.insert(t.end(), {0, 0, 0, 0});
        CHECK_THROWS_AS(decode_model(t), DecodeError);
    }
    SUBCASE("bad magic and version") {
        auto t = bytes;
        t[0] = 'X';
        CHECK_THROWS_AS(decode_model(t), DecodeError);
        t = bytes;
        t[4] = 9;
        try {
            decode_model(t);
            FAIL("expected DecodeError");
        } catch (const DecodeError& e) {
            CHECK(e.fault() == DecodeFault::VersionMismatch);
        }
    }
    SUBCASE("label count must match classes") {
        const std::vector<std::string> two{"a", "b"};
        CHECK_THROWS_AS(encode_model(p, build_label_map(two), 0), ShapeError);
    }
}
