#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "signflow/dataset.hpp"

namespace signflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class Activation { Relu, Tanh, Sigmoid, Softmax, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct LstmSpec {
    std::size_t units = 0;
    bool return_sequences = true;
    Activation activation = Activation::Relu;

    friend bool operator==(const LstmSpec&, const LstmSpec&) = default;
};

struct DenseSpec {
    std::size_t units = 0;
    Activation activation = Activation::Relu;

    friend bool operator==(const DenseSpec&, const DenseSpec&) = default;
};

/// Stacked LSTMs followed by dense layers; the last dense layer is the softmax classifier.
struct ModelSpec {
    std::size_t timesteps = kSequenceFrames;
    std::size_t input_dim = kFeatureDim;
    std::vector<LstmSpec> lstm;
    std::vector<DenseSpec> dense;

    /// LSTM(64,seq,relu) LSTM(128,seq,relu) LSTM(64,last,relu) Dense(64,relu) Dense(32,relu) Dense(C,softmax).
    static ModelSpec standard(std::size_t classes = 45, std::size_t timesteps = kSequenceFrames,
                              std::size_t input_dim = kFeatureDim);
    /// Same topology with custom widths.
    static ModelSpec stacked(std::size_t timesteps, std::size_t input_dim, std::vector<std::size_t> lstm_units,
                             std::vector<std::size_t> dense_units, std::size_t classes,
                             Activation cell = Activation::Relu);

    std::size_t classes() const { return dense.empty() ? 0 : dense.back().units; }

    /// Throws ShapeError unless every LSTM but the last returns sequences, the
    /// last does not, and the final dense layer is softmax.
    void validate() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Gate blocks stacked as [input, forget, candidate, output], h rows each.
struct LstmLayer {
    Matrix wx;  // 4h x d
    Matrix wh;  // 4h x h
    Vector b;   // 4h

    std::size_t units() const { return static_cast<std::size_t>(wh.cols()); }
    std::size_t input_dim() const { return static_cast<std::size_t>(wx.cols()); }
};

struct DenseLayer {
    Matrix w;  // u x d
    Vector b;  // u
};

/// Mutable view of one parameter tensor as contiguous storage.
struct TensorRef {
    std::string name;
    std::span<double> values;
};

struct ModelParams {
    ModelSpec spec;
    std::vector<LstmLayer> lstm;
    std::vector<DenseLayer> dense;

    /// Zero-filled parameters shaped by `spec`.
    static ModelParams zeros(const ModelSpec& spec);

    /// Tensors in network order: per LSTM (wx, wh, b), then per dense (w, b).
    std::vector<TensorRef> tensors();
    std::size_t scalar_count() const;
};

using Gradients = ModelParams;

/// Scalar parameter count: sum of 4((d+h)h + h) per LSTM and (d+1)u per dense layer.
std::size_t param_count(const ModelSpec& spec);

/// Glorot-uniform input and dense kernels, orthogonal recurrent kernels, zero
/// biases except the LSTM forget-gate block which starts at 1.
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

double apply_activation(Activation a, double x);
/// Derivative expressed through the pre-activation; relu'(0) = 0.
double activation_derivative(Activation a, double pre);

/// Row-wise numerically stable softmax.
Matrix softmax_rows(const Matrix& z);
Vector softmax(const Vector& z);

inline constexpr double kProbabilityFloor = 1e-7;

/// -sum y ln(max(p, 1e-7)) for one sample.
double cross_entropy(std::span<const double> p, std::span<const double> y);
/// Mean over rows.
double cross_entropy(const Matrix& probs, const Matrix& y);

/// T time steps, each a B x d matrix (one row per sample).
using SeqBatch = std::vector<Matrix>;

/// Builds a batch from frame-major float samples of shape t x d.
SeqBatch make_batch(const TensorDataset& data, std::span<const std::size_t> rows);
SeqBatch make_batch(std::span<const float> sequence, std::size_t timesteps, std::size_t dim);
Matrix make_targets(const TensorDataset& data, std::span<const std::size_t> rows);

struct LstmStepCache {
    Matrix x, h_prev, c_prev;
    Matrix i, f, g, o;  // post-activation gates
    Matrix zg;          // candidate pre-activation
    Matrix c;           // new cell state
};

struct LstmStepResult {
    Matrix h;
    Matrix c;
    LstmStepCache cache;
};

/// One step over a batch of rows: z = x Wx^T + h Wh^T + b; i,f,o sigmoid; g = act(zg);
/// c = f*c_prev + i*g; h = o*act(c).
LstmStepResult lstm_step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev, const LstmLayer& layer,
                         Activation act);

struct LstmLayerCache {
    std::vector<LstmStepCache> steps;
};

/// Runs the layer from zero state. Output has T entries with return_sequences, else one.
SeqBatch lstm_forward(const SeqBatch& seq, const LstmLayer& layer, bool return_sequences, Activation act,
                      LstmLayerCache* cache = nullptr);

Matrix dense_forward(const Matrix& x, const DenseLayer& layer, Activation act, Matrix* pre = nullptr);

struct DenseCache {
    Matrix in;
    Matrix z;
};

struct ForwardCache {
    std::vector<LstmLayerCache> lstm;
    std::vector<DenseCache> dense;
    Matrix probs;
};

/// B x C class probabilities.
Matrix model_forward(const ModelParams& params, const SeqBatch& batch, ForwardCache* cache = nullptr);

/// Exact gradients of mean categorical cross-entropy for the batch behind `cache`.
Gradients model_backward(const ModelParams& params, const ForwardCache& cache, const Matrix& y);

/// Mean loss of the batch under `params`.
double batch_loss(const ModelParams& params, const SeqBatch& batch, const Matrix& y);

/// Central differences (f(x+h) - f(x-h)) / 2h for each coordinate.
std::vector<double> numerical_gradient(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> theta, double h);

/// Central-difference gradients of batch_loss w.r.t. every parameter.
Gradients numerical_gradient(const ModelParams& params, const SeqBatch& batch, const Matrix& y, double h);

/// max |a-n| / max(|a|, |n|, 1e-8) over all scalars.
double max_relative_error(ModelParams& analytic, ModelParams& numeric);

// SLRM checkpoints: "SLRM", u16 version, u32 json length, JSON metadata, f32 parameters.
inline constexpr std::uint16_t kModelVersion = 1;

/// Compact JSON description of a spec, as stored in checkpoints.
std::string spec_to_json_string(const ModelSpec& spec);

struct Checkpoint {
    ModelParams params;
    LabelMap labels;
    std::uint64_t seed = 0;
};

std::vector<std::uint8_t> encode_model(const ModelParams& params, const LabelMap& labels, std::uint64_t seed);
Checkpoint decode_model(std::span<const std::uint8_t> bytes);
void save_model(const std::string& path, const ModelParams& params, const LabelMap& labels, std::uint64_t seed);
Checkpoint load_model(const std::string& path);

}  // namespace signflow
