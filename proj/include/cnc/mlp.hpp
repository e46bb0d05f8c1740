#pragma once

#include <cstdint>
#include <vector>

#include "cnc/matrix.hpp"
#include "cnc/rng.hpp"

namespace cnc {

enum class Activation : std::uint8_t { Relu = 0, Identity = 1 };

struct Layer {
    Matrix weight;             // out x in
    std::vector<double> bias;  // out
    Activation act = Activation::Relu;

    std::size_t in_dim() const { return weight.cols(); }
    std::size_t out_dim() const { return weight.rows(); }
};

struct ModelConfig {
    std::size_t in_dim = 0;
    std::vector<std::size_t> hidden_dims;  // last entry is the representation dim d
    std::size_t num_classes = 0;
};

// Encoder stack plus a linear classification head. Representations are the
// post-activation outputs of the last encoder layer.
struct MlpModel {
    std::vector<Layer> encoder;
    Matrix cls_weight;             // C x d
    std::vector<double> cls_bias;  // C

    std::size_t in_dim() const { return encoder.empty() ? cls_weight.cols() : encoder.front().in_dim(); }
    std::size_t rep_dim() const { return cls_weight.cols(); }
    std::size_t num_classes() const { return cls_weight.rows(); }

    void check_shapes() const;  // throws DimensionError if layers do not compose

    std::size_t num_params() const;
    // Flat parameter access in a fixed order (encoder weights/biases, then
    // classifier); used by finite-difference checks and checkpointing.
    double* param_at(std::size_t flat_index);
};

MlpModel init_model(const ModelConfig& cfg, Rng& rng);

struct Forward {
    Matrix representations;  // n x d
    Matrix logits;           // n x C
};

// Per-layer buffers kept for the backward pass.
struct ForwardCache {
    Matrix input;                  // n x in
    std::vector<Matrix> preacts;   // per encoder layer, n x out
    std::vector<Matrix> postacts;  // per encoder layer, n x out
    Matrix logits;                 // n x C

    const Matrix& representations() const { return postacts.empty() ? input : postacts.back(); }
};

Forward forward(const MlpModel& model, const Matrix& batch);
ForwardCache forward_cached(const MlpModel& model, const Matrix& batch);

struct GradientStore {
    std::vector<Matrix> enc_weight;
    std::vector<std::vector<double>> enc_bias;
    Matrix cls_weight;
    std::vector<double> cls_bias;

    static GradientStore zeros_like(const MlpModel& model);
    void zero();
    void add(const GradientStore& other);
    double max_abs() const;
};

// Reverse pass with simultaneous gradient inflow at the representation output
// (d_rep, n x d) and the logits output (d_logits, n x C); either may be empty.
// When d_input is given it receives the gradient w.r.t. the batch rows.
GradientStore backward(const MlpModel& model, const ForwardCache& cache, const Matrix& d_rep,
                       const Matrix& d_logits, Matrix* d_input = nullptr);

struct CrossEntropy {
    double loss = 0.0;
    Matrix dlogits;  // (softmax - onehot) / n
};

CrossEntropy cross_entropy(const Matrix& logits, std::span<const int> labels);

struct SgdConfig {
    double learning_rate = 1e-3;
    double momentum = 0.0;
    double weight_decay = 0.0;
};

struct SgdState {
    GradientStore velocity;
    static SgdState zeros_like(const MlpModel& model) { return {GradientStore::zeros_like(model)}; }
};

// v <- momentum*v + g + weight_decay*theta;  theta <- theta - lr*v
void sgd_step(MlpModel& model, const GradientStore& grads, const SgdConfig& cfg, SgdState& state);

struct NormalizedRows {
    Matrix values;
    std::vector<std::uint8_t> degenerate;  // 1 where the row norm was < 1e-12 (row left unchanged)
};

NormalizedRows l2_normalize_rows(const Matrix& m);
// Jacobian-vector product of row normalization: given the original rows and
// upstream gradients on the normalized rows, returns gradients on the originals.
Matrix l2_normalize_backward(const Matrix& original, const Matrix& d_normalized);

// Largest singular value by power iteration on W^T W. Throws ConvergenceError
// after max_iter without reaching the relative tolerance.
double spectral_norm(const Matrix& w, double tol = 1e-10, std::size_t max_iter = 10000);

}  // namespace cnc
