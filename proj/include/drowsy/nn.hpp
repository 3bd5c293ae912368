#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drowsy/mat.hpp"

namespace drowsy {

double sigmoid(double x);

// Gate weights for one LSTM layer. Gate blocks inside the 4H dimension are
// ordered [input | forget | candidate | output].
struct LstmCellParams {
    Mat w_input;   // 4H x input_dim
    Mat w_hidden;  // 4H x H
    std::vector<double> bias;  // 4H

    int hidden_dim() const { return w_hidden.cols; }
    int input_dim() const { return w_input.cols; }
};

// Per-feature batch normalization: y = gamma * (x - mu)/sqrt(var + eps) + beta.
// Training uses batch statistics and updates the running ones (momentum 0.9);
// inference uses the running statistics.
struct BatchNormParams {
    std::vector<double> gamma, beta;
    std::vector<double> run_mean, run_var;

    int dim() const { return static_cast<int>(gamma.size()); }
};

constexpr double kBatchNormEps = 1e-5;
constexpr double kBatchNormMomentum = 0.9;

enum class BatchNormMode { Train, Infer };

// Normalizes each column of x. Train mode requires at least 2 rows and
// updates stats.run_mean / stats.run_var.
Mat batch_normalize(const Mat& x, BatchNormParams& stats, BatchNormMode mode);

struct SoftmaxHead {
    Mat w;  // K x H
    std::vector<double> bias;  // K
};

struct StackConfig {
    int layers = 2;
    int timesteps = 11;
    int input_dim = 149;
    int hidden_dim = 64;
    std::vector<std::string> class_names;

    int num_classes() const { return static_cast<int>(class_names.size()); }
};

// A stack of LSTM layers, each preceded by batch normalization, topped by a
// softmax head read at the last timestep.
struct LstmStack {
    StackConfig config;
    std::vector<BatchNormParams> norms;   // one per layer (input side)
    std::vector<LstmCellParams> layers;
    SoftmaxHead head;
};

LstmStack make_stack(const StackConfig& config, std::uint64_t seed);

// One LSTM recurrence step for a single feature vector.
// h_t = o * tanh(C_t) with C_t = f * C_prev + i * g.
void lstm_cell_step(const std::vector<double>& x, const std::vector<double>& h_prev,
                    const std::vector<double>& c_prev, const LstmCellParams& params,
                    std::vector<double>& h_out, std::vector<double>& c_out);

// Inference over one window. Sequences shorter than config.timesteps are
// left-padded with zero features; longer ones are rejected. Returns the class
// probability vector at every timestep.
std::vector<std::vector<double>> stack_forward(const std::vector<std::vector<double>>& features,
                                               const LstmStack& stack);

// Probability vector of the final timestep only (the per-frame result).
std::vector<double> stack_classify_window(const std::vector<std::vector<double>>& features,
                                          const LstmStack& stack);

// argmax with ties broken toward the lowest class index.
int classify(const std::vector<double>& probabilities);

// Mean over samples of -sum_k truth[k] * log(max(pred[k], 1e-12)).
double cross_entropy(const std::vector<std::vector<double>>& predicted,
                     const std::vector<std::vector<double>>& truth_one_hot);

// Two dense layers: z = tanh(W1 d + b1), R = sigmoid(w2 . z + b2).
struct FusionDnn {
    Mat w1;  // hidden x input_dim
    std::vector<double> b1;
    Mat w2;  // 1 x hidden
    double b2 = 0.0;

    int input_dim() const { return w1.cols; }
    int hidden_dim() const { return w1.rows; }
};

FusionDnn make_fusion(int input_dim, int hidden_dim, std::uint64_t seed);

// Drowsiness probability from the two class-probability vectors.
double fuse(const std::vector<double>& p_short, const std::vector<double>& p_long, const FusionDnn& dnn);
double fusion_forward(const std::vector<double>& input, const FusionDnn& dnn);

// Batched helpers shared with training; exposed for the trainer and tests.
struct StackBatchCache;  // opaque to callers; defined in nn_train

// Flat views over every trainable parameter, in serialization order.
struct ParamRef {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
};
std::vector<ParamRef> trainable_params(LstmStack& stack);
std::vector<ParamRef> trainable_params(FusionDnn& dnn);
// Running BN statistics (not trained, but serialized).
std::vector<ParamRef> running_stats(LstmStack& stack);

} // namespace drowsy
