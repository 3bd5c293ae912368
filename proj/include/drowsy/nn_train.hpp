#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drowsy/nn.hpp"

namespace drowsy {

struct TrainConfig {
    double learning_rate = 1e-3;
    double lr_decay = 0.5;
    std::vector<int> lr_milestones;  // epochs after which lr is multiplied by lr_decay
    int batch_size = 64;
    int epochs = 10;
    std::uint64_t seed = 1;
    double grad_clip = 5.0;          // global L2 norm
    int early_stop_patience = 0;     // 0 disables early stopping
    double validation_fraction = 0.1;
};

// A training window referencing frames of a featurized sample. Frames before
// index 0 (cold start) are zero features.
struct WindowRef {
    int sample = 0;
    int end_frame = 0;
    int label = 0;
};

struct WindowDataset {
    int timesteps = 0;
    int feat_dim = 0;
    const std::vector<Mat>* features = nullptr;  // per sample: frames x feat_dim
    std::vector<WindowRef> items;
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double lr = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
};

// Mini-batch BPTT with Adam, gradient clipping and deterministic shuffling.
// Rejects datasets with fewer than two distinct labels.
TrainReport train_stack(LstmStack& stack, const WindowDataset& data, const TrainConfig& config);

// Trains the fusion head on rows of `inputs` against binary targets.
TrainReport train_fusion(FusionDnn& dnn, const Mat& inputs, const std::vector<int>& targets,
                         const TrainConfig& config);

// Batched inference: probability matrix (batch x K) of the final timestep.
// x_t has one Mat (batch x feat_dim) per timestep.
Mat stack_infer_batch(const std::vector<Mat>& x_t, const LstmStack& stack);

// Batched training-mode forward + full BPTT backward; returns the mean
// cross-entropy loss and writes gradients into `grads` (an LstmStack of the
// same shape used as a container). Exposed for the gradient checker.
double stack_loss_and_grads(LstmStack& stack, const std::vector<Mat>& x_t, const std::vector<int>& labels,
                            LstmStack& grads);
double stack_loss_only(LstmStack& stack, const std::vector<Mat>& x_t, const std::vector<int>& labels);

double fusion_loss_and_grads(FusionDnn& dnn, const Mat& inputs, const std::vector<int>& targets,
                             FusionDnn& grads);
double fusion_loss_only(const FusionDnn& dnn, const Mat& inputs, const std::vector<int>& targets);

LstmStack make_zero_like(const LstmStack& stack);
FusionDnn make_zero_like(const FusionDnn& dnn);

struct GradCheckEntry {
    std::string param;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    bool pass = false;
    std::vector<GradCheckEntry> per_param;
};

// Analytic BPTT gradients vs central finite differences (step fd_step) over
// every trainable parameter of a randomly initialized toy instance.
GradCheckReport gradient_check_stack(const StackConfig& config, int batch, std::uint64_t seed,
                                     double fd_step = 1e-5, double tolerance = 1e-4);
GradCheckReport gradient_check_fusion(int input_dim, int hidden_dim, int batch, std::uint64_t seed,
                                      double fd_step = 1e-5, double tolerance = 1e-4);

} // namespace drowsy
