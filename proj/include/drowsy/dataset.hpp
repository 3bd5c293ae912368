#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "drowsy/corpus.hpp"
#include "drowsy/dsp.hpp"
#include "drowsy/model.hpp"
#include "drowsy/nn_train.hpp"

namespace drowsy {

struct SampleMeta {
    ActionKind action = ActionKind::Normal;
    std::pair<double, double> interval {0.0, 0.0};
    bool has_action = false;
    int id = 0;
};

// A corpus reduced to per-frame phase features; audio is never kept.
struct FeatureDataset {
    DspConfig dsp;
    int feat_dim = 0;
    std::vector<Mat> features;  // per sample: frames x feat_dim
    std::vector<SampleMeta> meta;

    std::size_t size() const { return features.size(); }
};

Mat featurize_sample(const LabeledSample& sample, const FeatureExtractor& extractor);

// Streams corpus generation straight into features so the raw audio never has
// to be resident all at once.
FeatureDataset featurize_generated(const CorpusSpec& spec, std::uint64_t master_seed, const DspConfig& dsp);
FeatureDataset featurize_samples(const std::vector<LabeledSample>& samples, const DspConfig& dsp);
FeatureDataset featurize_saved_corpus(const std::string& dir, const DspConfig& dsp);

// Ground truth of the frame ending a window: the action when the frame center
// falls inside the sample's action interval, normal otherwise.
bool frame_in_action(const SampleMeta& meta, int frame, double frame_length);

enum class StackRole { ShortDual, LongDual, Single };

// Class index of a frame under the given stack's class table.
int frame_class(const SampleMeta& meta, int frame, double frame_length, StackRole role);

struct WindowPolicy {
    int normal_stride = 3;           // keep every k-th normal-labeled window
    std::size_t per_class_cap = 8000;
};

// Builds training windows over the listed samples. Every in-action window is
// kept; normal windows are strided; each class is then evenly capped.
WindowDataset build_stack_windows(const FeatureDataset& data, const std::vector<int>& sample_indices,
                                  StackRole role, int timesteps, const WindowPolicy& policy);

// Inputs/targets for the fusion head: per-frame concatenated stack outputs
// against the binary drowsy label. Frames are strided to bound the cost.
struct FusionDataset {
    Mat inputs;
    std::vector<int> targets;
};
FusionDataset build_fusion_dataset(const FeatureDataset& data, const std::vector<int>& sample_indices,
                                   const DetectorModel& model, int frame_stride);

struct StageTrainConfig {
    TrainConfig short_stack;
    TrainConfig long_stack;
    TrainConfig fusion;
    WindowPolicy windows;
    int fusion_frame_stride = 2;
    ModelHyperParams hyper;
    std::uint64_t init_seed = 42;
};

StageTrainConfig default_stage_config();

struct StageTrainReport {
    TrainReport short_stack;
    TrainReport long_stack;
    TrainReport fusion;
};

// The staged procedure: train the stacks on their window sets, then train the
// fusion head on the trained stacks' outputs.
StageTrainReport train_detector_model(DetectorModel& model, const FeatureDataset& data,
                                      const std::vector<int>& train_indices, const StageTrainConfig& config);

// Stratified deterministic split of sample indices.
struct SplitIndices {
    std::vector<int> train;
    std::vector<int> test;
};
SplitIndices stratified_split(const FeatureDataset& data, double train_fraction, std::uint64_t seed);

// Feature dump: binary matrices with a JSON header {fs, n, band, fft_size,
// dim, per-sample metadata}, or CSV rows when `csv` is true.
void save_feature_dump(const std::string& path, const FeatureDataset& data, bool csv = false);
FeatureDataset load_feature_dump(const std::string& path);

} // namespace drowsy
