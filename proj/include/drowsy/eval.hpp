#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drowsy/dataset.hpp"
#include "drowsy/detector.hpp"

namespace drowsy {

struct ClassTally {
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

// Sample-level confusion counts over a fixed class table.
struct ConfusionTally {
    std::vector<std::string> classes;
    std::vector<std::vector<long>> matrix;  // [truth][predicted]

    explicit ConfusionTally(std::vector<std::string> names = {});
    void add(int truth, int predicted);
    long total() const;
    long correct() const;
    ClassTally per_class(int c) const;
};

struct ClassMetrics {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> false_alarm;    // FP / (FP + TN)
    std::optional<double> missing_alarm;  // FN / (TP + FN) = 1 - recall
};

struct MetricsReport {
    std::optional<double> accuracy;  // correct / total
    std::vector<ClassMetrics> per_class;
};

// Zero denominators yield empty optionals, never a silent 0.
MetricsReport compute_metrics(const ConfusionTally& tally);

// ---------------------------------------------------------------------------
// sample-level evaluation through the detector
// ---------------------------------------------------------------------------

struct SampleOutcome {
    int sample_id = 0;
    ActionKind truth = ActionKind::Normal;
    ActionKind predicted = ActionKind::Normal;
    bool drowsy_truth = false;
    bool drowsy_predicted = false;
    bool detected = false;   // action samples: alert within [start, end + 0.5]
    double latency = -1.0;   // seconds from action start, when detected
};

struct EvalOptions {
    int min_votes = 2;  // per-frame votes needed before naming an action
};

struct EvalResult {
    ConfusionTally actions {{"nodding", "yawning", "operating_sw", "normal"}};
    ConfusionTally drowsy {{"drowsy", "normal"}};
    TimelinessStats timeliness;
    std::vector<SampleOutcome> outcomes;

    // Fraction of the class's samples that were classified as that class.
    std::optional<double> per_action_accuracy(ActionKind kind) const;
    std::optional<double> drowsy_accuracy() const;
};

EvalResult evaluate_detector(const DetectorModel& model, const FeatureDataset& data,
                             const std::vector<int>& sample_indices, const EvalOptions& options = {});

// ---------------------------------------------------------------------------
// experiments
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    CorpusSpec corpus;
    DspConfig dsp;
    std::string arch = "2-3-LSTM-DNN";
    StageTrainConfig stages;
    double threshold = 0.5;
    double cooldown_s = 5.0;
    double train_fraction = 0.8;
    std::uint64_t corpus_seed = 7;
    std::uint64_t split_seed = 17;
    EvalOptions eval;
};

ExperimentConfig default_experiment_config();

// Rejects configs whose stages disagree (frame length vs FFT size, corpus vs
// DSP sample rate) before any training happens. When the decimated frame
// would not fit the FFT, the undersampling factor is bumped to the smallest
// valid one (reported in the config echo).
void validate_experiment_config(ExperimentConfig& config);

struct ExperimentReport {
    nlohmann::json header;   // timestamp and resolved config live here only
    nlohmann::json results;  // metrics, timeliness, losses; reproducible bytes

    std::string to_text() const;
};

ExperimentReport run_experiment(const ExperimentConfig& config);

// Study axes at desk scale: one result row per setting.
ExperimentReport run_frame_length_sweep(ExperimentConfig base, const std::vector<double>& frame_lengths);
ExperimentReport run_architecture_sweep(ExperimentConfig base, const std::vector<std::string>& archs);

nlohmann::json eval_result_to_json(const EvalResult& result);

} // namespace drowsy
