#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "drowsy/dataset.hpp"
#include "drowsy/dsp.hpp"
#include "drowsy/model.hpp"

namespace drowsy {

struct StreamError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-frame output of the online engine. `timestamp` is the end of the frame,
// i.e. the moment the decision is available.
struct Detection {
    std::size_t frame_index = 0;
    double timestamp = 0.0;
    std::vector<double> p_short;
    std::vector<double> p_long;  // empty for single-stack models
    double r = 0.0;
    bool alert = false;
};

// Consumes frames every frame_length seconds, keeps the last 28 feature
// vectors, runs both stacks plus fusion, and applies the alert policy
// (r > threshold, subject to a cooldown).
class StreamDetector {
public:
    explicit StreamDetector(const DetectorModel& model);

    Detection push_frame(const Frame& frame);
    Detection push_features(std::vector<double> features, std::size_t frame_index);
    void reset();

    const DetectorModel& model() const { return model_; }
    const FeatureExtractor& extractor() const { return extractor_; }
    int window_capacity() const { return window_capacity_; }

private:
    Detection classify_window(std::size_t frame_index);

    DetectorModel model_;
    FeatureExtractor extractor_;
    int window_capacity_ = kLongTimesteps;
    std::deque<std::vector<double>> window_;
    std::optional<std::size_t> next_index_;
    double last_alert_time_ = -1.0;
    bool any_alert_ = false;
};

// Offline pass over a whole featurized recording; bit-identical to streaming
// push_features over the same rows.
std::vector<Detection> detect_offline(const Mat& features, const DetectorModel& model);

struct ActionWindow {
    ActionKind kind = ActionKind::Normal;
    double start = 0.0;
    double end = 0.0;
};

// Latency bookkeeping for ground-truth-linked recordings. An alert counts for
// an action when it fires within [start, end + 0.5 s]; actions without such
// an alert are missed and excluded from the latency CDF.
struct ActionTimeliness {
    ActionKind kind = ActionKind::Normal;
    std::vector<double> latencies;  // seconds from action start, sorted
    int missed = 0;

    double fraction_within(double alpha) const;  // alpha * total_time(kind)
};

struct TimelinessStats {
    std::vector<ActionTimeliness> per_action;
    double overall_fraction_within(double alpha) const;
    int total_detected() const;
    int total_missed() const;
};

TimelinessStats measure_timeliness(const std::vector<Detection>& detections,
                                   const std::vector<ActionWindow>& ground_truth);

// Wall-clock per-frame cost (features + both stacks + fusion) of a warmed-up
// detector over the given frames.
std::vector<double> realtime_budget_check(StreamDetector& detector, const std::vector<Frame>& frames);
double percentile(std::vector<double> values, double p);

} // namespace drowsy
