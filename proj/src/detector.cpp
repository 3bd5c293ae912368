#include "drowsy/detector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace drowsy {

StreamDetector::StreamDetector(const DetectorModel& model) : model_(model), extractor_(model.dsp) {
    if (extractor_.feature_dim() != model_.short_stack.config.input_dim)
        throw std::invalid_argument("StreamDetector: model input dim does not match the DSP config");
    window_capacity_ = model_.arch.dual
                           ? std::max(model_.short_stack.config.timesteps, model_.long_stack.config.timesteps)
                           : model_.short_stack.config.timesteps;
}

void StreamDetector::reset() {
    window_.clear();
    next_index_.reset();
    last_alert_time_ = -1.0;
    any_alert_ = false;
}

Detection StreamDetector::push_frame(const Frame& frame) {
    return push_features(extractor_.extract(frame).phases, frame.index);
}

Detection StreamDetector::push_features(std::vector<double> features, std::size_t frame_index) {
    if (static_cast<int>(features.size()) != model_.short_stack.config.input_dim)
        throw std::invalid_argument("StreamDetector: feature dimension mismatch");
    if (next_index_ && frame_index != *next_index_)
        throw StreamError("StreamDetector: out-of-order or gapped frame index " + std::to_string(frame_index) +
                          " (expected " + std::to_string(*next_index_) + ")");
    next_index_ = frame_index + 1;

    window_.push_back(std::move(features));
    while (static_cast<int>(window_.size()) > window_capacity_) window_.pop_front();

    return classify_window(frame_index);
}

namespace {

std::vector<std::vector<double>> tail(const std::deque<std::vector<double>>& window, int count) {
    const int have = static_cast<int>(window.size());
    const int take = std::min(have, count);
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(take));
    for (int i = have - take; i < have; ++i) out.push_back(window[static_cast<std::size_t>(i)]);
    return out;
}

} // namespace

Detection StreamDetector::classify_window(std::size_t frame_index) {
    Detection det;
    det.frame_index = frame_index;
    det.timestamp = (static_cast<double>(frame_index) + 1.0) * model_.dsp.frame_length;

    det.p_short = stack_classify_window(tail(window_, model_.short_stack.config.timesteps), model_.short_stack);
    if (model_.arch.dual) {
        det.p_long = stack_classify_window(tail(window_, model_.long_stack.config.timesteps), model_.long_stack);
        det.r = fuse(det.p_short, det.p_long, model_.fusion);
    } else {
        det.r = fusion_forward(det.p_short, model_.fusion);
    }

    const bool over = det.r > model_.threshold;
    const bool cooled = !any_alert_ || (det.timestamp - last_alert_time_ >= model_.cooldown_s);
    det.alert = over && cooled;
    if (det.alert) {
        any_alert_ = true;
        last_alert_time_ = det.timestamp;
    }
    return det;
}

std::vector<Detection> detect_offline(const Mat& features, const DetectorModel& model) {
    // Independent window construction straight from the feature matrix; must
    // stay bit-identical to the streaming ring buffer.
    auto window_rows = [&features](int end, int count) {
        std::vector<std::vector<double>> out;
        const int first = std::max(0, end - count + 1);
        out.reserve(static_cast<std::size_t>(end - first + 1));
        for (int i = first; i <= end; ++i)
            out.emplace_back(features.row(i), features.row(i) + features.cols);
        return out;
    };

    std::vector<Detection> out;
    out.reserve(static_cast<std::size_t>(features.rows));
    double last_alert_time = -1.0;
    bool any_alert = false;
    for (int i = 0; i < features.rows; ++i) {
        Detection det;
        det.frame_index = static_cast<std::size_t>(i);
        det.timestamp = (static_cast<double>(i) + 1.0) * model.dsp.frame_length;
        det.p_short = stack_classify_window(window_rows(i, model.short_stack.config.timesteps), model.short_stack);
        if (model.arch.dual) {
            det.p_long = stack_classify_window(window_rows(i, model.long_stack.config.timesteps), model.long_stack);
            det.r = fuse(det.p_short, det.p_long, model.fusion);
        } else {
            det.r = fusion_forward(det.p_short, model.fusion);
        }
        const bool over = det.r > model.threshold;
        const bool cooled = !any_alert || (det.timestamp - last_alert_time >= model.cooldown_s);
        det.alert = over && cooled;
        if (det.alert) {
            any_alert = true;
            last_alert_time = det.timestamp;
        }
        out.push_back(std::move(det));
    }
    return out;
}

double ActionTimeliness::fraction_within(double alpha) const {
    if (latencies.empty()) return 0.0;
    const double limit = alpha * total_time(kind);
    std::size_t within = 0;
    for (double l : latencies)
        if (l <= limit) ++within;
    return static_cast<double>(within) / static_cast<double>(latencies.size());
}

double TimelinessStats::overall_fraction_within(double alpha) const {
    std::size_t within = 0, total = 0;
    for (const auto& a : per_action) {
        const double limit = alpha * total_time(a.kind);
        for (double l : a.latencies) {
            ++total;
            if (l <= limit) ++within;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(within) / static_cast<double>(total);
}

int TimelinessStats::total_detected() const {
    int n = 0;
    for (const auto& a : per_action) n += static_cast<int>(a.latencies.size());
    return n;
}

int TimelinessStats::total_missed() const {
    int n = 0;
    for (const auto& a : per_action) n += a.missed;
    return n;
}

TimelinessStats measure_timeliness(const std::vector<Detection>& detections,
                                   const std::vector<ActionWindow>& ground_truth) {
    constexpr double kMatchSlack = 0.5;  // alerts up to 0.5 s after the action still count

    TimelinessStats stats;
    auto slot_of = [&stats](ActionKind kind) -> ActionTimeliness& {
        for (auto& a : stats.per_action)
            if (a.kind == kind) return a;
        stats.per_action.push_back({kind, {}, 0});
        return stats.per_action.back();
    };

    for (const auto& gt : ground_truth) {
        ActionTimeliness& slot = slot_of(gt.kind);
        double first_alert = -1.0;
        for (const auto& d : detections) {
            if (!d.alert) continue;
            if (d.timestamp >= gt.start && d.timestamp <= gt.end + kMatchSlack) {
                first_alert = d.timestamp;
                break;
            }
        }
        if (first_alert < 0.0) {
            ++slot.missed;
        } else {
            slot.latencies.push_back(first_alert - gt.start);
        }
    }
    for (auto& a : stats.per_action) std::sort(a.latencies.begin(), a.latencies.end());
    return stats;
}

std::vector<double> realtime_budget_check(StreamDetector& detector, const std::vector<Frame>& frames) {
    using clock = std::chrono::steady_clock;
    std::vector<double> elapsed;
    elapsed.reserve(frames.size());
    detector.reset();
    for (const auto& f : frames) {
        const auto t0 = clock::now();
        detector.push_frame(f);
        const auto t1 = clock::now();
        elapsed.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    return elapsed;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double idx = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(idx);
    const auto hi = std::min(values.size() - 1, lo + 1);
    const double frac = idx - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

} // namespace drowsy
