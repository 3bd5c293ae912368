#include "drowsy/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

#include "drowsy/util.hpp"

namespace drowsy {

using nlohmann::json;

ConfusionTally::ConfusionTally(std::vector<std::string> names) : classes(std::move(names)) {
    matrix.assign(classes.size(), std::vector<long>(classes.size(), 0));
}

void ConfusionTally::add(int truth, int predicted) {
    matrix.at(static_cast<std::size_t>(truth)).at(static_cast<std::size_t>(predicted)) += 1;
}

long ConfusionTally::total() const {
    long n = 0;
    for (const auto& row : matrix)
        for (long v : row) n += v;
    return n;
}

long ConfusionTally::correct() const {
    long n = 0;
    for (std::size_t i = 0; i < matrix.size(); ++i) n += matrix[i][i];
    return n;
}

ClassTally ConfusionTally::per_class(int c) const {
    ClassTally t;
    const auto sc = static_cast<std::size_t>(c);
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        for (std::size_t j = 0; j < matrix.size(); ++j) {
            const long v = matrix[i][j];
            if (i == sc && j == sc)
                t.tp += v;
            else if (i == sc)
                t.fn += v;
            else if (j == sc)
                t.fp += v;
            else
                t.tn += v;
        }
    }
    return t;
}

namespace {

std::optional<double> ratio(long num, long den) {
    if (den <= 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

MetricsReport compute_metrics(const ConfusionTally& tally) {
    MetricsReport report;
    report.accuracy = ratio(tally.correct(), tally.total());
    for (std::size_t c = 0; c < tally.classes.size(); ++c) {
        const ClassTally t = tally.per_class(static_cast<int>(c));
        ClassMetrics m;
        m.precision = ratio(t.tp, t.tp + t.fp);
        m.recall = ratio(t.tp, t.tp + t.fn);
        m.false_alarm = ratio(t.fp, t.fp + t.tn);
        m.missing_alarm = ratio(t.fn, t.tp + t.fn);
        report.per_class.push_back(m);
    }
    return report;
}

std::optional<double> EvalResult::per_action_accuracy(ActionKind kind) const {
    const auto c = static_cast<std::size_t>(kind);
    long total = 0;
    for (long v : actions.matrix[c]) total += v;
    if (total == 0) return std::nullopt;
    return static_cast<double>(actions.matrix[c][c]) / static_cast<double>(total);
}

std::optional<double> EvalResult::drowsy_accuracy() const {
    return ratio(drowsy.correct(), drowsy.total());
}

namespace {

int action_to_index(ActionKind k) { return static_cast<int>(k); }

struct PerSampleEval {
    SampleOutcome outcome;
    std::vector<double> latencies;  // zero or one entry
};

PerSampleEval evaluate_one(const DetectorModel& model, const FeatureDataset& data, int idx,
                           const EvalOptions& options) {
    const auto& meta = data.meta[static_cast<std::size_t>(idx)];
    const Mat& features = data.features[static_cast<std::size_t>(idx)];
    const std::vector<Detection> dets = detect_offline(features, model);

    // Per-frame votes for the three actions.
    long votes[3] = {0, 0, 0};
    for (const auto& d : dets) {
        if (model.arch.dual) {
            const int s = classify(d.p_short);  // {nodding, yawning, normal}
            if (s == 0) ++votes[0];
            if (s == 1) ++votes[1];
            const int l = classify(d.p_long);  // {operating_sw, normal}
            if (l == 0) ++votes[2];
        } else {
            const int s = classify(d.p_short);  // {nodding, yawning, operating_sw, normal}
            if (s >= 0 && s <= 2) ++votes[s];
        }
    }
    int best = 0;
    for (int c = 1; c < 3; ++c)
        if (votes[c] > votes[best]) best = c;

    PerSampleEval out;
    out.outcome.sample_id = meta.id;
    out.outcome.truth = meta.action;
    out.outcome.predicted =
        (votes[best] >= options.min_votes) ? static_cast<ActionKind>(best) : ActionKind::Normal;

    out.outcome.drowsy_truth = meta.has_action;
    if (meta.has_action) {
        // the drowsy verdict counts only alerts matched to the action window
        constexpr double kMatchSlack = 0.5;
        for (const auto& d : dets) {
            if (d.alert && d.timestamp >= meta.interval.first && d.timestamp <= meta.interval.second + kMatchSlack) {
                out.outcome.detected = true;
                out.outcome.latency = d.timestamp - meta.interval.first;
                break;
            }
        }
        out.outcome.drowsy_predicted = out.outcome.detected;
        if (out.outcome.detected) out.latencies.push_back(out.outcome.latency);
    } else {
        for (const auto& d : dets) {
            if (d.alert) {
                out.outcome.drowsy_predicted = true;
                break;
            }
        }
    }
    return out;
}

} // namespace

EvalResult evaluate_detector(const DetectorModel& model, const FeatureDataset& data,
                             const std::vector<int>& sample_indices, const EvalOptions& options) {
    std::vector<PerSampleEval> per_sample(sample_indices.size());
    parallel_for(0, sample_indices.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            per_sample[i] = evaluate_one(model, data, sample_indices[i], options);
    });

    EvalResult result;
    auto slot_of = [&result](ActionKind kind) -> ActionTimeliness& {
        for (auto& a : result.timeliness.per_action)
            if (a.kind == kind) return a;
        result.timeliness.per_action.push_back({kind, {}, 0});
        return result.timeliness.per_action.back();
    };

    for (const auto& pe : per_sample) {
        const auto& o = pe.outcome;
        result.outcomes.push_back(o);
        result.actions.add(action_to_index(o.truth), action_to_index(o.predicted));
        result.drowsy.add(o.drowsy_truth ? 0 : 1, o.drowsy_predicted ? 0 : 1);
        if (o.drowsy_truth) {
            ActionTimeliness& slot = slot_of(o.truth);
            if (o.detected)
                slot.latencies.push_back(o.latency);
            else
                ++slot.missed;
        }
    }
    for (auto& a : result.timeliness.per_action) std::sort(a.latencies.begin(), a.latencies.end());
    return result;
}

// ---------------------------------------------------------------------------
// experiments
// ---------------------------------------------------------------------------

ExperimentConfig default_experiment_config() {
    ExperimentConfig c;
    c.stages = default_stage_config();
    return c;
}

void validate_experiment_config(ExperimentConfig& config) {
    if (config.corpus.fs_hz != config.dsp.sample_rate)
        throw std::invalid_argument("experiment config: corpus sample rate differs from the DSP config");
    if (config.corpus.f0_hz <= config.dsp.band.f_low || config.corpus.f0_hz >= config.dsp.band.f_high)
        throw std::invalid_argument("experiment config: carrier must sit inside the target band");
    if (config.train_fraction <= 0.0 || config.train_fraction >= 1.0)
        throw std::invalid_argument("experiment config: train fraction must be in (0, 1)");
    parse_architecture(config.arch);

    // Long frames do not fit the FFT at the default factor; bump n to the
    // smallest valid value.
    const auto frame_samples =
        static_cast<std::size_t>(std::llround(config.dsp.frame_length * config.dsp.sample_rate));
    int n = config.dsp.undersample_factor;
    const int n_max = static_cast<int>(std::floor(config.dsp.band.f_high / config.dsp.band.bandwidth()));
    auto fits = [&](int factor) {
        const std::size_t decimated = (frame_samples + static_cast<std::size_t>(factor) - 1) /
                                      static_cast<std::size_t>(factor);
        if (decimated > static_cast<std::size_t>(config.dsp.fft_size)) return false;
        try {
            make_undersample_plan(config.dsp.sample_rate, factor, config.dsp.band);
            return true;
        } catch (const std::invalid_argument&) {
            return false;
        }
    };
    while (n <= n_max && !fits(n)) ++n;
    if (n > n_max)
        throw std::invalid_argument("experiment config: no valid undersampling factor fits the FFT size");
    config.dsp.undersample_factor = n;
}

json eval_result_to_json(const EvalResult& result) {
    json out;
    const MetricsReport action_metrics = compute_metrics(result.actions);
    const MetricsReport drowsy_metrics = compute_metrics(result.drowsy);

    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };

    out["actions"]["classes"] = result.actions.classes;
    out["actions"]["confusion"] = result.actions.matrix;
    out["actions"]["accuracy"] = opt(action_metrics.accuracy);
    for (std::size_t c = 0; c < result.actions.classes.size(); ++c) {
        json m{{"precision", opt(action_metrics.per_class[c].precision)},
               {"recall", opt(action_metrics.per_class[c].recall)},
               {"false_alarm", opt(action_metrics.per_class[c].false_alarm)},
               {"missing_alarm", opt(action_metrics.per_class[c].missing_alarm)}};
        out["actions"]["per_class"][result.actions.classes[c]] = m;
    }
    for (ActionKind k : {ActionKind::Nodding, ActionKind::Yawning, ActionKind::OperatingSW}) {
        out["actions"]["per_action_accuracy"][action_name(k)] = opt(result.per_action_accuracy(k));
    }

    out["drowsy"]["confusion"] = result.drowsy.matrix;
    out["drowsy"]["accuracy"] = opt(result.drowsy_accuracy());

    json tj;
    for (const auto& a : result.timeliness.per_action) {
        json aj{{"detected", a.latencies.size()}, {"missed", a.missed}, {"latency_cdf", a.latencies}};
        for (double alpha : {0.5, 0.7, 1.0}) {
            char key[32];
            std::snprintf(key, sizeof(key), "within_%.1fT", alpha);
            aj[key] = a.fraction_within(alpha);
        }
        tj[action_name(a.kind)] = aj;
    }
    for (double alpha : {0.5, 0.7, 1.0}) {
        char key[32];
        std::snprintf(key, sizeof(key), "overall_within_%.1fT", alpha);
        tj[key] = result.timeliness.overall_fraction_within(alpha);
    }
    out["timeliness"] = tj;
    return out;
}

namespace {

json train_report_json(const TrainReport& r) {
    json epochs = json::array();
    for (const auto& e : r.epochs) {
        epochs.push_back({{"train_loss", e.train_loss},
                          {"val_loss", e.val_loss},
                          {"val_accuracy", e.val_accuracy},
                          {"lr", e.lr}});
    }
    return json{{"epochs", epochs}, {"best_epoch", r.best_epoch}};
}

json config_echo(const ExperimentConfig& c) {
    return json{{"arch", c.arch},
                {"corpus",
                 {{"per_class",
                   {c.corpus.per_class_nodding, c.corpus.per_class_yawning, c.corpus.per_class_operating_sw,
                    c.corpus.per_class_normal}},
                  {"duration_s", c.corpus.duration_s},
                  {"f0_hz", c.corpus.f0_hz},
                  {"fs_hz", c.corpus.fs_hz}}},
                {"dsp",
                 {{"frame_length", c.dsp.frame_length},
                  {"undersample_factor", c.dsp.undersample_factor},
                  {"fft_size", c.dsp.fft_size},
                  {"band", {c.dsp.band.f_low, c.dsp.band.f_high}},
                  {"fingerprint", c.dsp.fingerprint_hex()}}},
                {"threshold", c.threshold},
                {"cooldown_s", c.cooldown_s},
                {"train_fraction", c.train_fraction},
                {"corpus_seed", c.corpus_seed},
                {"split_seed", c.split_seed}};
}

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

json single_run_results(ExperimentConfig config) {
    validate_experiment_config(config);

    FeatureDataset data = featurize_generated(config.corpus, config.corpus_seed, config.dsp);
    SplitIndices split = stratified_split(data, config.train_fraction, config.split_seed);

    DetectorModel model = make_detector_model(parse_architecture(config.arch), data.feat_dim, config.dsp,
                                              config.stages.hyper, config.stages.init_seed);
    model.threshold = config.threshold;
    model.cooldown_s = config.cooldown_s;

    StageTrainReport train_report = train_detector_model(model, data, split.train, config.stages);
    EvalResult eval = evaluate_detector(model, data, split.test, config.eval);

    json results = eval_result_to_json(eval);
    results["train"]["short_stack"] = train_report_json(train_report.short_stack);
    if (model.arch.dual) results["train"]["long_stack"] = train_report_json(train_report.long_stack);
    results["train"]["fusion"] = train_report_json(train_report.fusion);
    results["split"] = {{"train", split.train.size()}, {"test", split.test.size()}};
    results["feature_dim"] = data.feat_dim;
    return results;
}

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
    ExperimentConfig resolved = config;
    validate_experiment_config(resolved);

    ExperimentReport report;
    report.header = {{"schema_version", 1}, {"timestamp", now_iso8601()}, {"config", config_echo(resolved)}};
    report.results = single_run_results(resolved);
    return report;
}

ExperimentReport run_frame_length_sweep(ExperimentConfig base, const std::vector<double>& frame_lengths) {
    ExperimentReport report;
    report.header = {{"schema_version", 1},
                     {"timestamp", now_iso8601()},
                     {"sweep", "frame_length"},
                     {"base_config", config_echo(base)}};
    report.results["rows"] = json::array();
    for (double fl : frame_lengths) {
        ExperimentConfig c = base;
        c.dsp.frame_length = fl;
        validate_experiment_config(c);
        json row = single_run_results(c);
        row["frame_length"] = fl;
        row["undersample_factor"] = c.dsp.undersample_factor;
        report.results["rows"].push_back(row);
    }
    return report;
}

ExperimentReport run_architecture_sweep(ExperimentConfig base, const std::vector<std::string>& archs) {
    ExperimentReport report;
    report.header = {{"schema_version", 1},
                     {"timestamp", now_iso8601()},
                     {"sweep", "architecture"},
                     {"base_config", config_echo(base)}};
    report.results["rows"] = json::array();
    for (const auto& arch : archs) {
        ExperimentConfig c = base;
        c.arch = arch;
        json row = single_run_results(c);
        row["arch"] = arch;
        report.results["rows"].push_back(row);
    }
    return report;
}

namespace {

std::string fmt_opt(const json& v) {
    if (v.is_null()) return "undef";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v.get<double>());
    return buf;
}

void render_result_block(std::ostringstream& os, const json& r) {
    os << "  feature dim: " << r.value("feature_dim", 0) << "\n";
    os << "  action accuracy (per class):\n";
    for (const auto& [name, v] : r.at("actions").at("per_action_accuracy").items()) {
        os << "    " << name << ": " << fmt_opt(v) << "\n";
    }
    os << "  overall action accuracy: " << fmt_opt(r.at("actions").at("accuracy")) << "\n";
    os << "  drowsy-vs-normal accuracy: " << fmt_opt(r.at("drowsy").at("accuracy")) << "\n";
    if (r.contains("timeliness")) {
        os << "  timeliness (fraction within 0.7 T): "
           << fmt_opt(r.at("timeliness").at("overall_within_0.7T")) << "\n";
    }
}

} // namespace

std::string ExperimentReport::to_text() const {
    std::ostringstream os;
    os << "experiment report (schema " << header.value("schema_version", 0) << ")\n";
    if (header.contains("sweep")) {
        os << "sweep axis: " << header.at("sweep").get<std::string>() << "\n";
        for (const auto& row : results.at("rows")) {
            if (row.contains("frame_length"))
                os << "- frame_length " << row.at("frame_length").get<double>() << " (n="
                   << row.at("undersample_factor").get<int>() << ")\n";
            if (row.contains("arch")) os << "- arch " << row.at("arch").get<std::string>() << "\n";
            render_result_block(os, row);
        }
    } else {
        render_result_block(os, results);
    }
    return os.str();
}

} // namespace drowsy
