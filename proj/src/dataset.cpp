#include "drowsy/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "drowsy/audio.hpp"
#include "drowsy/util.hpp"

namespace drowsy {

using nlohmann::json;

Mat featurize_sample(const LabeledSample& sample, const FeatureExtractor& extractor) {
    const auto frames = segment_frames(sample.audio, extractor.config().frame_length);
    Mat out(static_cast<int>(frames.size()), extractor.feature_dim());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        FeatureVector fv = extractor.extract(frames[i]);
        std::memcpy(out.row(static_cast<int>(i)), fv.phases.data(), fv.phases.size() * sizeof(double));
    }
    return out;
}

namespace {

SampleMeta meta_of(const LabeledSample& s, int id) {
    return {s.action, s.action_interval, s.has_action, id};
}

} // namespace

FeatureDataset featurize_generated(const CorpusSpec& spec, std::uint64_t master_seed, const DspConfig& dsp) {
    FeatureExtractor extractor(dsp);
    FeatureDataset out;
    out.dsp = dsp;
    out.feat_dim = extractor.feature_dim();
    out.features.resize(static_cast<std::size_t>(spec.total()));
    out.meta.resize(static_cast<std::size_t>(spec.total()));
    for_each_sample(spec, master_seed, [&](int i, LabeledSample&& s) {
        out.features[static_cast<std::size_t>(i)] = featurize_sample(s, extractor);
        out.meta[static_cast<std::size_t>(i)] = meta_of(s, i);
    });
    return out;
}

FeatureDataset featurize_samples(const std::vector<LabeledSample>& samples, const DspConfig& dsp) {
    FeatureExtractor extractor(dsp);
    FeatureDataset out;
    out.dsp = dsp;
    out.feat_dim = extractor.feature_dim();
    out.features.resize(samples.size());
    out.meta.resize(samples.size());
    parallel_for(0, samples.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            out.features[i] = featurize_sample(samples[i], extractor);
            out.meta[i] = meta_of(samples[i], static_cast<int>(i));
        }
    });
    return out;
}

FeatureDataset featurize_saved_corpus(const std::string& dir, const DspConfig& dsp) {
    FeatureExtractor extractor(dsp);
    FeatureDataset out;
    out.dsp = dsp;
    out.feat_dim = extractor.feature_dim();
    const auto total = static_cast<std::size_t>(saved_corpus_size(dir));
    out.features.resize(total);
    out.meta.resize(total);
    for_each_saved_sample(dir, [&](int i, LabeledSample&& s) {
        out.features[static_cast<std::size_t>(i)] = featurize_sample(s, extractor);
        out.meta[static_cast<std::size_t>(i)] = meta_of(s, i);
    });
    return out;
}

bool frame_in_action(const SampleMeta& meta, int frame, double frame_length) {
    if (!meta.has_action) return false;
    const double center = (static_cast<double>(frame) + 0.5) * frame_length;
    return center >= meta.interval.first && center <= meta.interval.second;
}

int frame_class(const SampleMeta& meta, int frame, double frame_length, StackRole role) {
    const bool in_action = frame_in_action(meta, frame, frame_length);
    switch (role) {
        case StackRole::ShortDual:
            if (in_action && meta.action == ActionKind::Nodding) return 0;
            if (in_action && meta.action == ActionKind::Yawning) return 1;
            return 2;  // normal; steering frames land here too
        case StackRole::LongDual:
            if (in_action && meta.action == ActionKind::OperatingSW) return 0;
            return 1;
        case StackRole::Single:
            if (in_action) {
                switch (meta.action) {
                    case ActionKind::Nodding: return 0;
                    case ActionKind::Yawning: return 1;
                    case ActionKind::OperatingSW: return 2;
                    default: break;
                }
            }
            return 3;
    }
    return -1;
}

namespace {

int normal_class_of(StackRole role) {
    switch (role) {
        case StackRole::ShortDual: return 2;
        case StackRole::LongDual: return 1;
        case StackRole::Single: return 3;
    }
    return -1;
}

// Evenly thins `items` down to at most `cap` entries, preserving order.
void thin_to_cap(std::vector<WindowRef>& items, std::size_t cap) {
    if (cap == 0 || items.size() <= cap) return;
    std::vector<WindowRef> kept;
    kept.reserve(cap);
    const double step = static_cast<double>(items.size()) / static_cast<double>(cap);
    for (std::size_t k = 0; k < cap; ++k) {
        kept.push_back(items[static_cast<std::size_t>(static_cast<double>(k) * step)]);
    }
    items = std::move(kept);
}

} // namespace

WindowDataset build_stack_windows(const FeatureDataset& data, const std::vector<int>& sample_indices,
                                  StackRole role, int timesteps, const WindowPolicy& policy) {
    const double frame_length = data.dsp.frame_length;
    const int normal_cls = normal_class_of(role);

    std::vector<std::vector<WindowRef>> by_class(static_cast<std::size_t>(normal_cls) + 1);
    for (int idx : sample_indices) {
        const auto& meta = data.meta[static_cast<std::size_t>(idx)];
        const int frames = data.features[static_cast<std::size_t>(idx)].rows;
        for (int f = 0; f < frames; ++f) {
            const int cls = frame_class(meta, f, frame_length, role);
            if (cls == normal_cls && (f % policy.normal_stride) != 0) continue;
            by_class[static_cast<std::size_t>(cls)].push_back({idx, f, cls});
        }
    }

    WindowDataset out;
    out.timesteps = timesteps;
    out.feat_dim = data.feat_dim;
    out.features = &data.features;
    for (auto& cls_items : by_class) {
        thin_to_cap(cls_items, policy.per_class_cap);
        out.items.insert(out.items.end(), cls_items.begin(), cls_items.end());
    }
    return out;
}

FusionDataset build_fusion_dataset(const FeatureDataset& data, const std::vector<int>& sample_indices,
                                   const DetectorModel& model, int frame_stride) {
    if (frame_stride < 1) frame_stride = 1;
    const double frame_length = data.dsp.frame_length;

    struct FrameRef {
        int sample;
        int frame;
        int target;
    };
    std::vector<FrameRef> refs;
    for (int idx : sample_indices) {
        const auto& meta = data.meta[static_cast<std::size_t>(idx)];
        const int frames = data.features[static_cast<std::size_t>(idx)].rows;
        for (int f = 0; f < frames; f += frame_stride) {
            refs.push_back({idx, f, frame_in_action(meta, f, frame_length) ? 1 : 0});
        }
    }

    FusionDataset out;
    const int in_dim = model.arch.dual
                           ? model.short_stack.config.num_classes() + model.long_stack.config.num_classes()
                           : model.short_stack.config.num_classes();
    out.inputs = Mat(static_cast<int>(refs.size()), in_dim);
    out.targets.resize(refs.size());

    const std::size_t batch = 256;
    auto gather = [&](const LstmStack& stack, std::size_t lo, std::size_t hi, std::vector<Mat>& x_t) {
        const int t_steps = stack.config.timesteps;
        x_t.assign(static_cast<std::size_t>(t_steps), Mat(static_cast<int>(hi - lo), data.feat_dim));
        for (std::size_t i = lo; i < hi; ++i) {
            const Mat& feats = data.features[static_cast<std::size_t>(refs[i].sample)];
            const int r = static_cast<int>(i - lo);
            for (int t = 0; t < t_steps; ++t) {
                const int frame = refs[i].frame - (t_steps - 1) + t;
                if (frame < 0) continue;
                std::memcpy(x_t[static_cast<std::size_t>(t)].row(r), feats.row(frame),
                            static_cast<std::size_t>(data.feat_dim) * sizeof(double));
            }
        }
    };

    std::vector<Mat> x_t;
    for (std::size_t lo = 0; lo < refs.size(); lo += batch) {
        const std::size_t hi = std::min(refs.size(), lo + batch);
        gather(model.short_stack, lo, hi, x_t);
        Mat p_short = stack_infer_batch(x_t, model.short_stack);
        Mat p_long;
        if (model.arch.dual) {
            gather(model.long_stack, lo, hi, x_t);
            p_long = stack_infer_batch(x_t, model.long_stack);
        }
        for (std::size_t i = lo; i < hi; ++i) {
            const int r = static_cast<int>(i - lo);
            double* row = out.inputs.row(static_cast<int>(i));
            std::memcpy(row, p_short.row(r), static_cast<std::size_t>(p_short.cols) * sizeof(double));
            if (model.arch.dual)
                std::memcpy(row + p_short.cols, p_long.row(r),
                            static_cast<std::size_t>(p_long.cols) * sizeof(double));
            out.targets[i] = refs[i].target;
        }
    }
    return out;
}

StageTrainConfig default_stage_config() {
    StageTrainConfig c;
    c.short_stack.epochs = 10;
    c.short_stack.batch_size = 64;
    c.short_stack.learning_rate = 2e-3;
    c.short_stack.lr_milestones = {6, 8};
    c.short_stack.seed = 101;
    c.long_stack.epochs = 8;
    c.long_stack.batch_size = 64;
    c.long_stack.learning_rate = 2e-3;
    c.long_stack.lr_milestones = {5, 7};
    c.long_stack.seed = 202;
    c.fusion.epochs = 30;
    c.fusion.batch_size = 256;
    c.fusion.learning_rate = 5e-3;
    c.fusion.seed = 303;
    return c;
}

StageTrainReport train_detector_model(DetectorModel& model, const FeatureDataset& data,
                                      const std::vector<int>& train_indices, const StageTrainConfig& config) {
    if (model.dsp.fingerprint() != data.dsp.fingerprint())
        throw std::invalid_argument("train_detector_model: model and dataset DSP configs differ");
    if (train_indices.empty()) throw std::invalid_argument("train_detector_model: empty training set");

    StageTrainReport report;
    if (model.arch.dual) {
        WindowDataset short_ws = build_stack_windows(data, train_indices, StackRole::ShortDual,
                                                     model.short_stack.config.timesteps, config.windows);
        report.short_stack = train_stack(model.short_stack, short_ws, config.short_stack);

        WindowDataset long_ws = build_stack_windows(data, train_indices, StackRole::LongDual,
                                                    model.long_stack.config.timesteps, config.windows);
        report.long_stack = train_stack(model.long_stack, long_ws, config.long_stack);
    } else {
        WindowDataset ws = build_stack_windows(data, train_indices, StackRole::Single,
                                               model.short_stack.config.timesteps, config.windows);
        report.short_stack = train_stack(model.short_stack, ws, config.short_stack);
    }

    FusionDataset fd = build_fusion_dataset(data, train_indices, model, config.fusion_frame_stride);
    report.fusion = train_fusion(model.fusion, fd.inputs, fd.targets, config.fusion);
    return report;
}

SplitIndices stratified_split(const FeatureDataset& data, double train_fraction, std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw std::invalid_argument("stratified_split: train fraction must be in (0, 1)");

    std::vector<std::vector<int>> by_class(4);
    for (std::size_t i = 0; i < data.meta.size(); ++i) {
        by_class[static_cast<std::size_t>(data.meta[i].action)].push_back(static_cast<int>(i));
    }

    SplitIndices out;
    Rng rng(seed ? seed : 1);
    for (auto& group : by_class) {
        for (std::size_t i = group.size(); i > 1; --i) {
            const std::size_t j = rng.next_below(i);
            std::swap(group[i - 1], group[j]);
        }
        const auto n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(group.size()) + 0.5);
        for (std::size_t i = 0; i < group.size(); ++i) {
            (i < n_train ? out.train : out.test).push_back(group[i]);
        }
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

void save_feature_dump(const std::string& path, const FeatureDataset& data, bool csv) {
    json header{{"fs", data.dsp.sample_rate},
                {"frame_length", data.dsp.frame_length},
                {"n", data.dsp.undersample_factor},
                {"band", {data.dsp.band.f_low, data.dsp.band.f_high}},
                {"fft_size", data.dsp.fft_size},
                {"dim", data.feat_dim},
                {"fingerprint", data.dsp.fingerprint_hex()},
                {"samples", json::array()}};
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& m = data.meta[i];
        header["samples"].push_back({{"id", m.id},
                                     {"action", action_name(m.action)},
                                     {"interval", {m.interval.first, m.interval.second}},
                                     {"has_action", m.has_action},
                                     {"frames", data.features[i].rows}});
    }

    if (csv) {
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw std::runtime_error("save_feature_dump: cannot open " + path);
        f << "# " << header.dump() << "\n";
        for (std::size_t i = 0; i < data.size(); ++i) {
            for (int r = 0; r < data.features[i].rows; ++r) {
                f << data.meta[i].id << "," << r;
                const double* row = data.features[i].row(r);
                for (int c = 0; c < data.features[i].cols; ++c) f << "," << row[c];
                f << "\n";
            }
        }
        return;
    }

    const std::string head_text = header.dump();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_feature_dump: cannot open " + path);
    f.write("DSNFEAT1", 8);
    const std::uint64_t hlen = head_text.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(head_text.data(), static_cast<std::streamsize>(head_text.size()));
    for (const auto& m : data.features) {
        f.write(reinterpret_cast<const char*>(m.a.data()), static_cast<std::streamsize>(m.a.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("save_feature_dump: short write to " + path);
}

FeatureDataset load_feature_dump(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_feature_dump: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "DSNFEAT1", 8) != 0)
        throw std::runtime_error("load_feature_dump: bad magic in " + path);
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    std::string head_text(hlen, '\0');
    f.read(head_text.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw std::runtime_error("load_feature_dump: truncated header in " + path);
    json header = json::parse(head_text);

    FeatureDataset out;
    out.dsp.sample_rate = header.at("fs");
    out.dsp.frame_length = header.at("frame_length");
    out.dsp.undersample_factor = header.at("n");
    out.dsp.band.f_low = header.at("band")[0];
    out.dsp.band.f_high = header.at("band")[1];
    out.dsp.fft_size = header.at("fft_size");
    out.feat_dim = header.at("dim");

    for (const auto& sj : header.at("samples")) {
        SampleMeta m;
        m.id = sj.at("id");
        m.action = action_from_name(sj.at("action").get<std::string>());
        m.interval = {sj.at("interval")[0], sj.at("interval")[1]};
        m.has_action = sj.at("has_action");
        const int frames = sj.at("frames");
        Mat feat(frames, out.feat_dim);
        f.read(reinterpret_cast<char*>(feat.a.data()), static_cast<std::streamsize>(feat.a.size() * sizeof(double)));
        if (!f) throw std::runtime_error("load_feature_dump: truncated payload in " + path);
        out.meta.push_back(m);
        out.features.push_back(std::move(feat));
    }
    return out;
}

} // namespace drowsy
