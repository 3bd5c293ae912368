// Command-line front end: corpus generation, feature extraction, training,
// evaluation, online detection, study sweeps and a latency benchmark.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "drowsy/corpus.hpp"
#include "drowsy/dataset.hpp"
#include "drowsy/detector.hpp"
#include "drowsy/eval.hpp"
#include "drowsy/model.hpp"

using namespace drowsy;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string resolve_out(const std::string& path) {
    const char* root = std::getenv("DROWSY_OUT_ROOT");
    if (root == nullptr || path.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(root) / path).string();
}

void log_config(const std::string& cmd, const json& resolved) {
    std::cerr << "[" << cmd << "] resolved config: " << resolved.dump() << "\n";
}

// Defaults may come from a JSON config file; explicit flags win.
json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f) throw CLI::ValidationError("--config", "cannot open " + path);
    return json::parse(f);
}

struct DspFlags {
    double frame_length = 0.25;
    int factor = 8;
    double f_low = 19800.0;
    double f_high = 20200.0;
    int fft_size = 2048;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--frame-length", frame_length, "frame length in seconds");
        cmd->add_option("--factor", factor, "undersampling factor n");
        cmd->add_option("--f-low", f_low, "band lower edge (Hz)");
        cmd->add_option("--f-high", f_high, "band upper edge (Hz)");
        cmd->add_option("--fft-size", fft_size, "FFT length");
    }

    DspConfig to_config(double fs) const {
        DspConfig d;
        d.sample_rate = fs;
        d.frame_length = frame_length;
        d.undersample_factor = factor;
        d.band.f_low = f_low;
        d.band.f_high = f_high;
        d.fft_size = fft_size;
        return d;
    }
};

void apply_config_defaults(const json& cfg, CLI::App* cmd) {
    for (const auto& [key, value] : cfg.items()) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (opt == nullptr || opt->count() > 0) continue;
        if (value.is_string())
            opt->add_result(value.get<std::string>());
        else
            opt->add_result(value.dump());
    }
}

FeatureDataset dataset_from_inputs(const std::string& corpus_dir, const std::string& features_path,
                                   const DspConfig& dsp) {
    if (!features_path.empty()) {
        FeatureDataset d = load_feature_dump(features_path);
        if (d.dsp.fingerprint() != dsp.fingerprint())
            throw std::runtime_error("feature dump was extracted with a different DSP config");
        return d;
    }
    return featurize_saved_corpus(corpus_dir, dsp);
}

json detection_to_json(const Detection& d) {
    return json{{"frame_index", d.frame_index}, {"timestamp", d.timestamp},  {"R", d.r},
                {"p_short", d.p_short},         {"p_long", d.p_long},        {"alert", d.alert}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << text;
}

void sweep_csv(const std::string& path, const ExperimentReport& report, const std::string& axis_key) {
    std::ostringstream os;
    os << axis_key << ",nodding,yawning,operating_sw,action_accuracy,drowsy_accuracy,within_0.7T\n";
    for (const auto& row : report.results.at("rows")) {
        os << (row.contains(axis_key) ? row.at(axis_key).dump() : "?");
        const auto& pa = row.at("actions").at("per_action_accuracy");
        for (const char* k : {"nodding", "yawning", "operating_sw"}) os << "," << pa.at(k).dump();
        os << "," << row.at("actions").at("accuracy").dump();
        os << "," << row.at("drowsy").at("accuracy").dump();
        os << "," << row.at("timeliness").at("overall_within_0.7T").dump();
        os << "\n";
    }
    write_text(path, os.str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acoustic drowsy-driving detection pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON file with default option values")->envname("DROWSY_CONFIG");

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "synthesize a labeled corpus (WAV files + manifest)");
    int gen_per_class = 600;
    double gen_duration = 10.0, gen_f0 = 20000.0, gen_fs = 44100.0;
    std::uint64_t gen_seed = 7;
    std::string gen_out = "corpus";
    gen->add_option("--per-class", gen_per_class, "samples per class");
    gen->add_option("--duration", gen_duration, "sample length in seconds");
    gen->add_option("--f0", gen_f0, "carrier frequency (Hz)");
    gen->add_option("--fs", gen_fs, "sample rate (Hz)");
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("--out", gen_out, "output directory");

    // ---- extract ----
    auto* ext = app.add_subcommand("extract", "per-frame phase features from a saved corpus");
    std::string ext_corpus = "corpus", ext_out = "features.bin";
    bool ext_csv = false;
    DspFlags ext_dsp;
    ext->add_option("--corpus", ext_corpus, "corpus directory");
    ext->add_option("--out", ext_out, "output file");
    ext->add_flag("--csv", ext_csv, "write CSV instead of the binary dump");
    ext_dsp.add_to(ext);

    // ---- train ----
    auto* trn = app.add_subcommand("train", "train the detector on a corpus or feature dump");
    std::string trn_corpus, trn_features, trn_arch = "2-3-LSTM-DNN", trn_out = "model.bin";
    std::uint64_t trn_seed = 42;
    int trn_epochs_short = 10, trn_epochs_long = 8;
    int trn_hidden = 64;
    double trn_threshold = 0.5;
    DspFlags trn_dsp;
    trn->add_option("--corpus", trn_corpus, "corpus directory");
    trn->add_option("--features", trn_features, "feature dump (alternative to --corpus)");
    trn->add_option("--arch", trn_arch, "network structure")
        ->check(CLI::IsMember(architecture_menu()));
    trn->add_option("--out", trn_out, "model output path");
    trn->add_option("--seed", trn_seed, "training seed");
    trn->add_option("--epochs-short", trn_epochs_short, "epochs for the short-horizon stack");
    trn->add_option("--epochs-long", trn_epochs_long, "epochs for the long-horizon stack");
    trn->add_option("--hidden", trn_hidden, "LSTM hidden size");
    trn->add_option("--threshold", trn_threshold, "alert threshold on R");
    trn_dsp.add_to(trn);

    // ---- eval ----
    auto* evl = app.add_subcommand("eval", "evaluate a model on a corpus or feature dump");
    std::string evl_model = "model.bin", evl_corpus, evl_features, evl_out;
    evl->add_option("--model", evl_model, "model file");
    evl->add_option("--corpus", evl_corpus, "corpus directory");
    evl->add_option("--features", evl_features, "feature dump");
    evl->add_option("--out", evl_out, "report JSON output path");

    // ---- detect ----
    auto* det = app.add_subcommand("detect", "stream detections over a WAV recording");
    std::string det_model = "model.bin", det_wav, det_out;
    bool det_realtime = false;
    det->add_option("--model", det_model, "model file");
    det->add_option("--wav", det_wav, "input recording")->required();
    det->add_option("--out", det_out, "NDJSON output path (default stdout)");
    det->add_flag("--realtime", det_realtime, "replay at the real-time frame cadence");

    // ---- sweep ----
    auto* swp = app.add_subcommand("sweep", "desk-scale study over frame length or architecture");
    std::string swp_axis = "frame-length", swp_out = "sweep";
    int swp_per_class = 120;
    std::uint64_t swp_seed = 7;
    int swp_epochs = 4;
    swp->add_option("--axis", swp_axis, "frame-length | arch")
        ->check(CLI::IsMember({"frame-length", "arch"}));
    swp->add_option("--per-class", swp_per_class, "samples per class for each run");
    swp->add_option("--seed", swp_seed, "corpus seed");
    swp->add_option("--epochs", swp_epochs, "epochs per stack");
    swp->add_option("--out", swp_out, "output directory");

    // ---- bench ----
    auto* bch = app.add_subcommand("bench", "per-frame latency benchmark of the online engine");
    std::string bch_model = "model.bin";
    int bch_frames = 1000;
    bch->add_option("--model", bch_model, "model file");
    bch->add_option("--frames", bch_frames, "number of frames to stream");

    CLI11_PARSE(app, argc, argv);

    try {
        const json cfg = load_config_file(config_path);
        for (auto* sub : {gen, ext, trn, evl, det, swp, bch})
            if (sub->parsed()) apply_config_defaults(cfg, sub);

        if (gen->parsed()) {
            CorpusSpec spec;
            spec.per_class_nodding = spec.per_class_yawning = spec.per_class_operating_sw =
                spec.per_class_normal = gen_per_class;
            spec.duration_s = gen_duration;
            spec.f0_hz = gen_f0;
            spec.fs_hz = gen_fs;
            const std::string out = resolve_out(gen_out);
            log_config("gen-data", {{"per_class", gen_per_class},
                                    {"duration", gen_duration},
                                    {"seed", gen_seed},
                                    {"out", out}});
            save_corpus(out, spec, gen_seed);
            std::cout << "wrote " << spec.total() << " samples to " << out << "\n";
            return 0;
        }

        if (ext->parsed()) {
            const DspConfig dsp = ext_dsp.to_config(44100.0);
            const std::string out = resolve_out(ext_out);
            log_config("extract", {{"corpus", ext_corpus},
                                   {"out", out},
                                   {"fingerprint", dsp.fingerprint_hex()}});
            FeatureDataset data = featurize_saved_corpus(resolve_out(ext_corpus), dsp);
            save_feature_dump(out, data, ext_csv);
            std::cout << "extracted " << data.size() << " samples, dim " << data.feat_dim << " -> " << out << "\n";
            return 0;
        }

        if (trn->parsed()) {
            if (trn_corpus.empty() == trn_features.empty())
                throw std::runtime_error("train: provide exactly one of --corpus or --features");
            const DspConfig dsp = trn_dsp.to_config(44100.0);
            FeatureDataset data = dataset_from_inputs(resolve_out(trn_corpus), resolve_out(trn_features), dsp);

            StageTrainConfig stages = default_stage_config();
            stages.short_stack.epochs = trn_epochs_short;
            stages.long_stack.epochs = trn_epochs_long;
            stages.short_stack.seed = derive_seed(trn_seed, 1);
            stages.long_stack.seed = derive_seed(trn_seed, 2);
            stages.fusion.seed = derive_seed(trn_seed, 3);
            stages.hyper.hidden_dim = trn_hidden;
            stages.init_seed = trn_seed;

            log_config("train", {{"arch", trn_arch},
                                 {"seed", trn_seed},
                                 {"samples", data.size()},
                                 {"feature_dim", data.feat_dim},
                                 {"fingerprint", dsp.fingerprint_hex()}});

            DetectorModel model = make_detector_model(parse_architecture(trn_arch), data.feat_dim, data.dsp,
                                                      stages.hyper, trn_seed);
            model.threshold = trn_threshold;
            std::vector<int> all(data.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
            StageTrainReport rep = train_detector_model(model, data, all, stages);

            const std::string out = resolve_out(trn_out);
            save_model(out, model);
            std::cout << "trained " << trn_arch << "; final short-stack loss "
                      << (rep.short_stack.epochs.empty() ? 0.0 : rep.short_stack.epochs.back().train_loss)
                      << "; model -> " << out << "\n";
            return 0;
        }

        if (evl->parsed()) {
            if (evl_corpus.empty() == evl_features.empty())
                throw std::runtime_error("eval: provide exactly one of --corpus or --features");
            DetectorModel model = load_model(resolve_out(evl_model));
            FeatureDataset data = dataset_from_inputs(resolve_out(evl_corpus), resolve_out(evl_features), model.dsp);
            log_config("eval", {{"model", evl_model}, {"samples", data.size()}});

            std::vector<int> all(data.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
            EvalResult result = evaluate_detector(model, data, all);
            json report = {{"schema_version", 1}, {"results", eval_result_to_json(result)}};
            if (!evl_out.empty()) write_text(resolve_out(evl_out), report.dump(2) + "\n");

            ExperimentReport text_report;
            text_report.results = report["results"];
            text_report.results["feature_dim"] = data.feat_dim;
            std::cout << text_report.to_text();
            return 0;
        }

        if (det->parsed()) {
            DetectorModel model = load_model(resolve_out(det_model));
            AudioBuffer audio = read_wav(resolve_out(det_wav));
            const auto frames = segment_frames(audio, model.dsp.frame_length);
            StreamDetector detector(model);

            std::ostream* os = &std::cout;
            std::ofstream file;
            if (!det_out.empty()) {
                file.open(resolve_out(det_out), std::ios::trunc);
                if (!file) throw std::runtime_error("cannot open " + det_out);
                os = &file;
            }
            log_config("detect", {{"model", det_model}, {"frames", frames.size()}});
            for (const auto& frame : frames) {
                const auto t0 = std::chrono::steady_clock::now();
                Detection d = detector.push_frame(frame);
                (*os) << detection_to_json(d).dump() << "\n";
                if (det_realtime) {
                    const auto budget = std::chrono::duration<double>(model.dsp.frame_length);
                    const auto spent = std::chrono::steady_clock::now() - t0;
                    if (spent < budget) std::this_thread::sleep_for(budget - spent);
                }
            }
            return 0;
        }

        if (swp->parsed()) {
            ExperimentConfig base = default_experiment_config();
            base.corpus.per_class_nodding = base.corpus.per_class_yawning = base.corpus.per_class_operating_sw =
                base.corpus.per_class_normal = swp_per_class;
            base.corpus_seed = swp_seed;
            base.stages.short_stack.epochs = swp_epochs;
            base.stages.long_stack.epochs = swp_epochs;
            const std::string out_dir = resolve_out(swp_out);
            fs::create_directories(out_dir);
            log_config("sweep", {{"axis", swp_axis}, {"per_class", swp_per_class}, {"out", out_dir}});

            ExperimentReport report;
            std::string axis_key;
            if (swp_axis == "frame-length") {
                report = run_frame_length_sweep(base, {0.15, 0.2, 0.25, 0.3, 0.4});
                axis_key = "frame_length";
            } else {
                report = run_architecture_sweep(base, architecture_menu());
                axis_key = "arch";
            }
            json full = {{"header", report.header}, {"results", report.results}};
            write_text(out_dir + "/sweep.json", full.dump(2) + "\n");
            sweep_csv(out_dir + "/sweep.csv", report, axis_key);
            std::cout << report.to_text();
            return 0;
        }

        if (bch->parsed()) {
            DetectorModel model = load_model(resolve_out(bch_model));
            // benchmark input: a synthetic drive with one nod in the middle
            MotionProfile profile = motion_profile(ActionKind::Nodding, [&] {
                ProfileParams p = default_profile_params(ActionKind::Nodding);
                p.duration = std::max(10.0, (bch_frames + 1) * model.dsp.frame_length);
                p.action_start = 4.0;
                return p;
            }());
            ChannelSpec channel;
            channel.static_paths = {{0.0015, 0.55}, {0.004, 0.12}};
            channel.moving_path_gain = 0.2;
            channel.noise_std = 0.004;
            LabeledSample sample = synthesize_received(profile, channel, 20000.0, model.dsp.sample_rate, 99);
            auto frames = segment_frames(sample.audio, model.dsp.frame_length);
            if (static_cast<int>(frames.size()) > bch_frames) frames.resize(static_cast<std::size_t>(bch_frames));

            StreamDetector detector(model);
            log_config("bench", {{"model", bch_model}, {"frames", frames.size()}});
            const auto elapsed = realtime_budget_check(detector, frames);
            const double p50 = percentile(elapsed, 0.50);
            const double p99 = percentile(elapsed, 0.99);
            const bool ok = p99 < model.dsp.frame_length;
            std::printf("frames: %zu  p50: %.4f s  p99: %.4f s  budget: %.2f s  %s\n", elapsed.size(), p50, p99,
                        model.dsp.frame_length, ok ? "PASS" : "FAIL");
            return ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
