#include "drowsy/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace drowsy {

using nlohmann::json;
namespace fs = std::filesystem;

ProfileRanges default_profile_ranges(ActionKind k) {
    ProfileRanges r;
    switch (k) {
        case ActionKind::Nodding:
            r.amplitude = {0.08, 0.2};
            break;
        case ActionKind::Yawning:
            r.amplitude = {0.1, 0.25};
            break;
        case ActionKind::OperatingSW:
            r.amplitude = {0.2, 0.4};
            r.drift_amplitude = {0.0, 0.0};  // frozen at the wheel before the correction
            break;
        case ActionKind::Normal:
            r.amplitude = {0.0, 0.0};
            r.drift_amplitude = {0.005, 0.03};
            break;
    }
    return r;
}

ActionKind CorpusSpec::action_of_index(int i) const {
    if (i < per_class_nodding) return ActionKind::Nodding;
    i -= per_class_nodding;
    if (i < per_class_yawning) return ActionKind::Yawning;
    i -= per_class_yawning;
    if (i < per_class_operating_sw) return ActionKind::OperatingSW;
    i -= per_class_operating_sw;
    if (i < per_class_normal) return ActionKind::Normal;
    throw std::out_of_range("corpus sample index out of range");
}

static double rand_in(const Range& r, Rng& rng) {
    return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi);
}

ProfileParams sample_profile_params(ActionKind action, const ProfileRanges& ranges, Rng& rng) {
    ProfileParams p = default_profile_params(action);
    p.amplitude = rand_in(ranges.amplitude, rng);
    p.time_scale = rand_in(ranges.time_scale, rng);
    p.base_path_length = rand_in(ranges.base_path_length, rng);
    p.drift_amplitude = rand_in(ranges.drift_amplitude, rng);
    p.drift_period = rand_in(ranges.drift_period, rng);
    p.drift_phase = rng.uniform(0.0, 6.283185307179586);
    if (action == ActionKind::OperatingSW) {
        p.jitter_amplitude = rand_in(ranges.jitter_amplitude, rng);
        p.still_duration = rand_in(ranges.still_duration, rng);
        double lo = p.still_duration + 0.3;
        p.action_start = rng.uniform(lo, std::max(lo + 0.1, ranges.action_start.hi));
    } else {
        p.action_start = rand_in(ranges.action_start, rng);
    }
    return p;
}

ChannelSpec sample_channel(const ChannelRanges& ranges, Rng& rng) {
    ChannelSpec c;
    c.static_paths.push_back({rand_in(ranges.direct_delay_ms, rng) * 1e-3, rand_in(ranges.direct_gain, rng)});
    c.static_paths.push_back({rand_in(ranges.reflection_delay_ms, rng) * 1e-3, rand_in(ranges.reflection_gain, rng)});
    c.moving_path_gain = rand_in(ranges.moving_gain, rng);
    c.noise_std = rand_in(ranges.noise_std, rng);
    return c;
}

LabeledSample generate_sample(const CorpusSpec& spec, std::uint64_t master_seed, int index) {
    const ActionKind action = spec.action_of_index(index);
    const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(index));
    Rng rng(seed);

    ProfileRanges ranges = default_profile_ranges(action);
    ProfileParams params = sample_profile_params(action, ranges, rng);
    params.duration = spec.duration_s;
    ChannelSpec channel = sample_channel(spec.channel, rng);

    MotionProfile profile = motion_profile(action, params);
    LabeledSample sample = synthesize_received(profile, channel, spec.f0_hz, spec.fs_hz, splitmix64(seed));
    sample.seed = seed;
    sample.params = params;
    return sample;
}

std::vector<LabeledSample> generate_corpus(const CorpusSpec& spec, std::uint64_t master_seed) {
    std::vector<LabeledSample> out(static_cast<std::size_t>(spec.total()));
    for_each_sample(spec, master_seed,
                    [&out](int i, LabeledSample&& s) { out[static_cast<std::size_t>(i)] = std::move(s); });
    return out;
}

void for_each_sample(const CorpusSpec& spec, std::uint64_t master_seed,
                     const std::function<void(int, LabeledSample&&)>& sink) {
    const int total = spec.total();
    parallel_for(0, static_cast<std::size_t>(total), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            sink(static_cast<int>(i), generate_sample(spec, master_seed, static_cast<int>(i)));
        }
    });
}

namespace {

json params_to_json(const ProfileParams& p) {
    return json{{"duration", p.duration},
                {"action_start", p.action_start},
                {"time_scale", p.time_scale},
                {"amplitude", p.amplitude},
                {"base_path_length", p.base_path_length},
                {"drift_amplitude", p.drift_amplitude},
                {"drift_period", p.drift_period},
                {"drift_phase", p.drift_phase},
                {"jitter_amplitude", p.jitter_amplitude},
                {"jitter_period", p.jitter_period},
                {"still_duration", p.still_duration}};
}

ProfileParams params_from_json(const json& j) {
    ProfileParams p;
    p.duration = j.at("duration");
    p.action_start = j.at("action_start");
    p.time_scale = j.at("time_scale");
    p.amplitude = j.at("amplitude");
    p.base_path_length = j.at("base_path_length");
    p.drift_amplitude = j.at("drift_amplitude");
    p.drift_period = j.at("drift_period");
    p.drift_phase = j.at("drift_phase");
    p.jitter_amplitude = j.at("jitter_amplitude");
    p.jitter_period = j.at("jitter_period");
    p.still_duration = j.at("still_duration");
    return p;
}

json channel_to_json(const ChannelSpec& c) {
    json paths = json::array();
    for (const auto& sp : c.static_paths) paths.push_back({{"delay_s", sp.delay_s}, {"gain", sp.gain}});
    return json{{"static_paths", paths},
                {"moving_path_gain", c.moving_path_gain},
                {"noise_std", c.noise_std},
                {"speed_of_sound", c.speed_of_sound},
                {"round_trip_delay", c.round_trip_delay}};
}

ChannelSpec channel_from_json(const json& j) {
    ChannelSpec c;
    c.static_paths.clear();
    for (const auto& sp : j.at("static_paths")) c.static_paths.push_back({sp.at("delay_s"), sp.at("gain")});
    c.moving_path_gain = j.at("moving_path_gain");
    c.noise_std = j.at("noise_std");
    c.speed_of_sound = j.at("speed_of_sound");
    c.round_trip_delay = j.at("round_trip_delay");
    return c;
}

json record_to_json(int index, const std::string& wav_name, const LabeledSample& s) {
    json steps = json::array();
    for (const auto& st : s.steps) steps.push_back({{"label", st.label}, {"start", st.start}, {"end", st.end}});
    return json{{"id", index},
                {"wav", wav_name},
                {"action", action_name(s.action)},
                {"interval", {s.action_interval.first, s.action_interval.second}},
                {"has_action", s.has_action},
                {"steps", steps},
                {"seed", s.seed},
                {"params", params_to_json(s.params)},
                {"channel", channel_to_json(s.channel)}};
}

std::string wav_name_for(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%06d.wav", index);
    return buf;
}

json spec_to_json(const CorpusSpec& s) {
    return json{{"per_class",
                 {{"nodding", s.per_class_nodding},
                  {"yawning", s.per_class_yawning},
                  {"operating_sw", s.per_class_operating_sw},
                  {"normal", s.per_class_normal}}},
                {"duration_s", s.duration_s},
                {"f0_hz", s.f0_hz},
                {"fs_hz", s.fs_hz}};
}

LabeledSample record_to_sample(const json& rec, const std::string& dir) {
    LabeledSample s;
    s.audio = read_wav(dir + "/" + rec.at("wav").get<std::string>());
    s.action = action_from_name(rec.at("action").get<std::string>());
    s.action_interval = {rec.at("interval")[0], rec.at("interval")[1]};
    s.has_action = rec.at("has_action");
    for (const auto& st : rec.at("steps")) s.steps.push_back({st.at("label"), st.at("start"), st.at("end")});
    s.seed = rec.at("seed");
    s.params = params_from_json(rec.at("params"));
    s.channel = channel_from_json(rec.at("channel"));
    return s;
}

struct ManifestData {
    std::vector<json> records;
    std::string dir;
};

ManifestData read_manifest_checked(const std::string& dir) {
    std::ifstream head(dir + "/corpus.json");
    if (!head) throw std::runtime_error("load_corpus: missing corpus.json in " + dir);
    json meta = json::parse(head);
    if (meta.at("version").get<int>() != 1)
        throw std::runtime_error("load_corpus: unsupported corpus version in " + dir);

    std::ifstream mf(dir + "/manifest.jsonl", std::ios::binary);
    if (!mf) throw std::runtime_error("load_corpus: missing manifest.jsonl in " + dir);
    std::string manifest_text((std::istreambuf_iterator<char>(mf)), std::istreambuf_iterator<char>());

    const std::string expect = meta.at("manifest_fnv").get<std::string>();
    if (to_hex(fnv1a(manifest_text)) != expect)
        throw std::runtime_error("load_corpus: manifest checksum mismatch in " + dir);

    ManifestData data;
    data.dir = dir;
    std::istringstream lines(manifest_text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        data.records.push_back(json::parse(line));
    }
    if (static_cast<int>(data.records.size()) != meta.at("count").get<int>())
        throw std::runtime_error("load_corpus: record count mismatch in " + dir);
    return data;
}

} // namespace

void save_corpus(const std::string& dir, const CorpusSpec& spec, std::uint64_t master_seed) {
    fs::create_directories(dir);
    const int total = spec.total();
    std::vector<std::string> records(static_cast<std::size_t>(total));

    for_each_sample(spec, master_seed, [&](int i, LabeledSample&& s) {
        const std::string name = wav_name_for(i);
        write_wav(dir + "/" + name, s.audio);
        records[static_cast<std::size_t>(i)] = record_to_json(i, name, s).dump();
    });

    std::string manifest_text;
    for (const auto& r : records) {
        manifest_text += r;
        manifest_text += '\n';
    }
    {
        std::ofstream mf(dir + "/manifest.jsonl", std::ios::binary | std::ios::trunc);
        mf << manifest_text;
    }
    json meta{{"version", 1},
              {"count", total},
              {"seed", master_seed},
              {"spec", spec_to_json(spec)},
              {"manifest_fnv", to_hex(fnv1a(manifest_text))}};
    std::ofstream head(dir + "/corpus.json", std::ios::trunc);
    head << meta.dump(2) << "\n";
}

int saved_corpus_size(const std::string& dir) {
    return static_cast<int>(read_manifest_checked(dir).records.size());
}

std::vector<LabeledSample> load_corpus(const std::string& dir) {
    ManifestData data = read_manifest_checked(dir);
    std::vector<LabeledSample> out(data.records.size());
    parallel_for(0, data.records.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) out[i] = record_to_sample(data.records[i], dir);
    });
    return out;
}

void for_each_saved_sample(const std::string& dir, const std::function<void(int, LabeledSample&&)>& sink) {
    ManifestData data = read_manifest_checked(dir);
    parallel_for(0, data.records.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) sink(static_cast<int>(i), record_to_sample(data.records[i], dir));
    });
}

} // namespace drowsy
