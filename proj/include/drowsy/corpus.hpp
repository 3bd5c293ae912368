#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "drowsy/motion.hpp"
#include "drowsy/util.hpp"

namespace drowsy {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

// Per-action randomization ranges. Defaults keep every profile inside the
// documented parameter envelope and the +/-200 Hz Doppler band.
struct ProfileRanges {
    Range amplitude;
    Range time_scale {0.8, 1.2};
    Range action_start {3.6, 6.0};
    Range base_path_length {0.8, 1.5};
    Range drift_amplitude {0.004, 0.02};
    Range drift_period {3.0, 8.0};
    Range jitter_amplitude {0.0005, 0.002};
    Range still_duration {3.0, 4.5};
};

ProfileRanges default_profile_ranges(ActionKind k);

struct ChannelRanges {
    Range direct_gain {0.45, 0.6};
    Range direct_delay_ms {0.5, 2.0};
    Range reflection_gain {0.05, 0.15};
    Range reflection_delay_ms {2.0, 6.0};
    Range moving_gain {0.12, 0.25};
    Range noise_std {0.002, 0.008};
};

struct CorpusSpec {
    int per_class_nodding = 600;
    int per_class_yawning = 600;
    int per_class_operating_sw = 600;
    int per_class_normal = 600;
    double duration_s = 10.0;
    double f0_hz = 20000.0;
    double fs_hz = 44100.0;
    ChannelRanges channel;

    int total() const {
        return per_class_nodding + per_class_yawning + per_class_operating_sw + per_class_normal;
    }
    ActionKind action_of_index(int i) const;
};

// Randomized-but-deterministic parameter draw for one sample.
ProfileParams sample_profile_params(ActionKind action, const ProfileRanges& ranges, Rng& rng);
ChannelSpec sample_channel(const ChannelRanges& ranges, Rng& rng);

// Builds sample `index` of the corpus. Per-sample seeds derive from
// (master_seed, index), so any subset can be generated independently.
LabeledSample generate_sample(const CorpusSpec& spec, std::uint64_t master_seed, int index);

// Eager generation; fine for small corpora. Large corpora should stream via
// for_each_sample so audio buffers can be dropped after use.
std::vector<LabeledSample> generate_corpus(const CorpusSpec& spec, std::uint64_t master_seed);

// Calls sink(index, sample) for every sample, in parallel across samples.
// The sink must tolerate concurrent calls for distinct indices.
void for_each_sample(const CorpusSpec& spec, std::uint64_t master_seed,
                     const std::function<void(int, LabeledSample&&)>& sink);

// Corpus persistence: <dir>/manifest.jsonl (one record per sample),
// <dir>/corpus.json (spec, seed, count, manifest checksum) and one WAV per
// sample. load_corpus verifies the checksum and rejects tampered manifests.
void save_corpus(const std::string& dir, const CorpusSpec& spec, std::uint64_t master_seed);
std::vector<LabeledSample> load_corpus(const std::string& dir);
void for_each_saved_sample(const std::string& dir, const std::function<void(int, LabeledSample&&)>& sink);
int saved_corpus_size(const std::string& dir);

} // namespace drowsy
