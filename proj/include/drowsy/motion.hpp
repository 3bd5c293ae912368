#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "drowsy/audio.hpp"

namespace drowsy {

enum class ActionKind { Nodding, Yawning, OperatingSW, Normal };

const char* action_name(ActionKind k);
ActionKind action_from_name(const std::string& name);

// Time from the beginning to the end of each action (seconds).
double total_time(ActionKind k);

constexpr double kSpeedOfSound = 343.0;

// Maximum reflector speed that keeps the shift inside +/-200 Hz of a 20 kHz
// carrier under the one-way convention.
constexpr double kMaxPathSpeed = 3.43;

// Doppler shift in Hz for relative speed delta_v (m/s), carrier f0 (Hz) and
// wave speed c (m/s). Positive delta_v means source and observer approach.
double doppler_shift(double delta_v, double f0_hz, double c);

// One raised-cosine displacement leg: value moves from `from` to `to` over
// [t0, t1] with zero end-point velocity.
struct MotionSegment {
    double t0 = 0.0;
    double t1 = 0.0;
    double from = 0.0;
    double to = 0.0;
};

struct PhaseMarker {
    std::string step;
    double start_time = 0.0;
};

// Time-varying transmitter->reflector->receiver path length d(t).
struct MotionProfile {
    ActionKind action = ActionKind::Normal;
    double duration = 10.0;
    double base_path_length = 1.0;  // meters
    std::vector<MotionSegment> segments;
    // Ambient body drift and micro-jitter, both sinusoidal in displacement.
    double drift_amplitude = 0.0;
    double drift_period = 5.0;
    double drift_phase = 0.0;
    double jitter_amplitude = 0.0;
    double jitter_period = 2.0;
    // Constant-rate path change (m/s), for constant-velocity calibration
    // profiles; 0 for all action profiles.
    double linear_velocity = 0.0;
    std::vector<PhaseMarker> phase_markers;
    // [start, end] of the action; (0, 0) and `has_action == false` for Normal.
    std::pair<double, double> action_interval {0.0, 0.0};
    bool has_action = false;

    double path_length(double t) const;    // d(t), meters, > 0
    double path_velocity(double t) const;  // d'(t), m/s
};

// Free parameters of a profile. Amplitude is the peak displacement of the
// action leg; time_scale stretches the action around its total time T().
struct ProfileParams {
    double duration = 10.0;
    double action_start = 4.0;
    double time_scale = 1.0;          // in [0.8, 1.2]
    double amplitude = 0.15;          // in [0.05, 0.4] m for action classes
    double base_path_length = 1.0;    // in (0, ...) m
    double drift_amplitude = 0.0;     // m
    double drift_period = 5.0;        // s
    double drift_phase = 0.0;         // rad
    double jitter_amplitude = 0.0;    // m
    double jitter_period = 2.0;       // s
    double still_duration = 3.5;      // s, OperatingSW only (>= 3 s)
};

ProfileParams default_profile_params(ActionKind k);

// Builds the profile for the given parameters. Throws std::invalid_argument
// naming the offending parameter when out of range.
MotionProfile motion_profile(ActionKind action, const ProfileParams& params);

// Acoustic channel between speaker and microphone: a handful of static paths
// (direct leakage plus fixed reflections) and one moving reflection.
struct StaticPath {
    double delay_s = 0.0;
    double gain = 0.0;
};

struct ChannelSpec {
    std::vector<StaticPath> static_paths;
    double moving_path_gain = 0.2;
    double noise_std = 0.005;
    double speed_of_sound = kSpeedOfSound;
    // When true the moving path uses a 2*d(t)/c delay (round-trip convention)
    // instead of the default one-way d(t)/c.
    bool round_trip_delay = false;
};

struct StepInterval {
    std::string label;  // "nodding:bow", "yawning:hold", ...
    double start = 0.0;
    double end = 0.0;
};

enum class SampleSource { Simulated };

struct LabeledSample {
    AudioBuffer audio;
    ActionKind action = ActionKind::Normal;
    std::pair<double, double> action_interval {0.0, 0.0};
    bool has_action = false;
    std::vector<StepInterval> steps;
    SampleSource source = SampleSource::Simulated;
    std::uint64_t seed = 0;
    ProfileParams params;
    ChannelSpec channel;
};

// samples[k] = sum_static g_i cos(2 pi f0 (t_k - tau_i))
//            + g_m cos(2 pi f0 (t_k - d(t_k)/c)) + N(0, noise_std).
// Deterministic for a fixed seed.
LabeledSample synthesize_received(const MotionProfile& profile, const ChannelSpec& channel,
                                  double f0_hz, double fs_hz, std::uint64_t seed);

// Step label for a frame centered at the given time ("normal" outside the
// action interval).
std::string step_label_at(const LabeledSample& sample, double time_s);
std::vector<std::string> frame_step_labels(const LabeledSample& sample, double frame_length_s);

} // namespace drowsy
