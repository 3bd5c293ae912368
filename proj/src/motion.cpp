#include "drowsy/motion.hpp"

#include <cmath>
#include <stdexcept>

#include "drowsy/util.hpp"

namespace drowsy {

namespace {
constexpr double kPi = 3.141592653589793238462643383279;
constexpr double kTwoPi = 2.0 * kPi;
} // namespace

const char* action_name(ActionKind k) {
    switch (k) {
        case ActionKind::Nodding: return "nodding";
        case ActionKind::Yawning: return "yawning";
        case ActionKind::OperatingSW: return "operating_sw";
        case ActionKind::Normal: return "normal";
    }
    return "unknown";
}

ActionKind action_from_name(const std::string& name) {
    if (name == "nodding") return ActionKind::Nodding;
    if (name == "yawning") return ActionKind::Yawning;
    if (name == "operating_sw") return ActionKind::OperatingSW;
    if (name == "normal") return ActionKind::Normal;
    throw std::invalid_argument("unknown action name: " + name);
}

double total_time(ActionKind k) {
    switch (k) {
        case ActionKind::Nodding: return 2.3;
        case ActionKind::Yawning: return 2.7;
        case ActionKind::OperatingSW: return 2.4;
        case ActionKind::Normal: return 0.0;
    }
    return 0.0;
}

double doppler_shift(double delta_v, double f0_hz, double c) {
    if (c <= 0.0) throw std::invalid_argument("doppler_shift: wave speed must be positive");
    if (std::abs(delta_v) >= c) throw std::invalid_argument("doppler_shift: |delta_v| must be below the wave speed");
    return (delta_v / c) * f0_hz;
}

double MotionProfile::path_length(double t) const {
    double d = base_path_length;
    for (const auto& s : segments) {
        if (t <= s.t0) continue;
        if (t >= s.t1) {
            d += s.to - s.from;  // segment fully traversed; holds at `to`
            continue;
        }
        double u = (t - s.t0) / (s.t1 - s.t0);
        d += (s.to - s.from) * 0.5 * (1.0 - std::cos(kPi * u));
    }
    if (drift_amplitude != 0.0)
        d += drift_amplitude * std::sin(kTwoPi * t / drift_period + drift_phase);
    if (jitter_amplitude != 0.0)
        d += jitter_amplitude * std::sin(kTwoPi * t / jitter_period);
    d += linear_velocity * t;
    return d;
}

double MotionProfile::path_velocity(double t) const {
    double v = 0.0;
    for (const auto& s : segments) {
        if (t <= s.t0 || t >= s.t1) continue;
        double len = s.t1 - s.t0;
        double u = (t - s.t0) / len;
        v += (s.to - s.from) * 0.5 * kPi / len * std::sin(kPi * u);
    }
    if (drift_amplitude != 0.0)
        v += drift_amplitude * kTwoPi / drift_period * std::cos(kTwoPi * t / drift_period + drift_phase);
    if (jitter_amplitude != 0.0)
        v += jitter_amplitude * kTwoPi / jitter_period * std::cos(kTwoPi * t / jitter_period);
    v += linear_velocity;
    return v;
}

ProfileParams default_profile_params(ActionKind k) {
    ProfileParams p;
    switch (k) {
        case ActionKind::Nodding:
            p.amplitude = 0.15;
            break;
        case ActionKind::Yawning:
            p.amplitude = 0.18;
            break;
        case ActionKind::OperatingSW:
            p.amplitude = 0.3;
            p.jitter_amplitude = 0.001;
            p.jitter_period = 2.0;
            p.still_duration = 3.5;
            break;
        case ActionKind::Normal:
            p.amplitude = 0.0;
            p.drift_amplitude = 0.015;
            p.drift_period = 5.0;
            break;
    }
    return p;
}

namespace {

void require(bool ok, const char* param) {
    if (!ok) throw std::invalid_argument(std::string("motion_profile: parameter out of range: ") + param);
}

void validate_params(ActionKind action, const ProfileParams& p) {
    require(p.duration > 0.0, "duration");
    require(p.base_path_length > 0.5, "base_path_length");
    require(p.drift_amplitude >= 0.0 && p.drift_amplitude <= 0.05, "drift_amplitude");
    require(p.drift_period >= 1.0, "drift_period");
    require(p.jitter_amplitude >= 0.0 && p.jitter_amplitude <= 0.005, "jitter_amplitude");
    require(p.jitter_period >= 0.5, "jitter_period");
    if (action == ActionKind::Normal) return;

    require(p.time_scale >= 0.8 && p.time_scale <= 1.2, "time_scale");
    require(p.amplitude >= 0.05 && p.amplitude <= 0.4, "amplitude");
    require(p.action_start >= 0.0, "action_start");
    double t_action = total_time(action) * p.time_scale;
    require(p.action_start + t_action <= p.duration, "action_start");
    if (action == ActionKind::OperatingSW) {
        require(p.still_duration >= 3.0, "still_duration");
        require(p.action_start >= p.still_duration, "action_start");
    }
}

} // namespace

MotionProfile motion_profile(ActionKind action, const ProfileParams& p) {
    validate_params(action, p);

    MotionProfile m;
    m.action = action;
    m.duration = p.duration;
    m.base_path_length = p.base_path_length;
    m.drift_amplitude = p.drift_amplitude;
    m.drift_period = p.drift_period;
    m.drift_phase = p.drift_phase;
    m.jitter_amplitude = p.jitter_amplitude;
    m.jitter_period = p.jitter_period;

    if (action == ActionKind::Normal) return m;

    const double t0 = p.action_start;
    const double span = total_time(action) * p.time_scale;
    const double a = p.amplitude;
    m.has_action = true;
    m.action_interval = {t0, t0 + span};

    switch (action) {
        case ActionKind::Nodding: {
            // quick bow, then looking back up
            double bow = 0.45 * span;
            m.segments.push_back({t0, t0 + bow, 0.0, -a});
            m.segments.push_back({t0 + bow, t0 + span, -a, 0.0});
            m.phase_markers.push_back({"bow", t0});
            m.phase_markers.push_back({"raise", t0 + bow});
            break;
        }
        case ActionKind::Yawning: {
            // hand to mouth, hold while yawning, hand back down
            double up = 0.3 * span;
            double hold = 0.4 * span;
            m.segments.push_back({t0, t0 + up, 0.0, -a});
            m.segments.push_back({t0 + up + hold, t0 + span, -a, 0.0});
            m.phase_markers.push_back({"raise_hand", t0});
            m.phase_markers.push_back({"hold", t0 + up});
            m.phase_markers.push_back({"lower_hand", t0 + up + hold});
            break;
        }
        case ActionKind::OperatingSW: {
            // fast large correction with overshoot after a long still phase
            double swing = 0.35 * span;
            double back = 0.4 * span;
            m.segments.push_back({t0, t0 + swing, 0.0, -a});
            m.segments.push_back({t0 + swing, t0 + swing + back, -a, 0.25 * a});
            m.segments.push_back({t0 + swing + back, t0 + span, 0.25 * a, 0.0});
            m.phase_markers.push_back({"swing", t0});
            m.phase_markers.push_back({"recover", t0 + swing});
            break;
        }
        case ActionKind::Normal:
            break;
    }

    // Peak segment speed must stay below the band limit.
    for (const auto& s : m.segments) {
        double peak = std::abs(s.to - s.from) * kPi / (2.0 * (s.t1 - s.t0));
        if (peak > kMaxPathSpeed)
            throw std::invalid_argument("motion_profile: parameter out of range: amplitude (peak speed)");
    }
    return m;
}

LabeledSample synthesize_received(const MotionProfile& profile, const ChannelSpec& channel,
                                  double f0_hz, double fs_hz, std::uint64_t seed) {
    if (f0_hz >= fs_hz / 2.0) throw std::invalid_argument("synthesize_received: f0 must be below fs/2");
    if (channel.speed_of_sound <= 0.0) throw std::invalid_argument("synthesize_received: speed of sound must be positive");

    const auto n = static_cast<std::size_t>(std::llround(profile.duration * fs_hz));
    LabeledSample out;
    out.audio.sample_rate = fs_hz;
    out.audio.samples.resize(n);
    out.action = profile.action;
    out.action_interval = profile.action_interval;
    out.has_action = profile.has_action;
    out.seed = seed;
    out.channel = channel;

    // Step intervals from the profile's phase markers.
    for (std::size_t i = 0; i < profile.phase_markers.size(); ++i) {
        double end = (i + 1 < profile.phase_markers.size()) ? profile.phase_markers[i + 1].start_time
                                                            : profile.action_interval.second;
        out.steps.push_back({std::string(action_name(profile.action)) + ":" + profile.phase_markers[i].step,
                             profile.phase_markers[i].start_time, end});
    }

    Rng rng(seed ? seed : 1);
    const double w0 = kTwoPi * f0_hz;
    const double delay_factor = channel.round_trip_delay ? 2.0 : 1.0;
    const double inv_c = 1.0 / channel.speed_of_sound;
    const double gm = channel.moving_path_gain;
    const double noise = channel.noise_std;

    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / fs_hz;
        double s = 0.0;
        for (const auto& sp : channel.static_paths) {
            s += sp.gain * std::cos(w0 * (t - sp.delay_s));
        }
        if (gm != 0.0) {
            double d = profile.path_length(t);
            s += gm * std::cos(w0 * (t - delay_factor * d * inv_c));
        }
        if (noise > 0.0) s += rng.gaussian(0.0, noise);
        out.audio.samples[k] = s;
    }
    return out;
}

std::string step_label_at(const LabeledSample& sample, double time_s) {
    if (!sample.has_action || time_s < sample.action_interval.first || time_s > sample.action_interval.second)
        return "normal";
    for (const auto& st : sample.steps) {
        if (time_s >= st.start && time_s < st.end) return st.label;
    }
    // inside the interval but past the last step start
    return sample.steps.empty() ? std::string(action_name(sample.action)) : sample.steps.back().label;
}

std::vector<std::string> frame_step_labels(const LabeledSample& sample, double frame_length_s) {
    const auto count = static_cast<std::size_t>(sample.audio.duration() / frame_length_s);
    std::vector<std::string> labels;
    labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        double center = (static_cast<double>(i) + 0.5) * frame_length_s;
        labels.push_back(step_label_at(sample, center));
    }
    return labels;
}

} // namespace drowsy
