#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drowsy/audio.hpp"

namespace drowsy {

// Target band of the frequency-shifted carrier.
struct BandSpec {
    double f_low = 19800.0;   // Hz
    double f_high = 20200.0;  // Hz

    double bandwidth() const { return f_high - f_low; }
};

// Admissible new sampling rates for factor-n undersampling of the band:
//   2*f_high/n <= fs_star <= 2*f_low/(n-1)
// For n = 1 the upper bound is unbounded (ordinary Nyquist sampling).
// Returns nullopt when the interval is empty; throws when n is outside
// [1, floor(f_high / bandwidth)].
struct RateInterval {
    double low = 0.0;
    double high = 0.0;  // +infinity for n == 1
};
std::optional<RateInterval> valid_undersampling_rates(double f_low, double f_high, int n);

struct UndersamplePlan {
    int factor = 8;             // n
    double fs = 44100.0;        // original rate
    double fs_star = 5512.5;    // fs / n
    RateInterval admissible;    // Eq-derived interval the plan was checked against
};

// Validates factor n against the band and builds the plan.
UndersamplePlan make_undersample_plan(double fs, int n, const BandSpec& band);

// Folds a frequency into the first Nyquist zone [0, fs_star/2].
double alias_frequency(double f_hz, double fs_star);

// Linear-phase FIR band-pass (Kaiser windowed sinc), delay-compensated so the
// output has the same length and alignment as the input.
class FirBandpass {
public:
    FirBandpass(double fs, const BandSpec& band, double stopband_db = 70.0, double transition_hz = 500.0);

    std::vector<double> apply(const std::vector<double>& x) const;
    // Filter outputs at indices 0, step, 2*step, ... only (identical values
    // to apply() at those indices).
    std::vector<double> apply_decimated(const std::vector<double>& x, int step) const;

    const std::vector<double>& taps() const { return taps_; }
    int delay() const { return static_cast<int>((taps_.size() - 1) / 2); }

private:
    std::vector<double> taps_;
};

Frame bandpass(const Frame& frame, const BandSpec& band, double stopband_db = 70.0, double transition_hz = 500.0);

// Keeps samples at indices 0, n, 2n, ...; sample rate becomes fs/n.
Frame undersample(const Frame& frame, const UndersamplePlan& plan);

struct Spectrum {
    std::vector<std::complex<double>> bins;  // length == fft_size
    double bin_resolution = 0.0;             // Hz per bin
    std::size_t frame_index = 0;
    double frame_start_time = 0.0;
};

// Zero-pads the frame to fft_size points and transforms it. Frames longer
// than fft_size are a configuration error and are rejected.
Spectrum fft_spectrum(const Frame& frame, int fft_size = 2048);

struct FeatureVector {
    std::vector<double> phases;              // radians, each in (-pi, pi]
    std::pair<int, int> band_bins {0, 0};    // first/last selected bin
    std::size_t frame_index = 0;
    double frame_start_time = 0.0;
};

// Bin range covering the aliased image of the band: bins k whose
// [k, k+1) * resolution interval overlaps [alias(f_low), alias(f_high)].
std::pair<int, int> aliased_band_bins(const BandSpec& band, const UndersamplePlan& plan, int fft_size);

// Phase (atan2) of every bin in the aliased band, in ascending bin order.
// Note the default band folds inverted: ascending bins correspond to
// descending original frequencies.
FeatureVector phase_features(const Spectrum& spectrum, const BandSpec& band, const UndersamplePlan& plan);

// Full per-frame configuration of the front end.
struct DspConfig {
    double sample_rate = 44100.0;
    double frame_length = 0.25;  // seconds
    BandSpec band;
    int undersample_factor = 8;
    int fft_size = 2048;
    double stopband_db = 70.0;
    double transition_hz = 500.0;
    bool hann_window = false;  // rectangular by default

    // Stable fingerprint; models remember the config they were trained with.
    std::uint64_t fingerprint() const;
    std::string fingerprint_hex() const;
};

// Caches the designed filter and plan; extract() is the fused fast path and
// is bit-identical to phase_features(fft_spectrum(undersample(bandpass(f)))).
class FeatureExtractor {
public:
    explicit FeatureExtractor(const DspConfig& config);

    FeatureVector extract(const Frame& frame) const;
    // Amplitude diagnostic (|bin| over the same band); not used by training.
    std::vector<double> band_amplitudes(const Frame& frame) const;

    int feature_dim() const { return dim_; }
    const DspConfig& config() const { return config_; }
    const UndersamplePlan& plan() const { return plan_; }

private:
    Frame preprocess(const Frame& frame) const;

    DspConfig config_;
    FirBandpass fir_;
    UndersamplePlan plan_;
    std::pair<int, int> bins_ {0, 0};
    int dim_ = 0;
};

FeatureVector extract_features(const Frame& frame, const DspConfig& config);

} // namespace drowsy
