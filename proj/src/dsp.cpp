#include "drowsy/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "drowsy/fft.hpp"
#include "drowsy/util.hpp"

namespace drowsy {

namespace {
constexpr double kPi = 3.141592653589793238462643383279;
constexpr double kTwoPi = 2.0 * kPi;

// Zeroth-order modified Bessel function of the first kind (series).
double bessel_i0(double x) {
    double sum = 1.0;
    double term = 1.0;
    const double half_x = x / 2.0;
    for (int k = 1; k < 64; ++k) {
        term *= (half_x / k) * (half_x / k);
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}
} // namespace

std::optional<RateInterval> valid_undersampling_rates(double f_low, double f_high, int n) {
    if (!(0.0 < f_low && f_low < f_high))
        throw std::invalid_argument("valid_undersampling_rates: need 0 < f_low < f_high");
    const double bandwidth = f_high - f_low;
    const int n_max = static_cast<int>(std::floor(f_high / bandwidth));
    if (n < 1 || n > n_max)
        throw std::invalid_argument("valid_undersampling_rates: n outside [1, floor(f_high/bandwidth)]");

    RateInterval iv;
    iv.low = 2.0 * f_high / static_cast<double>(n);
    iv.high = (n == 1) ? std::numeric_limits<double>::infinity()
                       : 2.0 * f_low / static_cast<double>(n - 1);
    if (iv.low > iv.high) return std::nullopt;
    return iv;
}

UndersamplePlan make_undersample_plan(double fs, int n, const BandSpec& band) {
    if (fs <= 0.0) throw std::invalid_argument("make_undersample_plan: fs must be positive");
    auto interval = valid_undersampling_rates(band.f_low, band.f_high, n);
    if (!interval) throw std::invalid_argument("make_undersample_plan: empty admissible interval for n");
    UndersamplePlan plan;
    plan.factor = n;
    plan.fs = fs;
    plan.fs_star = fs / static_cast<double>(n);
    plan.admissible = *interval;
    if (plan.fs_star < interval->low || plan.fs_star > interval->high)
        throw std::invalid_argument("make_undersample_plan: fs/n is outside the admissible interval");
    return plan;
}

double alias_frequency(double f_hz, double fs_star) {
    if (f_hz < 0.0 || fs_star <= 0.0) throw std::invalid_argument("alias_frequency: need f >= 0 and fs_star > 0");
    double r = std::fmod(f_hz, fs_star);
    if (r < 0.0) r += fs_star;
    return (r <= fs_star / 2.0) ? r : fs_star - r;
}

FirBandpass::FirBandpass(double fs, const BandSpec& band, double stopband_db, double transition_hz) {
    if (band.f_high + transition_hz >= fs / 2.0)
        throw std::invalid_argument("FirBandpass: band (plus transition) must lie below Nyquist");
    if (band.f_low - transition_hz <= 0.0)
        throw std::invalid_argument("FirBandpass: band (minus transition) must stay above DC");

    // Kaiser design for the requested stopband attenuation. Cutoffs sit half a
    // transition width outside the band so the passband keeps full gain.
    const double a = stopband_db;
    const double beta = (a > 50.0)   ? 0.1102 * (a - 8.7)
                        : (a >= 21.0) ? 0.5842 * std::pow(a - 21.0, 0.4) + 0.07886 * (a - 21.0)
                                      : 0.0;
    const double delta_omega = kTwoPi * transition_hz / fs;
    int taps = static_cast<int>(std::ceil((a - 7.95) / (2.285 * delta_omega)));
    if (taps % 2 == 0) ++taps;

    const double f1 = (band.f_low - transition_hz / 2.0) / fs;   // normalized cutoffs
    const double f2 = (band.f_high + transition_hz / 2.0) / fs;
    const int mid = (taps - 1) / 2;
    const double i0_beta = bessel_i0(beta);

    taps_.resize(static_cast<std::size_t>(taps));
    for (int i = 0; i < taps; ++i) {
        const int m = i - mid;
        double ideal;
        if (m == 0) {
            ideal = 2.0 * (f2 - f1);
        } else {
            ideal = (std::sin(kTwoPi * f2 * m) - std::sin(kTwoPi * f1 * m)) / (kPi * m);
        }
        const double t = static_cast<double>(m) / mid;
        const double window = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - t * t))) / i0_beta;
        taps_[static_cast<std::size_t>(i)] = ideal * window;
    }
}

std::vector<double> FirBandpass::apply(const std::vector<double>& x) const {
    return apply_decimated(x, 1);
}

std::vector<double> FirBandpass::apply_decimated(const std::vector<double>& x, int step) const {
    if (step < 1) throw std::invalid_argument("FirBandpass: step must be >= 1");
    const int n = static_cast<int>(x.size());
    const int ntaps = static_cast<int>(taps_.size());
    const int d = delay();
    const int out_n = (n + step - 1) / step;
    std::vector<double> y(static_cast<std::size_t>(out_n), 0.0);

    // y[j] corresponds to input index k = j*step; delay-compensated
    // convolution with zero padding outside the frame.
    for (int j = 0; j < out_n; ++j) {
        const int k = j * step;
        double acc = 0.0;
        const int t_lo = std::max(0, k + d - (n - 1));
        const int t_hi = std::min(ntaps - 1, k + d);
        const double* xp = x.data() + (k + d - t_lo);
        const double* hp = taps_.data() + t_lo;
        for (int t = t_lo; t <= t_hi; ++t) {
            acc += *hp * *xp;
            ++hp;
            --xp;
        }
        y[static_cast<std::size_t>(j)] = acc;
    }
    return y;
}

Frame bandpass(const Frame& frame, const BandSpec& band, double stopband_db, double transition_hz) {
    FirBandpass fir(frame.sample_rate, band, stopband_db, transition_hz);
    Frame out = frame;
    out.samples = fir.apply(frame.samples);
    return out;
}

Frame undersample(const Frame& frame, const UndersamplePlan& plan) {
    if (frame.sample_rate != plan.fs)
        throw std::invalid_argument("undersample: frame sample rate does not match the plan");
    Frame out;
    out.sample_rate = plan.fs_star;
    out.index = frame.index;
    out.start_time = frame.start_time;
    const std::size_t step = static_cast<std::size_t>(plan.factor);
    out.samples.reserve((frame.samples.size() + step - 1) / step);
    for (std::size_t k = 0; k < frame.samples.size(); k += step) out.samples.push_back(frame.samples[k]);
    return out;
}

Spectrum fft_spectrum(const Frame& frame, int fft_size) {
    if (!is_power_of_two(static_cast<std::size_t>(fft_size)))
        throw std::invalid_argument("fft_spectrum: fft size must be a power of two");
    if (frame.samples.size() > static_cast<std::size_t>(fft_size))
        throw std::invalid_argument("fft_spectrum: frame longer than the FFT size (configuration error)");
    Spectrum s;
    s.bins = fft_real(frame.samples, static_cast<std::size_t>(fft_size));
    s.bin_resolution = frame.sample_rate / static_cast<double>(fft_size);
    s.frame_index = frame.index;
    s.frame_start_time = frame.start_time;
    return s;
}

std::pair<int, int> aliased_band_bins(const BandSpec& band, const UndersamplePlan& plan, int fft_size) {
    const double img_a = alias_frequency(band.f_low, plan.fs_star);
    const double img_b = alias_frequency(band.f_high, plan.fs_star);
    const double lo = std::min(img_a, img_b);
    const double hi = std::max(img_a, img_b);
    const double resolution = plan.fs_star / static_cast<double>(fft_size);
    const int first = static_cast<int>(std::floor(lo / resolution));
    const int last = static_cast<int>(std::floor(hi / resolution));
    if (first > last || last > fft_size / 2)
        throw std::invalid_argument("aliased_band_bins: empty or out-of-range band selection");
    return {first, last};
}

FeatureVector phase_features(const Spectrum& spectrum, const BandSpec& band, const UndersamplePlan& plan) {
    const int fft_size = static_cast<int>(spectrum.bins.size());
    const double expected_res = plan.fs_star / static_cast<double>(fft_size);
    if (std::abs(spectrum.bin_resolution - expected_res) > 1e-9)
        throw std::invalid_argument("phase_features: spectrum resolution does not match the plan");

    const auto [first, last] = aliased_band_bins(band, plan, fft_size);
    FeatureVector fv;
    fv.band_bins = {first, last};
    fv.frame_index = spectrum.frame_index;
    fv.frame_start_time = spectrum.frame_start_time;
    fv.phases.reserve(static_cast<std::size_t>(last - first + 1));
    for (int k = first; k <= last; ++k) {
        const auto& c = spectrum.bins[static_cast<std::size_t>(k)];
        fv.phases.push_back(std::atan2(c.imag(), c.real()));
    }
    return fv;
}

std::uint64_t DspConfig::fingerprint() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "fs=%.9g;frame=%.9g;fl=%.9g;fh=%.9g;n=%d;fft=%d;stop=%.9g;tw=%.9g;hann=%d",
                  sample_rate, frame_length, band.f_low, band.f_high, undersample_factor, fft_size, stopband_db,
                  transition_hz, hann_window ? 1 : 0);
    return fnv1a(buf, std::strlen(buf));
}

std::string DspConfig::fingerprint_hex() const { return to_hex(fingerprint()); }

FeatureExtractor::FeatureExtractor(const DspConfig& config)
    : config_(config),
      fir_(config.sample_rate, config.band, config.stopband_db, config.transition_hz),
      plan_(make_undersample_plan(config.sample_rate, config.undersample_factor, config.band)) {
    const auto frame_samples = static_cast<std::size_t>(std::llround(config.frame_length * config.sample_rate));
    const std::size_t decimated = (frame_samples + static_cast<std::size_t>(plan_.factor) - 1) /
                                  static_cast<std::size_t>(plan_.factor);
    if (decimated > static_cast<std::size_t>(config.fft_size))
        throw std::invalid_argument(
            "FeatureExtractor: decimated frame exceeds the FFT size; raise the undersampling factor or shorten the frame");
    bins_ = aliased_band_bins(config.band, plan_, config.fft_size);
    dim_ = bins_.second - bins_.first + 1;
}

Frame FeatureExtractor::preprocess(const Frame& frame) const {
    if (frame.sample_rate != config_.sample_rate)
        throw std::invalid_argument("FeatureExtractor: frame sample rate does not match the config");
    Frame out;
    out.sample_rate = plan_.fs_star;
    out.index = frame.index;
    out.start_time = frame.start_time;
    out.samples = fir_.apply_decimated(frame.samples, plan_.factor);
    if (config_.hann_window && out.samples.size() > 1) {
        const std::size_t n = out.samples.size();
        for (std::size_t i = 0; i < n; ++i) {
            out.samples[i] *= 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n - 1)));
        }
    }
    return out;
}

FeatureVector FeatureExtractor::extract(const Frame& frame) const {
    Frame pre = preprocess(frame);
    Spectrum spec = fft_spectrum(pre, config_.fft_size);
    return phase_features(spec, config_.band, plan_);
}

std::vector<double> FeatureExtractor::band_amplitudes(const Frame& frame) const {
    Frame pre = preprocess(frame);
    Spectrum spec = fft_spectrum(pre, config_.fft_size);
    std::vector<double> amps;
    amps.reserve(static_cast<std::size_t>(dim_));
    for (int k = bins_.first; k <= bins_.second; ++k) amps.push_back(std::abs(spec.bins[static_cast<std::size_t>(k)]));
    return amps;
}

FeatureVector extract_features(const Frame& frame, const DspConfig& config) {
    FeatureExtractor extractor(config);
    return extractor.extract(frame);
}

} // namespace drowsy
