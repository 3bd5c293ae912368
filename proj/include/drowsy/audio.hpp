#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace drowsy {

// Uniformly sampled mono audio. Samples are dimensionless amplitudes,
// nominally in [-1, 1]; sample_rate is in Hz.
struct AudioBuffer {
    std::vector<double> samples;
    double sample_rate = 44100.0;

    double duration() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

// One fixed-length chunk of a buffer. Frames from a single buffer are
// contiguous and non-overlapping; a trailing partial frame is dropped.
struct Frame {
    std::vector<double> samples;
    double sample_rate = 44100.0;
    std::size_t index = 0;
    double start_time = 0.0;
};

struct WavFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// samples[k] = amplitude * cos(2 pi f0 k / fs). Rejects f0 >= fs/2.
AudioBuffer generate_tone(double f0_hz, double fs_hz, double duration_s, double amplitude);

// Splits into floor(duration / frame_length) frames of round(frame_length*fs)
// samples each. A buffer shorter than one frame yields an empty result.
std::vector<Frame> segment_frames(const AudioBuffer& buffer, double frame_length_s);

struct WavWriteOptions {
    // Samples outside [-1, 1] are clipped when true, rejected when false.
    bool clip_out_of_range = true;
};

// 16-bit PCM mono RIFF/WAVE only. Round-tripping a buffer reproduces samples
// within 16-bit quantization (max abs error <= 2^-15); re-writing a file that
// was just read reproduces it bit-exactly.
AudioBuffer read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioBuffer& buffer, const WavWriteOptions& options = {});

} // namespace drowsy
