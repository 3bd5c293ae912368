#include "drowsy/audio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace drowsy {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

} // namespace

AudioBuffer generate_tone(double f0_hz, double fs_hz, double duration_s, double amplitude) {
    if (fs_hz <= 0.0) throw std::invalid_argument("generate_tone: sample rate must be positive");
    if (f0_hz <= 0.0 || f0_hz >= fs_hz / 2.0)
        throw std::invalid_argument("generate_tone: f0 must satisfy 0 < f0 < fs/2");
    if (duration_s <= 0.0) throw std::invalid_argument("generate_tone: duration must be positive");

    const auto n = static_cast<std::size_t>(std::llround(duration_s * fs_hz));
    AudioBuffer out;
    out.sample_rate = fs_hz;
    out.samples.resize(n);
    const double w = kTwoPi * f0_hz / fs_hz;
    for (std::size_t k = 0; k < n; ++k) {
        out.samples[k] = amplitude * std::cos(w * static_cast<double>(k));
    }
    return out;
}

std::vector<Frame> segment_frames(const AudioBuffer& buffer, double frame_length_s) {
    if (frame_length_s <= 0.0) throw std::invalid_argument("segment_frames: frame length must be positive");
    if (buffer.sample_rate <= 0.0) throw std::invalid_argument("segment_frames: sample rate must be positive");

    const auto frame_samples = static_cast<std::size_t>(std::llround(frame_length_s * buffer.sample_rate));
    std::vector<Frame> frames;
    if (frame_samples == 0 || buffer.samples.size() < frame_samples) return frames;

    const std::size_t count = buffer.samples.size() / frame_samples;
    frames.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Frame f;
        f.sample_rate = buffer.sample_rate;
        f.index = i;
        f.start_time = static_cast<double>(i) * frame_length_s;
        auto begin = buffer.samples.begin() + static_cast<std::ptrdiff_t>(i * frame_samples);
        f.samples.assign(begin, begin + static_cast<std::ptrdiff_t>(frame_samples));
        frames.push_back(std::move(f));
    }
    return frames;
}

void write_wav(const std::string& path, const AudioBuffer& buffer, const WavWriteOptions& options) {
    if (buffer.sample_rate <= 0.0) throw std::invalid_argument("write_wav: sample rate must be positive");

    const std::size_t n = buffer.samples.size();
    std::string body;
    body.reserve(44 + 2 * n);

    const auto data_bytes = static_cast<std::uint32_t>(2 * n);
    const auto rate = static_cast<std::uint32_t>(std::llround(buffer.sample_rate));

    body += "RIFF";
    put_u32(body, 36 + data_bytes);
    body += "WAVE";
    body += "fmt ";
    put_u32(body, 16);
    put_u16(body, 1);  // PCM
    put_u16(body, 1);  // mono
    put_u32(body, rate);
    put_u32(body, rate * 2);  // byte rate
    put_u16(body, 2);         // block align
    put_u16(body, 16);        // bits per sample
    body += "data";
    put_u32(body, data_bytes);

    for (std::size_t i = 0; i < n; ++i) {
        double x = buffer.samples[i];
        if (!std::isfinite(x)) throw std::invalid_argument("write_wav: non-finite sample");
        if ((x < -1.0 || x > 1.0) && !options.clip_out_of_range)
            throw std::invalid_argument("write_wav: sample outside [-1, 1]");
        long q = std::lround(x * 32768.0);
        if (q > 32767) q = 32767;
        if (q < -32768) q = -32768;
        put_u16(body, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_wav: cannot open " + path);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw std::runtime_error("write_wav: short write to " + path);
}

AudioBuffer read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WavFormatError("read_wav: cannot open " + path);
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
    if (raw.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
        throw WavFormatError("read_wav: not a RIFF/WAVE file: " + path);

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::size_t data_off = 0, data_len = 0;

    std::size_t off = 12;
    while (off + 8 <= raw.size()) {
        const unsigned char* ch = p + off;
        std::uint32_t len = get_u32(ch + 4);
        std::size_t payload = off + 8;
        if (payload + len > raw.size()) throw WavFormatError("read_wav: truncated chunk in " + path);
        if (std::memcmp(ch, "fmt ", 4) == 0) {
            if (len < 16) throw WavFormatError("read_wav: short fmt chunk in " + path);
            format = get_u16(p + payload);
            channels = get_u16(p + payload + 2);
            rate = get_u32(p + payload + 4);
            bits = get_u16(p + payload + 14);
            have_fmt = true;
        } else if (std::memcmp(ch, "data", 4) == 0) {
            data_off = payload;
            data_len = len;
        }
        off = payload + len + (len & 1);  // chunks are word-aligned
    }

    if (!have_fmt || data_off == 0) throw WavFormatError("read_wav: missing fmt or data chunk in " + path);
    if (format != 1) throw WavFormatError("read_wav: only PCM (format 1) supported: " + path);
    if (channels != 1) throw WavFormatError("read_wav: only mono supported: " + path);
    if (bits != 16) throw WavFormatError("read_wav: only 16-bit supported: " + path);
    if (rate == 0) throw WavFormatError("read_wav: zero sample rate: " + path);
    if (data_len % 2 != 0) throw WavFormatError("read_wav: odd data length: " + path);

    AudioBuffer out;
    out.sample_rate = static_cast<double>(rate);
    const std::size_t n = data_len / 2;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto q = static_cast<std::int16_t>(get_u16(p + data_off + 2 * i));
        out.samples[i] = static_cast<double>(q) / 32768.0;
    }
    return out;
}

} // namespace drowsy
