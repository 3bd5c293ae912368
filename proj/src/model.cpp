#include "drowsy/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "drowsy/util.hpp"

namespace drowsy {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

Architecture parse_architecture(const std::string& name) {
    if (name == "2-LSTM-DNN") return {name, false, 2, 0};
    if (name == "3-LSTM-DNN") return {name, false, 3, 0};
    if (name == "2-2-LSTM-DNN") return {name, true, 2, 2};
    if (name == "2-3-LSTM-DNN") return {name, true, 2, 3};
    if (name == "3-3-LSTM-DNN") return {name, true, 3, 3};
    throw std::invalid_argument("unknown architecture: " + name +
                                " (expected one of 2-LSTM-DNN, 3-LSTM-DNN, 2-2-LSTM-DNN, 2-3-LSTM-DNN, 3-3-LSTM-DNN)");
}

std::vector<std::string> architecture_menu() {
    return {"2-LSTM-DNN", "3-LSTM-DNN", "2-2-LSTM-DNN", "2-3-LSTM-DNN", "3-3-LSTM-DNN"};
}

std::vector<std::string> short_stack_classes() { return {"nodding", "yawning", "normal"}; }
std::vector<std::string> long_stack_classes() { return {"operating_sw", "normal"}; }
std::vector<std::string> single_stack_classes() { return {"nodding", "yawning", "operating_sw", "normal"}; }

int DetectorModel::fusion_input_dim() const {
    return arch.dual ? short_stack.config.num_classes() + long_stack.config.num_classes()
                     : short_stack.config.num_classes();
}

DetectorModel make_detector_model(const Architecture& arch, int feature_dim, const DspConfig& dsp,
                                  const ModelHyperParams& hp, std::uint64_t seed) {
    DetectorModel m;
    m.arch = arch;
    m.dsp = dsp;

    StackConfig short_cfg;
    short_cfg.layers = arch.short_layers;
    short_cfg.input_dim = feature_dim;
    short_cfg.hidden_dim = hp.hidden_dim;
    if (arch.dual) {
        short_cfg.timesteps = kShortTimesteps;
        short_cfg.class_names = short_stack_classes();
    } else {
        short_cfg.timesteps = kLongTimesteps;
        short_cfg.class_names = single_stack_classes();
    }
    m.short_stack = make_stack(short_cfg, derive_seed(seed, 1));

    if (arch.dual) {
        StackConfig long_cfg;
        long_cfg.layers = arch.long_layers;
        long_cfg.timesteps = kLongTimesteps;
        long_cfg.input_dim = feature_dim;
        long_cfg.hidden_dim = hp.hidden_dim;
        long_cfg.class_names = long_stack_classes();
        m.long_stack = make_stack(long_cfg, derive_seed(seed, 2));
    }

    m.fusion = make_fusion(m.fusion_input_dim(), hp.fusion_hidden, derive_seed(seed, 3));
    return m;
}

namespace {

constexpr char kMagic[8] = {'D', 'S', 'N', 'M', 'O', 'D', 'L', '1'};

json stack_config_json(const StackConfig& c) {
    return json{{"layers", c.layers},
                {"timesteps", c.timesteps},
                {"input_dim", c.input_dim},
                {"hidden_dim", c.hidden_dim},
                {"classes", c.class_names}};
}

StackConfig stack_config_from_json(const json& j) {
    StackConfig c;
    c.layers = j.at("layers");
    c.timesteps = j.at("timesteps");
    c.input_dim = j.at("input_dim");
    c.hidden_dim = j.at("hidden_dim");
    c.class_names = j.at("classes").get<std::vector<std::string>>();
    return c;
}

json dsp_config_json(const DspConfig& d) {
    return json{{"sample_rate", d.sample_rate}, {"frame_length", d.frame_length},
                {"f_low", d.band.f_low},        {"f_high", d.band.f_high},
                {"undersample_factor", d.undersample_factor},
                {"fft_size", d.fft_size},       {"stopband_db", d.stopband_db},
                {"transition_hz", d.transition_hz}, {"hann_window", d.hann_window}};
}

DspConfig dsp_config_from_json(const json& j) {
    DspConfig d;
    d.sample_rate = j.at("sample_rate");
    d.frame_length = j.at("frame_length");
    d.band.f_low = j.at("f_low");
    d.band.f_high = j.at("f_high");
    d.undersample_factor = j.at("undersample_factor");
    d.fft_size = j.at("fft_size");
    d.stopband_db = j.at("stopband_db");
    d.transition_hz = j.at("transition_hz");
    d.hann_window = j.at("hann_window");
    return d;
}

// Weight serialization order: short stack (trainables, running stats),
// long stack when present, then the fusion head.
std::vector<ParamRef> all_weight_refs(DetectorModel& m) {
    std::vector<ParamRef> refs;
    auto append = [&refs](std::vector<ParamRef> r) {
        refs.insert(refs.end(), r.begin(), r.end());
    };
    append(trainable_params(m.short_stack));
    append(running_stats(m.short_stack));
    if (m.arch.dual) {
        append(trainable_params(m.long_stack));
        append(running_stats(m.long_stack));
    }
    append(trainable_params(m.fusion));
    return refs;
}

void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

void put_u64(std::string& out, std::uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}

} // namespace

void save_model(const std::string& path, const DetectorModel& model) {
    DetectorModel m = model;  // ParamRef wants mutable storage; the copy is small
    json desc{{"arch", m.arch.name},
              {"threshold", m.threshold},
              {"cooldown_s", m.cooldown_s},
              {"dsp", dsp_config_json(m.dsp)},
              {"dsp_fingerprint", m.dsp.fingerprint_hex()},
              {"short_stack", stack_config_json(m.short_stack.config)},
              {"fusion", {{"input_dim", m.fusion.input_dim()}, {"hidden_dim", m.fusion.hidden_dim()}}}};
    if (m.arch.dual) desc["long_stack"] = stack_config_json(m.long_stack.config);

    const std::string desc_text = desc.dump();
    auto refs = all_weight_refs(m);
    std::size_t count = 0;
    for (const auto& r : refs) count += r.size;

    std::string out;
    out.append(kMagic, 8);
    put_u32(out, 1);  // container version
    put_u64(out, desc_text.size());
    out += desc_text;
    put_u64(out, count);
    const std::size_t weights_off = out.size();
    for (const auto& r : refs) out.append(reinterpret_cast<const char*>(r.data), r.size * sizeof(double));
    put_u64(out, fnv1a(out.data() + weights_off, count * sizeof(double)));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ModelFormatError("save_model: cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw ModelFormatError("save_model: short write to " + path);
}

DetectorModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ModelFormatError("load_model: cannot open " + path);
    std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    std::size_t off = 0;
    auto need = [&](std::size_t n) {
        if (off + n > raw.size()) throw ModelFormatError("load_model: truncated file " + path);
    };
    need(8);
    if (std::memcmp(raw.data(), kMagic, 8) != 0) throw ModelFormatError("load_model: bad magic in " + path);
    off = 8;
    need(4);
    std::uint32_t version;
    std::memcpy(&version, raw.data() + off, 4);
    off += 4;
    if (version != 1) throw ModelFormatError("load_model: unsupported container version in " + path);

    need(8);
    std::uint64_t desc_len;
    std::memcpy(&desc_len, raw.data() + off, 8);
    off += 8;
    need(desc_len);
    json desc = json::parse(raw.substr(off, desc_len));
    off += desc_len;

    need(8);
    std::uint64_t count;
    std::memcpy(&count, raw.data() + off, 8);
    off += 8;
    need(count * sizeof(double) + 8);
    const char* weights = raw.data() + off;
    std::uint64_t checksum;
    std::memcpy(&checksum, raw.data() + off + count * sizeof(double), 8);
    if (fnv1a(weights, count * sizeof(double)) != checksum)
        throw ModelFormatError("load_model: weight checksum mismatch in " + path);

    DetectorModel m;
    m.arch = parse_architecture(desc.at("arch").get<std::string>());
    m.threshold = desc.at("threshold");
    m.cooldown_s = desc.at("cooldown_s");
    m.dsp = dsp_config_from_json(desc.at("dsp"));
    if (desc.at("dsp_fingerprint").get<std::string>() != m.dsp.fingerprint_hex())
        throw ModelFormatError("load_model: DSP fingerprint mismatch in " + path);

    StackConfig short_cfg = stack_config_from_json(desc.at("short_stack"));
    m.short_stack = make_stack(short_cfg, 1);
    if (m.arch.dual) {
        StackConfig long_cfg = stack_config_from_json(desc.at("long_stack"));
        m.long_stack = make_stack(long_cfg, 1);
    }
    m.fusion = make_fusion(desc.at("fusion").at("input_dim"), desc.at("fusion").at("hidden_dim"), 1);

    auto refs = all_weight_refs(m);
    std::size_t expect = 0;
    for (const auto& r : refs) expect += r.size;
    if (expect != count) throw ModelFormatError("load_model: weight count mismatch in " + path);

    std::size_t pos = 0;
    for (const auto& r : refs) {
        std::memcpy(r.data, weights + pos, r.size * sizeof(double));
        pos += r.size * sizeof(double);
    }
    return m;
}

} // namespace drowsy
