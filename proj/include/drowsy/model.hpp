#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drowsy/dsp.hpp"
#include "drowsy/nn.hpp"

namespace drowsy {

// Network structure menu. Dual variants run a short-horizon stack (11 steps)
// for nodding/yawning next to a long-horizon stack (28 steps) for steering;
// single variants run one 4-class stack over the long horizon.
struct Architecture {
    std::string name = "2-3-LSTM-DNN";
    bool dual = true;
    int short_layers = 2;
    int long_layers = 3;
};

Architecture parse_architecture(const std::string& name);
std::vector<std::string> architecture_menu();

constexpr int kShortTimesteps = 11;
constexpr int kLongTimesteps = 28;

std::vector<std::string> short_stack_classes();   // {nodding, yawning, normal}
std::vector<std::string> long_stack_classes();    // {operating_sw, normal}
std::vector<std::string> single_stack_classes();  // all four

struct ModelHyperParams {
    int hidden_dim = 64;
    int fusion_hidden = 16;
};

// Everything the online detector needs: the stacks, the fusion head, the DSP
// configuration it was trained against, and the alert policy.
struct DetectorModel {
    Architecture arch;
    LstmStack short_stack;  // the only stack for single variants
    LstmStack long_stack;   // unused when !arch.dual
    FusionDnn fusion;
    DspConfig dsp;
    double threshold = 0.5;
    double cooldown_s = 5.0;

    int fusion_input_dim() const;
};

DetectorModel make_detector_model(const Architecture& arch, int feature_dim, const DspConfig& dsp,
                                  const ModelHyperParams& hp, std::uint64_t seed);

// Versioned binary container: magic, JSON descriptor, then every weight as a
// little-endian 64-bit float, followed by an FNV-1a checksum of the weight
// bytes. Round-trips bit-exactly.
void save_model(const std::string& path, const DetectorModel& model);
DetectorModel load_model(const std::string& path);

struct ModelFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace drowsy
