#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "maskforge/tensor.hpp"

namespace maskforge {

struct EmaState {
    bool initialized = false;
    double g_loss = 0, d_loss = 0, acc_real = 0, acc_fake = 0;
};

// Serialized training state. Tensors carry both models' parameters and
// batchnorm buffers under "g."/"d." prefixes; optimizer slots hold Adam
// moments keyed the same way. The EMA snapshot rides along so a resumed run
// continues the metrics stream exactly.
struct CheckpointData {
    struct OptState {
        uint64_t t = 0;
        std::vector<std::tuple<std::string, Tensor4, Tensor4>> slots;  // name, m, v
    };

    std::vector<std::pair<std::string, Tensor4>> tensors;
    OptState opt_g, opt_d;
    uint64_t rng_state = 0;
    uint64_t iteration = 0;
    EmaState ema;
};

// Binary format: magic "MFG1", u32 version, u32 tensor count, then per tensor
// u16 name length + name + u8 ndim + u32 dims + little-endian f32 payload,
// then both optimizer states, rng state, iteration, EMA snapshot.
std::vector<uint8_t> save_checkpoint(const CheckpointData& data);
CheckpointData load_checkpoint(const std::vector<uint8_t>& bytes);

void save_checkpoint_file(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint_file(const std::string& path);

}  // namespace maskforge
