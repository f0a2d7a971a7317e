#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "mosaic/model.hpp"

namespace mosaic {

// Adam moment buffers, aligned with MosaicModel::parameters() order.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;  // update count, drives bias correction
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
};

struct Checkpoint {
    MosaicModel<float> model;
    long step = 0;
    std::optional<AdamState> adam;
};

// File layout (text manifest, then raw little-endian IEEE-754 data):
//   MOSAICCKPT 1
//   config <side> <dim> <heads> <enc_blocks> <dec_blocks> <mlp_ratio>
//   step <step>
//   adam <t>            (or "adam -1" when no optimizer state is stored)
//   tensors <count>
//   <name> f32 <rank> <extents...> <byte_offset>
//   data
//   <raw bytes>
// Offsets are relative to the first byte after the "data" line.
void save_checkpoint(MosaicModel<float>& model, const std::filesystem::path& path, long step = 0,
                     const AdamState* adam = nullptr);

Checkpoint load_checkpoint(const std::filesystem::path& path);

// As above but rejects checkpoints whose stored config differs from expect.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expect);

}  // namespace mosaic
