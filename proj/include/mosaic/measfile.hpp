#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mosaic/sampler.hpp"

namespace mosaic {

// On-disk form of a sampled image: header, then one block of rank-ordered
// `i j y` lines per patch. The index lists are authoritative for replay;
// the header records provenance (gamma, seed) and the patch layout needed
// for stitching.
//
//   MOSAICMEAS 1
//   <width> <height> <side> <gamma> <seed>
//   <patch_count> <m>
//   patch <p>
//   <i> <j> <y>          (m lines, y printed %.17g)
struct MeasurementFile {
    int width = 0;
    int height = 0;
    int side = 0;
    double gamma = 0.0;
    std::uint64_t seed = 0;
    MaskSpec mask;
    std::vector<std::vector<double>> patch_values;  // rank-ordered, per patch
};

void save_measurements(const MeasurementFile& mf, const std::filesystem::path& path);
MeasurementFile load_measurements(const std::filesystem::path& path);

}  // namespace mosaic
