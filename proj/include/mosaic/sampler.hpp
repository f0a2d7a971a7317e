#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mosaic/mat.hpp"

namespace mosaic {

// 1-based measurement coordinates into the N x N grid, matching the on-disk
// `i j y` text format. Array accesses subtract one.
struct Index2 {
    int i = 0;
    int j = 0;
    friend bool operator==(const Index2&, const Index2&) = default;
};

// Row-major flat index l in [1, n] <-> (i, j); n = side * side.
Index2 unflatten(int l, int side);
int flatten(Index2 ij, int side);

// The retained measurement subset: m flat indices drawn uniformly without
// replacement, stored sorted ascending (= row-major order of (i, j) pairs).
struct MaskSpec {
    int n = 0;
    int m = 0;
    int side = 0;
    double gamma = 0.0;
    std::uint64_t seed = 0;
    std::vector<int> flat;  // sorted, 1-based

    std::vector<Index2> indices() const;
    bool contains(Index2 ij) const;
};

// Draws the mask for n = side^2 total measurements. m = round(gamma * n),
// half-up. Deterministic in (n, gamma, seed): SplitMix64 stream driving a
// partial Fisher-Yates shuffle.
MaskSpec draw_mask(int n, double gamma, std::uint64_t seed);

// 1-based position of ij within the sorted mask; throws std::out_of_range
// when ij was not sampled.
int sort_rank(Index2 ij, const MaskSpec& mask);

struct CompressedMeasurements {
    MaskSpec mask;
    std::vector<double> values;  // values[k-1] = Y(i-1, j-1) for rank-k (i, j)
};

CompressedMeasurements compress(const Mat& grid, const MaskSpec& mask);

// Text form for audit/replay: header line "n m gamma seed", then one flat
// index per line. gamma uses %.17g so the round-trip is exact.
void save_mask(const MaskSpec& mask, const std::filesystem::path& path);
MaskSpec load_mask(const std::filesystem::path& path);

}  // namespace mosaic
