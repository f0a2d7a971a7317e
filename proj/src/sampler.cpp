#include "mosaic/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "mosaic/errors.hpp"
#include "mosaic/rng.hpp"

namespace mosaic {

Index2 unflatten(int l, int side) {
    if (l < 1 || l > side * side)
        throw std::invalid_argument("unflatten: flat index out of range");
    return Index2{(l - 1) / side + 1, (l - 1) % side + 1};
}

int flatten(Index2 ij, int side) {
    if (ij.i < 1 || ij.i > side || ij.j < 1 || ij.j > side)
        throw std::invalid_argument("flatten: index out of range");
    return (ij.i - 1) * side + ij.j;
}

std::vector<Index2> MaskSpec::indices() const {
    std::vector<Index2> out;
    out.reserve(flat.size());
    for (int l : flat) out.push_back(unflatten(l, side));
    return out;
}

bool MaskSpec::contains(Index2 ij) const {
    int l = flatten(ij, side);
    return std::binary_search(flat.begin(), flat.end(), l);
}

MaskSpec draw_mask(int n, double gamma, std::uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("draw_mask: n must be positive");
    int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    if (side * side != n)
        throw std::invalid_argument("draw_mask: n must be a perfect square");
    if (!(gamma > 0.0) || gamma > 1.0)
        throw std::invalid_argument("draw_mask: gamma must be in (0, 1]");
    int m = static_cast<int>(std::floor(gamma * n + 0.5));
    if (m == 0) throw std::invalid_argument("draw_mask: gamma rounds to zero measurements");
    if (m > n) m = n;

    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 1);
    SplitMix64 rng(seed);
    for (int t = 0; t < m; ++t) {
        int j = t + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n - t)));
        std::swap(pool[t], pool[j]);
    }
    pool.resize(m);
    std::sort(pool.begin(), pool.end());

    MaskSpec mask;
    mask.n = n;
    mask.m = m;
    mask.side = side;
    mask.gamma = gamma;
    mask.seed = seed;
    mask.flat = std::move(pool);
    return mask;
}

int sort_rank(Index2 ij, const MaskSpec& mask) {
    int l = flatten(ij, mask.side);
    auto it = std::lower_bound(mask.flat.begin(), mask.flat.end(), l);
    if (it == mask.flat.end() || *it != l)
        throw std::out_of_range("sort_rank: index pair not in mask");
    return static_cast<int>(it - mask.flat.begin()) + 1;
}

CompressedMeasurements compress(const Mat& grid, const MaskSpec& mask) {
    if (grid.rows() != mask.side || grid.cols() != mask.side)
        throw std::invalid_argument("compress: grid side does not match mask");
    CompressedMeasurements cm;
    cm.mask = mask;
    cm.values.reserve(mask.flat.size());
    for (int l : mask.flat) {
        Index2 ij = unflatten(l, mask.side);
        cm.values.push_back(grid(ij.i - 1, ij.j - 1));
    }
    return cm;
}

void save_mask(const MaskSpec& mask, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw io_error("save_mask: cannot open " + path.string());
    char gbuf[64];
    std::snprintf(gbuf, sizeof gbuf, "%.17g", mask.gamma);
    out << mask.n << ' ' << mask.m << ' ' << gbuf << ' ' << mask.seed << '\n';
    for (int l : mask.flat) out << l << '\n';
    if (!out) throw io_error("save_mask: write failed for " + path.string());
}

MaskSpec load_mask(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("load_mask: cannot open " + path.string());
    MaskSpec mask;
    if (!(in >> mask.n >> mask.m >> mask.gamma >> mask.seed))
        throw io_error("load_mask: malformed header in " + path.string());
    int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(mask.n))));
    if (side * side != mask.n || mask.m < 1 || mask.m > mask.n)
        throw io_error("load_mask: inconsistent header in " + path.string());
    mask.side = side;
    mask.flat.resize(mask.m);
    for (int k = 0; k < mask.m; ++k) {
        if (!(in >> mask.flat[k]))
            throw io_error("load_mask: truncated index list in " + path.string());
        if (mask.flat[k] < 1 || mask.flat[k] > mask.n)
            throw io_error("load_mask: flat index out of range in " + path.string());
        if (k > 0 && mask.flat[k] <= mask.flat[k - 1])
            throw io_error("load_mask: indices not strictly increasing in " + path.string());
    }
    return mask;
}

}  // namespace mosaic
