#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "mosaic/mat.hpp"

namespace mosaic {

// Grayscale image with row-major values clamped to [0, 1] on construction.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> v;

    GrayImage() = default;
    GrayImage(int w, int h, std::vector<double> values);

    double at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
};

// Interleaved 8-bit image as read from PGM/PPM.
struct PixelImage {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 or 3
    std::vector<std::uint8_t> data;
};

// BT.601 luma of an 8-bit RGB image, scaled to [0, 1].
GrayImage to_luma(const PixelImage& rgb);

struct PatchLayout {
    int side = 0;
    int grid_rows = 0;
    int grid_cols = 0;
    int width = 0;   // pre-pad dimensions
    int height = 0;
};

// Zero-pads right/bottom to multiples of `side` and slices into row-major
// non-overlapping side x side patches.
std::pair<std::vector<Mat>, PatchLayout> pad_and_patch(const GrayImage& img, int side);

// Inverse of pad_and_patch followed by the crop back to original dimensions.
GrayImage stitch(const std::vector<Mat>& patches, const PatchLayout& layout);

// Adds seeded i.i.d. N(0, sigma^2) to every pixel, then clamps to [0, 1].
GrayImage add_gaussian_noise(const GrayImage& img, double sigma, std::uint64_t seed);

// 10 log10(peak^2 / MSE). Identical images return +infinity.
double psnr(const GrayImage& a, const GrayImage& b);       // peak 1.0
double psnr_8bit(const GrayImage& a, const GrayImage& b);  // peak 255 on the 8-bit scale

// Mean local SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03,
// dynamic range 1.0 (valid-region convolution). Both dims must be >= 11.
double ssim(const GrayImage& a, const GrayImage& b);

// Treats a patch as an image, clamping to [0, 1] (metrics clamp, the model
// output itself is left unclamped).
GrayImage image_from_mat(const Mat& m);
Mat mat_from_image(const GrayImage& img);

// Binary PGM (P5) / PPM (P6), 8-bit.
PixelImage read_pnm(const std::filesystem::path& path);
GrayImage read_gray(const std::filesystem::path& path);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

}  // namespace mosaic
