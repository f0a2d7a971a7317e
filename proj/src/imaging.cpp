#include "mosaic/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "mosaic/errors.hpp"
#include "mosaic/rng.hpp"

namespace mosaic {

namespace {

double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

}  // namespace

GrayImage::GrayImage(int w, int h, std::vector<double> values) : width(w), height(h), v(std::move(values)) {
    if (w < 1 || h < 1) throw std::invalid_argument("GrayImage: dimensions must be >= 1");
    if (v.size() != static_cast<std::size_t>(w) * h)
        throw std::invalid_argument("GrayImage: value count does not match dimensions");
    for (double& x : v) x = clamp01(x);
}

GrayImage to_luma(const PixelImage& rgb) {
    if (rgb.channels != 3)
        throw std::invalid_argument("to_luma: expected 3-channel input, got " +
                                    std::to_string(rgb.channels));
    std::vector<double> y(static_cast<std::size_t>(rgb.width) * rgb.height);
    for (std::size_t p = 0; p < y.size(); ++p) {
        const std::uint8_t* px = &rgb.data[p * 3];
        y[p] = (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / 255.0;
    }
    return GrayImage(rgb.width, rgb.height, std::move(y));
}

std::pair<std::vector<Mat>, PatchLayout> pad_and_patch(const GrayImage& img, int side) {
    if (side < 1) throw std::invalid_argument("pad_and_patch: side must be >= 1");
    PatchLayout layout;
    layout.side = side;
    layout.width = img.width;
    layout.height = img.height;
    layout.grid_cols = (img.width + side - 1) / side;
    layout.grid_rows = (img.height + side - 1) / side;

    std::vector<Mat> patches;
    patches.reserve(static_cast<std::size_t>(layout.grid_rows) * layout.grid_cols);
    for (int gr = 0; gr < layout.grid_rows; ++gr) {
        for (int gc = 0; gc < layout.grid_cols; ++gc) {
            Mat p(side, side);
            for (int r = 0; r < side; ++r) {
                int y = gr * side + r;
                if (y >= img.height) continue;  // rows stay zero past the pad
                for (int c = 0; c < side; ++c) {
                    int x = gc * side + c;
                    if (x < img.width) p(r, c) = img.at(x, y);
                }
            }
            patches.push_back(std::move(p));
        }
    }
    return {std::move(patches), layout};
}

GrayImage stitch(const std::vector<Mat>& patches, const PatchLayout& layout) {
    const std::size_t expect =
        static_cast<std::size_t>(layout.grid_rows) * layout.grid_cols;
    if (patches.size() != expect)
        throw std::invalid_argument("stitch: patch count does not match layout grid");
    if (expect == 0) throw std::invalid_argument("stitch: empty layout");
    std::vector<double> out(static_cast<std::size_t>(layout.width) * layout.height);
    for (int gr = 0; gr < layout.grid_rows; ++gr) {
        for (int gc = 0; gc < layout.grid_cols; ++gc) {
            const Mat& p = patches[static_cast<std::size_t>(gr) * layout.grid_cols + gc];
            if (p.rows() != layout.side || p.cols() != layout.side)
                throw std::invalid_argument("stitch: patch side does not match layout");
            for (int r = 0; r < layout.side; ++r) {
                int y = gr * layout.side + r;
                if (y >= layout.height) break;
                for (int c = 0; c < layout.side; ++c) {
                    int x = gc * layout.side + c;
                    if (x >= layout.width) break;
                    out[static_cast<std::size_t>(y) * layout.width + x] = p(r, c);
                }
            }
        }
    }
    return GrayImage(layout.width, layout.height, std::move(out));
}

GrayImage add_gaussian_noise(const GrayImage& img, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
    if (sigma == 0.0) return img;
    GaussianSampler g(seed);
    std::vector<double> out(img.v.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = img.v[p] + sigma * g.next();
    return GrayImage(img.width, img.height, std::move(out));  // ctor clamps
}

namespace {

double mse(const GrayImage& a, const GrayImage& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("psnr/ssim: image dimensions differ");
    double s = 0.0;
    for (std::size_t p = 0; p < a.v.size(); ++p) {
        double d = a.v[p] - b.v[p];
        s += d * d;
    }
    return s / static_cast<double>(a.v.size());
}

}  // namespace

double psnr(const GrayImage& a, const GrayImage& b) {
    double e = mse(a, b);
    if (e == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / e);
}

double psnr_8bit(const GrayImage& a, const GrayImage& b) {
    double e = mse(a, b) * 255.0 * 255.0;
    if (e == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / e);
}

double ssim(const GrayImage& a, const GrayImage& b) {
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kK1 = 0.01, kK2 = 0.03, kRange = 1.0;
    const double c1 = (kK1 * kRange) * (kK1 * kRange);
    const double c2 = (kK2 * kRange) * (kK2 * kRange);

    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("ssim: image dimensions differ");
    if (a.width < kWin || a.height < kWin)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");

    double w[kWin];
    double wsum = 0.0;
    for (int t = 0; t < kWin; ++t) {
        double d = t - (kWin - 1) / 2.0;
        w[t] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        wsum += w[t];
    }
    for (double& x : w) x /= wsum;

    auto windowed = [&](const GrayImage& im, int x0, int y0, const GrayImage* other,
                        double* mean_out, double* sq_out, double* cross_out) {
        double m = 0.0, sq = 0.0, cr = 0.0;
        for (int dy = 0; dy < kWin; ++dy)
            for (int dx = 0; dx < kWin; ++dx) {
                double ww = w[dy] * w[dx];
                double va = im.at(x0 + dx, y0 + dy);
                m += ww * va;
                sq += ww * va * va;
                if (other) cr += ww * va * other->at(x0 + dx, y0 + dy);
            }
        *mean_out = m;
        *sq_out = sq;
        if (cross_out) *cross_out = cr;
    };

    double acc = 0.0;
    long count = 0;
    for (int y0 = 0; y0 + kWin <= a.height; ++y0) {
        for (int x0 = 0; x0 + kWin <= a.width; ++x0) {
            double mua, sqa, mub, sqb, cross;
            windowed(a, x0, y0, &b, &mua, &sqa, &cross);
            windowed(b, x0, y0, nullptr, &mub, &sqb, nullptr);
            double var_a = sqa - mua * mua;
            double var_b = sqb - mub * mub;
            double cov = cross - mua * mub;
            double num = (2.0 * mua * mub + c1) * (2.0 * cov + c2);
            double den = (mua * mua + mub * mub + c1) * (var_a + var_b + c2);
            acc += num / den;
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

GrayImage image_from_mat(const Mat& m) {
    std::vector<double> v(m.data(), m.data() + m.size());
    return GrayImage(m.cols(), m.rows(), std::move(v));
}

Mat mat_from_image(const GrayImage& img) {
    Mat m(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) m(y, x) = img.at(x, y);
    return m;
}

namespace {

int read_pnm_int(std::istream& in) {
    // Skips whitespace and '#' comments, per the PNM header grammar.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw io_error("read_pnm: truncated header");
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw io_error("read_pnm: malformed header token");
    return value;
}

}  // namespace

PixelImage read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("read_pnm: cannot open " + path.string());
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    int channels;
    if (m0 == 'P' && m1 == '5') channels = 1;
    else if (m0 == 'P' && m1 == '6') channels = 3;
    else throw io_error("read_pnm: unsupported magic in " + path.string() + " (need P5 or P6)");

    PixelImage img;
    img.channels = channels;
    img.width = read_pnm_int(in);
    img.height = read_pnm_int(in);
    int maxval = read_pnm_int(in);
    if (img.width < 1 || img.height < 1)
        throw io_error("read_pnm: bad dimensions in " + path.string());
    if (maxval != 255)
        throw io_error("read_pnm: only 8-bit images supported, maxval=" + std::to_string(maxval));

    std::size_t bytes = static_cast<std::size_t>(img.width) * img.height * channels;
    img.data.resize(bytes);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes)
        throw io_error("read_pnm: truncated pixel data in " + path.string());
    return img;
}

GrayImage read_gray(const std::filesystem::path& path) {
    PixelImage px = read_pnm(path);
    if (px.channels == 3) return to_luma(px);
    std::vector<double> v(px.data.size());
    for (std::size_t p = 0; p < v.size(); ++p) v[p] = px.data[p] / 255.0;
    return GrayImage(px.width, px.height, std::move(v));
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("write_pgm: cannot open " + path.string());
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    std::vector<std::uint8_t> bytes(img.v.size());
    for (std::size_t p = 0; p < bytes.size(); ++p)
        bytes[p] = static_cast<std::uint8_t>(std::lround(clamp01(img.v[p]) * 255.0));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("write_pgm: write failed for " + path.string());
}

}  // namespace mosaic
