#include "mosaic/wht.hpp"

#include <stdexcept>
#include <string>

namespace mosaic {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int log2_exact(int n) {
    int b = 0;
    while ((1 << b) < n) ++b;
    return b;
}

std::uint32_t reverse_bits(std::uint32_t x, int bits) {
    std::uint32_t r = 0;
    for (int b = 0; b < bits; ++b) {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    return r;
}

}  // namespace

HadamardBasis::HadamardBasis(int order, Ordering ordering)
    : order_(order), ordering_(ordering) {
    if (!is_power_of_two(order) || order < 2 || order > (1 << 16))
        throw std::invalid_argument("HadamardBasis: order must be a power of two in [2, 65536], got " +
                                    std::to_string(order));
    log2_order_ = log2_exact(order);
    if (ordering_ == Ordering::sequency) {
        // Row with r sign changes sits at Sylvester index bitrev(gray(r)).
        natural_.resize(order);
        for (std::uint32_t r = 0; r < static_cast<std::uint32_t>(order); ++r)
            natural_[r] = reverse_bits(r ^ (r >> 1), log2_order_);
    }
}

std::vector<double> HadamardBasis::row(int r) const {
    std::vector<double> out(order_);
    for (int c = 0; c < order_; ++c) out[c] = entry(r, c);
    return out;
}

Mat HadamardBasis::dense() const {
    Mat m(order_, order_);
    for (int r = 0; r < order_; ++r)
        for (int c = 0; c < order_; ++c) m(r, c) = entry(r, c);
    return m;
}

void fwht_radix2(std::span<double> v) {
    const std::size_t n = v.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fwht_radix2: length must be a power of two");
    for (std::size_t h = 1; h < n; h <<= 1) {
        for (std::size_t i = 0; i < n; i += h << 1) {
            for (std::size_t j = i; j < i + h; ++j) {
                double x = v[j];
                double y = v[j + h];
                v[j] = x + y;
                v[j + h] = x - y;
            }
        }
    }
}

std::vector<double> fwht(std::vector<double> v, const HadamardBasis& basis) {
    if (static_cast<int>(v.size()) != basis.order())
        throw std::invalid_argument("fwht: vector length does not match basis order");
    fwht_radix2(v);
    if (basis.ordering() == Ordering::sequency) {
        std::vector<double> out(v.size());
        for (int r = 0; r < basis.order(); ++r) out[r] = v[basis.natural_row(r)];
        return out;
    }
    return v;
}

std::vector<double> fwht_transpose(std::vector<double> v, const HadamardBasis& basis) {
    if (static_cast<int>(v.size()) != basis.order())
        throw std::invalid_argument("fwht_transpose: vector length does not match basis order");
    if (basis.ordering() == Ordering::sequency) {
        // Phi^T v = H (P^T v): scatter into Sylvester positions, then butterfly.
        std::vector<double> t(v.size());
        for (int r = 0; r < basis.order(); ++r) t[basis.natural_row(r)] = v[r];
        fwht_radix2(t);
        return t;
    }
    fwht_radix2(v);
    return v;
}

namespace {

// Applies op to every row of m in place.
template <typename F>
void for_each_row(Mat& m, F&& op) {
    std::vector<double> buf(m.cols());
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) buf[c] = m(r, c);
        buf = op(std::move(buf));
        for (int c = 0; c < m.cols(); ++c) m(r, c) = buf[c];
    }
}

template <typename F>
void for_each_col(Mat& m, F&& op) {
    std::vector<double> buf(m.rows());
    for (int c = 0; c < m.cols(); ++c) {
        for (int r = 0; r < m.rows(); ++r) buf[r] = m(r, c);
        buf = op(std::move(buf));
        for (int r = 0; r < m.rows(); ++r) m(r, c) = buf[r];
    }
}

void require_side(const Mat& m, const HadamardBasis& basis, const char* what) {
    if (m.rows() != basis.order() || m.cols() != basis.order())
        throw std::invalid_argument(std::string(what) + ": side does not match basis order");
}

}  // namespace

Mat sample_full(const Mat& patch, const HadamardBasis& basis) {
    require_side(patch, basis, "sample_full");
    Mat y = patch;
    // Phi X transforms columns, (.)Phi^T transforms rows by Phi.
    for_each_col(y, [&](std::vector<double> v) { return fwht(std::move(v), basis); });
    for_each_row(y, [&](std::vector<double> v) { return fwht(std::move(v), basis); });
    const double inv_k = 1.0 / basis.scale();
    for (double& x : y.values()) x *= inv_k;
    return y;
}

Mat inverse_full(const Mat& grid, const HadamardBasis& basis) {
    require_side(grid, basis, "inverse_full");
    Mat x = grid;
    // Phi^T Y transforms columns by Phi^T, (.)Phi transforms rows by Phi^T.
    for_each_col(x, [&](std::vector<double> v) { return fwht_transpose(std::move(v), basis); });
    for_each_row(x, [&](std::vector<double> v) { return fwht_transpose(std::move(v), basis); });
    const double inv_k = 1.0 / basis.scale();
    for (double& v : x.values()) v *= inv_k;
    return x;
}

double measurement_at(const Mat& patch, const HadamardBasis& basis, int i, int j) {
    require_side(patch, basis, "measurement_at");
    const int n = basis.order();
    if (i < 1 || i > n || j < 1 || j > n)
        throw std::invalid_argument("measurement_at: index out of range");
    double acc = 0.0;
    for (int a = 0; a < n; ++a) {
        const int si = basis.entry(i - 1, a);
        double row_acc = 0.0;
        for (int b = 0; b < n; ++b)
            row_acc += patch(a, b) * basis.entry(j - 1, b);
        acc += si * row_acc;
    }
    return acc / basis.scale();
}

}  // namespace mosaic
