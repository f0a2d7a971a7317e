#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mosaic {

// Dense row-major double matrix. Image patches, measurement grids and the
// classical solver all live here; the learned model uses ad::TensorT instead.
class Mat {
public:
    Mat() = default;

    Mat(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols),
          v_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {
        if (rows <= 0 || cols <= 0)
            throw std::invalid_argument("Mat: extents must be positive");
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }

    double& operator()(int r, int c) { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return v_[static_cast<std::size_t>(r) * cols_ + c]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::vector<double>& values() { return v_; }
    const std::vector<double>& values() const { return v_; }

    Mat transposed() const {
        Mat t(cols_, rows_);
        for (int r = 0; r < rows_; ++r)
            for (int c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    double frobenius() const {
        double s = 0.0;
        for (double x : v_) s += x * x;
        return std::sqrt(s);
    }

    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner extents differ");
    Mat c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int k = 0; k < a.cols(); ++k) {
            double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

}  // namespace mosaic
