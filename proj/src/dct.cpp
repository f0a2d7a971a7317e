#include "mosaic/dct.hpp"

#include <cmath>
#include <stdexcept>

namespace mosaic {

Mat dct_matrix(int n) {
    if (n < 1) throw std::invalid_argument("dct_matrix: size must be positive");
    const double pi = 3.14159265358979323846;
    Mat c(n, n);
    const double a0 = std::sqrt(1.0 / n);
    const double ap = std::sqrt(2.0 / n);
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q)
            c(p, q) = (p == 0 ? a0 : ap) * std::cos(pi * (2 * q + 1) * p / (2.0 * n));
    return c;
}

Mat dct2(const Mat& x) {
    if (x.rows() != x.cols()) throw std::invalid_argument("dct2: matrix must be square");
    Mat c = dct_matrix(x.rows());
    return matmul(matmul(c, x), c.transposed());
}

Mat idct2(const Mat& y) {
    if (y.rows() != y.cols()) throw std::invalid_argument("idct2: matrix must be square");
    Mat c = dct_matrix(y.rows());
    return matmul(matmul(c.transposed(), y), c);
}

}  // namespace mosaic
