#include "mosaic/embed.hpp"

#include <cmath>
#include <stdexcept>

namespace mosaic {

Mat embed_measurement(double y, const HadamardBasis& basis, int i, int j) {
    const int n = basis.order();
    if (i < 1 || i > n || j < 1 || j > n)
        throw std::invalid_argument("embed_measurement: index out of range");
    Mat e(n, n);
    for (int a = 0; a < n; ++a) {
        const int si = basis.entry(i - 1, a);
        for (int b = 0; b < n; ++b) e(a, b) = si * basis.entry(j - 1, b) * y;
    }
    return e;
}

std::vector<double> positional_encoding(int i, int j, int d, int side) {
    if (d % 4 != 0) throw std::invalid_argument("positional_encoding: d must be divisible by 4");
    if (i < 1 || i > side || j < 1 || j > side)
        throw std::invalid_argument("positional_encoding: index out of range");
    const int nf = d / 4;  // frequencies per axis
    std::vector<double> out(d);
    for (int t = 0; t < nf; ++t) {
        double omega = std::pow(10000.0, -static_cast<double>(t) / nf);
        out[2 * t] = std::sin(omega * i);
        out[2 * t + 1] = std::cos(omega * i);
        out[d / 2 + 2 * t] = std::sin(omega * j);
        out[d / 2 + 2 * t + 1] = std::cos(omega * j);
    }
    return out;
}

}  // namespace mosaic
