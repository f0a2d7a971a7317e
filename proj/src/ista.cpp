#include "mosaic/ista.hpp"

#include <cmath>
#include <string>

#include "mosaic/dct.hpp"
#include "mosaic/errors.hpp"

namespace mosaic {

std::vector<double> forward_op(const Mat& x, const MaskSpec& mask, const HadamardBasis& basis) {
    return compress(sample_full(x, basis), mask).values;
}

Mat adjoint_op(const std::vector<double>& y, const MaskSpec& mask, const HadamardBasis& basis) {
    if (static_cast<int>(y.size()) != mask.m)
        throw std::invalid_argument("adjoint_op: measurement count does not match mask");
    // A = M o S with S orthogonal, so A^T = S^T o (scatter into the grid).
    Mat grid(mask.side, mask.side);
    for (int k = 0; k < mask.m; ++k) {
        Index2 ij = unflatten(mask.flat[k], mask.side);
        grid(ij.i - 1, ij.j - 1) = y[k];
    }
    return inverse_full(grid, basis);
}

namespace {

double l1_norm(const Mat& m) {
    double s = 0.0;
    for (double v : m.values()) s += std::abs(v);
    return s;
}

double objective_value(const Mat& x, const std::vector<double>& y, const MaskSpec& mask,
                       const HadamardBasis& basis, const IstaConfig& cfg) {
    std::vector<double> ax = forward_op(x, mask, basis);
    double fit = 0.0;
    for (std::size_t k = 0; k < ax.size(); ++k) {
        double d = ax[k] - y[k];
        fit += d * d;
    }
    if (cfg.lambda == 0.0) return fit;
    Mat coeffs = cfg.sparsifier == Sparsifier::dct2d ? dct2(x) : x;
    return fit + cfg.lambda * l1_norm(coeffs);
}

void soft_threshold(Mat& m, double t) {
    for (double& v : m.values()) {
        if (v > t) v -= t;
        else if (v < -t) v += t;
        else v = 0.0;
    }
}

}  // namespace

IstaResult ista_reconstruct(const CompressedMeasurements& cm, const HadamardBasis& basis,
                            const IstaConfig& cfg) {
    cfg.validate();
    const MaskSpec& mask = cm.mask;
    if (basis.order() != mask.side)
        throw std::invalid_argument("ista_reconstruct: basis order does not match mask side");

    IstaResult res;
    res.x = Mat(mask.side, mask.side);  // x0 = 0
    const double start_obj = objective_value(res.x, cm.values, mask, basis, cfg);
    res.objective.reserve(cfg.iters);

    for (int it = 0; it < cfg.iters; ++it) {
        // Gradient step on |A x - y|^2.
        std::vector<double> residual = forward_op(res.x, mask, basis);
        for (int k = 0; k < mask.m; ++k) residual[k] -= cm.values[k];
        Mat grad = adjoint_op(residual, mask, basis);
        Mat next = res.x;
        for (std::size_t p = 0; p < next.size(); ++p)
            next.data()[p] -= cfg.alpha * 2.0 * grad.data()[p];

        // Exact proximal step in the orthonormal sparsifier.
        if (cfg.lambda > 0.0) {
            if (cfg.sparsifier == Sparsifier::dct2d) {
                Mat coeffs = dct2(next);
                soft_threshold(coeffs, cfg.lambda * cfg.alpha);
                next = idct2(coeffs);
            } else {
                soft_threshold(next, cfg.lambda * cfg.alpha);
            }
        }

        double obj = objective_value(next, cm.values, mask, basis, cfg);
        res.objective.push_back(obj);
        if (start_obj > 0.0 && obj > 10.0 * start_obj)
            throw numeric_error("ista_reconstruct: objective diverged with alpha=" +
                                std::to_string(cfg.alpha));

        double delta = 0.0, norm = 0.0;
        for (std::size_t p = 0; p < next.size(); ++p) {
            double d = next.data()[p] - res.x.data()[p];
            delta += d * d;
            norm += res.x.data()[p] * res.x.data()[p];
        }
        res.x = std::move(next);
        res.iters_run = it + 1;
        if (std::sqrt(delta) <= cfg.tol * std::max(std::sqrt(norm), 1e-12)) break;
    }
    return res;
}

}  // namespace mosaic
