#pragma once

#include <vector>

#include "mosaic/mat.hpp"
#include "mosaic/sampler.hpp"
#include "mosaic/wht.hpp"

namespace mosaic {

enum class Sparsifier { dct2d, identity };

struct IstaConfig {
    double lambda = 1e-3;  // l1 weight on sparsifier coefficients
    double alpha = 0.5;    // gradient step; ||A||^2 = 1, so 0.5 is the safe maximum
    int iters = 500;
    double tol = 1e-7;     // relative-change stop threshold
    Sparsifier sparsifier = Sparsifier::dct2d;

    void validate() const {
        if (!(alpha > 0.0)) throw std::invalid_argument("IstaConfig: alpha must be positive");
        if (iters < 1) throw std::invalid_argument("IstaConfig: iters must be >= 1");
        if (tol < 0.0) throw std::invalid_argument("IstaConfig: tol must be >= 0");
        if (lambda < 0.0) throw std::invalid_argument("IstaConfig: lambda must be >= 0");
    }
};

// The masked sampling operator A x = compress(sample_full(x)) and its
// adjoint. A A^T = I, so the gradient step size is governed by ||A||^2 = 1.
std::vector<double> forward_op(const Mat& x, const MaskSpec& mask, const HadamardBasis& basis);
Mat adjoint_op(const std::vector<double>& y, const MaskSpec& mask, const HadamardBasis& basis);

struct IstaResult {
    Mat x;
    int iters_run = 0;
    std::vector<double> objective;  // per-iteration |Ax-y|^2 + lambda |Psi x|_1
};

// Proximal-gradient iteration from x0 = 0:
//   x <- SoftThresh(Psi(x - alpha * 2 A^T(A x - y)), lambda * alpha), mapped
// back through Psi^T. Throws numeric_error when the objective grows past
// ten times its starting value.
IstaResult ista_reconstruct(const CompressedMeasurements& cm, const HadamardBasis& basis,
                            const IstaConfig& cfg);

}  // namespace mosaic
