#pragma once

#include "mosaic/mat.hpp"

namespace mosaic {

// Orthonormal DCT-II matrix of size n: C C^T = I.
Mat dct_matrix(int n);

// Separable 2D transforms: dct2(X) = C X C^T, idct2(Y) = C^T Y C.
Mat dct2(const Mat& x);
Mat idct2(const Mat& y);

}  // namespace mosaic
