#pragma once

#include <vector>

#include "mosaic/mat.hpp"
#include "mosaic/sampler.hpp"
#include "mosaic/tensor.hpp"
#include "mosaic/wht.hpp"

namespace mosaic {

// How a scalar measurement is lifted into an N x N matrix before the
// learnable projection. `structured` is the rank-one basis embedding
// phi_i^T y phi_j; the all-ones modes are the ablation switch, with and
// without the measurement value kept as a scale.
enum class EmbedMode { structured, all_ones, all_ones_times_y };

// E = phi_i^T y phi_j for 1-based (i, j); every entry is +/- y.
Mat embed_measurement(double y, const HadamardBasis& basis, int i, int j);

// Fixed 2D sinusoidal position code: first d/2 entries encode i, last d/2
// encode j, each half alternating sin/cos over geometric frequencies
// (base 10000). d must be divisible by 4. Injective on the grid.
std::vector<double> positional_encoding(int i, int j, int d, int side);

// The learnable projection applied to the row-major flattened embedding.
template <typename T>
struct TokenProjection {
    ad::TensorT<T> w;  // {side^2, d}
    ad::TensorT<T> b;  // {d}
};

template <typename T>
ad::TensorT<T> project_token(const Mat& embedding, const TokenProjection<T>& proj) {
    const int n = proj.w.dim(0);
    if (static_cast<int>(embedding.size()) != n)
        throw std::invalid_argument("project_token: embedding size does not match projection");
    std::vector<T> flat(embedding.data(), embedding.data() + embedding.size());
    auto row = ad::TensorT<T>::from({1, n}, std::move(flat));
    return ad::linear(row, proj.w, proj.b);
}

// Token sequence z for the compressed measurements, ordered by mask rank:
// tokens[k] = T(E_k) + Pos(i_k, j_k), shape {m, d}. All m embeddings are
// batched into a single {m, n} operand so the projection is one matmul.
template <typename T>
ad::TensorT<T> build_sequence(const CompressedMeasurements& cm, const HadamardBasis& basis,
                              const TokenProjection<T>& proj, int d,
                              EmbedMode mode = EmbedMode::structured) {
    const int side = cm.mask.side;
    const int n = side * side;
    const int m = cm.mask.m;
    if (basis.order() != side)
        throw std::invalid_argument("build_sequence: basis order does not match mask side");
    if (proj.w.dim(0) != n || proj.w.dim(1) != d)
        throw std::invalid_argument("build_sequence: projection shape mismatch");

    std::vector<T> emb(static_cast<std::size_t>(m) * n);
    std::vector<Index2> ids = cm.mask.indices();
    for (int k = 0; k < m; ++k) {
        const double y = cm.values[k];
        T* row = emb.data() + static_cast<std::size_t>(k) * n;
        switch (mode) {
            case EmbedMode::structured:
                for (int a = 0; a < side; ++a) {
                    const int si = basis.entry(ids[k].i - 1, a);
                    for (int b = 0; b < side; ++b)
                        row[a * side + b] = static_cast<T>(si * basis.entry(ids[k].j - 1, b) * y);
                }
                break;
            case EmbedMode::all_ones:
                for (int t = 0; t < n; ++t) row[t] = T(1);
                break;
            case EmbedMode::all_ones_times_y:
                for (int t = 0; t < n; ++t) row[t] = static_cast<T>(y);
                break;
        }
    }

    std::vector<T> pos(static_cast<std::size_t>(m) * d);
    for (int k = 0; k < m; ++k) {
        std::vector<double> p = positional_encoding(ids[k].i, ids[k].j, d, side);
        for (int t = 0; t < d; ++t) pos[static_cast<std::size_t>(k) * d + t] = static_cast<T>(p[t]);
    }

    auto emb_t = ad::TensorT<T>::from({m, n}, std::move(emb));
    auto pos_t = ad::TensorT<T>::from({m, d}, std::move(pos));
    return ad::add(ad::linear(emb_t, proj.w, proj.b), pos_t);
}

}  // namespace mosaic
