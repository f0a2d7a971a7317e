#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mosaic/embed.hpp"
#include "mosaic/mat.hpp"
#include "mosaic/rng.hpp"
#include "mosaic/sampler.hpp"
#include "mosaic/tensor.hpp"
#include "mosaic/wht.hpp"

namespace mosaic {

struct ModelConfig {
    int side = 32;        // patch side N, must match the sampling basis order
    int dim = 32;         // token width d
    int heads = 2;
    int enc_blocks = 16;
    int dec_blocks = 16;
    int mlp_ratio = 4;

    int n() const { return side * side; }

    void validate() const {
        if (side < 2 || (side & (side - 1)) != 0)
            throw std::invalid_argument("ModelConfig: side must be a power of two >= 2");
        if (dim < 4 || dim % 4 != 0)
            throw std::invalid_argument("ModelConfig: dim must be divisible by 4");
        if (heads < 1 || dim % heads != 0)
            throw std::invalid_argument("ModelConfig: dim must be divisible by heads");
        if (enc_blocks < 1 || dec_blocks < 1 || mlp_ratio < 1)
            throw std::invalid_argument("ModelConfig: block counts and mlp_ratio must be >= 1");
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Learnable parameters: token projection; per block layer norms, per-head
// q/k/v/o projections plus a shared output bias, and the two MLP layers;
// a placeholder token; and the affine pixel head.
//
// Closed-form count for d, n = side^2, h heads, dh = d/h, B blocks, r ratio:
//   token projection  n*d + d
//   per block         2*(2d) + h*3*(d*dh + dh) + h*(dh*d) + d + (d*rd + rd) + (rd*d + d)
//   placeholder       d
//   pixel head        d + 1
// The baseline (side 32, d 32, 2 heads, 16+16 blocks, ratio 4) lands at
// 439,393 parameters.
inline std::size_t expected_parameter_count(const ModelConfig& cfg) {
    const std::size_t d = cfg.dim, n = cfg.n(), h = cfg.heads, dh = d / h;
    const std::size_t rd = d * cfg.mlp_ratio;
    const std::size_t per_block =
        2 * (2 * d) + h * 3 * (d * dh + dh) + h * (dh * d) + d + (d * rd + rd) + (rd * d + d);
    return n * d + d + (cfg.enc_blocks + cfg.dec_blocks) * per_block + d + (d + 1);
}

namespace modeld {

template <typename T>
struct LinearParams {
    ad::TensorT<T> w, b;
};

template <typename T>
struct NormParams {
    ad::TensorT<T> gain, bias;
};

template <typename T>
struct HeadParams {
    LinearParams<T> q, k, v;  // {d, dh} projections with {dh} biases
    ad::TensorT<T> o;         // {dh, d} output mixing, bias shared per block
};

template <typename T>
struct BlockParams {
    NormParams<T> ln1;
    std::vector<HeadParams<T>> heads;
    ad::TensorT<T> attn_out_bias;  // {d}
    NormParams<T> ln2;
    LinearParams<T> mlp_in;   // {d, r*d}
    LinearParams<T> mlp_out;  // {r*d, d}
};

}  // namespace modeld

template <typename T>
class MosaicModel {
public:
    using Tensor = ad::TensorT<T>;

    static MosaicModel init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        MosaicModel model;
        model.cfg_ = cfg;
        GaussianSampler g(seed);
        const int d = cfg.dim, n = cfg.n(), dh = d / cfg.heads, rd = d * cfg.mlp_ratio;

        model.token_.w = trunc_normal(g, {n, d});
        model.token_.b = param_zeros({d});
        auto make_blocks = [&](int count) {
            std::vector<modeld::BlockParams<T>> blocks(count);
            for (auto& blk : blocks) {
                blk.ln1 = {param_ones({d}), param_zeros({d})};
                blk.heads.resize(cfg.heads);
                for (auto& head : blk.heads) {
                    head.q = {trunc_normal(g, {d, dh}), param_zeros({dh})};
                    head.k = {trunc_normal(g, {d, dh}), param_zeros({dh})};
                    head.v = {trunc_normal(g, {d, dh}), param_zeros({dh})};
                    head.o = trunc_normal(g, {dh, d});
                }
                blk.attn_out_bias = param_zeros({d});
                blk.ln2 = {param_ones({d}), param_zeros({d})};
                blk.mlp_in = {trunc_normal(g, {d, rd}), param_zeros({rd})};
                blk.mlp_out = {trunc_normal(g, {rd, d}), param_zeros({d})};
            }
            return blocks;
        };
        model.enc_ = make_blocks(cfg.enc_blocks);
        model.dec_ = make_blocks(cfg.dec_blocks);
        model.placeholder_ = trunc_normal(g, {d});
        model.pixel_head_ = {trunc_normal(g, {d, 1}), param_zeros({1})};
        model.build_pos_table();
        return model;
    }

    const ModelConfig& config() const { return cfg_; }
    const TokenProjection<T>& token_projection() const { return token_; }
    const Tensor& placeholder() const { return placeholder_; }

    // Stable (name, tensor) pairs in a fixed traversal order; names key the
    // checkpoint format and the optimizer state.
    std::vector<std::pair<std::string, Tensor*>> parameters() {
        std::vector<std::pair<std::string, Tensor*>> out;
        out.emplace_back("token.w", &token_.w);
        out.emplace_back("token.b", &token_.b);
        auto walk = [&](std::vector<modeld::BlockParams<T>>& blocks, const std::string& prefix) {
            for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
                auto& blk = blocks[bi];
                std::string p = prefix + std::to_string(bi) + ".";
                out.emplace_back(p + "ln1.g", &blk.ln1.gain);
                out.emplace_back(p + "ln1.b", &blk.ln1.bias);
                for (std::size_t h = 0; h < blk.heads.size(); ++h) {
                    std::string ph = p + "attn.h" + std::to_string(h) + ".";
                    out.emplace_back(ph + "q.w", &blk.heads[h].q.w);
                    out.emplace_back(ph + "q.b", &blk.heads[h].q.b);
                    out.emplace_back(ph + "k.w", &blk.heads[h].k.w);
                    out.emplace_back(ph + "k.b", &blk.heads[h].k.b);
                    out.emplace_back(ph + "v.w", &blk.heads[h].v.w);
                    out.emplace_back(ph + "v.b", &blk.heads[h].v.b);
                    out.emplace_back(ph + "o.w", &blk.heads[h].o);
                }
                out.emplace_back(p + "attn.out_b", &blk.attn_out_bias);
                out.emplace_back(p + "ln2.g", &blk.ln2.gain);
                out.emplace_back(p + "ln2.b", &blk.ln2.bias);
                out.emplace_back(p + "mlp_in.w", &blk.mlp_in.w);
                out.emplace_back(p + "mlp_in.b", &blk.mlp_in.b);
                out.emplace_back(p + "mlp_out.w", &blk.mlp_out.w);
                out.emplace_back(p + "mlp_out.b", &blk.mlp_out.b);
            }
        };
        walk(enc_, "enc");
        walk(dec_, "dec");
        out.emplace_back("placeholder", &placeholder_);
        out.emplace_back("head.w", &pixel_head_.w);
        out.emplace_back("head.b", &pixel_head_.b);
        return out;
    }

    std::size_t parameter_count() {
        std::size_t total = 0;
        for (auto& [name, t] : parameters()) total += t->numel();
        return total;
    }

    void zero_grad() {
        for (auto& [name, t] : parameters()) t->zero_grad();
    }

    // Masked encoder g: enc_blocks pre-norm transformer blocks over the
    // m sampled tokens.
    Tensor encode(Tensor tokens) const {
        if (tokens.shape().size() != 2 || tokens.dim(1) != cfg_.dim)
            throw std::invalid_argument("encode: token width does not match model dim");
        return run_blocks(enc_, std::move(tokens));
    }

    // Expands the m encoded tokens to all n grid positions: sampled rows in
    // mask-rank order, every other row the learned placeholder plus its
    // position code (so placeholders are not position-blind; encoded rows
    // already carry their position from the embedding stage).
    Tensor fill_unmasked(const Tensor& z_enc, const MaskSpec& mask) const {
        if (z_enc.shape().size() != 2 || z_enc.dim(1) != cfg_.dim)
            throw std::invalid_argument("fill_unmasked: latent width mismatch");
        // mask.m == 0 is a synthetic degenerate: latents are ignored and every
        // row becomes the placeholder.
        if ((mask.m != 0 && z_enc.dim(0) != mask.m) || mask.side != cfg_.side)
            throw std::invalid_argument("fill_unmasked: mask does not match latents");
        const int n = cfg_.n(), d = cfg_.dim, m = mask.m;

        std::vector<T> out(static_cast<std::size_t>(n) * d);
        std::vector<int> rank_of_flat(n + 1, 0);  // 0 = masked
        for (int k = 0; k < m; ++k) rank_of_flat[mask.flat[k]] = k + 1;
        const T* pv = placeholder_.value().data();
        for (int l = 1; l <= n; ++l) {
            T* row = out.data() + static_cast<std::size_t>(l - 1) * d;
            if (int k = rank_of_flat[l]; k > 0) {
                const T* src = z_enc.value().data() + static_cast<std::size_t>(k - 1) * d;
                for (int t = 0; t < d; ++t) row[t] = src[t];
            } else {
                const T* pos = pos_table_.data() + static_cast<std::size_t>(l - 1) * d;
                for (int t = 0; t < d; ++t) row[t] = pv[t] + pos[t];
            }
        }

        bool traced = ad::detail::track<T>({&z_enc, &placeholder_});
        return ad::detail::make_op<T>(
            {n, d}, std::move(out), traced, {z_enc, placeholder_},
            [n, d, rank_of_flat = std::move(rank_of_flat)](typename Tensor::Node& node) {
                auto& pz = node.parents[0];
                auto& pp = node.parents[1];
                for (int l = 1; l <= n; ++l) {
                    const T* g = node.grad.data() + static_cast<std::size_t>(l - 1) * d;
                    if (int k = rank_of_flat[l]; k > 0) {
                        if (!pz->requires_grad) continue;
                        T* dst = pz->grad.data() + static_cast<std::size_t>(k - 1) * d;
                        for (int t = 0; t < d; ++t) dst[t] += g[t];
                    } else if (pp->requires_grad) {
                        for (int t = 0; t < d; ++t) pp->grad[t] += g[t];
                    }
                }
            });
    }

    // Unmasked decoder h followed by the pixel head; returns the {n, 1}
    // pixel column (row-major grid order), unclamped.
    Tensor decode_to_pixels(Tensor z_um) const {
        if (z_um.shape().size() != 2 || z_um.dim(0) != cfg_.n() || z_um.dim(1) != cfg_.dim)
            throw std::invalid_argument("decode_to_pixels: expected {n, d} latents");
        Tensor x = run_blocks(dec_, std::move(z_um));
        return ad::linear(x, pixel_head_.w, pixel_head_.b);
    }

    // Decoder output as an N x N patch.
    Mat decode(const Tensor& z_um) const {
        ad::NoGradGuard ng;
        Tensor px = decode_to_pixels(z_um);
        Mat out(cfg_.side, cfg_.side);
        for (int l = 0; l < cfg_.n(); ++l)
            out.data()[l] = static_cast<double>(px.value()[l]);
        return out;
    }

    // Differentiable end-to-end path used by training.
    Tensor forward(const CompressedMeasurements& cm, const HadamardBasis& basis,
                   EmbedMode mode = EmbedMode::structured) const {
        Tensor z = build_sequence(cm, basis, token_, cfg_.dim, mode);
        Tensor z_enc = encode(std::move(z));
        Tensor z_um = fill_unmasked(z_enc, cm.mask);
        return decode_to_pixels(std::move(z_um));
    }

    // Inference: no tape, output reshaped to the patch grid.
    Mat reconstruct(const CompressedMeasurements& cm, const HadamardBasis& basis,
                    EmbedMode mode = EmbedMode::structured) const {
        ad::NoGradGuard ng;
        Tensor px = forward(cm, basis, mode);
        Mat out(cfg_.side, cfg_.side);
        for (int l = 0; l < cfg_.n(); ++l) out.data()[l] = static_cast<double>(px.value()[l]);
        return out;
    }

    const std::vector<T>& pos_table() const { return pos_table_; }

private:
    Tensor run_blocks(const std::vector<modeld::BlockParams<T>>& blocks, Tensor x) const {
        const T inv_sqrt_dh = T(1) / std::sqrt(static_cast<T>(cfg_.dim / cfg_.heads));
        for (const auto& blk : blocks) {
            Tensor h = ad::layer_norm_rows(x, blk.ln1.gain, blk.ln1.bias);
            Tensor attn;
            for (std::size_t hi = 0; hi < blk.heads.size(); ++hi) {
                const auto& head = blk.heads[hi];
                Tensor q = ad::linear(h, head.q.w, head.q.b);
                Tensor k = ad::linear(h, head.k.w, head.k.b);
                Tensor v = ad::linear(h, head.v.w, head.v.b);
                Tensor scores = ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_dh);
                Tensor mixed = ad::matmul(ad::softmax_rows(scores), v);
                Tensor proj = ad::matmul(mixed, head.o);
                attn = hi == 0 ? proj : ad::add(attn, proj);
            }
            attn = ad::add_rowvec(attn, blk.attn_out_bias);
            x = ad::add(x, attn);
            Tensor h2 = ad::layer_norm_rows(x, blk.ln2.gain, blk.ln2.bias);
            Tensor mlp = ad::linear(ad::gelu(ad::linear(h2, blk.mlp_in.w, blk.mlp_in.b)),
                                    blk.mlp_out.w, blk.mlp_out.b);
            x = ad::add(x, mlp);
        }
        return x;
    }

    void build_pos_table() {
        const int n = cfg_.n(), d = cfg_.dim;
        pos_table_.resize(static_cast<std::size_t>(n) * d);
        for (int l = 1; l <= n; ++l) {
            Index2 ij = unflatten(l, cfg_.side);
            std::vector<double> p = positional_encoding(ij.i, ij.j, d, cfg_.side);
            for (int t = 0; t < d; ++t)
                pos_table_[static_cast<std::size_t>(l - 1) * d + t] = static_cast<T>(p[t]);
        }
    }

    // Truncated normal (resampled beyond two standard deviations). Projection
    // weights use fan-in scaling, std = min(0.02 * sqrt(512 / fan_in), 0.5):
    // the familiar 0.02 at large widths, but not vanishing at desk-scale
    // widths where a flat 0.02 starves the attention branches of signal.
    static Tensor trunc_normal(GaussianSampler& g, std::vector<int> shape) {
        const double fan_in = static_cast<double>(shape.size() >= 2 ? shape[0] : shape.back());
        const double std_dev = std::min(0.02 * std::sqrt(512.0 / fan_in), 0.5);
        std::size_t n = 1;
        for (int e : shape) n *= static_cast<std::size_t>(e);
        std::vector<T> data(n);
        for (auto& x : data) {
            double v = g.next();
            while (std::abs(v) > 2.0) v = g.next();
            x = static_cast<T>(v * std_dev);
        }
        auto t = ad::TensorT<T>::from(std::move(shape), std::move(data));
        t.set_requires_grad(true);
        return t;
    }

    static Tensor param_zeros(std::vector<int> shape) {
        auto t = ad::TensorT<T>::zeros(std::move(shape));
        t.set_requires_grad(true);
        return t;
    }

    static Tensor param_ones(std::vector<int> shape) {
        auto t = ad::TensorT<T>::zeros(std::move(shape));
        for (auto& x : t.value()) x = T(1);
        t.set_requires_grad(true);
        return t;
    }

    ModelConfig cfg_;
    TokenProjection<T> token_;
    std::vector<modeld::BlockParams<T>> enc_;
    std::vector<modeld::BlockParams<T>> dec_;
    Tensor placeholder_;  // {d}
    modeld::LinearParams<T> pixel_head_;
    std::vector<T> pos_table_;  // {n * d}, fixed
};

}  // namespace mosaic
