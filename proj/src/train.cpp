#include "mosaic/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "mosaic/dct.hpp"
#include "mosaic/errors.hpp"
#include "mosaic/rng.hpp"

namespace mosaic {

double lr_at(const TrainConfig& cfg, long step) {
    return cfg.lr0 * std::pow(cfg.tau, static_cast<double>(step / cfg.decay_steps));
}

void adam_step(std::vector<std::pair<std::string, ad::TensorT<float>*>>& params, AdamState& state,
               double lr) {
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), {});
        state.v.assign(params.size(), {});
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].second->numel(), 0.0f);
            state.v[i].assign(params[i].second->numel(), 0.0f);
        }
        state.t = 0;
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& t = *params[i].second;
        auto& g = t.grad();
        auto& x = t.value();
        for (std::size_t c = 0; c < x.size(); ++c) {
            double gc = g[c];
            double m = state.beta1 * state.m[i][c] + (1.0 - state.beta1) * gc;
            double v = state.beta2 * state.v[i][c] + (1.0 - state.beta2) * gc * gc;
            state.m[i][c] = static_cast<float>(m);
            state.v[i][c] = static_cast<float>(v);
            x[c] -= static_cast<float>(lr * (m / bc1) / (std::sqrt(v / bc2) + state.eps));
        }
    }
}

std::vector<StepRecord> train(MosaicModel<float>& model, const std::vector<Mat>& patches,
                              const HadamardBasis& basis, const TrainConfig& cfg,
                              TrainSession& session) {
    cfg.validate();
    if (patches.empty()) throw std::invalid_argument("train: empty patch set");
    const ModelConfig& mc = model.config();
    if (basis.order() != mc.side)
        throw std::invalid_argument("train: basis order does not match model side");
    for (const Mat& p : patches)
        if (p.rows() != mc.side || p.cols() != mc.side)
            throw std::invalid_argument("train: patch side does not match model");

    const int n = mc.n();
    auto params = model.parameters();
    MaskSpec fixed_mask;
    if (!cfg.resample_masks) fixed_mask = draw_mask(n, cfg.gamma, cfg.seed);

    std::vector<StepRecord> trace;
    trace.reserve(cfg.steps);
    for (int local = 0; local < cfg.steps; ++local) {
        const long step = session.step;
        ad::TensorT<float> total;
        for (int b = 0; b < cfg.batch; ++b) {
            const Mat& patch =
                patches[(static_cast<std::size_t>(step) * cfg.batch + b) % patches.size()];
            const MaskSpec mask =
                cfg.resample_masks
                    ? draw_mask(n, cfg.gamma, mix_seed(cfg.seed, static_cast<std::uint64_t>(step), b))
                    : fixed_mask;
            CompressedMeasurements cm = compress(sample_full(patch, basis), mask);
            ad::TensorT<float> pred = model.forward(cm, basis, cfg.embed_mode);
            std::vector<float> target(patch.data(), patch.data() + patch.size());
            auto target_t = ad::TensorT<float>::from({n, 1}, std::move(target));
            ad::TensorT<float> loss = ad::mse_loss(pred, target_t);
            total = b == 0 ? loss : ad::add(total, loss);
        }
        total = ad::scale(total, 1.0f / static_cast<float>(cfg.batch));
        const double loss_value = total.value()[0];
        if (!std::isfinite(loss_value))
            throw numeric_error("train: NaN loss at step " + std::to_string(step));
        ad::backward(total);
#ifndef NDEBUG
        for (auto& [name, t] : params)
            for (float g : t->grad())
                if (!std::isfinite(g))
                    throw numeric_error("train: non-finite gradient in " + name + " at step " +
                                        std::to_string(step));
#endif
        const double lr = lr_at(cfg, step);
        adam_step(params, session.adam, lr);
        model.zero_grad();
        trace.push_back({step, lr, loss_value});
        session.step = step + 1;
    }
    return trace;
}

std::vector<StepRecord> train(MosaicModel<float>& model, const std::vector<Mat>& patches,
                              const HadamardBasis& basis, const TrainConfig& cfg) {
    TrainSession session;
    return train(model, patches, basis, cfg, session);
}

namespace {

EvalResult evaluate_impl(const MosaicModel<float>& model, const HadamardBasis& basis,
                         const std::vector<GrayImage>& images, const EvalConfig& cfg,
                         bool with_ssim) {
    if (images.empty()) throw std::invalid_argument("evaluate: empty dataset");
    if (cfg.n_seeds < 1) throw std::invalid_argument("evaluate: n_seeds must be >= 1");
    const ModelConfig& mc = model.config();
    const int n = mc.n();

    EvalResult result;
    for (int s = 0; s < cfg.n_seeds; ++s) {
        const std::uint64_t seed = cfg.seed0 + static_cast<std::uint64_t>(s);
        double psnr_acc = 0.0, ssim_acc = 0.0;
        for (std::size_t im = 0; im < images.size(); ++im) {
            const GrayImage& truth = images[im];
            GrayImage input = truth;
            if (cfg.noise_sigma > 0.0 && cfg.noise_domain == NoiseDomain::pixel)
                input = add_gaussian_noise(truth, cfg.noise_sigma, mix_seed(seed, im, 0xA0));

            auto [patches, layout] = pad_and_patch(input, mc.side);
            std::vector<Mat> recon;
            recon.reserve(patches.size());
            for (std::size_t p = 0; p < patches.size(); ++p) {
                MaskSpec mask = draw_mask(n, cfg.gamma, mix_seed(seed, im, p));
                CompressedMeasurements cm = compress(sample_full(patches[p], basis), mask);
                if (cfg.noise_sigma > 0.0 && cfg.noise_domain == NoiseDomain::measurement) {
                    GaussianSampler g(mix_seed(seed, im, p + 0x100000));
                    for (double& v : cm.values) v += cfg.noise_sigma * g.next();
                }
                recon.push_back(model.reconstruct(cm, basis, cfg.embed_mode));
            }
            GrayImage restored = stitch(recon, layout);  // clamps to [0,1]
            psnr_acc += psnr(truth, restored);
            if (with_ssim) ssim_acc += ssim(truth, restored);
        }
        SeedMetrics sm;
        sm.seed = seed;
        sm.psnr = psnr_acc / static_cast<double>(images.size());
        sm.ssim = with_ssim ? ssim_acc / static_cast<double>(images.size()) : 0.0;
        result.per_seed.push_back(sm);
    }

    auto moments = [&](auto pick) {
        double mean = 0.0;
        for (const auto& sm : result.per_seed) mean += pick(sm);
        mean /= static_cast<double>(result.per_seed.size());
        double var = 0.0;
        for (const auto& sm : result.per_seed) {
            double d = pick(sm) - mean;
            var += d * d;
        }
        var /= static_cast<double>(result.per_seed.size());
        return std::make_pair(mean, std::sqrt(var));
    };
    std::tie(result.psnr_mean, result.psnr_std) =
        moments([](const SeedMetrics& sm) { return sm.psnr; });
    std::tie(result.ssim_mean, result.ssim_std) =
        moments([](const SeedMetrics& sm) { return sm.ssim; });
    return result;
}

}  // namespace

EvalResult evaluate(const MosaicModel<float>& model, const HadamardBasis& basis,
                    const std::vector<GrayImage>& images, const EvalConfig& cfg) {
    return evaluate_impl(model, basis, images, cfg, true);
}

EvalResult evaluate_psnr_only(const MosaicModel<float>& model, const HadamardBasis& basis,
                              const std::vector<GrayImage>& images, const EvalConfig& cfg) {
    return evaluate_impl(model, basis, images, cfg, false);
}

std::vector<Mat> make_synthetic_patches(int count, int side, std::uint64_t seed) {
    if (count < 1 || side < 1)
        throw std::invalid_argument("make_synthetic_patches: count and side must be >= 1");
    if (side == 1) return std::vector<Mat>(count, Mat(1, 1, 0.5));
    // Patches share a fixed 0.5 mean and live on a low-dimensional subspace
    // of smooth zero-mean patterns. Smoothed random patterns have dense
    // Hadamard spectra, so any uniformly drawn measurement subset pins the
    // subspace coefficients; concentrating the family on a handful of DCT
    // modes instead would leave whole patches unidentifiable whenever the
    // mask misses their few-coefficient footprints.
    const int k = std::max(4, side / 2);
    GaussianSampler bg(mix_seed(seed, 0xBA5E));
    std::vector<Mat> basis;
    basis.reserve(k);
    for (int t = 0; t < k; ++t) {
        Mat coeff(side, side);
        for (int p = 0; p < side; ++p)
            for (int q = 0; q < side; ++q) {
                if (p == 0 && q == 0) continue;
                coeff(p, q) = bg.next() / ((1.0 + p + q) * (1.0 + p + q));
            }
        Mat img = idct2(coeff);
        for (const Mat& prev : basis) {
            double dot = 0;
            for (std::size_t i = 0; i < img.size(); ++i) dot += img.data()[i] * prev.data()[i];
            for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] -= dot * prev.data()[i];
        }
        double norm = img.frobenius();
        if (norm < 1e-9) { --t; continue; }  // regenerate a degenerate direction
        for (double& v : img.values()) v /= norm;
        basis.push_back(std::move(img));
    }

    GaussianSampler cg(seed);
    std::vector<Mat> out;
    out.reserve(count);
    for (int p = 0; p < count; ++p) {
        Mat img(side, side, 0.5);
        for (int t = 0; t < k; ++t) {
            double c = 0.4 * cg.next();
            for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] += c * basis[t].data()[i];
        }
        double dev = 0;
        for (double v : img.values()) dev = std::max(dev, std::abs(v - 0.5));
        if (dev > 0.45)
            for (double& v : img.values()) v = 0.5 + (v - 0.5) * (0.45 / dev);
        out.push_back(std::move(img));
    }
    return out;
}

void write_trace_csv(const std::vector<StepRecord>& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw io_error("write_trace_csv: cannot open " + path.string());
    out << "step,lr,loss\n";
    char buf[96];
    for (const StepRecord& r : trace) {
        std::snprintf(buf, sizeof buf, "%ld,%.10g,%.10g\n", r.step, r.lr, r.loss);
        out << buf;
    }
    if (!out) throw io_error("write_trace_csv: write failed for " + path.string());
}

void write_metrics_csv(const EvalResult& result, double gamma, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw io_error("write_metrics_csv: cannot open " + path.string());
    out << "seed,gamma,psnr,ssim\n";
    char buf[128];
    for (const SeedMetrics& sm : result.per_seed) {
        std::snprintf(buf, sizeof buf, "%llu,%.10g,%.6f,%.6f\n",
                      static_cast<unsigned long long>(sm.seed), gamma, sm.psnr, sm.ssim);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "mean,%.10g,%.6f,%.6f\n", gamma, result.psnr_mean,
                  result.ssim_mean);
    out << buf;
    std::snprintf(buf, sizeof buf, "std,%.10g,%.6f,%.6f\n", gamma, result.psnr_std,
                  result.ssim_std);
    out << buf;
    if (!out) throw io_error("write_metrics_csv: write failed for " + path.string());
}

}  // namespace mosaic
