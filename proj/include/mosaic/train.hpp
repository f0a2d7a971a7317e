#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mosaic/checkpoint.hpp"
#include "mosaic/imaging.hpp"
#include "mosaic/model.hpp"

namespace mosaic {

struct TrainConfig {
    double gamma = 0.25;
    double lr0 = 1e-3;       // fine-tuning runs typically restart at 1e-4
    double tau = 0.9;        // exponential decay factor
    int decay_steps = 15000; // decay applied every this many steps
    int steps = 5000;
    int batch = 8;
    std::uint64_t seed = 0;
    bool resample_masks = true;  // fresh mask per sample per step; false = one fixed mask
    EmbedMode embed_mode = EmbedMode::structured;

    void validate() const {
        if (!(gamma > 0.0) || gamma > 1.0)
            throw std::invalid_argument("TrainConfig: gamma must be in (0, 1]");
        if (!(lr0 > 0.0)) throw std::invalid_argument("TrainConfig: lr0 must be positive");
        if (!(tau > 0.0) || tau > 1.0)
            throw std::invalid_argument("TrainConfig: tau must be in (0, 1]");
        if (decay_steps < 1 || steps < 1 || batch < 1)
            throw std::invalid_argument("TrainConfig: steps, batch, decay_steps must be >= 1");
    }
};

// lr0 * tau^floor(step / decay_steps)
double lr_at(const TrainConfig& cfg, long step);

struct StepRecord {
    long step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

// Carries optimizer moments and the global step across chunked train() calls
// so schedules and mask streams continue seamlessly.
struct TrainSession {
    AdamState adam;
    long step = 0;
};

// One Adam update over the model parameters. state.t is advanced here.
void adam_step(std::vector<std::pair<std::string, ad::TensorT<float>*>>& params, AdamState& state,
               double lr);

// Runs cfg.steps optimizer steps of masked-reconstruction MSE training.
// Throws numeric_error naming the step if the loss goes NaN.
std::vector<StepRecord> train(MosaicModel<float>& model, const std::vector<Mat>& patches,
                              const HadamardBasis& basis, const TrainConfig& cfg,
                              TrainSession& session);
std::vector<StepRecord> train(MosaicModel<float>& model, const std::vector<Mat>& patches,
                              const HadamardBasis& basis, const TrainConfig& cfg);

enum class NoiseDomain { pixel, measurement };

struct EvalConfig {
    double gamma = 0.25;
    int n_seeds = 10;
    std::uint64_t seed0 = 1;
    double noise_sigma = 0.0;
    NoiseDomain noise_domain = NoiseDomain::pixel;
    EmbedMode embed_mode = EmbedMode::structured;
};

struct SeedMetrics {
    std::uint64_t seed = 0;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct EvalResult {
    std::vector<SeedMetrics> per_seed;
    double psnr_mean = 0.0, psnr_std = 0.0;
    double ssim_mean = 0.0, ssim_std = 0.0;
};

// For each seed: per-patch masks are drawn from streams derived off the
// seed, every patch is reconstructed and stitched, and PSNR/SSIM are taken
// against the clean ground truth. Mean/std are over seeds (population std,
// so a single seed reports 0).
EvalResult evaluate(const MosaicModel<float>& model, const HadamardBasis& basis,
                    const std::vector<GrayImage>& images, const EvalConfig& cfg);

// As evaluate(), but skips SSIM (for images smaller than the SSIM window).
EvalResult evaluate_psnr_only(const MosaicModel<float>& model, const HadamardBasis& basis,
                              const std::vector<GrayImage>& images, const EvalConfig& cfg);

// Smooth seeded patches: random low-order DCT coefficients, normalized into
// [0.1, 0.9]. The standard self-contained toy dataset.
std::vector<Mat> make_synthetic_patches(int count, int side, std::uint64_t seed);

void write_trace_csv(const std::vector<StepRecord>& trace, const std::filesystem::path& path);
void write_metrics_csv(const EvalResult& result, double gamma, const std::filesystem::path& path);

}  // namespace mosaic
