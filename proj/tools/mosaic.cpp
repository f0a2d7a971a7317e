// Command-line front end: sampling, reconstruction, training, evaluation,
// noise sweeps, gradient checks and transform benchmarks.
//
// Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numeric failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mosaic/checkpoint.hpp"
#include "mosaic/embed.hpp"
#include "mosaic/errors.hpp"
#include "mosaic/gradcheck.hpp"
#include "mosaic/imaging.hpp"
#include "mosaic/ista.hpp"
#include "mosaic/measfile.hpp"
#include "mosaic/model.hpp"
#include "mosaic/rng.hpp"
#include "mosaic/sampler.hpp"
#include "mosaic/train.hpp"
#include "mosaic/wht.hpp"

namespace fs = std::filesystem;
using namespace mosaic;

namespace {

EmbedMode parse_embed_mode(const std::string& name) {
    if (name == "structured") return EmbedMode::structured;
    if (name == "ones") return EmbedMode::all_ones;
    if (name == "ones-times-y") return EmbedMode::all_ones_times_y;
    throw std::invalid_argument("unknown embed mode: " + name);
}

Ordering parse_ordering(const std::string& name) {
    if (name == "sylvester") return Ordering::sylvester;
    if (name == "sequency") return Ordering::sequency;
    throw std::invalid_argument("unknown ordering: " + name);
}

std::vector<GrayImage> load_images(const std::vector<std::string>& paths) {
    std::vector<GrayImage> out;
    for (const auto& p : paths) out.push_back(read_gray(p));
    return out;
}

// Tiles `count` synthetic patches into the smallest square grid image, so
// the result is usable by both PSNR and SSIM.
GrayImage synthetic_image(int count, int side, std::uint64_t seed) {
    int cols = 1;
    while (cols * cols < count) ++cols;
    int rows = (count + cols - 1) / cols;
    auto patches = make_synthetic_patches(rows * cols, side, seed);
    PatchLayout layout{side, rows, cols, cols * side, rows * side};
    return stitch(patches, layout);
}

struct ModelFlags {
    int side = 8, dim = 16, heads = 1, enc = 2, dec = 2, ratio = 4;

    ModelConfig config() const {
        ModelConfig cfg;
        cfg.side = side;
        cfg.dim = dim;
        cfg.heads = heads;
        cfg.enc_blocks = enc;
        cfg.dec_blocks = dec;
        cfg.mlp_ratio = ratio;
        cfg.validate();
        return cfg;
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--side", side, "Patch side (power of two)");
        cmd->add_option("--dim", dim, "Token width");
        cmd->add_option("--heads", heads, "Attention heads");
        cmd->add_option("--enc", enc, "Encoder blocks");
        cmd->add_option("--dec", dec, "Decoder blocks");
        cmd->add_option("--ratio", ratio, "MLP expansion ratio");
    }
};

int cmd_sample(const std::string& input, double gamma, std::uint64_t seed, int side,
               const std::string& out_prefix, const std::string& ordering) {
    GrayImage img = read_gray(input);
    HadamardBasis basis(side, parse_ordering(ordering));
    // Patch side follows the basis order; sampling always happens per patch.
    auto [patches, layout] = pad_and_patch(img, basis.order());
    MaskSpec mask = draw_mask(basis.order() * basis.order(), gamma, seed);

    MeasurementFile mf;
    mf.width = img.width;
    mf.height = img.height;
    mf.side = basis.order();
    mf.gamma = gamma;
    mf.seed = seed;
    mf.mask = mask;
    for (const Mat& p : patches) mf.patch_values.push_back(compress(sample_full(p, basis), mask).values);

    save_mask(mask, out_prefix + ".mask");
    save_measurements(mf, out_prefix + ".meas");
    std::cout << "sampled " << patches.size() << " patch(es), m=" << mask.m << " of " << mask.n
              << " measurements -> " << out_prefix << ".meas\n";
    return 0;
}

int cmd_reconstruct(const std::string& meas_path, const std::string& method,
                    const std::string& checkpoint, const std::string& out_path,
                    const std::string& truth_path, const std::string& metrics_path,
                    const IstaConfig& ista_cfg, const std::string& embed_mode,
                    const std::string& ordering) {
    MeasurementFile mf = load_measurements(meas_path);
    HadamardBasis basis(mf.side, parse_ordering(ordering));
    PatchLayout layout;
    layout.side = mf.side;
    layout.grid_cols = (mf.width + mf.side - 1) / mf.side;
    layout.grid_rows = (mf.height + mf.side - 1) / mf.side;
    layout.width = mf.width;
    layout.height = mf.height;
    if (mf.patch_values.size() !=
        static_cast<std::size_t>(layout.grid_rows) * layout.grid_cols)
        throw io_error("measurement file patch count does not match its dimensions");

    std::vector<Mat> recon;
    recon.reserve(mf.patch_values.size());

    if (method == "mosaic") {
        if (checkpoint.empty())
            throw std::invalid_argument("--method mosaic requires --checkpoint");
        Checkpoint ckpt = load_checkpoint(checkpoint);
        if (ckpt.model.config().side != mf.side)
            throw std::invalid_argument("checkpoint patch side " +
                                        std::to_string(ckpt.model.config().side) +
                                        " does not match measurements side " +
                                        std::to_string(mf.side));
        EmbedMode mode = parse_embed_mode(embed_mode);
        for (const auto& values : mf.patch_values) {
            CompressedMeasurements cm{mf.mask, values};
            recon.push_back(ckpt.model.reconstruct(cm, basis, mode));
        }
    } else if (method == "ista") {
        for (const auto& values : mf.patch_values) {
            CompressedMeasurements cm{mf.mask, values};
            recon.push_back(ista_reconstruct(cm, basis, ista_cfg).x);
        }
    } else if (method == "inverse") {
        for (const auto& values : mf.patch_values) {
            Mat grid(mf.side, mf.side);
            auto ids = mf.mask.indices();
            for (int k = 0; k < mf.mask.m; ++k)
                grid(ids[k].i - 1, ids[k].j - 1) = values[k];
            recon.push_back(inverse_full(grid, basis));
        }
    } else {
        throw std::invalid_argument("unknown method: " + method);
    }

    GrayImage out = stitch(recon, layout);
    write_pgm(out, out_path);
    std::cout << method << " reconstruction -> " << out_path << '\n';

    if (!truth_path.empty()) {
        GrayImage truth = read_gray(truth_path);
        double p = psnr(truth, out);
        double s = (truth.width >= 11 && truth.height >= 11) ? ssim(truth, out) : 0.0;
        std::printf("psnr=%.4f dB ssim=%.4f\n", p, s);
        if (!metrics_path.empty()) {
            std::ofstream mout(metrics_path);
            if (!mout) throw io_error("cannot open " + metrics_path);
            mout << "psnr,ssim\n";
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", p, s);
            mout << buf;
        }
    }
    return 0;
}

int cmd_train(const ModelFlags& mflags, const std::vector<std::string>& data, int synthetic,
              TrainConfig cfg, const std::string& out_ckpt, const std::string& trace_path,
              const std::string& resume, std::uint64_t init_seed) {
    ModelConfig mc = mflags.config();
    std::vector<Mat> patches;
    if (!data.empty()) {
        for (const GrayImage& img : load_images(data)) {
            auto [ps, layout] = pad_and_patch(img, mc.side);
            patches.insert(patches.end(), ps.begin(), ps.end());
        }
    } else {
        patches = make_synthetic_patches(synthetic, mc.side, mix_seed(cfg.seed, 0x5D));
    }

    HadamardBasis basis(mc.side);
    TrainSession session;
    MosaicModel<float> model = MosaicModel<float>::init(mc, init_seed);
    if (!resume.empty()) {
        Checkpoint ckpt = load_checkpoint(resume, mc);
        model = std::move(ckpt.model);
        session.step = ckpt.step;
        if (ckpt.adam) session.adam = std::move(*ckpt.adam);
    }

    std::cout << "training " << model.parameter_count() << " parameters on " << patches.size()
              << " patches, gamma=" << cfg.gamma << ", " << cfg.steps << " steps\n";
    auto trace = train(model, patches, basis, cfg, session);
    if (!trace_path.empty()) write_trace_csv(trace, trace_path);
    save_checkpoint(model, out_ckpt, session.step, &session.adam);
    std::printf("final loss %.6g (step %ld) -> %s\n", trace.back().loss, trace.back().step,
                out_ckpt.c_str());
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::vector<std::string>& data, int synthetic,
             std::uint64_t synth_seed, const EvalConfig& ec, const std::string& out_csv) {
    Checkpoint ckpt = load_checkpoint(checkpoint);
    const ModelConfig& mc = ckpt.model.config();
    HadamardBasis basis(mc.side);
    std::vector<GrayImage> images =
        !data.empty() ? load_images(data)
                      : std::vector<GrayImage>{synthetic_image(synthetic, mc.side, synth_seed)};

    EvalResult res = evaluate(ckpt.model, basis, images, ec);
    std::printf("gamma=%.4g seeds=%d psnr=%.4f+/-%.4f ssim=%.4f+/-%.4f\n", ec.gamma, ec.n_seeds,
                res.psnr_mean, res.psnr_std, res.ssim_mean, res.ssim_std);
    if (!out_csv.empty()) write_metrics_csv(res, ec.gamma, out_csv);
    return 0;
}

int cmd_noise_sweep(const std::string& checkpoint, const std::vector<std::string>& data,
                    int synthetic, std::uint64_t synth_seed, std::vector<double> sigmas,
                    std::vector<double> gammas, int seeds, std::uint64_t seed0,
                    const std::string& domain, const std::string& out_csv) {
    Checkpoint ckpt = load_checkpoint(checkpoint);
    const ModelConfig& mc = ckpt.model.config();
    HadamardBasis basis(mc.side);
    std::vector<GrayImage> images =
        !data.empty() ? load_images(data)
                      : std::vector<GrayImage>{synthetic_image(synthetic, mc.side, synth_seed)};

    std::sort(sigmas.begin(), sigmas.end());
    std::sort(gammas.begin(), gammas.end());

    std::ofstream out;
    if (!out_csv.empty()) {
        out.open(out_csv);
        if (!out) throw io_error("cannot open " + out_csv);
        out << "sigma,gamma,psnr_mean,psnr_std,ssim_mean,ssim_std\n";
    }
    for (double sigma : sigmas) {
        for (double gamma : gammas) {
            EvalConfig ec;
            ec.gamma = gamma;
            ec.n_seeds = seeds;
            ec.seed0 = seed0;
            ec.noise_sigma = sigma;
            ec.noise_domain =
                domain == "measurement" ? NoiseDomain::measurement : NoiseDomain::pixel;
            EvalResult res = evaluate(ckpt.model, basis, images, ec);
            std::printf("sigma=%.4g gamma=%.4g psnr=%.4f+/-%.4f ssim=%.4f+/-%.4f\n", sigma, gamma,
                        res.psnr_mean, res.psnr_std, res.ssim_mean, res.ssim_std);
            if (out.is_open()) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.6f,%.6f,%.6f,%.6f\n", sigma, gamma,
                              res.psnr_mean, res.psnr_std, res.ssim_mean, res.ssim_std);
                out << buf;
            }
        }
    }
    return 0;
}

int cmd_grad_check(double tolerance, int coords, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.side = 8;
    cfg.dim = 16;
    cfg.heads = 1;
    cfg.enc_blocks = 2;
    cfg.dec_blocks = 2;
    HadamardBasis basis(8);
    auto model = MosaicModel<double>::init(cfg, seed);

    auto patches = make_synthetic_patches(1, 8, mix_seed(seed, 1));
    MaskSpec mask = draw_mask(64, 0.25, mix_seed(seed, 2));
    CompressedMeasurements cm = compress(sample_full(patches[0], basis), mask);
    std::vector<double> target(patches[0].data(), patches[0].data() + patches[0].size());
    auto target_t = ad::TensorT<double>::from({64, 1}, std::move(target));

    auto report = grad_check(
        model.parameters(), [&] { return ad::mse_loss(model.forward(cm, basis), target_t); },
        coords);
    for (const auto& item : report.items)
        std::printf("%-22s coords=%-3d max_rel_err=%.3e\n", item.name.c_str(),
                    item.coords_checked, item.max_rel_err);
    std::printf("max relative error %.3e (tolerance %.3e)\n", report.max_rel_err, tolerance);
    if (!report.ok(tolerance)) {
        std::cerr << "gradient check FAILED\n";
        return 4;
    }
    std::cout << "gradient check passed\n";
    return 0;
}

int cmd_bench_wht(int log2_size, int reps) {
    if (log2_size < 1 || log2_size > 26)
        throw std::invalid_argument("--log2-size must be in [1, 26]");
    const std::size_t n = std::size_t(1) << log2_size;
    std::vector<double> v(n);
    SplitMix64 rng(1);
    for (double& x : v) x = rng.next_unit() - 0.5;

    double best_ms = 1e300;
    double sink = 0;
    for (int r = 0; r < reps; ++r) {
        std::vector<double> work = v;
        auto t0 = std::chrono::steady_clock::now();
        fwht_radix2(work);
        auto t1 = std::chrono::steady_clock::now();
        best_ms = std::min(best_ms, std::chrono::duration<double, std::milli>(t1 - t0).count());
        sink += work[0];
    }
    const double melems = n / 1e6;
    std::printf("elements=%zu best_ms=%.3f melems_per_s=%.1f (checksum %.3g)\n", n, best_ms,
                melems / (best_ms / 1000.0), sink);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compressive sensing over a Walsh-Hadamard basis: sampling, masked-transformer "
                 "and ISTA reconstruction, training and evaluation"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "Config file: [subcommand] sections with key=value lines (long option names)");
    app.allow_config_extras(CLI::config_extras_mode::error);

    // sample
    auto* sample = app.add_subcommand("sample", "Sample an image into masked measurements");
    std::string in_path, out_prefix, ordering = "sylvester";
    double gamma = 0.25;
    std::uint64_t seed = 0;
    int sample_side = 32;
    sample->add_option("--input", in_path, "Input image (PGM/PPM)")->required();
    sample->add_option("--gamma", gamma, "Compression factor in (0, 1]")->required();
    sample->add_option("--seed", seed, "Mask seed");
    sample->add_option("--side", sample_side, "Patch side / basis order (power of two)");
    sample->add_option("--out-prefix", out_prefix, "Output prefix (.mask/.meas)")->required();
    sample->add_option("--ordering", ordering, "Basis ordering: sylvester|sequency");

    // reconstruct
    auto* rec = app.add_subcommand("reconstruct", "Reconstruct an image from measurements");
    std::string meas_path, method = "inverse", ckpt_path, out_path, truth_path, metrics_path;
    std::string embed_mode = "structured";
    IstaConfig ista_cfg;
    std::string sparsifier = "dct2d";
    rec->add_option("--measurements", meas_path, "Measurement file from `sample`")->required();
    rec->add_option("--method", method, "mosaic|ista|inverse")->required();
    rec->add_option("--checkpoint", ckpt_path, "Model checkpoint (mosaic method)");
    rec->add_option("--out", out_path, "Output PGM")->required();
    rec->add_option("--truth", truth_path, "Ground-truth image for metrics");
    rec->add_option("--metrics", metrics_path, "Metrics CSV (needs --truth)");
    rec->add_option("--lambda", ista_cfg.lambda, "ISTA l1 weight");
    rec->add_option("--alpha", ista_cfg.alpha, "ISTA step size");
    rec->add_option("--iters", ista_cfg.iters, "ISTA iteration cap");
    rec->add_option("--tol", ista_cfg.tol, "ISTA relative-change stop");
    rec->add_option("--sparsifier", sparsifier, "dct2d|identity");
    rec->add_option("--embed-mode", embed_mode, "structured|ones|ones-times-y");
    rec->add_option("--ordering", ordering, "Basis ordering: sylvester|sequency");

    // train
    auto* tr = app.add_subcommand("train", "Train a reconstructor");
    ModelFlags mflags;
    mflags.attach(tr);
    std::vector<std::string> data_paths;
    int synthetic = 64;
    TrainConfig tcfg;
    std::string out_ckpt, trace_path, resume;
    std::uint64_t init_seed = 1;
    bool fixed_mask = false;
    tr->add_option("--data", data_paths, "Training images (PGM/PPM); patched at --side");
    tr->add_option("--synthetic", synthetic, "Synthetic patch count when no --data given");
    tr->add_option("--gamma", tcfg.gamma, "Compression factor");
    tr->add_option("--steps", tcfg.steps, "Optimizer steps");
    tr->add_option("--batch", tcfg.batch, "Samples per step");
    tr->add_option("--lr", tcfg.lr0, "Initial learning rate");
    tr->add_option("--tau", tcfg.tau, "Exponential decay factor");
    tr->add_option("--decay-steps", tcfg.decay_steps, "Steps between decays");
    tr->add_option("--seed", tcfg.seed, "Data/mask stream seed");
    tr->add_option("--init-seed", init_seed, "Weight init seed");
    tr->add_flag("--fixed-mask", fixed_mask, "One mask for the whole run instead of resampling");
    tr->add_option("--embed-mode", embed_mode, "structured|ones|ones-times-y");
    tr->add_option("--out", out_ckpt, "Output checkpoint")->required();
    tr->add_option("--trace", trace_path, "Loss trace CSV");
    tr->add_option("--resume", resume, "Checkpoint to continue from");

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint over mask seeds");
    std::string eval_ckpt, eval_csv;
    EvalConfig ecfg;
    std::uint64_t synth_seed = 7;
    std::string noise_domain = "pixel";
    ev->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
    ev->add_option("--data", data_paths, "Evaluation images");
    ev->add_option("--synthetic", synthetic, "Synthetic patch count when no --data given");
    ev->add_option("--synthetic-seed", synth_seed, "Synthetic data seed");
    ev->add_option("--gamma", ecfg.gamma, "Compression factor");
    ev->add_option("--seeds", ecfg.n_seeds, "Number of mask seeds");
    ev->add_option("--seed0", ecfg.seed0, "First mask seed");
    ev->add_option("--sigma", ecfg.noise_sigma, "Gaussian noise level");
    ev->add_option("--noise-domain", noise_domain, "pixel|measurement");
    ev->add_option("--embed-mode", embed_mode, "structured|ones|ones-times-y");
    ev->add_option("--out", eval_csv, "Metrics CSV");

    // noise-sweep
    auto* sweep = app.add_subcommand("noise-sweep", "Sigma x gamma noise robustness grid");
    std::vector<double> sigmas{0.001, 0.002, 0.004};
    std::vector<double> gammas{0.25};
    int sweep_seeds = 5;
    std::string sweep_ckpt, sweep_csv;
    sweep->add_option("--checkpoint", sweep_ckpt, "Model checkpoint")->required();
    sweep->add_option("--data", data_paths, "Evaluation images");
    sweep->add_option("--synthetic", synthetic, "Synthetic patch count when no --data given");
    sweep->add_option("--synthetic-seed", synth_seed, "Synthetic data seed");
    sweep->add_option("--sigmas", sigmas, "Noise levels")->delimiter(',');
    sweep->add_option("--gammas", gammas, "Compression factors")->delimiter(',');
    sweep->add_option("--seeds", sweep_seeds, "Mask seeds per cell");
    sweep->add_option("--seed0", ecfg.seed0, "First mask seed");
    sweep->add_option("--noise-domain", noise_domain, "pixel|measurement");
    sweep->add_option("--out", sweep_csv, "Sweep CSV");

    // grad-check
    auto* gc = app.add_subcommand("grad-check", "Finite-difference check of the autodiff engine");
    double gc_tol = 1e-4;
    int gc_coords = 20;
    std::uint64_t gc_seed = 3;
    gc->add_option("--tolerance", gc_tol, "Max relative error allowed");
    gc->add_option("--coords", gc_coords, "Sampled coordinates per tensor");
    gc->add_option("--seed", gc_seed, "Model/data seed");

    // bench-wht
    auto* bench = app.add_subcommand("bench-wht", "Butterfly transform throughput");
    int log2_size = 20, reps = 5;
    bench->add_option("--log2-size", log2_size, "Transform length as a power of two");
    bench->add_option("--reps", reps, "Repetitions (best time wins)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(sample))
            return cmd_sample(in_path, gamma, seed, sample_side, out_prefix, ordering);
        if (app.got_subcommand(rec)) {
            ista_cfg.sparsifier = sparsifier == "identity" ? Sparsifier::identity : Sparsifier::dct2d;
            ista_cfg.validate();
            return cmd_reconstruct(meas_path, method, ckpt_path, out_path, truth_path,
                                   metrics_path, ista_cfg, embed_mode, ordering);
        }
        if (app.got_subcommand(tr)) {
            tcfg.resample_masks = !fixed_mask;
            tcfg.embed_mode = parse_embed_mode(embed_mode);
            return cmd_train(mflags, data_paths, synthetic, tcfg, out_ckpt, trace_path, resume,
                             init_seed);
        }
        if (app.got_subcommand(ev)) {
            ecfg.noise_domain =
                noise_domain == "measurement" ? NoiseDomain::measurement : NoiseDomain::pixel;
            ecfg.embed_mode = parse_embed_mode(embed_mode);
            return cmd_eval(eval_ckpt, data_paths, synthetic, synth_seed, ecfg, eval_csv);
        }
        if (app.got_subcommand(sweep))
            return cmd_noise_sweep(sweep_ckpt, data_paths, synthetic, synth_seed, sigmas, gammas,
                                   sweep_seeds, ecfg.seed0, noise_domain, sweep_csv);
        if (app.got_subcommand(gc)) return cmd_grad_check(gc_tol, gc_coords, gc_seed);
        if (app.got_subcommand(bench)) return cmd_bench_wht(log2_size, reps);
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
