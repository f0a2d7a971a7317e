#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mosaic/rng.hpp"
#include "mosaic/tensor.hpp"

namespace mosaic {

struct GradCheckItem {
    std::string name;
    double max_rel_err = 0.0;
    int coords_checked = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckItem> items;
    double max_rel_err = 0.0;

    bool ok(double tolerance) const { return max_rel_err < tolerance; }
};

// Central-difference check of reverse-mode gradients, in double precision.
// `loss_fn` must be a deterministic map from the parameter values to a
// scalar tensor. Samples `coords_per_tensor` coordinates per parameter
// (all of them when the tensor is smaller). The relative error denominator
// is floored at 1e-3 so finite-difference noise on near-zero gradients does
// not read as disagreement.
template <typename LossFn>
GradCheckReport grad_check(std::vector<std::pair<std::string, ad::TensorT<double>*>> params,
                           LossFn&& loss_fn, int coords_per_tensor = 20, double h = 1e-3,
                           std::uint64_t seed = 0) {
    GradCheckReport report;

    for (auto& [name, t] : params) t->zero_grad();
    ad::TensorT<double> loss = loss_fn();
    ad::backward(loss);

    SplitMix64 rng(mix_seed(seed, 0x67726164));
    for (auto& [name, t] : params) {
        GradCheckItem item;
        item.name = name;
        const std::size_t n = t->numel();
        const int want = coords_per_tensor <= 0 ? static_cast<int>(n) : coords_per_tensor;

        std::vector<std::size_t> coords;
        if (n <= static_cast<std::size_t>(want)) {
            for (std::size_t c = 0; c < n; ++c) coords.push_back(c);
        } else {
            for (int c = 0; c < want; ++c) coords.push_back(rng.next_below(n));
        }

        for (std::size_t c : coords) {
            const double orig = t->value()[c];
            double f_plus, f_minus;
            {
                ad::NoGradGuard ng;
                t->value()[c] = orig + h;
                f_plus = loss_fn().value()[0];
                t->value()[c] = orig - h;
                f_minus = loss_fn().value()[0];
                t->value()[c] = orig;
            }
            const double numeric = (f_plus - f_minus) / (2.0 * h);
            const double analytic = t->grad()[c];
            const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-3});
            const double rel = std::abs(numeric - analytic) / denom;
            if (rel > item.max_rel_err) {
                item.max_rel_err = rel;
                item.worst_analytic = analytic;
                item.worst_numeric = numeric;
            }
            ++item.coords_checked;
        }
        report.max_rel_err = std::max(report.max_rel_err, item.max_rel_err);
        report.items.push_back(std::move(item));
    }
    return report;
}

}  // namespace mosaic
