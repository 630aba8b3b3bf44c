#pragma once

#include <optional>

#include "ctmar/core.hpp"

namespace ctmar {

struct MetricReport {
    double psnr_db = 0.0;
    double ssim = 0.0;
    double masked_mse = 0.0;
    std::int64_t mask_excluded_pixels = 0;
};

/// Mean squared error over pixels where mask == 0 (mask follows the implant
/// convention: 1 excludes). Throws when the mask leaves no pixels.
double masked_mse(const Image& x, const Image& gt, const Image& mask);

/// 10 log10(peak^2 / mse) over non-excluded pixels. peak defaults to
/// max(ref). Identical inputs return +infinity; CSV output caps the sentinel
/// at 99.99 dB.
double psnr(const Image& x, const Image& ref, std::optional<double> peak = std::nullopt,
            const Image* exclude_mask = nullptr);

/// Mean local structural similarity: 11x11 Gaussian window, sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range = peak (default max(ref)).
double ssim(const Image& x, const Image& ref, std::optional<double> peak = std::nullopt);

MetricReport evaluate(const Image& x, const Image& ref, const Image& mask,
                      std::optional<double> peak = std::nullopt);

/// CSV sentinel for infinite PSNR.
double csv_psnr_cap(double psnr_db);

}  // namespace ctmar
