#include "ctmar/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace ctmar {

double masked_mse(const Image& x, const Image& gt, const Image& mask) {
    if (!x.same_shape(gt) || !x.same_shape(mask)) throw ValidationError("masked_mse: shape mismatch");
    if (!is_binary(mask.data())) throw ValidationError("masked_mse: mask must be binary");
    double acc = 0.0;
    std::int64_t n = 0;
    for (std::int64_t i = 0; i < x.size(); ++i) {
        if (mask.data()[i] != 0.0) continue;
        const double d = x.data()[i] - gt.data()[i];
        acc += d * d;
        ++n;
    }
    if (n == 0) throw ValidationError("masked_mse: mask excludes every pixel");
    return acc / static_cast<double>(n);
}

double psnr(const Image& x, const Image& ref, std::optional<double> peak,
            const Image* exclude_mask) {
    if (!x.same_shape(ref)) throw ValidationError("psnr: shape mismatch");
    const double p = peak.value_or(max_value(ref.data()));
    if (!(p > 0.0)) throw ValidationError("psnr: peak must be positive");
    const Image zero_mask = Image::zeros(x.height(), x.width(), x.pixel_size());
    const double mse = masked_mse(x, ref, exclude_mask ? *exclude_mask : zero_mask);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(p * p / mse);
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

const std::array<double, kWindow * kWindow>& gaussian_window() {
    static const auto win = [] {
        std::array<double, kWindow * kWindow> w{};
        const int r = kWindow / 2;
        double sum = 0.0;
        for (int i = -r; i <= r; ++i) {
            for (int j = -r; j <= r; ++j) {
                const double v = std::exp(-0.5 * (i * i + j * j) / (kSigma * kSigma));
                w[static_cast<std::size_t>(i + r) * kWindow + (j + r)] = v;
                sum += v;
            }
        }
        for (double& v : w) v /= sum;
        return w;
    }();
    return win;
}

}  // namespace

double ssim(const Image& x, const Image& ref, std::optional<double> peak) {
    if (!x.same_shape(ref)) throw ValidationError("ssim: shape mismatch");
    if (x.height() < kWindow || x.width() < kWindow) {
        throw ValidationError("ssim: image smaller than the 11x11 window");
    }
    const double L = peak.value_or(max_value(ref.data()));
    if (!(L > 0.0)) throw ValidationError("ssim: peak must be positive");
    const double c1 = (kK1 * L) * (kK1 * L);
    const double c2 = (kK2 * L) * (kK2 * L);
    const auto& win = gaussian_window();
    const int r = kWindow / 2;
    const int h = x.height(), w = x.width();

    double acc = 0.0;
    std::int64_t count = 0;
    for (int i = r; i < h - r; ++i) {
        for (int j = r; j < w - r; ++j) {
            double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
            for (int wi = -r; wi <= r; ++wi) {
                for (int wj = -r; wj <= r; ++wj) {
                    const double g = win[static_cast<std::size_t>(wi + r) * kWindow + (wj + r)];
                    const double a = x(i + wi, j + wj);
                    const double b = ref(i + wi, j + wj);
                    mx += g * a;
                    my += g * b;
                    mxx += g * a * a;
                    myy += g * b * b;
                    mxy += g * a * b;
                }
            }
            const double vx = mxx - mx * mx;
            const double vy = myy - my * my;
            const double cxy = mxy - mx * my;
            const double val = ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                               ((mx * mx + my * my + c1) * (vx + vy + c2));
            acc += val;
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

MetricReport evaluate(const Image& x, const Image& ref, const Image& mask,
                      std::optional<double> peak) {
    MetricReport report;
    report.masked_mse = masked_mse(x, ref, mask);
    const double p = peak.value_or(max_value(ref.data()));
    report.psnr_db = report.masked_mse == 0.0 ? std::numeric_limits<double>::infinity()
                                              : 10.0 * std::log10(p * p / report.masked_mse);
    report.ssim = ssim(x, ref, p);
    for (double v : mask.data()) report.mask_excluded_pixels += v != 0.0 ? 1 : 0;
    return report;
}

double csv_psnr_cap(double psnr_db) { return std::isfinite(psnr_db) ? psnr_db : 99.99; }

}  // namespace ctmar
