#include "ctmar/classical.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ctmar {

Sinogram li_inpaint(const Sinogram& y, const Sinogram& trace) {
    if (!y.same_shape(trace)) throw ValidationError("li_inpaint: trace shape mismatch");
    if (!is_binary(trace.data())) throw ValidationError("li_inpaint: trace must be binary");
    const int nb = y.bins(), nv = y.views();
    std::vector<double> out = y.copy_data();
    const double* tr = trace.data().data();

    for (int v = 0; v < nv; ++v) {
        int b = 0;
        while (b < nb) {
            if (tr[static_cast<std::size_t>(b) * nv + v] == 0.0) {
                ++b;
                continue;
            }
            int end = b;
            while (end + 1 < nb && tr[static_cast<std::size_t>(end + 1) * nv + v] != 0.0) ++end;
            const bool has_left = b > 0;
            const bool has_right = end + 1 < nb;
            if (!has_left && !has_right) {
                std::ostringstream os;
                os << "li_inpaint: view " << v << " is fully traced";
                throw PipelineError(os.str());
            }
            const double left = has_left ? out[static_cast<std::size_t>(b - 1) * nv + v] : 0.0;
            const double right = has_right ? out[static_cast<std::size_t>(end + 1) * nv + v] : 0.0;
            for (int k = b; k <= end; ++k) {
                double val;
                if (has_left && has_right) {
                    const double t = static_cast<double>(k - (b - 1)) / (end + 1 - (b - 1));
                    val = left + t * (right - left);
                } else {
                    val = has_left ? left : right;  // constant extension at the edge
                }
                out[static_cast<std::size_t>(k) * nv + v] = val;
            }
            b = end + 1;
        }
    }
    return Sinogram(nb, nv, y.detector_spacing(), std::move(out));
}

Image li_reconstruct(const Sinogram& y, const Sinogram& trace, const Geometry& geo,
                     const FbpConfig& fbp_cfg) {
    return fbp_reconstruct(li_inpaint(y, trace), geo, fbp_cfg);
}

namespace {

Image gaussian_smooth(const Image& x, double sigma) {
    if (sigma <= 0.0) return x;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
        ksum += kernel[k + radius];
    }
    for (double& k : kernel) k /= ksum;

    const int h = x.height(), w = x.width();
    auto reflect = [](int i, int n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
        return i;
    };
    std::vector<double> tmp(static_cast<std::size_t>(h) * w);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * x(i, reflect(j + k, w));
            tmp[static_cast<std::size_t>(i) * w + j] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(h) * w);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                acc += kernel[k + radius] * tmp[static_cast<std::size_t>(reflect(i + k, h)) * w + j];
            }
            out[static_cast<std::size_t>(i) * w + j] = acc;
        }
    }
    return Image(h, w, x.pixel_size(), std::move(out));
}

}  // namespace

Image nmar_prior(const Image& x_ma, const NmarConfig& cfg) {
    if (!(cfg.air_threshold < cfg.bone_threshold)) {
        throw ValidationError("nmar: air_threshold must be below bone_threshold");
    }
    if (!(cfg.eps_rel > 0.0)) throw ValidationError("nmar: eps must be positive");
    std::vector<double> data = x_ma.copy_data();
    for (double& v : data) {
        if (v < cfg.air_threshold) {
            v = 0.0;
        } else if (v < cfg.bone_threshold) {
            v = cfg.water_value;
        }  // bone kept as-is
    }
    return gaussian_smooth(Image(x_ma.height(), x_ma.width(), x_ma.pixel_size(), std::move(data)),
                           cfg.smooth_sigma);
}

Image nmar_reconstruct_with_prior(const Sinogram& y, const Sinogram& trace, const Image& prior,
                                  const Geometry& geo, const FbpConfig& fbp_cfg,
                                  const Projector& proj, double eps_rel) {
    Sinogram y_prior = proj.forward(prior);
    const double mx = max_value(y_prior.data());
    const double eps = mx > 0.0 ? eps_rel * mx : 1.0;  // zero prior: normalization disabled

    std::vector<double> coef = y_prior.copy_data();
    for (double& c : coef) c = std::max(c, eps);

    std::vector<double> normalized = y.copy_data();
    for (std::size_t i = 0; i < normalized.size(); ++i) normalized[i] /= coef[i];

    Sinogram inpainted = li_inpaint(
        Sinogram(y.bins(), y.views(), y.detector_spacing(), std::move(normalized)), trace);

    // denormalize the trace region; untraced bins come back bit-identical
    std::vector<double> out = y.copy_data();
    const double* tr = trace.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (tr[i] != 0.0) out[i] = inpainted.data()[i] * coef[i];
    }
    return fbp_reconstruct(Sinogram(y.bins(), y.views(), y.detector_spacing(), std::move(out)), geo,
                           fbp_cfg);
}

Image nmar_reconstruct(const Sinogram& y, const Sinogram& trace, const Image& x_ma,
                       const NmarConfig& cfg, const Geometry& geo, const FbpConfig& fbp_cfg,
                       const Projector& proj) {
    return nmar_reconstruct_with_prior(y, trace, nmar_prior(x_ma, cfg), geo, fbp_cfg, proj,
                                       cfg.eps_rel);
}

}  // namespace ctmar
