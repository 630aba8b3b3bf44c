#include "ctmar/fbp.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <memory>

#include "ctmar/projector.hpp"

namespace ctmar {

namespace {

int next_pow2(int n) {
    int p = 1;
    while (p < n) p *= 2;
    return p;
}

struct FftwDeleter {
    void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

Sinogram ramp_filter(const Sinogram& sino, const FbpConfig& cfg) {
    if (cfg.pad_factor < 2) throw ValidationError("fbp: pad_factor must be >= 2");
    const int nb = sino.bins();
    const int nv = sino.views();
    const int len = next_pow2(cfg.pad_factor * nb);
    const int n_freq = len / 2 + 1;
    const double ds = sino.detector_spacing();

    // |f| gain per rfft bin, f in cycles per length unit, optional Hann taper.
    std::vector<double> gain(n_freq);
    for (int k = 0; k < n_freq; ++k) {
        const double f = static_cast<double>(k) / (static_cast<double>(len) * ds);
        double g = f;
        if (cfg.filter == FbpFilter::hann_windowed_ram_lak) {
            g *= 0.5 * (1.0 + std::cos(M_PI * k / (len / 2.0)));
        }
        gain[k] = g;
    }

    std::unique_ptr<double, FftwDeleter> in(fftw_alloc_real(len));
    std::unique_ptr<fftw_complex, FftwDeleter> freq(fftw_alloc_complex(n_freq));
    fftw_plan fwd = fftw_plan_dft_r2c_1d(len, in.get(), freq.get(), FFTW_ESTIMATE);
    fftw_plan bwd = fftw_plan_dft_c2r_1d(len, freq.get(), in.get(), FFTW_ESTIMATE);

    const double* src = sino.data().data();
    std::vector<double> out(static_cast<std::size_t>(nb) * nv);
    for (int v = 0; v < nv; ++v) {
        for (int b = 0; b < nb; ++b) in.get()[b] = src[static_cast<std::size_t>(b) * nv + v];
        std::memset(in.get() + nb, 0, sizeof(double) * (len - nb));
        fftw_execute(fwd);
        for (int k = 0; k < n_freq; ++k) {
            freq.get()[k][0] *= gain[k];
            freq.get()[k][1] *= gain[k];
        }
        fftw_execute(bwd);
        const double inv_len = 1.0 / len;  // FFTW transforms are unnormalized
        for (int b = 0; b < nb; ++b) {
            out[static_cast<std::size_t>(b) * nv + v] = in.get()[b] * inv_len;
        }
    }
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    return Sinogram(nb, nv, ds, std::move(out));
}

Image fbp_reconstruct(const Sinogram& sino, const Geometry& geo, const FbpConfig& cfg) {
    if (sino.bins() != geo.n_bins || sino.views() != geo.n_views) {
        throw ValidationError("fbp: sinogram does not match geometry");
    }
    Sinogram filtered = ramp_filter(sino, cfg);
    Projector proj(geo);
    Image bp = proj.adjoint(filtered);
    // pi/n_views is the angular quadrature weight for a full turn (each line
    // is covered twice); detector_spacing/pixel_size^2 converts the sampled
    // splat adjoint into the continuous backprojection integral.
    const double scale =
        M_PI / geo.n_views * geo.detector_spacing / (geo.pixel_size * geo.pixel_size);
    std::vector<double> data = bp.copy_data();
    for (double& v : data) v *= scale;
    return Image(geo.image_h, geo.image_w, geo.pixel_size, std::move(data));
}

}  // namespace ctmar
