#include "ctmar/projector.hpp"

#include <algorithm>
#include <cmath>

#include "ctmar/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ctmar {

// Coordinate conventions, shared by forward and adjoint:
//   pixel (row i, col j) center sits at physical
//     x = (j - (W-1)/2) * pixel_size,  y = (i - (H-1)/2) * pixel_size;
//   view v has detector axis u = (cos a, sin a) and ray direction
//     d = (-sin a, cos a) with a = 2*pi*v/n_views;
//   bin b is offset s_b = (b - (N_b-1)/2) * detector_spacing along u.
// A ray is the point set s_b*u + t*d, sampled at fixed t positions that are
// identical for forward and adjoint.

Projector::Projector(const Geometry& geo, Interp interp) : geo_(geo), interp_(interp) {
    cos_.resize(geo_.n_views);
    sin_.resize(geo_.n_views);
    for (int v = 0; v < geo_.n_views; ++v) {
        const double a = geo_.view_angle(v);
        cos_[v] = std::cos(a);
        sin_[v] = std::sin(a);
    }
    step_ = geo_.pixel_size / 2.0;
    // Cover the support of the pixel-center grid plus one interpolation
    // bandwidth on each side.
    const double half_extent =
        0.5 * geo_.pixel_size *
            std::hypot(static_cast<double>(geo_.image_h - 1), static_cast<double>(geo_.image_w - 1)) +
        2.0 * geo_.pixel_size;
    n_samples_ = static_cast<int>(std::ceil(2.0 * half_extent / step_));
    t_start_ = -0.5 * n_samples_ * step_ + 0.5 * step_;
}

namespace {

// Enumerates the bilinear interpolation weights of one ray. visit(pixel, w)
// is called with the physical step length already folded into w.
template <typename Visit>
inline void walk_ray(int bin, int view, const Geometry& geo, const std::vector<double>& cs,
                     const std::vector<double>& sn, double t_start, double step, int n_samples,
                     Visit&& visit) {
    const int h = geo.image_h, w = geo.image_w;
    const double inv_px = 1.0 / geo.pixel_size;
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double s = (bin - (geo.n_bins - 1) / 2.0) * geo.detector_spacing;
    const double ux = cs[view], uy = sn[view];
    const double dx = -sn[view], dy = cs[view];
    // Ray position in pixel-grid coordinates, advanced by a fixed increment.
    double fx = (s * ux + t_start * dx) * inv_px + cx;
    double fy = (s * uy + t_start * dy) * inv_px + cy;
    const double sx = step * dx * inv_px;
    const double sy = step * dy * inv_px;
    for (int m = 0; m < n_samples; ++m, fx += sx, fy += sy) {
        const double jf = std::floor(fx);
        const double if_ = std::floor(fy);
        const int j0 = static_cast<int>(jf);
        const int i0 = static_cast<int>(if_);
        if (j0 < -1 || j0 >= w || i0 < -1 || i0 >= h) continue;
        const double wx1 = fx - jf, wx0 = 1.0 - wx1;
        const double wy1 = fy - if_, wy0 = 1.0 - wy1;
        const bool j0ok = j0 >= 0, j1ok = j0 + 1 < w;
        const bool i0ok = i0 >= 0, i1ok = i0 + 1 < h;
        const std::int64_t base = static_cast<std::int64_t>(i0) * w + j0;
        if (i0ok && j0ok) visit(base, step * wy0 * wx0);
        if (i0ok && j1ok) visit(base + 1, step * wy0 * wx1);
        if (i1ok && j0ok) visit(base + w, step * wy1 * wx0);
        if (i1ok && j1ok) visit(base + w + 1, step * wy1 * wx1);
    }
}

}  // namespace

Sinogram Projector::forward(const Image& x) const {
    if (x.height() != geo_.image_h || x.width() != geo_.image_w || x.pixel_size() != geo_.pixel_size) {
        throw ValidationError("forward: image does not match projector geometry");
    }
    const double* img = x.data().data();
    std::vector<double> out(static_cast<std::size_t>(geo_.n_bins) * geo_.n_views, 0.0);

    // Every (bin, view) entry is independent, so any schedule is bit-exact.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int v = 0; v < geo_.n_views; ++v) {
        for (int b = 0; b < geo_.n_bins; ++b) {
            double acc = 0.0;
            walk_ray(b, v, geo_, cos_, sin_, t_start_, step_, n_samples_,
                     [&](std::int64_t p, double wgt) { acc += wgt * img[p]; });
            out[static_cast<std::size_t>(b) * geo_.n_views + v] = acc;
        }
    }
    return Sinogram(geo_.n_bins, geo_.n_views, geo_.detector_spacing, std::move(out));
}

Image Projector::adjoint(const Sinogram& y) const {
    if (y.bins() != geo_.n_bins || y.views() != geo_.n_views ||
        y.detector_spacing() != geo_.detector_spacing) {
        throw ValidationError("adjoint: sinogram does not match projector geometry");
    }
    const double* sino = y.data().data();
    const std::size_t npix = static_cast<std::size_t>(geo_.image_h) * geo_.image_w;

    // Accumulation runs over fixed view blocks, each into its own buffer;
    // the buffers are reduced in block order afterwards, so the result is
    // bit-identical for any worker count.
    constexpr int kBlock = 16;
    const int n_blocks = (geo_.n_views + kBlock - 1) / kBlock;
    std::vector<std::vector<double>> partial(n_blocks);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int blk = 0; blk < n_blocks; ++blk) {
        std::vector<double> buf(npix, 0.0);
        const int v_end = std::min((blk + 1) * kBlock, geo_.n_views);
        for (int v = blk * kBlock; v < v_end; ++v) {
            for (int b = 0; b < geo_.n_bins; ++b) {
                const double val = sino[static_cast<std::size_t>(b) * geo_.n_views + v];
                if (val == 0.0) continue;
                walk_ray(b, v, geo_, cos_, sin_, t_start_, step_, n_samples_,
                         [&](std::int64_t p, double wgt) { buf[p] += wgt * val; });
            }
        }
        partial[blk] = std::move(buf);
    }

    std::vector<double> out(npix, 0.0);
    for (int blk = 0; blk < n_blocks; ++blk) {
        const std::vector<double>& buf = partial[blk];
        for (std::size_t i = 0; i < npix; ++i) out[i] += buf[i];
    }
    return Image(geo_.image_h, geo_.image_w, geo_.pixel_size, std::move(out));
}

double Projector::op_norm_sq(int iters, std::uint64_t seed) const {
    if (iters < 1) throw ValidationError("op_norm_sq: iters must be >= 1");
    const std::size_t npix = static_cast<std::size_t>(geo_.image_h) * geo_.image_w;
    auto eng = make_engine(seed, 0x6f704e6fULL);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<double> x(npix);
    for (double& v : x) v = uni(eng);
    double nrm = l2_norm(x);
    for (double& v : x) v /= nrm;

    double lambda = 0.0;
    for (int k = 0; k < iters; ++k) {
        Image xi(geo_.image_h, geo_.image_w, geo_.pixel_size, x);
        Image z = adjoint(forward(xi));
        lambda = dot(x, z.data());  // Rayleigh quotient, ||x|| == 1
        const double zn = l2_norm(z.data());
        if (zn == 0.0) return 0.0;
        x = z.copy_data();
        for (double& v : x) v /= zn;
    }
    return lambda;
}

}  // namespace ctmar
