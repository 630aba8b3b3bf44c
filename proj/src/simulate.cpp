#include "ctmar/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "ctmar/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ctmar {

namespace {

struct EllipseDef {
    double a, b, x0, y0, phi, value;  // half-axes and center in [-1,1] coords
};

// Contrast-adjusted Shepp-Logan variant; summed values peak at exactly 1.0.
constexpr EllipseDef kSheppLogan[] = {
    {0.6900, 0.9200, 0.00, 0.0000, 0.0, 1.00},
    {0.6624, 0.8740, 0.00, -0.0184, 0.0, -0.80},
    {0.1100, 0.3100, 0.22, 0.0000, -18.0, -0.20},
    {0.1600, 0.4100, -0.22, 0.0000, 18.0, -0.20},
    {0.2100, 0.2500, 0.00, 0.3500, 0.0, 0.10},
    {0.0460, 0.0460, 0.00, 0.1000, 0.0, 0.10},
    {0.0460, 0.0460, 0.00, -0.1000, 0.0, 0.10},
    {0.0460, 0.0230, -0.08, -0.6050, 0.0, 0.10},
    {0.0230, 0.0230, 0.00, -0.6060, 0.0, 0.10},
    {0.0230, 0.0460, 0.06, -0.6050, 0.0, 0.10},
};

// Boundary pixels carry their 4x4-supersampled coverage fraction, so the
// raster is a faithful sample of the continuous phantom.
std::vector<double> render_ellipses(const std::vector<EllipseDef>& ellipses, int h, int w) {
    std::vector<double> data(static_cast<std::size_t>(h) * w, 0.0);
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    const double ry = (h - 1) / 2.0, rx = (w - 1) / 2.0;
    for (const EllipseDef& e : ellipses) {
        const double phi = e.phi * M_PI / 180.0;
        const double cp = std::cos(phi), sp = std::sin(phi);
        auto inside = [&](double u, double v) {
            const double xr = cp * (u - e.x0) + sp * (v - e.y0);
            const double yr = -sp * (u - e.x0) + cp * (v - e.y0);
            return (xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0;
        };
        // pad by the pixel diagonal in normalized units
        const double pad = 1.5 / std::min(rx, ry);
        for (int i = 0; i < h; ++i) {
            const double v = (cy - i) / ry;  // phantom y axis points up
            for (int j = 0; j < w; ++j) {
                const double u = (j - cx) / rx;
                const double xr = cp * (u - e.x0) + sp * (v - e.y0);
                const double yr = -sp * (u - e.x0) + cp * (v - e.y0);
                const double q = (xr * xr) / ((e.a + pad) * (e.a + pad)) +
                                 (yr * yr) / ((e.b + pad) * (e.b + pad));
                if (q > 1.0) continue;  // outside even with padding
                const double q_in = (xr * xr) / ((e.a - pad) * (e.a - pad)) +
                                    (yr * yr) / ((e.b - pad) * (e.b - pad));
                double cover;
                if (e.a > pad && e.b > pad && q_in <= 1.0) {
                    cover = 1.0;  // interior, no sampling needed
                } else {
                    int hits = 0;
                    for (int si = 0; si < 4; ++si) {
                        for (int sj = 0; sj < 4; ++sj) {
                            const double uu = u + (-0.375 + sj * 0.25) / rx;
                            const double vv = v - (-0.375 + si * 0.25) / ry;
                            if (inside(uu, vv)) ++hits;
                        }
                    }
                    cover = hits / 16.0;
                }
                if (cover > 0.0) data[static_cast<std::size_t>(i) * w + j] += e.value * cover;
            }
        }
    }
    return data;
}

void map_to_range(std::vector<double>& data, double lo, double hi) {
    double mx = 0.0;
    for (double& v : data) {
        v = std::max(v, 0.0);
        mx = std::max(mx, v);
    }
    if (mx == 0.0) return;
    const double scale = (hi - lo) / mx;
    for (double& v : data) v = lo + scale * v;
}

}  // namespace

Image make_phantom(const PhantomSpec& spec, const Geometry& geo) {
    if (!(spec.attenuation_hi > spec.attenuation_lo) || spec.attenuation_lo < 0.0) {
        throw ValidationError("phantom: attenuation range must satisfy 0 <= lo < hi");
    }
    const int h = geo.image_h, w = geo.image_w;
    std::vector<double> data;
    if (spec.kind == PhantomKind::shepp_logan) {
        data = render_ellipses(std::vector<EllipseDef>(std::begin(kSheppLogan), std::end(kSheppLogan)),
                               h, w);
    } else {
        if (spec.n_ellipses < 0) throw ValidationError("phantom: n_ellipses must be >= 0");
        auto eng = make_engine(spec.seed, 0x7068616eULL);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        std::vector<EllipseDef> ellipses;
        for (int k = 0; k < spec.n_ellipses; ++k) {
            EllipseDef e;
            if (k == 0) {
                // body ellipse anchoring the anatomy
                e = {0.55 + 0.25 * uni(eng), 0.55 + 0.25 * uni(eng), 0.1 * (uni(eng) - 0.5),
                     0.1 * (uni(eng) - 0.5), 180.0 * uni(eng), 0.5};
            } else {
                e.a = 0.05 + 0.3 * uni(eng);
                e.b = 0.05 + 0.3 * uni(eng);
                e.x0 = 0.8 * (uni(eng) - 0.5);
                e.y0 = 0.8 * (uni(eng) - 0.5);
                e.phi = 180.0 * uni(eng);
                e.value = (uni(eng) < 0.3 ? -1.0 : 1.0) * (0.1 + 0.4 * uni(eng));
            }
            ellipses.push_back(e);
        }
        data = render_ellipses(ellipses, h, w);
    }
    map_to_range(data, spec.attenuation_lo, spec.attenuation_hi);
    return Image(h, w, geo.pixel_size, std::move(data));
}

namespace {

struct Placement {
    MetalShape shape;
    double cy, cx, size;
    double angle;      // capsule / polygon orientation
    double aspect;     // capsule
    double reach;      // outer radius bound of the rasterized shape
    std::vector<double> poly_x, poly_y;  // polygon vertices relative to center
};

// even-odd crossing test
bool in_polygon(double px, double py, const std::vector<double>& vx, const std::vector<double>& vy) {
    bool inside = false;
    const std::size_t k = vx.size();
    for (std::size_t a = 0, b = k - 1; a < k; b = a++) {
        if ((vy[a] > py) != (vy[b] > py) &&
            px < (vx[b] - vx[a]) * (py - vy[a]) / (vy[b] - vy[a]) + vx[a]) {
            inside = !inside;
        }
    }
    return inside;
}

void rasterize(const Placement& p, std::vector<double>& mask, int h, int w) {
    const int lo_i = std::max(0, static_cast<int>(p.cy - p.reach - 1.0));
    const int hi_i = std::min(h - 1, static_cast<int>(p.cy + p.reach + 1.0));
    const int lo_j = std::max(0, static_cast<int>(p.cx - p.reach - 1.0));
    const int hi_j = std::min(w - 1, static_cast<int>(p.cx + p.reach + 1.0));
    const double ca = std::cos(p.angle), sa = std::sin(p.angle);
    for (int i = lo_i; i <= hi_i; ++i) {
        for (int j = lo_j; j <= hi_j; ++j) {
            const double dy = i - p.cy, dx = j - p.cx;
            bool inside = false;
            switch (p.shape) {
                case MetalShape::disc:
                    inside = dx * dx + dy * dy <= p.size * p.size;
                    break;
                case MetalShape::capsule: {
                    // rectangle of half-length l and radius r with round caps,
                    // chosen so the area matches the equivalent disc
                    const double q = p.aspect;
                    const double r = p.size * std::sqrt(M_PI / (4.0 * q + M_PI));
                    const double l = q * r;
                    const double xr = ca * dx + sa * dy;
                    const double yr = -sa * dx + ca * dy;
                    const double ax = std::max(std::abs(xr) - l, 0.0);
                    inside = ax * ax + yr * yr <= r * r;
                    break;
                }
                case MetalShape::polygon:
                    inside = in_polygon(dx, dy, p.poly_x, p.poly_y);
                    break;
            }
            if (inside) mask[static_cast<std::size_t>(i) * w + j] = 1.0;
        }
    }
}

}  // namespace

Image make_metal(const MetalSpec& spec, const Geometry& geo) {
    if (spec.n_implants < 1 || spec.n_implants > 4) {
        throw ValidationError("metal: n_implants must be in 1..4");
    }
    if (spec.shapes.empty()) throw ValidationError("metal: shape set must not be empty");
    if (!(spec.size_lo > 0.0) || spec.size_hi < spec.size_lo) {
        throw ValidationError("metal: size range must satisfy 0 < lo <= hi");
    }
    if (!(spec.metal_mu > 0.0)) throw ValidationError("metal: metal_mu must be positive");

    const int h = geo.image_h, w = geo.image_w;
    auto eng = make_engine(spec.seed, 0x6d65746cULL);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    const int kGlobalRetries = 32;
    for (int attempt = 0; attempt < kGlobalRetries; ++attempt) {
        std::vector<Placement> placed;
        bool ok = true;
        for (int k = 0; k < spec.n_implants && ok; ++k) {
            bool found = false;
            for (int trial = 0; trial < 128; ++trial) {
                Placement p;
                p.shape = spec.shapes[static_cast<std::size_t>(uni(eng) * spec.shapes.size()) %
                                      spec.shapes.size()];
                p.size = spec.size_lo + (spec.size_hi - spec.size_lo) * uni(eng);
                p.angle = 2.0 * M_PI * uni(eng);
                p.aspect = 1.5 + 1.5 * uni(eng);
                p.reach = p.size;
                if (p.shape == MetalShape::capsule) {
                    const double r = p.size * std::sqrt(M_PI / (4.0 * p.aspect + M_PI));
                    p.reach = r * (1.0 + p.aspect);
                }
                if (p.shape == MetalShape::polygon) {
                    const int verts = 5 + static_cast<int>(3.0 * uni(eng));
                    p.poly_x.resize(verts);
                    p.poly_y.resize(verts);
                    double outer = 0.0;
                    for (int t = 0; t < verts; ++t) {
                        const double rad = p.size * (0.8 + 0.35 * uni(eng));
                        const double th = p.angle + 2.0 * M_PI * t / verts;
                        p.poly_x[t] = rad * std::cos(th);
                        p.poly_y[t] = rad * std::sin(th);
                        outer = std::max(outer, rad);
                    }
                    p.reach = outer;
                }
                const double margin = p.reach + 2.0;
                if (2.0 * margin >= std::min(h, w)) continue;
                p.cy = margin + (h - 1 - 2.0 * margin) * uni(eng);
                p.cx = margin + (w - 1 - 2.0 * margin) * uni(eng);
                bool clear = true;
                for (const Placement& q : placed) {
                    const double d = std::hypot(p.cy - q.cy, p.cx - q.cx);
                    if (d < p.reach + q.reach + 4.0) {
                        clear = false;
                        break;
                    }
                }
                if (clear) {
                    placed.push_back(std::move(p));
                    found = true;
                    break;
                }
            }
            if (!found) ok = false;
        }
        if (!ok) continue;

        std::vector<double> mask(static_cast<std::size_t>(h) * w, 0.0);
        for (const Placement& p : placed) rasterize(p, mask, h, w);
        Image m(h, w, geo.pixel_size, std::move(mask));
        if (count_components(m) == spec.n_implants) return m;
    }
    std::ostringstream os;
    os << "metal: could not place " << spec.n_implants << " implants of size ["
       << spec.size_lo << ", " << spec.size_hi << "] in a " << h << "x" << w << " image";
    throw PipelineError(os.str());
}

Sinogram metal_trace(const Projector& proj, const Image& metal) {
    if (!is_binary(metal.data())) throw ValidationError("metal_trace: mask must be binary");
    return binarize(proj.forward(metal), 0.0);
}

Image replace_metal_with_tissue(const Image& x, const Image& metal) {
    if (!x.same_shape(metal)) throw ValidationError("replace_metal_with_tissue: shape mismatch");
    if (!is_binary(metal.data())) throw ValidationError("replace_metal_with_tissue: mask must be binary");
    const int h = x.height(), w = x.width();
    std::vector<double> out = x.copy_data();
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            if (metal(i, j) == 0.0) continue;
            double sum = 0.0;
            int count = 0;
            for (int radius = 4; radius <= std::max(h, w); radius *= 2) {
                sum = 0.0;
                count = 0;
                for (int ii = std::max(0, i - radius); ii <= std::min(h - 1, i + radius); ++ii) {
                    for (int jj = std::max(0, j - radius); jj <= std::min(w - 1, j + radius); ++jj) {
                        if (metal(ii, jj) == 0.0) {
                            sum += x(ii, jj);
                            ++count;
                        }
                    }
                }
                if (count > 0) break;
            }
            out[static_cast<std::size_t>(i) * w + j] = count > 0 ? sum / count : 0.0;
        }
    }
    return Image(h, w, x.pixel_size(), std::move(out));
}

CorruptionResult corrupt(const Projector& proj, const Image& x_gt, const Image& metal,
                         double metal_mu, const CorruptionSpec& spec, const FbpConfig& fbp_cfg) {
    if (!(metal_mu > 0.0)) throw ValidationError("corruption: metal_mu must be positive");
    if (spec.spectrum.empty()) throw ValidationError("corruption: spectrum must not be empty");
    double wsum = 0.0;
    double prev_k = -std::numeric_limits<double>::infinity();
    for (const SpectrumBin& bin : spec.spectrum) {
        if (bin.weight < 0.0 || !(bin.tissue_scale > 0.0) || !(bin.metal_scale > 0.0)) {
            throw ValidationError("corruption: spectrum bins need weight >= 0 and positive scales");
        }
        if (bin.metal_scale < prev_k) {
            throw ValidationError("corruption: metal_scale must be nondecreasing across bins");
        }
        prev_k = bin.metal_scale;
        wsum += bin.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw ValidationError("corruption: spectrum weights must sum to 1");
    if (spec.photons_i0 && !(*spec.photons_i0 > 0.0)) {
        throw ValidationError("corruption: photons_i0 must be positive");
    }
    if (!(spec.intensity_floor > 0.0)) throw ValidationError("corruption: intensity floor must be positive");

    Image x_tissue = replace_metal_with_tissue(x_gt, metal);
    for (double v : x_tissue.data()) {
        if (v < 0.0) throw ValidationError("corruption: tissue image must be non-negative");
    }
    Sinogram p_t = proj.forward(x_tissue);

    std::vector<double> metal_img = metal.copy_data();
    for (double& v : metal_img) v *= metal_mu;
    Sinogram p_m = proj.forward(
        Image(metal.height(), metal.width(), metal.pixel_size(), std::move(metal_img)));

    const std::int64_t n = p_t.size();
    std::vector<double> y(n);
    const double* pt = p_t.data().data();
    const double* pm = p_m.data().data();

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) {
        double tissue_only = 0.0, transmitted = 0.0;
        for (const SpectrumBin& bin : spec.spectrum) {
            tissue_only += bin.weight * std::exp(-bin.tissue_scale * pt[i]);
            transmitted += bin.weight * std::exp(-bin.tissue_scale * pt[i] - bin.metal_scale * pm[i]);
        }
        if (spec.photons_i0) {
            const double lambda = *spec.photons_i0 * transmitted;
            auto eng = make_engine(spec.seed, 0x636f7272ULL, static_cast<std::uint64_t>(i));
            std::poisson_distribution<long long> poisson(lambda);
            transmitted = static_cast<double>(poisson(eng)) / *spec.photons_i0;
        }
        transmitted = std::max(transmitted, spec.intensity_floor);
        y[i] = pt[i] + std::log(tissue_only) - std::log(transmitted);
    }

    Sinogram y_sino(p_t.bins(), p_t.views(), p_t.detector_spacing(), std::move(y));
    Image x_ma = fbp_reconstruct(y_sino, proj.geometry(), fbp_cfg);
    return CorruptionResult{std::move(y_sino), std::move(p_t), std::move(x_ma), std::move(x_tissue)};
}

int count_components(const Image& mask) { return static_cast<int>(component_areas(mask).size()); }

std::vector<std::int64_t> component_areas(const Image& mask) {
    const int h = mask.height(), w = mask.width();
    std::vector<char> seen(static_cast<std::size_t>(h) * w, 0);
    std::vector<std::int64_t> areas;
    std::deque<std::pair<int, int>> queue;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            if (mask(i, j) == 0.0 || seen[static_cast<std::size_t>(i) * w + j]) continue;
            std::int64_t area = 0;
            queue.push_back({i, j});
            seen[static_cast<std::size_t>(i) * w + j] = 1;
            while (!queue.empty()) {
                auto [ci, cj] = queue.front();
                queue.pop_front();
                ++area;
                constexpr int di[] = {-1, 1, 0, 0};
                constexpr int dj[] = {0, 0, -1, 1};
                for (int d = 0; d < 4; ++d) {
                    const int ni = ci + di[d], nj = cj + dj[d];
                    if (ni < 0 || ni >= h || nj < 0 || nj >= w) continue;
                    if (mask(ni, nj) == 0.0 || seen[static_cast<std::size_t>(ni) * w + nj]) continue;
                    seen[static_cast<std::size_t>(ni) * w + nj] = 1;
                    queue.push_back({ni, nj});
                }
            }
            areas.push_back(area);
        }
    }
    return areas;
}

}  // namespace ctmar
