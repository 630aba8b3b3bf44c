// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Tolerances are pinned in code next to each check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ctmar/pipeline.hpp"
#include "ctmar/rng.hpp"

using namespace ctmar;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.c_str());
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double masked_psnr(const Image& x, const Image& ref, const Image& metal) {
    return psnr(x, ref, std::nullopt, &metal);
}

// The standard simulated case: shepp-logan at physical attenuation scale with
// two disc implants and the default polychromatic spectrum, noise off so the
// monotonicity and stage-trace checks are exactly reproducible.
struct StandardCase {
    Geometry geo{128, 128, 160, 185};
    Projector proj{geo};
    FbpConfig fbp_cfg;
    Image x_gt = Image::zeros(8, 8);
    Image metal = Image::zeros(8, 8);
    Image x_tissue = Image::zeros(8, 8);
    Sinogram y = Sinogram::zeros(8, 8, 1.0);
    Sinogram trace = Sinogram::zeros(8, 8, 1.0);

    StandardCase() {
        x_gt = make_phantom(PhantomSpec{PhantomKind::shepp_logan, 0, 0, 0.0, 0.04}, geo);
        MetalSpec mspec;
        mspec.seed = 8;
        mspec.n_implants = 2;
        mspec.shapes = {MetalShape::disc};
        mspec.size_lo = 4.0;
        mspec.size_hi = 7.0;
        metal = make_metal(mspec, geo);
        trace = metal_trace(proj, metal);
        CorruptionSpec cspec;
        cspec.photons_i0.reset();
        CorruptionResult res = corrupt(proj, x_gt, metal, 0.1, cspec);
        y = std::move(res.y);
        x_tissue = std::move(res.x_tissue);
    }
};

void criterion_1_adjoint() {
    const auto t0 = std::chrono::steady_clock::now();
    Geometry g(64, 64, 90, 95);
    Projector p(g);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        auto eng_x = make_engine(500 + trial, 1);
        auto eng_y = make_engine(900 + trial, 2);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        std::vector<double> xd(static_cast<std::size_t>(g.image_h) * g.image_w);
        std::vector<double> yd(static_cast<std::size_t>(g.n_bins) * g.n_views);
        for (double& v : xd) v = uni(eng_x);
        for (double& v : yd) v = uni(eng_y);
        Image x(g.image_h, g.image_w, g.pixel_size, std::move(xd));
        Sinogram y(g.n_bins, g.n_views, g.detector_spacing, std::move(yd));
        Sinogram px = p.forward(x);
        Image pty = p.adjoint(y);
        const double lhs = dot(px.data(), y.data());
        const double rhs = dot(x.data(), pty.data());
        worst = std::max(worst, std::abs(lhs - rhs) / (l2_norm(px.data()) * l2_norm(y.data())));
    }
    const double elapsed = seconds_since(t0);
    std::ostringstream os;
    os << "max relative mismatch " << worst << ", " << elapsed << " s";
    report(1, "adjoint identity on 20 random pairs", worst < 1e-4 && elapsed < 5.0, os.str());
}

void criterion_2_chord() {
    const int n = 256;
    Geometry g(n, n, 180, 369);
    const double r = 0.3 * n;
    const double c = (n - 1) / 2.0;
    // coverage-weighted disc raster: the faithful sample of the continuous disc
    std::vector<double> data(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double dy = i - c, dx = j - c;
            const double d2 = dy * dy + dx * dx;
            if (d2 > (r + 0.75) * (r + 0.75)) continue;
            double cover = 1.0;
            if (d2 >= (r - 0.75) * (r - 0.75)) {
                int inside = 0;
                for (int si = 0; si < 4; ++si)
                    for (int sj = 0; sj < 4; ++sj) {
                        const double sy = dy - 0.375 + si * 0.25;
                        const double sx = dx - 0.375 + sj * 0.25;
                        if (sy * sy + sx * sx <= r * r) ++inside;
                    }
                cover = inside / 16.0;
            }
            data[static_cast<std::size_t>(i) * n + j] = cover;
        }
    }
    Sinogram sino = Projector(g).forward(Image(n, n, 1.0, std::move(data)));
    double worst = 0.0;
    for (int v = 0; v < g.n_views; ++v) {
        for (int b = 0; b < g.n_bins; ++b) {
            const double s = (b - (g.n_bins - 1) / 2.0) * g.detector_spacing;
            if (std::abs(s) > r - 2.0 * g.detector_spacing) continue;
            const double chord = 2.0 * std::sqrt(r * r - s * s);
            worst = std::max(worst, std::abs(sino(b, v) - chord) / chord);
        }
    }
    std::ostringstream os;
    os << "max relative error " << worst;
    report(2, "centered-disc projection vs analytic chord length", worst < 0.02, os.str());
}

void criterion_3_gradients() {
    double worst_s = 0.0, worst_x = 0.0;
    for (int inst = 0; inst < 3; ++inst) {
        Geometry g(32, 32, 48, 49);
        Projector proj(g);
        const std::uint64_t seed = 1000 + 17 * static_cast<std::uint64_t>(inst);
        auto fill = [&](std::size_t n, std::uint64_t stream, double lo, double hi) {
            auto eng = make_engine(seed, stream);
            std::uniform_real_distribution<double> uni(lo, hi);
            std::vector<double> v(n);
            for (double& x : v) x = uni(eng);
            return v;
        };
        const std::size_t npix = static_cast<std::size_t>(g.image_h) * g.image_w;
        const std::size_t nray = static_cast<std::size_t>(g.n_bins) * g.n_views;
        Image x(g.image_h, g.image_w, g.pixel_size, fill(npix, 1, 0.0, 1.0));
        SolverState st{Sinogram(g.n_bins, g.n_views, g.detector_spacing, fill(nray, 2, 0.2, 1.8)),
                       Sinogram(g.n_bins, g.n_views, g.detector_spacing, fill(nray, 3, 0.5, 2.0)),
                       proj.forward(x), x, 0, 0.0};
        Sinogram y(g.n_bins, g.n_views, g.detector_spacing, fill(nray, 4, 0.0, 3.0));
        std::vector<double> trd = fill(nray, 5, 0.0, 1.0);
        for (double& v : trd) v = v > 0.7 ? 1.0 : 0.0;
        Sinogram tr(g.n_bins, g.n_views, g.detector_spacing, std::move(trd));
        const double alpha = 0.7;

        // sinogram-side gradient vs full central differences of the smooth term
        {
            auto f_of = [&](const std::vector<double>& s) {
                double c1 = 0.0, c2 = 0.0;
                for (std::size_t i = 0; i < nray; ++i) {
                    const double syn = st.y_tilde.data()[i] * s[i];
                    const double r1 = st.px.data()[i] - syn;
                    c1 += r1 * r1;
                    const double r2 = (1.0 - tr.data()[i]) * (syn - y.data()[i]);
                    c2 += r2 * r2;
                }
                return 0.5 * (c1 + alpha * c2);
            };
            Sinogram grad = grad_f_s(st, y, tr, alpha);
            std::vector<double> s = st.s_tilde.copy_data();
            const double delta = 1e-4;
            double err2 = 0.0, norm2 = 0.0;
            for (std::size_t i = 0; i < nray; ++i) {
                const double keep = s[i];
                s[i] = keep + delta;
                const double fp = f_of(s);
                s[i] = keep - delta;
                const double fm = f_of(s);
                s[i] = keep;
                const double fd = (fp - fm) / (2.0 * delta);
                err2 += (fd - grad.data()[i]) * (fd - grad.data()[i]);
                norm2 += grad.data()[i] * grad.data()[i];
            }
            worst_s = std::max(worst_s, std::sqrt(err2 / norm2));
        }

        // image-side gradient vs full central differences through the projector
        {
            auto h_of = [&](const std::vector<double>& xd) {
                Sinogram px = proj.forward(Image(g.image_h, g.image_w, g.pixel_size, xd));
                double c = 0.0;
                for (std::size_t i = 0; i < nray; ++i) {
                    const double r = px.data()[i] - st.y_tilde.data()[i] * st.s_tilde.data()[i];
                    c += r * r;
                }
                return 0.5 * c;
            };
            std::vector<double> residual(nray);
            for (std::size_t i = 0; i < nray; ++i) {
                residual[i] = st.px.data()[i] - st.y_tilde.data()[i] * st.s_tilde.data()[i];
            }
            Image grad = proj.adjoint(
                Sinogram(g.n_bins, g.n_views, g.detector_spacing, std::move(residual)));
            std::vector<double> xd = st.x.copy_data();
            const double delta = 1e-4;
            double err2 = 0.0, norm2 = 0.0;
            for (std::size_t i = 0; i < npix; ++i) {
                const double keep = xd[i];
                xd[i] = keep + delta;
                const double fp = h_of(xd);
                xd[i] = keep - delta;
                const double fm = h_of(xd);
                xd[i] = keep;
                const double fd = (fp - fm) / (2.0 * delta);
                err2 += (fd - grad.data()[i]) * (fd - grad.data()[i]);
                norm2 += grad.data()[i] * grad.data()[i];
            }
            worst_x = std::max(worst_x, std::sqrt(err2 / norm2));
        }
    }
    std::ostringstream os;
    os << "relative FD mismatch: sinogram step " << worst_s << ", image step " << worst_x;
    report(3, "update gradients vs central finite differences", worst_s < 1e-5 && worst_x < 1e-5,
           os.str());
}

void criterion_4_fixed_point() {
    Geometry g(64, 64, 90, 95);
    Projector p(g);
    Image x_gt = make_phantom(PhantomSpec{PhantomKind::shepp_logan, 0, 0, 0.0, 0.04}, g);
    Sinogram y = p.forward(x_gt);
    SolverConfig cfg;
    cfg.n_stages = 10;
    cfg.prox_s = ProxSpec{ProxKind::identity, 0.0};
    cfg.prox_x = ProxSpec{ProxKind::identity, 0.0};
    cfg.record_stages = true;
    SolveResult res = solve_with_prior(y, Sinogram::zeros(g), x_gt, cfg, p);
    const double x_dev = max_abs_diff(res.x.data(), x_gt.data());
    const double x_bound = 1e-5 * max_abs(x_gt.data());
    double s_dev = 0.0;
    for (double v : res.stages.back().s_tilde.data()) s_dev = std::max(s_dev, std::abs(v - 1.0));
    std::ostringstream os;
    os << "|x - x_gt|_inf " << x_dev << " (bound " << x_bound << "), |s_tilde - 1|_inf " << s_dev;
    report(4, "perfect-prior metal-free input is a fixed point", x_dev <= x_bound && s_dev <= 1e-5,
           os.str());
}

void criterion_5_monotonicity(const StandardCase& sc) {
    SolverConfig cfg;
    cfg.n_stages = 50;
    cfg.prox_s = ProxSpec{ProxKind::identity, 0.0};
    cfg.prox_x = ProxSpec{ProxKind::identity, 0.0};
    cfg.record_stages = true;
    SolveResult res = solve(sc.y, sc.trace, sc.geo, cfg, sc.proj, sc.fbp_cfg);
    bool monotone = res.stages.size() == 51;
    double worst_ratio = 0.0;
    for (std::size_t k = 1; k < res.stages.size(); ++k) {
        const double prev = res.stages[k - 1].objective;
        const double cur = res.stages[k].objective;
        worst_ratio = std::max(worst_ratio, (cur - prev) / prev);
        if (cur > prev * (1.0 + 1e-9)) monotone = false;
    }
    std::ostringstream os;
    os << "worst stage-to-stage increase ratio " << worst_ratio << " over 50 stages";
    report(5, "objective non-increasing with auto steps and identity proxes", monotone, os.str());
}

void criterion_6_mar_ordering() {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg;  // 256x256, 320 views, 367 bins, Poisson 2e6
    cfg.phantom.kind = PhantomKind::random_ellipses;
    BenchResult res = run_bench(cfg, 10);
    int ordered = 0;
    double mean_dudo = 0.0, mean_li = 0.0;
    for (const BenchCase& c : res.cases) {
        const double pd = c.reports.at(Method::dudo).psnr_db;
        const double pl = c.reports.at(Method::li).psnr_db;
        const double pi = c.reports.at(Method::input).psnr_db;
        if (pd >= pl && pl >= pi) ++ordered;
        mean_dudo += pd / res.cases.size();
        mean_li += pl / res.cases.size();
    }
    const double margin = mean_dudo - mean_li;
    const double elapsed = seconds_since(t0);
    // frozen regression margin; first implementation measured +0.63 dB
    const double kFrozenMarginDb = 0.3;
    std::ostringstream os;
    os << "dudo >= li >= input in " << ordered << "/10 cases, mean margin " << margin
       << " dB (frozen bound " << kFrozenMarginDb << "), " << elapsed << " s";
    report(6, "directional MAR ordering on the seeded bench",
           ordered >= 8 && margin >= kFrozenMarginDb && elapsed < 600.0, os.str());

    // reuse the bench for the CSV schema half of criterion 9
    const fs::path dir = fs::temp_directory_path() / "ctmar_acceptance_bench";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_bench_csv(res, dir / "bench.csv");
    std::ifstream in(dir / "bench.csv");
    std::string csv((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    bool schema_ok = csv.rfind("# creator: ctmar 0.1.0", 0) == 0 &&
                     csv.find("method,group,cases,psnr_mean_db,psnr_std_db,ssim_mean,ssim_std") !=
                         std::string::npos;
    int rows = 0;
    for (const char* m : {"input", "li", "nmar", "dudo"}) {
        for (const char* gp : {"G1", "G2", "G3", "G4", "G5", "average"}) {
            if (csv.find(std::string(m) + "," + gp + ",") != std::string::npos) ++rows;
        }
    }
    schema_ok = schema_ok && rows == 24;
    std::ostringstream os9;
    os9 << rows << "/24 expected rows present";
    report(9, "bench CSV schema golden layout", schema_ok, os9.str());
}

void criterion_7_stage_trace(const StandardCase& sc) {
    SolverConfig cfg;  // default proxes
    cfg.record_stages = true;
    SolveResult res = solve(sc.y, sc.trace, sc.geo, cfg, sc.proj, sc.fbp_cfg);
    auto variance_in_trace = [&](const Sinogram& s) {
        double mean = 0.0;
        std::int64_t n = 0;
        for (std::int64_t i = 0; i < s.size(); ++i) {
            if (sc.trace.data()[i] != 0.0) {
                mean += s.data()[i];
                ++n;
            }
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::int64_t i = 0; i < s.size(); ++i) {
            if (sc.trace.data()[i] != 0.0) {
                const double d = s.data()[i] - mean;
                var += d * d;
            }
        }
        return var / static_cast<double>(n);
    };
    bool monotone = res.stages.size() == 11;
    double first = variance_in_trace(res.stages[1].s_tilde);
    double last = first;
    double prev = first;
    for (std::size_t k = 2; k < res.stages.size(); ++k) {
        const double cur = variance_in_trace(res.stages[k].s_tilde);
        if (cur > prev * (1.0 + 1e-9)) monotone = false;
        prev = cur;
        last = cur;
    }
    std::ostringstream os;
    os << "trace variance " << first << " (n=1) -> " << last << " (n=10)";
    report(7, "normalized-sinogram trace variance non-increasing by stage", monotone, os.str());
}

void criterion_8_metrics() {
    bool ok = true;
    std::ostringstream os;
    const int n = 16;
    Geometry g(n, n, 8, 25);

    std::vector<double> refd(n * n, 0.5);
    refd[5] = 1.0;
    Image ref(n, n, 1.0, refd);
    Image mask0 = Image::zeros(n, n);

    // identical inputs: sentinel psnr, unit ssim, zero mse
    ok = ok && std::isinf(psnr(ref, ref));
    ok = ok && masked_mse(ref, ref, mask0) == 0.0;
    ok = ok && std::abs(ssim(ref, ref) - 1.0) < 1e-12;

    // uniform error 0.1 against peak 1.0: exactly 20 dB
    std::vector<double> xd = refd;
    for (double& v : xd) v += 0.1;
    ok = ok && std::abs(psnr(Image(n, n, 1.0, xd), ref) - 20.0) < 1e-12;

    // errors confined to the excluded mask
    std::vector<double> maskd(n * n, 0.0);
    std::vector<double> xe = refd;
    maskd[7] = 1.0;
    xe[7] += 100.0;
    Image confined_mask(n, n, 1.0, maskd);
    ok = ok && std::isinf(psnr(Image(n, n, 1.0, xe), ref, std::nullopt, &confined_mask));

    // unit offset: masked mse exactly 1
    std::vector<double> x1 = refd;
    for (double& v : x1) v += 1.0;
    ok = ok && masked_mse(Image(n, n, 1.0, x1), ref, Image(n, n, 1.0, maskd)) == 1.0;

    // all-excluded mask is an error
    bool threw = false;
    try {
        masked_mse(ref, ref, Image(n, n, 1.0, std::vector<double>(n * n, 1.0)));
    } catch (const ValidationError&) {
        threw = true;
    }
    ok = ok && threw;

    // psnr <-> masked_mse identity, bit-exact
    Geometry g2(32, 32, 8, 49);
    auto eng = make_engine(3, 9);
    std::uniform_real_distribution<double> uni(0.0, 2.0);
    std::vector<double> a(32 * 32), b(32 * 32), m(32 * 32, 0.0);
    for (double& v : a) v = uni(eng);
    for (double& v : b) v = uni(eng);
    for (std::size_t i = 0; i < m.size(); i += 7) m[i] = 1.0;
    Image xa(32, 32, 1.0, a), xb(32, 32, 1.0, b), xm(32, 32, 1.0, m);
    const double peak = max_value(xb.data());
    const bool identity =
        psnr(xa, xb, std::nullopt, &xm) == 10.0 * std::log10(peak * peak / masked_mse(xa, xb, xm));
    ok = ok && identity;

    os << (identity ? "consistency identity exact" : "consistency identity BROKEN");
    report(8, "metric examples and psnr/masked_mse consistency", ok, os.str());
}

void criterion_9_io_determinism() {
    // raster round-trip, bit-exact
    const fs::path dir = fs::temp_directory_path() / "ctmar_acceptance_io";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };

    Geometry g(32, 32, 24, 49);
    auto eng = make_engine(11, 4);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<double> data(static_cast<std::size_t>(32) * 32);
    for (double& v : data) v = uni(eng);
    Image img(32, 32, 1.0, std::move(data));
    RasterMeta meta;
    meta.kind = RasterKind::image;
    meta.units = "attenuation_per_length";
    meta.seeds = {{"global", 11}};
    write_raster(dir / "a.f32", img, meta);
    auto [back, back_meta] = read_image(dir / "a.f32");
    write_raster(dir / "b.f32", back, back_meta);
    const bool roundtrip = slurp(dir / "a.f32") == slurp(dir / "b.f32") &&
                           slurp(dir / "a.f32.json") == slurp(dir / "b.f32.json");

    // full-pipeline determinism: two runs, identical bytes
    ExperimentConfig cfg;
    cfg.geometry = Geometry(64, 64, 48, 95);
    cfg.phantom = PhantomSpec{PhantomKind::random_ellipses, 3, 6, 0.0, 0.04};
    cfg.metal.size_lo = 3.0;
    cfg.metal.size_hi = 5.0;
    cfg.corruption.photons_i0 = 2e5;
    const fs::path d1 = dir / "run1";
    const fs::path d2 = dir / "run2";
    write_case(simulate_case(cfg), cfg, d1);
    write_case(simulate_case(cfg), cfg, d2);
    bool deterministic = true;
    for (const char* name :
         {"x_gt.f32", "m.f32", "y.f32", "y_gt.f32", "tr.f32", "x_ma.f32", "config.json"}) {
        deterministic = deterministic && slurp(d1 / name) == slurp(d2 / name);
    }
    std::ostringstream os;
    os << (roundtrip ? "round-trip bit-exact" : "round-trip MISMATCH") << ", "
       << (deterministic ? "two runs byte-identical" : "runs DIFFER");
    report(9, "raster round-trip and full-pipeline determinism", roundtrip && deterministic,
           os.str());
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    criterion_1_adjoint();
    criterion_2_chord();
    criterion_3_gradients();
    criterion_4_fixed_point();
    StandardCase sc;
    criterion_5_monotonicity(sc);
    criterion_7_stage_trace(sc);
    criterion_8_metrics();
    criterion_9_io_determinism();
    criterion_6_mar_ordering();  // slowest last; also emits the CSV schema line
    std::printf("%d criterion check(s) failed, total %.1f s\n", g_failures, seconds_since(t0));
    return g_failures;
}
