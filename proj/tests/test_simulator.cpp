#include <cmath>

#include "ctmar/simulate.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace ctmar;
using namespace ctmar::testing;

namespace {

double masked_psnr(const Image& x, const Image& ref, const Image& metal) {
    double mse = 0.0;
    std::int64_t n = 0;
    for (std::int64_t i = 0; i < x.size(); ++i) {
        if (metal.data()[i] != 0.0) continue;
        const double d = x.data()[i] - ref.data()[i];
        mse += d * d;
        ++n;
    }
    mse /= static_cast<double>(n);
    const double peak = max_value(ref.data());
    return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("shepp-logan phantom is the standard raster with peak 1.0") {
    Geometry g;  // 416x416
    Image x = make_phantom(PhantomSpec{}, g);
    CHECK(max_value(x.data()) == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : x.data()) CHECK(v >= 0.0);
    // corners are outside the skull
    CHECK(x(0, 0) == 0.0);
    CHECK(x(415, 415) == 0.0);
    // the interior is the familiar 0.2 brain tissue less the two dark ellipses
    CHECK(x(208, 208) == doctest::Approx(0.2));
}

TEST_CASE("phantom generation is deterministic") {
    Geometry g(64, 64, 24, 95);
    PhantomSpec spec{PhantomKind::random_ellipses, 99, 7, 0.0, 0.04};
    Image a = make_phantom(spec, g);
    Image b = make_phantom(spec, g);
    CHECK(max_abs_diff(a.data(), b.data()) == 0.0);
    CHECK(max_value(a.data()) == doctest::Approx(0.04));
}

TEST_CASE("zero random ellipses give a zero image") {
    Geometry g(64, 64, 24, 95);
    Image x = make_phantom(PhantomSpec{PhantomKind::random_ellipses, 1, 0, 0.0, 1.0}, g);
    CHECK(max_abs(x.data()) == 0.0);
}

TEST_CASE("invalid attenuation ranges are rejected") {
    Geometry g(64, 64, 24, 95);
    CHECK_THROWS_AS(make_phantom(PhantomSpec{PhantomKind::shepp_logan, 0, 8, 0.5, 0.1}, g),
                    ValidationError);
    CHECK_THROWS_AS(make_phantom(PhantomSpec{PhantomKind::shepp_logan, 0, 8, -0.1, 1.0}, g),
                    ValidationError);
}

TEST_CASE("single disc implant has the expected pixel area") {
    Geometry g(128, 128, 24, 185);
    MetalSpec spec;
    spec.seed = 7;
    spec.n_implants = 1;
    spec.shapes = {MetalShape::disc};
    spec.size_lo = spec.size_hi = 8.0;
    Image m = make_metal(spec, g);
    auto areas = component_areas(m);
    REQUIRE(areas.size() == 1);
    CHECK(static_cast<double>(areas[0]) == doctest::Approx(M_PI * 64.0).epsilon(0.10));
    CHECK(is_binary(m.data()));
}

TEST_CASE("implant count and determinism") {
    Geometry g(128, 128, 24, 185);
    MetalSpec spec;
    spec.seed = 3;
    spec.n_implants = 3;
    spec.shapes = {MetalShape::disc, MetalShape::capsule, MetalShape::polygon};
    spec.size_lo = 4.0;
    spec.size_hi = 9.0;
    Image a = make_metal(spec, g);
    Image b = make_metal(spec, g);
    CHECK(count_components(a) == 3);
    CHECK(max_abs_diff(a.data(), b.data()) == 0.0);

    spec.n_implants = 0;
    CHECK_THROWS_AS(make_metal(spec, g), ValidationError);
}

TEST_CASE("impossible placements fail after bounded retries") {
    Geometry g(64, 64, 24, 95);
    MetalSpec spec;
    spec.n_implants = 4;
    spec.shapes = {MetalShape::disc};
    spec.size_lo = spec.size_hi = 20.0;
    CHECK_THROWS_AS(make_metal(spec, g), PipelineError);
}

TEST_CASE("metal trace of an empty mask is empty") {
    Geometry g(64, 64, 24, 95);
    Sinogram tr = metal_trace(Projector(g), Image::zeros(g));
    CHECK(max_abs(tr.data()) == 0.0);
}

TEST_CASE("trace of a centered disc has constant width across views") {
    const int n = 128;
    Geometry g(n, n, 48, 185);
    const double r = 10.0;
    // binary mask: no antialiasing, trace preconditions demand 0/1
    std::vector<double> data(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double dy = i - (n - 1) / 2.0, dx = j - (n - 1) / 2.0;
            if (dy * dy + dx * dx <= r * r) data[static_cast<std::size_t>(i) * n + j] = 1.0;
        }
    Sinogram tr = metal_trace(Projector(g), Image(n, n, 1.0, data));
    const double expected_bins = 2.0 * r / g.detector_spacing;
    for (int v = 0; v < g.n_views; ++v) {
        int width = 0;
        for (int b = 0; b < g.n_bins; ++b) width += tr(b, v) != 0.0 ? 1 : 0;
        CHECK(std::abs(width - expected_bins) <= 3.0);
    }
}

TEST_CASE("trace is monotone in the mask") {
    Geometry g(64, 64, 30, 95);
    Projector p(g);
    auto eng = make_engine(11, 1);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> small(static_cast<std::size_t>(64) * 64, 0.0);
    for (double& v : small) v = uni(eng) < 0.02 ? 1.0 : 0.0;
    std::vector<double> big = small;
    for (double& v : big) {
        if (v == 0.0 && uni(eng) < 0.02) v = 1.0;
    }
    Sinogram tr_small = metal_trace(p, Image(64, 64, 1.0, small));
    Sinogram tr_big = metal_trace(p, Image(64, 64, 1.0, big));
    for (std::int64_t i = 0; i < tr_small.size(); ++i) {
        if (tr_small.data()[i] != 0.0) CHECK(tr_big.data()[i] != 0.0);
    }
}

TEST_CASE("single-bin spectrum without metal collapses to the clean sinogram") {
    Geometry g(64, 64, 30, 95);
    Projector p(g);
    Image x = make_phantom(PhantomSpec{PhantomKind::random_ellipses, 5, 6, 0.0, 0.04}, g);
    CorruptionSpec spec;
    spec.spectrum = {{1.0, 1.0, 1.0}};
    spec.photons_i0.reset();
    CorruptionResult res = corrupt(p, x, Image::zeros(g), 0.2, spec);
    CHECK(max_abs_diff(res.y.data(), res.y_gt.data()) == 0.0);
}

TEST_CASE("beam hardening produces a deficit on one traced ray") {
    // direct evaluation oracle on a single ray: two bins, equal tissue
    // response, different metal response
    const double pt_ray = 2.0, pm_ray = 3.0;
    const double w1 = 0.5, w2 = 0.5, k1 = 2.0, k2 = 8.0;
    const double y = pt_ray + std::log(w1 * std::exp(-pt_ray) + w2 * std::exp(-pt_ray)) -
                     std::log(w1 * std::exp(-pt_ray - k1 * pm_ray) +
                              w2 * std::exp(-pt_ray - k2 * pm_ray));
    const double linear = 1.0 * pt_ray + (w1 * k1 + w2 * k2) * pm_ray;
    CHECK(y < linear);
    CHECK(y > pt_ray);  // metal still attenuates

    // and through the full operation
    Geometry g(64, 64, 30, 95);
    Projector p(g);
    Image x = make_phantom(PhantomSpec{PhantomKind::random_ellipses, 5, 6, 0.0, 0.04}, g);
    MetalSpec mspec;
    mspec.seed = 2;
    mspec.n_implants = 1;
    mspec.shapes = {MetalShape::disc};
    mspec.size_lo = mspec.size_hi = 6.0;
    Image m = make_metal(mspec, g);
    Sinogram tr = metal_trace(p, m);

    CorruptionSpec spec;
    spec.spectrum = {{0.5, 1.0, 2.0}, {0.5, 1.0, 8.0}};
    spec.photons_i0.reset();
    CorruptionResult res = corrupt(p, x, m, 0.2, spec);

    Sinogram p_m = p.forward(m);
    int checked = 0;
    for (std::int64_t i = 0; i < res.y.size(); ++i) {
        if (tr.data()[i] == 0.0) continue;
        const double lin = res.y_gt.data()[i] + 5.0 * 0.2 * p_m.data()[i];
        CHECK(res.y.data()[i] < lin);
        ++checked;
    }
    CHECK(checked > 0);
}

TEST_CASE("noiseless corruption only touches traced rays") {
    Geometry g(64, 64, 30, 95);
    Projector p(g);
    Image x = make_phantom(PhantomSpec{PhantomKind::random_ellipses, 5, 6, 0.0, 0.04}, g);
    MetalSpec mspec;
    mspec.seed = 4;
    mspec.n_implants = 2;
    mspec.shapes = {MetalShape::disc};
    mspec.size_lo = 4.0;
    mspec.size_hi = 7.0;
    Image m = make_metal(mspec, g);
    Sinogram tr = metal_trace(p, m);

    CorruptionSpec spec;  // default 3-bin spectrum
    spec.photons_i0.reset();
    CorruptionResult res = corrupt(p, x, m, 0.2, spec);
    int traced = 0;
    for (std::int64_t i = 0; i < res.y.size(); ++i) {
        if (tr.data()[i] == 0.0) {
            CHECK(res.y.data()[i] == res.y_gt.data()[i]);
        } else {
            CHECK(res.y.data()[i] > res.y_gt.data()[i]);
            ++traced;
        }
    }
    CHECK(traced > 0);
}

TEST_CASE("corruption is deterministic given seeds") {
    Geometry g(64, 64, 30, 95);
    Projector p(g);
    Image x = make_phantom(PhantomSpec{PhantomKind::random_ellipses, 5, 6, 0.0, 0.04}, g);
    MetalSpec mspec;
    mspec.seed = 4;
    mspec.n_implants = 1;
    mspec.shapes = {MetalShape::capsule};
    mspec.size_lo = mspec.size_hi = 6.0;
    Image m = make_metal(mspec, g);

    CorruptionSpec spec;
    spec.seed = 31;
    spec.photons_i0 = 1e5;  // noisy path
    CorruptionResult a = corrupt(p, x, m, 0.2, spec);
    CorruptionResult b = corrupt(p, x, m, 0.2, spec);
    CHECK(max_abs_diff(a.y.data(), b.y.data()) == 0.0);
    CHECK(max_abs_diff(a.x_ma.data(), b.x_ma.data()) == 0.0);

    spec.photons_i0.reset();
    CorruptionResult c = corrupt(p, x, m, 0.2, spec);
    CorruptionResult d = corrupt(p, x, m, 0.2, spec);
    CHECK(max_abs_diff(c.y.data(), d.y.data()) == 0.0);
}

TEST_CASE("metal streaks degrade the reconstruction") {
    Geometry g(96, 96, 120, 143);
    Projector p(g);
    Image x = make_phantom(PhantomSpec{PhantomKind::shepp_logan, 0, 0, 0.0, 0.04}, g);
    MetalSpec mspec;
    mspec.seed = 8;
    mspec.n_implants = 2;
    mspec.shapes = {MetalShape::disc};
    mspec.size_lo = 4.0;
    mspec.size_hi = 6.0;
    Image m = make_metal(mspec, g);

    CorruptionSpec spec;
    spec.photons_i0.reset();
    CorruptionResult res = corrupt(p, x, m, 0.2, spec);
    Image clean_recon = fbp_reconstruct(res.y_gt, g, FbpConfig{});
    const double psnr_ma = masked_psnr(res.x_ma, res.x_tissue, m);
    const double psnr_clean = masked_psnr(clean_recon, res.x_tissue, m);
    INFO("PSNR x_ma ", psnr_ma, " vs clean ", psnr_clean);
    CHECK(psnr_ma < psnr_clean);
}

TEST_CASE("spectrum invariants are validated") {
    Geometry g(64, 64, 30, 95);
    Projector p(g);
    Image x = Image::zeros(g);
    Image m = Image::zeros(g);
    CorruptionSpec bad;
    bad.spectrum = {{0.5, 1.0, 5.0}, {0.5, 1.0, 2.0}};  // decreasing metal_scale
    CHECK_THROWS_AS(corrupt(p, x, m, 0.2, bad), ValidationError);
    bad.spectrum = {{0.4, 1.0, 2.0}, {0.4, 1.0, 5.0}};  // weights don't sum to 1
    CHECK_THROWS_AS(corrupt(p, x, m, 0.2, bad), ValidationError);
}

}  // TEST_SUITE
