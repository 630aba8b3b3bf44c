#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ctmar/core.hpp"
#include "ctmar/fbp.hpp"
#include "ctmar/projector.hpp"

namespace ctmar {

enum class PhantomKind { shepp_logan, random_ellipses };

struct PhantomSpec {
    PhantomKind kind = PhantomKind::shepp_logan;
    std::uint64_t seed = 0;
    int n_ellipses = 8;              // random_ellipses only
    double attenuation_lo = 0.0;     // raster value range; lo maps the empty background
    double attenuation_hi = 1.0;
};

enum class MetalShape { disc, capsule, polygon };

struct MetalSpec {
    std::uint64_t seed = 0;
    int n_implants = 2;                                         // 1..4
    std::vector<MetalShape> shapes = {MetalShape::disc, MetalShape::capsule};
    double size_lo = 4.0;            // equivalent disc radius, pixels
    double size_hi = 12.0;
    double metal_mu = 0.1;           // attenuation per length unit, >> tissue
};

struct SpectrumBin {
    double weight = 1.0;
    double tissue_scale = 1.0;
    double metal_scale = 1.0;
};

/// Simplified polychromatic corruption model. The beam-hardening deficit is
/// computed relative to the tissue-only beam (the scanner water-correction
/// analogue), so rays that miss metal keep their monochromatic value:
///   Y = p_t + ln(sum_e w_e exp(-t_e p_t)) - ln(sum_e w_e exp(-t_e p_t - k_e p_m))
/// with p_t the tissue line integrals and p_m the metal-mu line integrals.
/// With photons_i0 set, Poisson noise is applied to the transmitted intensity
/// before taking the log.
struct CorruptionSpec {
    std::vector<SpectrumBin> spectrum = {
        {0.3, 0.9, 3.0}, {0.5, 1.0, 6.0}, {0.2, 1.1, 12.0}};
    std::optional<double> photons_i0 = 2.0e6;
    std::uint64_t seed = 0;
    double intensity_floor = 1e-8;  // of the incident intensity
};

Image make_phantom(const PhantomSpec& spec, const Geometry& geo);

/// Binary implant mask; exactly n_implants connected components, each kept
/// clear of the others and of the image border. Throws PipelineError when a
/// fitting placement cannot be found within the retry budget.
Image make_metal(const MetalSpec& spec, const Geometry& geo);

/// Tr = 1 wherever a ray meets any metal pixel.
Sinogram metal_trace(const Projector& proj, const Image& metal);

/// Every metal pixel replaced by the mean of nearby non-metal pixels.
Image replace_metal_with_tissue(const Image& x, const Image& metal);

struct CorruptionResult {
    Sinogram y;        // corrupted sinogram
    Sinogram y_gt;     // metal-free sinogram of the tissue image
    Image x_ma;        // FBP of y (metal-affected image)
    Image x_tissue;    // scoring ground truth: metal pixels replaced by tissue
};

/// metal_mu scales the binary mask to its attenuation before projection
/// (usually MetalSpec::metal_mu).
CorruptionResult corrupt(const Projector& proj, const Image& x_gt, const Image& metal,
                         double metal_mu, const CorruptionSpec& spec,
                         const FbpConfig& fbp_cfg = FbpConfig{});

// Mask utilities (4-connectivity).
int count_components(const Image& mask);
std::vector<std::int64_t> component_areas(const Image& mask);

}  // namespace ctmar
