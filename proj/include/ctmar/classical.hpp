#pragma once

#include "ctmar/core.hpp"
#include "ctmar/fbp.hpp"
#include "ctmar/projector.hpp"

namespace ctmar {

/// Per view, replaces each maximal run of traced bins by linear interpolation
/// between the nearest untraced flanking bins. Runs touching a detector edge
/// are filled by constant extension of the available flank. Untraced bins are
/// returned bit-identical. Throws PipelineError on a fully traced view.
Sinogram li_inpaint(const Sinogram& y, const Sinogram& trace);

/// FBP of the inpainted sinogram.
Image li_reconstruct(const Sinogram& y, const Sinogram& trace, const Geometry& geo,
                     const FbpConfig& fbp_cfg);

// Thresholds follow the conventional 0.3x / 1.5x water rule; water_value
// matches the toolkit's standard phantom scale (soft tissue around 0.008
// attenuation per pixel unit) and is configurable per experiment.
struct NmarConfig {
    double water_value = 0.008;
    double air_threshold = 0.3 * 0.008;   // below: air (0)
    double bone_threshold = 1.5 * 0.008;  // above: keep; between: water_value
    double smooth_sigma = 2.0;            // pixels, on the segmented prior
    double eps_rel = 1e-6;                // normalization guard, relative to max projection
};

/// Normalized MAR: flatten the sinogram by the forward projection of a
/// segmented prior image, inpaint the trace, then undo the normalization.
Image nmar_reconstruct(const Sinogram& y, const Sinogram& trace, const Image& x_ma,
                       const NmarConfig& cfg, const Geometry& geo, const FbpConfig& fbp_cfg,
                       const Projector& proj);

/// The air/water/bone segmentation with Gaussian smoothing that NMAR uses.
Image nmar_prior(const Image& x_ma, const NmarConfig& cfg);

/// NMAR with an externally supplied prior image.
Image nmar_reconstruct_with_prior(const Sinogram& y, const Sinogram& trace, const Image& prior,
                                  const Geometry& geo, const FbpConfig& fbp_cfg,
                                  const Projector& proj, double eps_rel = 1e-6);

}  // namespace ctmar
