#pragma once

#include "ctmar/core.hpp"

namespace ctmar {

enum class FbpFilter { ram_lak, hann_windowed_ram_lak };

struct FbpConfig {
    FbpFilter filter = FbpFilter::hann_windowed_ram_lak;
    int pad_factor = 2;  // power-of-two zero-padding multiplier, >= 2
};

/// Ramp-filters each view along the bin axis in the frequency domain,
/// zero-padded to the next power of two >= pad_factor * n_bins.
Sinogram ramp_filter(const Sinogram& sino, const FbpConfig& cfg);

/// Filtered back-projection: ramp_filter followed by the adjoint projector,
/// scaled for views uniformly covering 360 degrees.
Image fbp_reconstruct(const Sinogram& sino, const Geometry& geo, const FbpConfig& cfg);

}  // namespace ctmar
