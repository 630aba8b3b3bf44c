#pragma once

#include <cstdint>

#include "ctmar/core.hpp"

namespace ctmar {

enum class Interp { joseph_linear };

/// Parallel-beam Radon transform and its exact algebraic transpose.
///
/// Rays are marched at the detector-bin centers with a fixed step of half a
/// pixel; samples are read (forward) or deposited (adjoint) with the same
/// bilinear weights, so <Px, y> == <x, P'y> up to rounding. View angles are
/// uniform over [0, 2pi).
class Projector {
  public:
    explicit Projector(const Geometry& geo, Interp interp = Interp::joseph_linear);

    const Geometry& geometry() const { return geo_; }
    Interp interpolation() const { return interp_; }

    Sinogram forward(const Image& x) const;
    Image adjoint(const Sinogram& y) const;

    /// Power-iteration estimate of ||P||^2 (largest eigenvalue of P'P).
    /// Deterministic given the seed; nondecreasing in iters up to convergence.
    double op_norm_sq(int iters, std::uint64_t seed = 0x706f776572ULL) const;

  private:
    Geometry geo_;
    Interp interp_;
    std::vector<double> cos_;
    std::vector<double> sin_;
    double step_;       // physical integration step along the ray
    double t_start_;    // first sample offset from the ray midpoint
    int n_samples_;
};

}  // namespace ctmar
