#pragma once

#include <optional>
#include <vector>

#include "ctmar/classical.hpp"
#include "ctmar/core.hpp"
#include "ctmar/fbp.hpp"
#include "ctmar/projector.hpp"

namespace ctmar {

enum class ProxKind { identity, nonneg, tv, soft_threshold };

/// Proximal operator applied after each gradient step. strength plays the
/// lambda*eta product of the underlying regularizer.
struct ProxSpec {
    ProxKind kind = ProxKind::identity;
    double strength = 0.0;
    int inner_iters = 20;  // tv only
};

Image apply_prox(const ProxSpec& spec, const Image& x);
Sinogram apply_prox(const ProxSpec& spec, const Sinogram& s);

struct SolverConfig {
    int n_stages = 10;
    double alpha = 1.0;                  // off-trace data consistency weight
    std::optional<double> eta1;          // empty = 1 / ((1+alpha) * max(y_tilde)^2)
    std::optional<double> eta2;          // empty = 1 / (1.02 * ||P||^2 estimate)
    ProxSpec prox_s{ProxKind::soft_threshold, 0.001};
    ProxSpec prox_x{ProxKind::nonneg, 0.0};
    bool record_stages = false;
};

/// Joint state of the alternating updates. px caches forward(x) and is kept
/// in sync by the step functions.
struct SolverState {
    Sinogram s_tilde;   // normalized sinogram
    Sinogram y_tilde;   // normalization coefficient (projection of the prior)
    Sinogram px;        // forward projection of x
    Image x;            // reconstructed image
    int stage = 0;
    double objective = 0.0;
};

struct PriorResult {
    Image x_prior;
    Sinogram y_tilde;
    double eps_tilde;  // clamp level used for empty rays
};

/// Prior image from LI reconstruction (clamped to >= 0) and its forward
/// projection clamped to a strictly positive normalization coefficient.
PriorResult make_prior(const Sinogram& y, const Sinogram& trace, const Geometry& geo,
                       const Projector& proj, const FbpConfig& fbp_cfg);

/// Normalization coefficient for an externally supplied prior image.
std::pair<Sinogram, double> normalization_from_prior(const Projector& proj, const Image& x_prior);

/// Stage-0 state: x = prox_x(x_prior), s_tilde = y / y_tilde, with s_tilde
/// set to 1 on rays whose prior projection sat at the clamp (empty rays have
/// no meaningful ratio).
SolverState init_state(const Sinogram& y, const Sinogram& trace, const Sinogram& y_tilde,
                       const Image& x_prior, const SolverConfig& cfg, const Projector& proj);

/// Squared consistency residual plus the weighted off-trace data residual:
///   ||px - y_tilde . s_tilde||^2 + alpha ||(1 - trace) . (y_tilde . s_tilde - y)||^2
double objective_value(const SolverState& st, const Sinogram& y, const Sinogram& trace,
                       double alpha);

/// Gradient of half the objective with respect to s_tilde:
///   y_tilde.(y_tilde.s_tilde - px) + alpha (1-trace).y_tilde.(y_tilde.s_tilde - y)
/// The half keeps the update formulas free of a factor 2.
Sinogram grad_f_s(const SolverState& st, const Sinogram& y, const Sinogram& trace, double alpha);

/// Fills empty step sizes with their Lipschitz-safe defaults.
SolverConfig resolve_step_sizes(const SolverConfig& cfg, const Sinogram& y_tilde,
                                const Projector& proj);

/// s_tilde <- prox_s(s_tilde - eta1 * grad_f_s(...)); x untouched.
void step_s(SolverState& st, const Sinogram& y, const Sinogram& trace, const SolverConfig& cfg);

/// x <- prox_x(x - eta2 * P'(px - y_tilde . s_tilde)); advances the stage and
/// recomputes px and the objective. Throws PipelineError when the state goes
/// non-finite.
void step_x(SolverState& st, const Sinogram& y, const Sinogram& trace, const SolverConfig& cfg,
            const Projector& proj);

struct SolveResult {
    Image x;
    Sinogram s;                        // y_tilde . s_tilde at the final stage
    std::vector<SolverState> stages;   // filled when record_stages is set
};

/// Full run: prior, initialization, then n_stages alternating updates.
SolveResult solve(const Sinogram& y, const Sinogram& trace, const Geometry& geo,
                  const SolverConfig& cfg, const Projector& proj, const FbpConfig& fbp_cfg);

/// Same, with an injected prior image instead of the LI prior.
SolveResult solve_with_prior(const Sinogram& y, const Sinogram& trace, const Image& x_prior,
                             const SolverConfig& cfg, const Projector& proj);

}  // namespace ctmar
