#include "ctmar/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ctmar {

namespace {

constexpr double kEpsRel = 1e-6;        // normalization clamp, relative to the peak projection
constexpr double kOpNormSafety = 1.02;  // keeps the auto step below 1/L despite the
                                        // power-iteration estimate converging from below
constexpr int kOpNormIters = 40;

std::vector<double> soft_threshold(std::vector<double> v, double strength) {
    for (double& x : v) {
        const double mag = std::abs(x) - strength;
        x = mag > 0.0 ? (x < 0.0 ? -mag : mag) : 0.0;
    }
    return v;
}

// Dual (Chambolle-style) solve of min_u 0.5||u - g||^2 + strength * TV(u)
// on an h x w raster; forward-difference gradient, Neumann boundary.
std::vector<double> tv_prox(const std::vector<double>& g, int h, int w, double strength,
                            int inner_iters) {
    const std::size_t n = g.size();
    std::vector<double> py(n, 0.0), px(n, 0.0), div(n, 0.0), u(n);
    const double tau = 0.125;
    auto at = [w](int i, int j) { return static_cast<std::size_t>(i) * w + j; };

    for (int it = 0; it < inner_iters; ++it) {
        // u = div p - g / strength
        for (std::size_t k = 0; k < n; ++k) u[k] = div[k] - g[k] / strength;
        // p <- (p + tau grad u) / (1 + tau |grad u|)
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const double gy = i + 1 < h ? u[at(i + 1, j)] - u[at(i, j)] : 0.0;
                const double gx = j + 1 < w ? u[at(i, j + 1)] - u[at(i, j)] : 0.0;
                const double denom = 1.0 + tau * std::hypot(gy, gx);
                py[at(i, j)] = (py[at(i, j)] + tau * gy) / denom;
                px[at(i, j)] = (px[at(i, j)] + tau * gx) / denom;
            }
        }
        // div p with the matching adjoint boundary handling
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                double d = 0.0;
                if (i + 1 < h) d += py[at(i, j)];
                if (i > 0) d -= py[at(i - 1, j)];
                if (j + 1 < w) d += px[at(i, j)];
                if (j > 0) d -= px[at(i, j - 1)];
                div[at(i, j)] = d;
            }
        }
    }
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = g[k] - strength * div[k];
    return out;
}

std::vector<double> prox_raw(const ProxSpec& spec, std::vector<double> v, int h, int w) {
    if (!(spec.strength >= 0.0) || !std::isfinite(spec.strength)) {
        throw ValidationError("prox: strength must be finite and >= 0");
    }
    switch (spec.kind) {
        case ProxKind::identity:
            return v;
        case ProxKind::nonneg:
            for (double& x : v) x = std::max(x, 0.0);
            return v;
        case ProxKind::soft_threshold:
            return spec.strength == 0.0 ? v : soft_threshold(std::move(v), spec.strength);
        case ProxKind::tv:
            if (spec.strength == 0.0 || spec.inner_iters <= 0) return v;
            return tv_prox(v, h, w, spec.strength, spec.inner_iters);
    }
    throw ValidationError("prox: unknown kind");
}

}  // namespace

Image apply_prox(const ProxSpec& spec, const Image& x) {
    return Image(x.height(), x.width(), x.pixel_size(),
                 prox_raw(spec, x.copy_data(), x.height(), x.width()));
}

Sinogram apply_prox(const ProxSpec& spec, const Sinogram& s) {
    return Sinogram(s.bins(), s.views(), s.detector_spacing(),
                    prox_raw(spec, s.copy_data(), s.bins(), s.views()));
}

std::pair<Sinogram, double> normalization_from_prior(const Projector& proj, const Image& x_prior) {
    Sinogram fwd = proj.forward(x_prior);
    const double mx = max_value(fwd.data());
    const double eps = mx > 0.0 ? kEpsRel * mx : 1.0;  // all-zero prior degenerates to no scaling
    std::vector<double> data = fwd.copy_data();
    for (double& v : data) v = std::max(v, eps);
    return {Sinogram(fwd.bins(), fwd.views(), fwd.detector_spacing(), std::move(data)), eps};
}

PriorResult make_prior(const Sinogram& y, const Sinogram& trace, const Geometry& geo,
                       const Projector& proj, const FbpConfig& fbp_cfg) {
    Image x_li = li_reconstruct(y, trace, geo, fbp_cfg);
    std::vector<double> data = x_li.copy_data();
    for (double& v : data) v = std::max(v, 0.0);
    Image x_prior(x_li.height(), x_li.width(), x_li.pixel_size(), std::move(data));
    auto [y_tilde, eps] = normalization_from_prior(proj, x_prior);
    return PriorResult{std::move(x_prior), std::move(y_tilde), eps};
}

SolverState init_state(const Sinogram& y, const Sinogram& trace, const Sinogram& y_tilde,
                       const Image& x_prior, const SolverConfig& cfg, const Projector& proj) {
    if (!y.same_shape(y_tilde) || !y.same_shape(trace)) {
        throw ValidationError("init_state: sinogram shape mismatch");
    }
    for (double v : y_tilde.data()) {
        if (!(v > 0.0)) throw ValidationError("init_state: y_tilde must be strictly positive");
    }
    // The ratio y / y_tilde is only meaningful where the measurement is
    // trusted: traced bins hold values the data term excludes via (1 - trace),
    // so they start from the inpainted sinogram instead (untraced bins come
    // back bit-identical from li_inpaint). Rays whose prior projection sat at
    // the clamp carry no usable ratio and start at the neutral 1.
    Sinogram y_start = li_inpaint(y, trace);
    const double eps = kEpsRel * max_value(y_tilde.data());
    std::vector<double> s0(static_cast<std::size_t>(y.size()));
    for (std::int64_t i = 0; i < y.size(); ++i) {
        s0[i] = y_tilde.data()[i] <= eps ? 1.0 : y_start.data()[i] / y_tilde.data()[i];
    }
    SolverState st{Sinogram(y.bins(), y.views(), y.detector_spacing(), std::move(s0)), y_tilde,
                   Sinogram::zeros(y.bins(), y.views(), y.detector_spacing()),
                   apply_prox(cfg.prox_x, x_prior), 0, 0.0};
    st.px = proj.forward(st.x);
    st.objective = objective_value(st, y, trace, cfg.alpha);
    return st;
}

double objective_value(const SolverState& st, const Sinogram& y, const Sinogram& trace,
                       double alpha) {
    const double* s = st.s_tilde.data().data();
    const double* yt = st.y_tilde.data().data();
    const double* px = st.px.data().data();
    const double* yd = y.data().data();
    const double* tr = trace.data().data();
    double consistency = 0.0, data_fit = 0.0;
    for (std::int64_t i = 0; i < y.size(); ++i) {
        const double syn = yt[i] * s[i];
        const double r1 = px[i] - syn;
        consistency += r1 * r1;
        const double r2 = (1.0 - tr[i]) * (syn - yd[i]);
        data_fit += r2 * r2;
    }
    return consistency + alpha * data_fit;
}

Sinogram grad_f_s(const SolverState& st, const Sinogram& y, const Sinogram& trace, double alpha) {
    const double* s = st.s_tilde.data().data();
    const double* yt = st.y_tilde.data().data();
    const double* px = st.px.data().data();
    const double* yd = y.data().data();
    const double* tr = trace.data().data();
    std::vector<double> g(static_cast<std::size_t>(y.size()));
    for (std::int64_t i = 0; i < y.size(); ++i) {
        const double syn = yt[i] * s[i];
        g[i] = yt[i] * (syn - px[i]) + alpha * (1.0 - tr[i]) * yt[i] * (syn - yd[i]);
    }
    return Sinogram(y.bins(), y.views(), y.detector_spacing(), std::move(g));
}

SolverConfig resolve_step_sizes(const SolverConfig& cfg, const Sinogram& y_tilde,
                                const Projector& proj) {
    if (cfg.n_stages < 1) throw ValidationError("solver: n_stages must be >= 1");
    if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha)) {
        throw ValidationError("solver: alpha must be positive and finite");
    }
    SolverConfig out = cfg;
    if (!out.eta1) {
        const double mx = max_value(y_tilde.data());
        out.eta1 = 1.0 / ((1.0 + cfg.alpha) * mx * mx);
    }
    if (!out.eta2) {
        out.eta2 = 1.0 / (kOpNormSafety * proj.op_norm_sq(kOpNormIters));
    }
    if (!(*out.eta1 > 0.0) || !std::isfinite(*out.eta1) || !(*out.eta2 > 0.0) ||
        !std::isfinite(*out.eta2)) {
        throw ValidationError("solver: step sizes must resolve to positive finite values");
    }
    return out;
}

void step_s(SolverState& st, const Sinogram& y, const Sinogram& trace, const SolverConfig& cfg) {
    if (!cfg.eta1) throw ValidationError("step_s: eta1 not resolved");
    Sinogram g = grad_f_s(st, y, trace, cfg.alpha);
    std::vector<double> s_hat = st.s_tilde.copy_data();
    const double eta = *cfg.eta1;
    for (std::int64_t i = 0; i < y.size(); ++i) s_hat[i] -= eta * g.data()[i];
    st.s_tilde = apply_prox(
        cfg.prox_s, Sinogram(y.bins(), y.views(), y.detector_spacing(), std::move(s_hat)));
}

void step_x(SolverState& st, const Sinogram& y, const Sinogram& trace, const SolverConfig& cfg,
            const Projector& proj) {
    if (!cfg.eta2) throw ValidationError("step_x: eta2 not resolved");
    std::vector<double> residual(static_cast<std::size_t>(y.size()));
    for (std::int64_t i = 0; i < y.size(); ++i) {
        residual[i] = st.px.data()[i] - st.y_tilde.data()[i] * st.s_tilde.data()[i];
    }
    Image grad = proj.adjoint(Sinogram(y.bins(), y.views(), y.detector_spacing(), std::move(residual)));
    std::vector<double> x_hat = st.x.copy_data();
    const double eta = *cfg.eta2;
    for (std::int64_t i = 0; i < st.x.size(); ++i) x_hat[i] -= eta * grad.data()[i];
    st.x = apply_prox(cfg.prox_x, Image(st.x.height(), st.x.width(), st.x.pixel_size(), std::move(x_hat)));
    st.px = proj.forward(st.x);
    st.stage += 1;
    st.objective = objective_value(st, y, trace, cfg.alpha);
    if (!std::isfinite(st.objective)) {
        std::ostringstream os;
        os << "solver: non-finite state at stage " << st.stage;
        throw PipelineError(os.str());
    }
}

namespace {

SolveResult run_stages(const Sinogram& y, const Sinogram& trace, const Image& x_prior,
                       const Sinogram& y_tilde, const SolverConfig& raw_cfg, const Projector& proj) {
    SolverConfig cfg = resolve_step_sizes(raw_cfg, y_tilde, proj);
    SolverState st = init_state(y, trace, y_tilde, x_prior, cfg, proj);
    std::vector<SolverState> stages;
    if (cfg.record_stages) stages.push_back(st);
    for (int n = 1; n <= cfg.n_stages; ++n) {
        step_s(st, y, trace, cfg);
        step_x(st, y, trace, cfg, proj);
        if (cfg.record_stages) stages.push_back(st);
    }
    std::vector<double> s(static_cast<std::size_t>(y.size()));
    for (std::int64_t i = 0; i < y.size(); ++i) {
        s[i] = st.y_tilde.data()[i] * st.s_tilde.data()[i];
    }
    return SolveResult{std::move(st.x),
                       Sinogram(y.bins(), y.views(), y.detector_spacing(), std::move(s)),
                       std::move(stages)};
}

}  // namespace

SolveResult solve(const Sinogram& y, const Sinogram& trace, const Geometry& geo,
                  const SolverConfig& cfg, const Projector& proj, const FbpConfig& fbp_cfg) {
    if (!y.same_shape(trace)) throw ValidationError("solve: trace shape mismatch");
    if (!is_binary(trace.data())) throw ValidationError("solve: trace must be binary");
    PriorResult prior = make_prior(y, trace, geo, proj, fbp_cfg);
    return run_stages(y, trace, prior.x_prior, prior.y_tilde, cfg, proj);
}

SolveResult solve_with_prior(const Sinogram& y, const Sinogram& trace, const Image& x_prior,
                             const SolverConfig& cfg, const Projector& proj) {
    if (!y.same_shape(trace)) throw ValidationError("solve: trace shape mismatch");
    if (!is_binary(trace.data())) throw ValidationError("solve: trace must be binary");
    auto [y_tilde, eps] = normalization_from_prior(proj, x_prior);
    return run_stages(y, trace, x_prior, y_tilde, cfg, proj);
}

}  // namespace ctmar
