#include "lle/canonical.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "lle/errors.hpp"
#include "lle/optimizer.hpp"

namespace lle {

std::string to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::DDRM: return "DDRM";
        case Algorithm::DDNM: return "DDNM";
        case Algorithm::DPS: return "DPS";
        case Algorithm::PiGDM: return "PiGDM";
        case Algorithm::REDdiff: return "REDdiff";
        case Algorithm::DiffPIR: return "DiffPIR";
        case Algorithm::DMPS: return "DMPS";
        case Algorithm::ReSample: return "ReSample";
        case Algorithm::DAPS: return "DAPS";
    }
    return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
    std::string key;
    for (char c : name)
        if (c != '-' && c != '_') key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (Algorithm a : kAllAlgorithms) {
        std::string canon;
        for (char c : to_string(a)) canon += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (canon == key) return a;
    }
    if (key == "pgdm" || key == "πgdm") return Algorithm::PiGDM;
    throw ConfigError("unknown algorithm '" + name + "'");
}

bool requires_linear_operator(Algorithm algorithm) {
    return algorithm == Algorithm::DDRM || algorithm == Algorithm::DDNM ||
           algorithm == Algorithm::PiGDM || algorithm == Algorithm::DMPS;
}

AlgoParams AlgoParams::defaults(Algorithm algorithm) {
    AlgoParams p;
    p.algorithm = algorithm;
    switch (algorithm) {
        case Algorithm::DDRM:
            p.eta = 0.85;
            p.eta_b = 1.0;
            break;
        case Algorithm::DDNM: p.eta = 0.85; break;
        case Algorithm::DPS:
            p.eta = 1.0;
            p.zeta = 1.0;
            break;
        case Algorithm::PiGDM: p.eta = 1.0; break;
        case Algorithm::REDdiff:
            p.xi = 1.0;
            p.lambda = 0.5;
            break;
        case Algorithm::DiffPIR:
            p.eta = 1.0;
            p.lambda = 7.0;
            p.inner_opt = {0.1, 0.0, 50};
            break;
        case Algorithm::DMPS:
            p.eta = 0.85;
            p.lambda = 1.0;
            break;
        case Algorithm::ReSample:
            p.eta = 1.0;
            p.gamma_rs = 100.0;
            p.inner_opt = {0.01, 0.9, 50};
            break;
        case Algorithm::DAPS: break;
    }
    return p;
}

namespace {

struct Alphas {
    double a;   // alphabar(t_i)
    double ap;  // alphabar(t_{i-1})
    double sp;  // sqrt(1 - ap)
};

Alphas alphas(const DiffusionModel& model, const StepContext& ctx) {
    const double a = model.schedule.alphabar(ctx.t);
    const double ap = model.schedule.alphabar(ctx.t_prev);
    return {a, ap, std::sqrt(1.0 - ap)};
}

// Spectral observation U^T y, its per-coordinate scaling by 1/s, and x0 in the V basis.
struct Spectral {
    Vec uty;
    Vec ybar;
    Vec xbar;
};

Spectral spectral(const LinearOperator& op, const Vec& y, const Vec& x0) {
    Spectral sp;
    sp.uty = op.u().transpose() * y;
    sp.ybar = sp.uty.cwiseQuotient(op.s());
    sp.xbar = op.v().transpose() * x0;
    return sp;
}

void check_finite_param(double value, const char* name) {
    if (!std::isfinite(value)) throw ConfigError(std::string("parameter ") + name + " is not finite");
}

void check_eta(double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
}

Vec least_norm_correction(const LinearOperator& op, const Vec& x0, const Vec& y) {
    return x0 + op.pinv_apply(y - op.apply(x0));
}

}  // namespace

// --- Sampler ---------------------------------------------------------------

Vec sample_phi(const AlgoParams& params, const DiffusionModel& model, const Vec& x_t, int t,
               const Vec& eps) {
    if (t < 1) throw BoundsError("sampler requires t >= 1");
    if (params.algorithm == Algorithm::DAPS) {
        if (params.daps.k_ddim < 1) throw ConfigError("DAPS k_ddim must be >= 1");
        if (params.daps.k_ddim == 1) return tweedie_from_eps(model.schedule, x_t, t, eps);
        RngStream unused(0, 0);
        return ddim_run(model.prior, model.schedule, x_t, t, params.daps.k_ddim, 0.0, unused);
    }
    return tweedie_from_eps(model.schedule, x_t, t, eps);
}

// --- Correctors ------------------------------------------------------------

Vec corr_ddnm(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
              const AlgoParams& params) {
    const LinearOperator& op = obs.op.linear("DDNM corrector");
    check_eta(params.eta);
    const Alphas al = alphas(model, ctx);
    const Spectral sp = spectral(op, obs.y, ctx.x0);
    const double sy = obs.sigma_y;
    Vec delta(op.rank());
    for (int k = 0; k < op.rank(); ++k) {
        const double s = op.s()(k);
        double lam = 1.0;
        if (sy > 0.0 && al.sp < std::sqrt(al.ap) * sy / s)
            lam = s * al.sp * std::sqrt(1.0 - params.eta * params.eta) / (std::sqrt(al.ap) * sy);
        delta(k) = lam * (sp.ybar(k) - sp.xbar(k));
    }
    return ctx.x0 + op.v() * delta;
}

Vec corr_ddrm(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
              const AlgoParams& params) {
    const LinearOperator& op = obs.op.linear("DDRM corrector");
    check_eta(params.eta);
    check_finite_param(params.eta_b, "eta_b");
    const Alphas al = alphas(model, ctx);
    const Spectral sp = spectral(op, obs.y, ctx.x0);
    const double sy = obs.sigma_y;
    Vec delta(op.rank());
    for (int k = 0; k < op.rank(); ++k) {
        const double s = op.s()(k);
        const double noise_k = sy / s;
        double next;
        if (sy > 0.0 && al.sp < std::sqrt(al.ap) * noise_k) {
            next = sp.xbar(k) + std::sqrt(1.0 - params.eta * params.eta) *
                                    (al.sp / std::sqrt(al.ap)) * (sp.ybar(k) - sp.xbar(k)) /
                                    noise_k;
        } else {
            next = (1.0 - params.eta_b) * sp.xbar(k) + params.eta_b * sp.ybar(k);
        }
        delta(k) = next - sp.xbar(k);
    }
    return ctx.x0 + op.v() * delta;
}

Vec dps_gradient(const DiffusionModel& model, const StepContext& ctx, const Observation& obs) {
    const Vec g0 = obs.op.residual_grad(ctx.x0, obs.y);
    return tweedie_jvp(model.prior, model.schedule, ctx.x_t, ctx.t, g0);
}

Vec corr_dps(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
             const AlgoParams& params) {
    check_finite_param(params.zeta, "zeta");
    if (params.zeta == 0.0) return ctx.x0;
    const Alphas al = alphas(model, ctx);
    const double zeta_t = params.zeta * std::sqrt(al.a);
    return ctx.x0 - (zeta_t / std::sqrt(al.ap)) * dps_gradient(model, ctx, obs);
}

Vec corr_pigdm(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
               const AlgoParams& params) {
    (void)params;
    const LinearOperator& op = obs.op.linear("PiGDM corrector");
    const Alphas al = alphas(model, ctx);
    const double r2 = 1.0 - al.a;
    const double sy2 = obs.sigma_y * obs.sigma_y;
    if (sy2 == 0.0 && r2 == 0.0) throw NumericError("PiGDM corrector: singular inner solve at t = 0");
    const double ratio = sy2 == 0.0 ? 0.0 : sy2 / r2;
    // A^T annihilates the complement of range(U), so only range coordinates matter.
    const Vec res = op.u().transpose() * (obs.y - op.apply(ctx.x0));
    Vec w(op.rank());
    for (int k = 0; k < op.rank(); ++k) {
        const double s = op.s()(k);
        w(k) = s * res(k) / (s * s + ratio);
    }
    const Vec g = op.v() * w;
    return ctx.x0 +
           std::sqrt(al.a / al.ap) * tweedie_jvp(model.prior, model.schedule, ctx.x_t, ctx.t, g);
}

Vec corr_reddiff(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
                 const AlgoParams& params) {
    (void)model;
    check_finite_param(params.xi, "xi");
    check_finite_param(params.lambda, "lambda");
    const Vec& p = ctx.prev_estimate ? *ctx.prev_estimate : ctx.x0;
    Vec step = ctx.x0 - p;
    if (params.lambda != 0.0) step -= params.lambda * obs.op.residual_grad(ctx.x0, obs.y);
    return p + params.xi * step;
}

double diffpir_rho(const DiffusionModel& model, int t, double sigma_y, double lambda) {
    const double a = model.schedule.alphabar(t);
    if (a >= 1.0) return sigma_y == 0.0 || lambda == 0.0 ? 0.0 : INFINITY;
    return lambda * sigma_y * sigma_y * a / (1.0 - a);
}

Vec corr_diffpir(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
                 const AlgoParams& params) {
    check_finite_param(params.lambda, "lambda");
    const double rho = diffpir_rho(model, ctx.t, obs.sigma_y, params.lambda);
    const LinearOperator* lin = obs.op.linear_or_null();
    if (lin && !params.force_inner_optimizer) {
        if (rho < 1e-12) return least_norm_correction(*lin, ctx.x0, obs.y);
        const Spectral sp = spectral(*lin, obs.y, ctx.x0);
        Vec delta(lin->rank());
        for (int k = 0; k < lin->rank(); ++k) {
            const double s = lin->s()(k);
            delta(k) = (s * sp.uty(k) + rho * sp.xbar(k)) / (s * s + rho) - sp.xbar(k);
        }
        return ctx.x0 + lin->v() * delta;
    }
    if (params.inner_opt.steps <= 0) return ctx.x0;
    const Vec& x0 = ctx.x0;
    const LossAndGrad f = [&](const Vec& x, Vec* grad) {
        const Vec r = obs.op.apply(x) - obs.y;
        const Vec d = x - x0;
        if (grad) *grad = 2.0 * obs.op.vjp(x, r) + 2.0 * rho * d;
        return r.squaredNorm() + rho * d.squaredNorm();
    };
    ScheduleFreeAdamW opt(x0, 0);
    return minimize(f, opt, params.inner_opt.steps, params.inner_opt.lr);
}

Vec corr_dmps(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
              const AlgoParams& params) {
    const LinearOperator& op = obs.op.linear("DMPS corrector");
    check_finite_param(params.lambda, "lambda");
    if (params.lambda == 0.0) return ctx.x0;
    const Alphas al = alphas(model, ctx);
    const double sy2 = obs.sigma_y * obs.sigma_y;
    if (sy2 == 0.0 && al.a >= 1.0) throw NumericError("DMPS corrector: singular inner solve");
    const double alpha = al.a / al.ap;
    const double sqa = std::sqrt(al.a);
    const Vec uty = op.u().transpose() * obs.y;
    const Vec vxt = op.v().transpose() * ctx.x_t;
    Vec w(op.rank());
    for (int k = 0; k < op.rank(); ++k) {
        const double s = op.s()(k);
        const double innovation = uty(k) - s * vxt(k) / sqa;
        w(k) = s * innovation / (sy2 + ((1.0 - al.a) / al.a) * s * s);
    }
    const Vec grad_log = (op.v() * w) / sqa;
    const double coef = params.lambda * (1.0 - alpha) / std::sqrt(alpha) / std::sqrt(al.ap);
    return ctx.x0 + coef * grad_log;
}

Vec corr_resample(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
                  const AlgoParams& params) {
    (void)model;
    if (params.exact_hc) return least_norm_correction(obs.op.linear("exact hard consistency"), ctx.x0, obs.y);
    if (params.inner_opt.steps <= 0) return ctx.x0;
    const LossAndGrad f = [&](const Vec& x, Vec* grad) {
        const Vec r = obs.op.apply(x) - obs.y;
        if (grad) *grad = 2.0 * obs.op.vjp(x, r);
        return r.squaredNorm();
    };
    MomentumSGD opt(ctx.x0, params.inner_opt.momentum);
    return minimize(f, opt, params.inner_opt.steps, params.inner_opt.lr);
}

double daps_step_size(const DiffusionModel& model, const DapsParams& daps, int t) {
    const double frac = static_cast<double>(t) / model.schedule.horizon();
    return daps.eta0 * (daps.delta + frac * (1.0 - daps.delta));
}

Vec corr_daps(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
              const AlgoParams& params, RngStream& stream) {
    const DapsParams& d = params.daps;
    if (d.n_langevin < 0) throw ConfigError("DAPS n_langevin must be >= 0");
    const LinearOperator* lin = nullptr;
    if (d.noiseless_linear) {
        lin = &obs.op.linear("DAPS noiseless-linear corrector");
    } else if (!(d.sigma_langevin > 0.0)) {
        throw ConfigError("DAPS sigma_langevin must be > 0 unless noiseless_linear is set");
    }
    if (d.n_langevin == 0) return ctx.x0;
    const double r2 = 1.0 - model.schedule.alphabar(ctx.t);
    if (!(r2 > 0.0)) throw NumericError("DAPS corrector requires t >= 1");
    const double eta = daps_step_size(model, d, ctx.t);
    const double noise_scale = std::sqrt(2.0 * eta);
    const double inv_s2 = 1.0 / (d.sigma_langevin * d.sigma_langevin);
    Vec x = ctx.x0;
    for (int j = 0; j < d.n_langevin; ++j) {
        Vec grad = (x - ctx.x0) / r2;
        if (lin) {
            grad += lin->apply_adjoint(lin->apply(x) - obs.y) / eta;
        } else {
            grad += obs.op.vjp(x, obs.op.apply(x) - obs.y) * inv_s2;
        }
        x = x - eta * grad + noise_scale * sample_standard_normal(stream, x.size());
    }
    return x;
}

Vec correct(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
            const AlgoParams& params, RngStream& stream) {
    switch (params.algorithm) {
        case Algorithm::DDRM: return corr_ddrm(model, ctx, obs, params);
        case Algorithm::DDNM: return corr_ddnm(model, ctx, obs, params);
        case Algorithm::DPS: return corr_dps(model, ctx, obs, params);
        case Algorithm::PiGDM: return corr_pigdm(model, ctx, obs, params);
        case Algorithm::REDdiff: return corr_reddiff(model, ctx, obs, params);
        case Algorithm::DiffPIR: return corr_diffpir(model, ctx, obs, params);
        case Algorithm::DMPS: return corr_dmps(model, ctx, obs, params);
        case Algorithm::ReSample: return corr_resample(model, ctx, obs, params);
        case Algorithm::DAPS: return corr_daps(model, ctx, obs, params, stream);
    }
    throw ConfigError("unknown algorithm");
}

// --- Noisers ---------------------------------------------------------------

Vec noiser_ddim(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                double eta, const Vec& noise) {
    const DdimCoefficients c = ddim_coefficients(model.schedule, ctx.t, ctx.t_prev, eta);
    const double ap = model.schedule.alphabar(ctx.t_prev);
    return std::sqrt(ap) * estimate + c.c1 * noise + c.c2 * ctx.eps;
}

Vec noiser_dmps(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                double eta, const Vec& noise) {
    check_eta(eta);
    const double ap = model.schedule.alphabar(ctx.t_prev);
    const double sp = std::sqrt(1.0 - ap);
    return std::sqrt(ap) * estimate + eta * sp * noise + std::sqrt(1.0 - eta * eta) * sp * ctx.eps;
}

Vec noiser_direct(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                  const Vec& noise) {
    const double ap = model.schedule.alphabar(ctx.t_prev);
    return std::sqrt(ap) * estimate + std::sqrt(1.0 - ap) * noise;
}

namespace {

// Shared three-branch noiser of DDRM and DDNM; DDNM is the eta_b = 1 case.
Vec spectral_noiser(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                    const Observation& obs, double eta, double eta_b, const Vec& noise,
                    const char* caller) {
    const LinearOperator& op = obs.op.linear(caller);
    check_eta(eta);
    const double ap = model.schedule.alphabar(ctx.t_prev);
    const double sqap = std::sqrt(ap);
    const double sp = std::sqrt(1.0 - ap);
    const double sy = obs.sigma_y;

    const Vec null_part = op.project_null(sqap * estimate +
                                          std::sqrt(1.0 - eta * eta) * sp * ctx.eps +
                                          eta * sp * noise);
    const Vec xb = op.v().transpose() * estimate;
    const Vec nb = op.v().transpose() * noise;
    Vec range(op.rank());
    for (int k = 0; k < op.rank(); ++k) {
        const double s = op.s()(k);
        if (sy > 0.0 && sp < sqap * sy / s) {
            range(k) = sqap * xb(k) + eta * sp * nb(k);
        } else {
            double rad = 1.0 - ap - ap * sy * sy * eta_b * eta_b / (s * s);
            if (rad < -1e-12)
                throw NumericError(std::string(caller) + ": negative noise radicand " +
                                   std::to_string(rad));
            if (rad < 0.0) rad = 0.0;
            range(k) = sqap * xb(k) + std::sqrt(rad) * nb(k);
        }
    }
    return null_part + op.v() * range;
}

}  // namespace

Vec noiser_ddrm(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                const Observation& obs, const AlgoParams& params, const Vec& noise) {
    return spectral_noiser(model, estimate, ctx, obs, params.eta, params.eta_b, noise,
                           "DDRM noiser");
}

Vec noiser_ddnm(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                const Observation& obs, const AlgoParams& params, const Vec& noise) {
    return spectral_noiser(model, estimate, ctx, obs, params.eta, 1.0, noise, "DDNM noiser");
}

Vec noiser_diffpir(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                   double eta, const Vec& noise) {
    check_eta(eta);
    const double a = model.schedule.alphabar(ctx.t);
    const double ap = model.schedule.alphabar(ctx.t_prev);
    const double sp = std::sqrt(1.0 - ap);
    if (a >= 1.0) throw BoundsError("DiffPIR noiser requires t >= 1");
    const Vec eps_hat = (ctx.x_t - std::sqrt(a) * estimate) / std::sqrt(1.0 - a);
    return std::sqrt(ap) * estimate + eta * sp * noise + std::sqrt(1.0 - eta * eta) * sp * eps_hat;
}

Vec noiser_resample(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                    const AlgoParams& params, const Vec& encode_noise, const Vec& blend_noise) {
    const double a = model.schedule.alphabar(ctx.t);
    const double ap = model.schedule.alphabar(ctx.t_prev);
    const DdimCoefficients c = ddim_coefficients(model.schedule, ctx.t, ctx.t_prev, params.eta);
    const Vec x_enc = std::sqrt(ap) * ctx.x0 + c.c1 * encode_noise + c.c2 * ctx.eps;
    const double var = params.gamma_rs * ((1.0 - ap) / a) * (1.0 - a / ap);
    const double denom = var + 1.0 - ap;
    if (denom <= 0.0) return estimate;
    return (var * std::sqrt(ap) * estimate + (1.0 - ap) * x_enc) / denom +
           std::sqrt(var * (1.0 - ap) / denom) * blend_noise;
}

Vec renoise(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
            const Observation& obs, const AlgoParams& params, RngStream& stream) {
    const auto n = static_cast<std::size_t>(estimate.size());
    const Vec noise = sample_standard_normal(stream, n);
    switch (params.algorithm) {
        case Algorithm::DDRM: return noiser_ddrm(model, estimate, ctx, obs, params, noise);
        case Algorithm::DDNM: return noiser_ddnm(model, estimate, ctx, obs, params, noise);
        case Algorithm::DPS:
        case Algorithm::PiGDM: return noiser_ddim(model, estimate, ctx, params.eta, noise);
        case Algorithm::DMPS: return noiser_dmps(model, estimate, ctx, params.eta, noise);
        case Algorithm::REDdiff:
        case Algorithm::DAPS: return noiser_direct(model, estimate, ctx, noise);
        case Algorithm::DiffPIR: return noiser_diffpir(model, estimate, ctx, params.eta, noise);
        case Algorithm::ReSample: {
            const Vec blend = sample_standard_normal(stream, n);
            return noiser_resample(model, estimate, ctx, params, noise, blend);
        }
    }
    throw ConfigError("unknown algorithm");
}

// --- Trajectory ------------------------------------------------------------

SolverState initial_state(const TimeGrid& grid, int dim, RngStream& stream) {
    if (grid.steps < 1) throw ConfigError("time grid must have at least one step");
    SolverState state;
    state.step = grid.steps;
    state.x_t = sample_standard_normal(stream, static_cast<std::size_t>(dim));
    return state;
}

StepContext begin_step(const AlgoParams& params, const DiffusionModel& model,
                       const Observation& obs, const TimeGrid& grid, const SolverState& state,
                       RngStream& stream) {
    if (state.step < 1 || state.step > grid.steps) throw BoundsError("solver state already finished");
    if (requires_linear_operator(params.algorithm) && !obs.op.is_linear())
        throw ConfigError(to_string(params.algorithm) + " requires a linear operator (unsupported operator)");
    StepContext ctx;
    ctx.step = state.step;
    ctx.t = grid.at(state.step);
    ctx.t_prev = grid.at(state.step - 1);
    ctx.x_t = state.x_t;
    ctx.prev_estimate = state.prev_estimate;
    ctx.eps = gmm_eps(model.prior, model.schedule, ctx.x_t, ctx.t);
    ctx.x0 = sample_phi(params, model, ctx.x_t, ctx.t, ctx.eps);
    ctx.xhat = correct(model, ctx, obs, params, stream);
    return ctx;
}

SolverState finish_step(const AlgoParams& params, const DiffusionModel& model,
                        const Observation& obs, const StepContext& ctx, const Vec& estimate,
                        RngStream& stream) {
    SolverState next;
    next.step = ctx.step - 1;
    next.prev_estimate = estimate;
    if (ctx.t_prev == 0) {
        next.x_t = estimate;
    } else {
        next.x_t = renoise(model, estimate, ctx, obs, params, stream);
    }
    return next;
}

SolverState run_step(const AlgoParams& params, const DiffusionModel& model,
                     const Observation& obs, const TimeGrid& grid, const SolverState& state,
                     RngStream& stream) {
    const StepContext ctx = begin_step(params, model, obs, grid, state, stream);
    return finish_step(params, model, obs, ctx, ctx.xhat, stream);
}

Vec run(const AlgoParams& params, const GaussianMixturePrior& prior,
        const DiffusionSchedule& schedule, const Observation& obs, const TimeGrid& grid,
        RngStream stream) {
    const DiffusionModel model{prior, schedule};
    SolverState state = initial_state(grid, prior.dim(), stream);
    while (state.step > 0) state = run_step(params, model, obs, grid, state, stream);
    return *state.prev_estimate;
}

Vec run(const AlgoParams& params, const GaussianMixturePrior& prior,
        const DiffusionSchedule& schedule, const Observation& obs, const TimeGrid& grid,
        std::uint64_t seed) {
    return run(params, prior, schedule, obs, grid,
               RngStream(seed, stream_id(StreamPurpose::Trajectory, 0)));
}

}  // namespace lle
