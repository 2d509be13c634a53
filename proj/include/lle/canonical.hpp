#pragma once

#include <optional>
#include <string>

#include "lle/diffusion.hpp"
#include "lle/operators.hpp"

namespace lle {

// Every supported inverse solver, expressed as Sampler -> Corrector -> Noiser.
enum class Algorithm { DDRM, DDNM, DPS, PiGDM, REDdiff, DiffPIR, DMPS, ReSample, DAPS };

inline constexpr Algorithm kAllAlgorithms[] = {
    Algorithm::DDRM,    Algorithm::DDNM, Algorithm::DPS,      Algorithm::PiGDM, Algorithm::REDdiff,
    Algorithm::DiffPIR, Algorithm::DMPS, Algorithm::ReSample, Algorithm::DAPS};

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);
// DDRM, DDNM, PiGDM and DMPS work in the operator's spectral basis.
bool requires_linear_operator(Algorithm algorithm);

struct InnerOptParams {
    double lr = 0.0;
    double momentum = 0.0;
    int steps = 0;
};

struct DapsParams {
    int k_ddim = 5;
    int n_langevin = 100;
    double eta0 = 1e-4;
    double delta = 0.01;
    double sigma_langevin = 0.02;
    // Replaces the likelihood gradient with A^T (A x - y) / step for noiseless linear tasks.
    bool noiseless_linear = false;
};

struct AlgoParams {
    Algorithm algorithm = Algorithm::DDNM;
    double eta = 0.85;
    double eta_b = 1.0;
    double zeta = 1.0;
    double xi = 1.0;
    double lambda = 1.0;
    double gamma_rs = 100.0;
    DapsParams daps;
    InnerOptParams inner_opt;
    // ReSample: replace the gradient loop by the least-norm correction (linear only).
    bool exact_hc = false;
    // DiffPIR: solve the proximal problem with the inner optimizer even when linear.
    bool force_inner_optimizer = false;

    static AlgoParams defaults(Algorithm algorithm);
};

// Non-owning view of the diffusion model used by every step.
struct DiffusionModel {
    const GaussianMixturePrior& prior;
    const DiffusionSchedule& schedule;
};

// Quantities of one step at t = t_i. eps is evaluated once and shared by the
// corrector and noiser.
struct StepContext {
    int step = 0;  // i
    int t = 0;
    int t_prev = 0;
    Vec x_t;
    Vec eps;
    Vec x0;  // sampler output
    Vec xhat;  // corrector output (filled by begin_step)
    std::optional<Vec> prev_estimate;
};

// --- Sampler ---------------------------------------------------------------

// Tweedie for all algorithms except DAPS, which runs k_ddim deterministic DDIM steps.
Vec sample_phi(const AlgoParams& params, const DiffusionModel& model, const Vec& x_t, int t,
               const Vec& eps);

// --- Correctors ------------------------------------------------------------

Vec corr_ddnm(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
              const AlgoParams& params);
Vec corr_ddrm(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
              const AlgoParams& params);
Vec corr_dps(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
             const AlgoParams& params);
// grad_{x_t} ||y - A(tweedie(x_t))||^2, the quantity DPS descends.
Vec dps_gradient(const DiffusionModel& model, const StepContext& ctx, const Observation& obs);
Vec corr_pigdm(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
               const AlgoParams& params);
Vec corr_reddiff(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
                 const AlgoParams& params);
Vec corr_diffpir(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
                 const AlgoParams& params);
// rho_t = lambda sigma_y^2 alphabar_t / (1 - alphabar_t)
double diffpir_rho(const DiffusionModel& model, int t, double sigma_y, double lambda);
Vec corr_dmps(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
              const AlgoParams& params);
Vec corr_resample(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
                  const AlgoParams& params);
// Langevin chain started at the anchor ctx.x0.
Vec corr_daps(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
              const AlgoParams& params, RngStream& stream);
double daps_step_size(const DiffusionModel& model, const DapsParams& daps, int t);

Vec correct(const DiffusionModel& model, const StepContext& ctx, const Observation& obs,
            const AlgoParams& params, RngStream& stream);

// --- Noisers ---------------------------------------------------------------
// All noisers take the estimate to re-noise and explicit standard-normal draws.

Vec noiser_ddim(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                double eta, const Vec& noise);
// DMPS coefficients: c1 = eta sigma_prev, c2 = sqrt(1 - eta^2) sigma_prev.
Vec noiser_dmps(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                double eta, const Vec& noise);
Vec noiser_direct(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                  const Vec& noise);
Vec noiser_ddrm(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                const Observation& obs, const AlgoParams& params, const Vec& noise);
Vec noiser_ddnm(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                const Observation& obs, const AlgoParams& params, const Vec& noise);
Vec noiser_diffpir(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                   double eta, const Vec& noise);
Vec noiser_resample(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
                    const AlgoParams& params, const Vec& encode_noise, const Vec& blend_noise);

Vec renoise(const DiffusionModel& model, const Vec& estimate, const StepContext& ctx,
            const Observation& obs, const AlgoParams& params, RngStream& stream);

// --- Trajectory ------------------------------------------------------------

struct SolverState {
    int step = 0;  // next step index i to execute; 0 once finished
    Vec x_t;
    std::optional<Vec> prev_estimate;
};

// x_{t_S} ~ N(0, I).
SolverState initial_state(const TimeGrid& grid, int dim, RngStream& stream);
// Sampler and corrector of step state.step.
StepContext begin_step(const AlgoParams& params, const DiffusionModel& model,
                       const Observation& obs, const TimeGrid& grid, const SolverState& state,
                       RngStream& stream);
// Noiser applied to `estimate`; at t_{i-1} = 0 the estimate passes through unchanged.
SolverState finish_step(const AlgoParams& params, const DiffusionModel& model,
                        const Observation& obs, const StepContext& ctx, const Vec& estimate,
                        RngStream& stream);
SolverState run_step(const AlgoParams& params, const DiffusionModel& model,
                     const Observation& obs, const TimeGrid& grid, const SolverState& state,
                     RngStream& stream);

// Full trajectory; returns the final corrected estimate (equal to x_{t_0}).
Vec run(const AlgoParams& params, const GaussianMixturePrior& prior,
        const DiffusionSchedule& schedule, const Observation& obs, const TimeGrid& grid,
        RngStream stream);
Vec run(const AlgoParams& params, const GaussianMixturePrior& prior,
        const DiffusionSchedule& schedule, const Observation& obs, const TimeGrid& grid,
        std::uint64_t seed);

}  // namespace lle
