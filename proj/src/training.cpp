#include "lle/training.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "lle/errors.hpp"
#include "lle/optimizer.hpp"
#include "lle/parallel.hpp"

namespace lle {

void TrainConfig::validate() const {
    if (n_refs < 1) throw ConfigError("n_refs must be >= 1");
    if (ref_steps < 1) throw ConfigError("ref_steps must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (warmup < 0) throw ConfigError("warmup must be >= 0");
    if (!(omega >= 0.0) || !std::isfinite(omega)) throw ConfigError("omega must be finite and >= 0");
    if (!(init_noise_std >= 0.0)) throw ConfigError("init_noise_std must be >= 0");
}

double learning_rate(const TrainConfig& config, const DiffusionSchedule& schedule,
                     const TimeGrid& grid, int i) {
    const double s = grid.steps;
    if (config.lr_rule == LrRule::Constant) return 0.04 / s;
    const int next = std::min(i + 1, grid.steps);
    return 0.2 * schedule.alphabar(grid.at(next)) / s;
}

Vec make_ground_truth(const AlgoParams& params, const DiffusionModel& model,
                      const StepContext& ctx, const Observation& obs, const Vec& x0,
                      bool noisy_gt) {
    if (!noisy_gt) return x0;
    if (params.algorithm != Algorithm::DDRM && params.algorithm != Algorithm::DDNM)
        throw ConfigError("noisy ground truth is only defined for DDRM and DDNM");
    StepContext c = ctx;
    c.x0 = x0;
    return params.algorithm == Algorithm::DDRM ? corr_ddrm(model, c, obs, params)
                                               : corr_ddnm(model, c, obs, params);
}

Vec init_coeffs(const InitInputs& in, InitMode mode, bool decoupled, double noise_std,
                RngStream& stream) {
    const int len = in.steps - in.i + 1;
    if (len < 1) throw BoundsError("init_coeffs: step index out of range");
    const int p = len - 1;
    const int halves = decoupled ? 2 : 1;
    Vec theta = noise_std * sample_standard_normal(stream, static_cast<std::size_t>(len * halves));

    bool use_current = true;
    if (p > 0) {
        const auto& hist = *in.histories;
        const auto& xh = *in.xhats;
        const auto& tg = *in.targets;
        double prev = 0.0;
        double cur = 0.0;
        for (std::size_t n = 0; n < xh.size(); ++n) {
            prev += loss(hist[n].back(), tg[n], in.omega, in.plugin);
            cur += loss(xh[n], tg[n], in.omega, in.plugin);
        }
        use_current = prev >= cur;
    }
    if (mode == InitMode::Auto) mode = InitMode::Adaptive;
    for (int h = 0; h < halves; ++h) {
        const int off = h * len;
        if (use_current) {
            theta(off + p) = 1.0;
        } else if (mode == InitMode::Adaptive) {
            theta(off + p - 1) = 1.0;
        } else {
            theta(off + p - 1) = in.alphabar_t;
            theta(off + p) = 1.0 - in.alphabar_t;
        }
    }
    return theta;
}

TimestepResult train_timestep(const std::vector<TrainingSample>& batch, const Vec& theta0,
                              int timestep, double lr, const TrainConfig& config,
                              const PerceptualTerm* plugin) {
    const double omega = plugin ? config.omega : 0.0;
    TimestepResult r;
    r.theta = theta0;
    r.init_loss = batch_loss(batch, theta0, omega, plugin);
    if (!std::isfinite(r.init_loss)) throw TrainingDiverged("non-finite initial loss", timestep);
    r.final_loss = r.init_loss;
    r.trace.push_back(r.init_loss);

    auto consider = [&](const Vec& theta, double l) {
        if (!std::isfinite(l)) throw TrainingDiverged("non-finite training loss", timestep);
        r.trace.push_back(l);
        if (l < r.final_loss) {
            r.final_loss = l;
            r.theta = theta;
        }
    };

    if (config.closed_form && omega == 0.0) {
        const Vec theta = solve_ls_closed_form(batch);
        consider(theta, batch_loss(batch, theta, 0.0, nullptr));
        return r;
    }
    if (config.epochs == 0) return r;

    std::unique_ptr<IterativeOptimizer> opt;
    if (config.optimizer == OptimizerKind::ScheduleFree)
        opt = std::make_unique<ScheduleFreeAdamW>(theta0, config.warmup);
    else
        opt = std::make_unique<Adam>(theta0, config.warmup);
    Vec grad;
    for (int e = 0; e < config.epochs; ++e) {
        const double at_eval = batch_loss(batch, opt->eval_point(), omega, plugin, &grad);
        if (!std::isfinite(at_eval) || !grad.allFinite())
            throw TrainingDiverged("non-finite gradient", timestep);
        opt->step(grad, lr);
        consider(opt->params(), batch_loss(batch, opt->params(), omega, plugin));
    }
    return r;
}

RngStream trajectory_stream(std::uint64_t seed, std::size_t index) {
    return RngStream(seed, stream_id(StreamPurpose::Trajectory, index));
}

std::vector<Vec> generate_references(const GaussianMixturePrior& prior,
                                     const DiffusionSchedule& schedule, int count, int ref_steps,
                                     std::uint64_t seed) {
    if (count < 1) throw ConfigError("reference count must be >= 1");
    if (ref_steps < 1 || ref_steps > schedule.horizon())
        throw ConfigError("ref_steps must lie in [1, T]");
    std::vector<Vec> refs(static_cast<std::size_t>(count));
    parallel_for(refs.size(), [&](std::size_t n) {
        RngStream stream(seed, stream_id(StreamPurpose::Reference, n));
        const Vec x_t = sample_standard_normal(stream, static_cast<std::size_t>(prior.dim()));
        refs[n] = ddim_run(prior, schedule, x_t, schedule.horizon(), ref_steps, 0.0, stream);
    });
    return refs;
}

ObservationBuilder noisy_observations(const ForwardModel& op, double sigma_y, std::uint64_t seed) {
    if (!(sigma_y >= 0.0)) throw ConfigError("sigma_y must be >= 0");
    return [op, sigma_y, seed](std::size_t index, const Vec& x0) {
        RngStream noise(seed, stream_id(StreamPurpose::ObservationNoise, index));
        return observe(op, x0, sigma_y, noise);
    };
}

TrainingSet build_training_set(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule,
                               const TrainConfig& config, const ObservationBuilder& builder) {
    TrainingSet set;
    set.references =
        generate_references(prior, schedule, config.n_refs, config.ref_steps, config.base_seed);
    set.observations.reserve(set.references.size());
    for (std::size_t n = 0; n < set.references.size(); ++n)
        set.observations.push_back(builder(n, set.references[n]));
    return set;
}

namespace {

const LinearOperator* decoupled_operator(const Observation& obs, bool decoupled) {
    return decoupled ? &obs.op.linear("decoupled extrapolation") : nullptr;
}

}  // namespace

TrainResult train(const AlgoParams& params, const GaussianMixturePrior& prior,
                  const DiffusionSchedule& schedule, const TimeGrid& grid,
                  const TrainConfig& config, const TrainingSet& data,
                  const TrainObserver& observer) {
    config.validate();
    const std::size_t n_samples = data.references.size();
    if (n_samples == 0 || data.observations.size() != n_samples)
        throw ConfigError("training set needs one observation per reference");
    if (config.noisy_gt && params.algorithm != Algorithm::DDRM && params.algorithm != Algorithm::DDNM)
        throw ConfigError("noisy ground truth is only defined for DDRM and DDNM");
    const auto plugin = make_perceptual(config.perceptual);
    const DiffusionModel model{prior, schedule};
    const int S = grid.steps;

    InitMode mode = config.init_mode;
    if (mode == InitMode::Auto)
        mode = data.observations.front().op.is_linear() ? InitMode::Adaptive : InitMode::Soft;

    std::vector<int> timesteps;
    for (int i = S; i >= 1; --i) timesteps.push_back(grid.at(i));
    TrainResult result;
    result.coeffs = LLECoefficients::identity(timesteps, config.decoupled);

    std::vector<RngStream> streams(n_samples);
    std::vector<SolverState> states(n_samples);
    std::vector<std::vector<Vec>> histories(n_samples);
    std::vector<StepContext> ctxs(n_samples);
    std::vector<Vec> xhats(n_samples), targets(n_samples);
    std::vector<TrainingSample> batch(n_samples);
    for (std::size_t n = 0; n < n_samples; ++n) {
        streams[n] = trajectory_stream(config.base_seed, n);
        states[n] = initial_state(grid, prior.dim(), streams[n]);
    }
    RngStream init_stream(config.base_seed, stream_id(StreamPurpose::CoefficientInit, 0));

    for (int i = S; i >= 1; --i) {
        parallel_for(n_samples, [&](std::size_t n) {
            const Observation& obs = data.observations[n];
            ctxs[n] = begin_step(params, model, obs, grid, states[n], streams[n]);
            xhats[n] = ctxs[n].xhat;
            targets[n] = make_ground_truth(params, model, ctxs[n], obs, data.references[n],
                                           config.noisy_gt);
            batch[n] = {design_matrix(histories[n], xhats[n],
                                      decoupled_operator(obs, config.decoupled)),
                        targets[n]};
        });

        InitInputs in;
        in.i = i;
        in.steps = S;
        in.alphabar_t = schedule.alphabar(grid.at(i));
        in.histories = &histories;
        in.xhats = &xhats;
        in.targets = &targets;
        in.omega = plugin ? config.omega : 0.0;
        in.plugin = plugin.get();
        const Vec theta0 = init_coeffs(in, mode, config.decoupled, config.init_noise_std, init_stream);
        const double lr = learning_rate(config, schedule, grid, i);
        TimestepResult step =
            train_timestep(batch, theta0, grid.at(i), lr, config, plugin.get());
        result.coeffs.set_packed(i, step.theta);
        if (observer) observer({i, grid.at(i), &histories, &xhats, &targets, &step});
        result.steps.push_back(std::move(step));

        parallel_for(n_samples, [&](std::size_t n) {
            const Observation& obs = data.observations[n];
            const Vec est = extrapolate(result.coeffs, i, histories[n], xhats[n],
                                        decoupled_operator(obs, config.decoupled));
            states[n] = finish_step(params, model, obs, ctxs[n], est, streams[n]);
            histories[n].push_back(est);
        });
    }
    result.final_estimates.resize(n_samples);
    for (std::size_t n = 0; n < n_samples; ++n) result.final_estimates[n] = histories[n].back();
    return result;
}

Vec infer(const AlgoParams& params, const GaussianMixturePrior& prior,
          const DiffusionSchedule& schedule, const Observation& obs, const TimeGrid& grid,
          const LLECoefficients& coeffs, RngStream stream) {
    if (coeffs.steps != grid.steps)
        throw ConfigError("coefficients were trained for " + std::to_string(coeffs.steps) +
                          " steps but the grid has " + std::to_string(grid.steps));
    coeffs.validate();
    const LinearOperator* op = decoupled_operator(obs, coeffs.decoupled);
    const DiffusionModel model{prior, schedule};
    SolverState state = initial_state(grid, prior.dim(), stream);
    std::vector<Vec> history;
    while (state.step > 0) {
        const int i = state.step;
        const StepContext ctx = begin_step(params, model, obs, grid, state, stream);
        Vec est = extrapolate(coeffs, i, history, ctx.xhat, op);
        state = finish_step(params, model, obs, ctx, est, stream);
        history.push_back(std::move(est));
    }
    return history.back();
}

}  // namespace lle
