#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lle/canonical.hpp"
#include "lle/extrapolation.hpp"

namespace lle {

enum class LrRule { Constant, Dynamic };
// Auto picks Soft for nonlinear operators and Adaptive otherwise.
enum class InitMode { Auto, Adaptive, Soft };
enum class OptimizerKind { ScheduleFree, Adam };

struct TrainConfig {
    int n_refs = 50;
    int ref_steps = 999;
    double omega = 0.0;
    std::string perceptual = "none";
    int epochs = 100;
    int warmup = 50;
    LrRule lr_rule = LrRule::Constant;
    InitMode init_mode = InitMode::Auto;
    double init_noise_std = 1e-3;
    bool noisy_gt = false;
    bool decoupled = false;
    // Pure-MSE fast path through solve_ls_closed_form (ignored when omega > 0).
    bool closed_form = false;
    OptimizerKind optimizer = OptimizerKind::ScheduleFree;
    std::uint64_t base_seed = 0;

    void validate() const;
};

// constant: 0.04 / S; dynamic: 0.2 * alphabar(t_{i+1}) / S, with t_{S+1} read as t_S.
double learning_rate(const TrainConfig& config, const DiffusionSchedule& schedule,
                     const TimeGrid& grid, int i);

// Training target at step i: x0, or with noisy_gt the algorithm's corrector applied
// to x0 in place of the sampler output (DDRM and DDNM only).
Vec make_ground_truth(const AlgoParams& params, const DiffusionModel& model,
                      const StepContext& ctx, const Observation& obs, const Vec& x0,
                      bool noisy_gt);

struct InitInputs {
    int i = 0;
    int steps = 0;
    double alphabar_t = 0.0;
    const std::vector<std::vector<Vec>>* histories = nullptr;
    const std::vector<Vec>* xhats = nullptr;
    const std::vector<Vec>* targets = nullptr;
    double omega = 0.0;
    const PerceptualTerm* plugin = nullptr;
};

// Adaptive/soft initialization; returns the packed parameter vector.
Vec init_coeffs(const InitInputs& in, InitMode mode, bool decoupled, double noise_std,
                RngStream& stream);

struct TimestepResult {
    Vec theta;
    double init_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> trace;  // loss at params() after each epoch; entry 0 is the init loss
};

// Full-batch optimization from theta0, keeping the best snapshot seen.
TimestepResult train_timestep(const std::vector<TrainingSample>& batch, const Vec& theta0,
                              int timestep, double lr, const TrainConfig& config,
                              const PerceptualTerm* plugin);

struct TimestepReport {
    int i = 0;
    int t = 0;
    const std::vector<std::vector<Vec>>* histories = nullptr;
    const std::vector<Vec>* xhats = nullptr;
    const std::vector<Vec>* targets = nullptr;
    const TimestepResult* result = nullptr;
};
using TrainObserver = std::function<void(const TimestepReport&)>;

struct TrainingSet {
    std::vector<Vec> references;
    std::vector<Observation> observations;
};

// References via ref_steps-step deterministic DDIM from x_T on per-sample streams.
std::vector<Vec> generate_references(const GaussianMixturePrior& prior,
                                     const DiffusionSchedule& schedule, int count, int ref_steps,
                                     std::uint64_t seed);
using ObservationBuilder = std::function<Observation(std::size_t index, const Vec& x0)>;
// y = A(x0) + sigma_y n with n from the per-sample observation-noise stream.
ObservationBuilder noisy_observations(const ForwardModel& op, double sigma_y, std::uint64_t seed);
TrainingSet build_training_set(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule,
                               const TrainConfig& config, const ObservationBuilder& builder);

struct TrainResult {
    LLECoefficients coeffs;
    std::vector<TimestepResult> steps;  // entry p = S - i
    std::vector<Vec> final_estimates;   // per training sample
};

TrainResult train(const AlgoParams& params, const GaussianMixturePrior& prior,
                  const DiffusionSchedule& schedule, const TimeGrid& grid,
                  const TrainConfig& config, const TrainingSet& data,
                  const TrainObserver& observer = {});

// Trajectory stream of training/test sample `index`.
RngStream trajectory_stream(std::uint64_t seed, std::size_t index);

Vec infer(const AlgoParams& params, const GaussianMixturePrior& prior,
          const DiffusionSchedule& schedule, const Observation& obs, const TimeGrid& grid,
          const LLECoefficients& coeffs, RngStream stream);

}  // namespace lle
