#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "lle/canonical.hpp"
#include "lle/extrapolation.hpp"
#include "lle/training.hpp"

namespace lle {

// Random mixture used by `gen-prior`: weights in [0.5, 1.5] normalized, means
// 0.5 N(0, I), covariances 0.05 B B^T / D + 0.01 I with B standard normal.
GaussianMixturePrior random_prior(int dim, int components, std::uint64_t seed);

nlohmann::json prior_to_json(const GaussianMixturePrior& prior);
GaussianMixturePrior prior_from_json(const nlohmann::json& j);
void save_prior(const std::filesystem::path& path, const GaussianMixturePrior& prior);
GaussianMixturePrior load_prior(const std::filesystem::path& path);

// Operator block of the task: {"kind": "mask" | "identity" | "avgpool" | "blur" |
// "hadamard" | "dense" | "nonlinear_blur", ...}.
ForwardModel operator_from_json(const nlohmann::json& j, int dim);

AlgoParams algo_params_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j, std::uint64_t train_seed);

nlohmann::json coefficients_to_json(const LLECoefficients& coeffs);
LLECoefficients coefficients_from_json(const nlohmann::json& j);
void save_coefficients(const std::filesystem::path& path, const LLECoefficients& coeffs);
LLECoefficients load_coefficients(const std::filesystem::path& path);
// timestep,epoch,loss rows, one per trace entry.
void save_loss_trace(const std::filesystem::path& path, const LLECoefficients& coeffs,
                     const std::vector<TimestepResult>& steps);

struct ExperimentConfig {
    std::shared_ptr<const GaussianMixturePrior> prior;
    std::shared_ptr<const DiffusionSchedule> schedule;
    std::shared_ptr<const ForwardModel> op;
    double sigma_y = 0.0;
    AlgoParams algo;
    int steps = 0;
    std::optional<TrainConfig> lle;
    std::optional<std::filesystem::path> references;  // precomputed training references
    std::uint64_t train_seed = 0;
    std::uint64_t test_seed = 1;
    int n_test = 1;
    double peak = kDefaultPeak;
    bool oracle = false;  // report distance to the posterior mean (linear tasks)
};

// Relative file paths inside the config resolve against base_dir.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace lle
