#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lle/config.hpp"
#include "lle/oracle.hpp"

namespace lle {

struct SampleMetrics {
    std::size_t sample = 0;
    double mse = 0.0;
    double psnr = 0.0;
    std::optional<double> oracle_mse;
};

struct EvalTable {
    std::vector<SampleMetrics> rows;
    double mean_mse = 0.0;
    double mean_psnr = 0.0;  // average of per-sample PSNR
    std::optional<double> mean_oracle_mse;
};

// mmse, when given, holds the posterior mean of every sample.
EvalTable evaluate(const std::vector<Vec>& recon, const std::vector<Vec>& truth, double peak,
                   const std::vector<Vec>* mmse = nullptr);
// Columns sample,mse,psnr,oracle_mse; the last is empty when absent.
void save_metrics_csv(const std::filesystem::path& path, const EvalTable& table);
EvalTable load_metrics_csv(const std::filesystem::path& path);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

struct Batch {
    std::vector<Vec> truths;
    std::vector<Observation> observations;
};

// Held-out batch: exact prior draws and observations from the test seed.
Batch make_test_batch(const ExperimentConfig& config, std::uint64_t test_seed);
// Observations of given truths, as make_test_batch would build them.
std::vector<Observation> observe_batch(const ExperimentConfig& config,
                                       const std::vector<Vec>& truths, std::uint64_t seed);
// Training references (file or DDIM) with their observations.
TrainingSet make_training_set(const ExperimentConfig& config);

// Reconstructs every observation; coeffs == nullptr runs the base algorithm.
std::vector<Vec> reconstruct(const ExperimentConfig& config, const TimeGrid& grid,
                             const std::vector<Observation>& observations,
                             const LLECoefficients* coeffs, std::uint64_t seed);

std::vector<Vec> oracle_means(const ExperimentConfig& config,
                              const std::vector<Observation>& observations);

struct SweepRow {
    std::string algorithm;
    int steps = 0;
    std::string strategy;  // base | LLE
    double mean_mse = 0.0;
    double mean_psnr = 0.0;
    double train_mse = 0.0;
    std::string status;  // ok | error
    std::string message;
};

std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::vector<int>& steps_list);
std::string sweep_csv(const std::vector<SweepRow>& rows);

std::vector<Vec> rows_of(const ArrayData& data);
Mat stack_rows(const std::vector<Vec>& rows);

}  // namespace lle
