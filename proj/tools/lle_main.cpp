// Command-line front end: prior generation, reference generation, coefficient
// training, reconstruction, evaluation and step sweeps.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lle/errors.hpp"
#include "lle/harness.hpp"

namespace {

using namespace lle;

std::vector<int> parse_steps(const std::string& list) {
    std::vector<int> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw ConfigError("--steps: bad entry '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("--steps: empty list");
    return out;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learnable linear extrapolation for diffusion inverse solvers"};
    app.require_subcommand(1);

    int dim = 0, components = 0;
    std::uint64_t seed = 0;
    std::string out, config_path, coeffs_path, recon_path, truth_path, truth_out, steps_list;
    std::optional<std::uint64_t> eval_seed;

    auto* gen_prior = app.add_subcommand("gen-prior", "Write a random Gaussian-mixture prior");
    gen_prior->add_option("--dim", dim, "Signal dimension")->required()->check(CLI::PositiveNumber);
    gen_prior->add_option("--components", components, "Mixture components")->required()->check(CLI::PositiveNumber);
    gen_prior->add_option("--seed", seed, "Seed")->required();
    gen_prior->add_option("--out", out, "Output JSON")->required();

    auto* gen_refs = app.add_subcommand("gen-refs", "Generate training references by DDIM");
    gen_refs->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
    gen_refs->add_option("--out", out, "Output array file")->required();

    auto* train_cmd = app.add_subcommand("train", "Train extrapolation coefficients");
    train_cmd->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--out", out, "Output coefficient JSON")->required();

    auto* run_cmd = app.add_subcommand("run", "Reconstruct the held-out batch");
    run_cmd->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--coeffs", coeffs_path, "Coefficient JSON (base algorithm when absent)")
        ->check(CLI::ExistingFile);
    run_cmd->add_option("--seed", seed, "Test seed")->required();
    run_cmd->add_option("--out", out, "Output array file")->required();
    run_cmd->add_option("--truth-out", truth_out, "Also write the ground-truth batch");

    auto* eval_cmd = app.add_subcommand("eval", "Score reconstructions against ground truth");
    eval_cmd->add_option("--recon", recon_path, "Reconstruction array file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--truth", truth_path, "Ground-truth array file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--out", out, "Output CSV")->required();
    eval_cmd->add_option("--seed", eval_seed, "Test seed used by run (for oracle observations)");

    auto* sweep_cmd = app.add_subcommand("sweep", "Base vs extrapolated metrics over step counts");
    sweep_cmd->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--steps", steps_list, "Comma-separated step counts")->required();
    sweep_cmd->add_option("--out", out, "Output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen_prior) {
            save_prior(out, random_prior(dim, components, seed));
        } else if (*gen_refs) {
            const ExperimentConfig cfg = load_config(config_path);
            const TrainingSet set = make_training_set(cfg);
            save_array(out, stack_rows(set.references));
        } else if (*train_cmd) {
            const ExperimentConfig cfg = load_config(config_path);
            if (!cfg.lle) throw ConfigError("config has no 'lle' block");
            const TimeGrid grid = make_time_grid(*cfg.schedule, cfg.steps);
            const TrainResult r =
                train(cfg.algo, *cfg.prior, *cfg.schedule, grid, *cfg.lle, make_training_set(cfg));
            save_coefficients(out, r.coeffs);
            save_loss_trace(out + ".loss.csv", r.coeffs, r.steps);
            for (std::size_t p = 0; p < r.steps.size(); ++p)
                std::fprintf(stderr, "t=%d loss %.6g -> %.6g\n", r.coeffs.timesteps[p],
                             r.steps[p].init_loss, r.steps[p].final_loss);
        } else if (*run_cmd) {
            const ExperimentConfig cfg = load_config(config_path);
            const TimeGrid grid = make_time_grid(*cfg.schedule, cfg.steps);
            const Batch batch = make_test_batch(cfg, seed);
            std::optional<LLECoefficients> coeffs;
            if (!coeffs_path.empty()) coeffs = load_coefficients(coeffs_path);
            const auto recon = reconstruct(cfg, grid, batch.observations, coeffs ? &*coeffs : nullptr, seed);
            save_array(out, stack_rows(recon));
            if (!truth_out.empty()) save_array(truth_out, stack_rows(batch.truths));
        } else if (*eval_cmd) {
            const ExperimentConfig cfg = load_config(config_path);
            const auto recon = rows_of(load_array(recon_path));
            const auto truth = rows_of(load_array(truth_path));
            std::vector<Vec> mmse;
            if (cfg.oracle) {
                if (recon.size() != truth.size()) throw DimensionError("eval: batch size mismatch");
                mmse = oracle_means(cfg, observe_batch(cfg, truth, eval_seed.value_or(cfg.test_seed)));
            }
            const EvalTable t = evaluate(recon, truth, cfg.peak, cfg.oracle ? &mmse : nullptr);
            save_metrics_csv(out, t);
            std::fprintf(stderr, "mean mse %.6g, mean psnr %.4f dB\n", t.mean_mse, t.mean_psnr);
        } else if (*sweep_cmd) {
            const ExperimentConfig cfg = load_config(config_path);
            const auto rows = sweep(cfg, parse_steps(steps_list));
            write_file(out, sweep_csv(rows));
            for (const SweepRow& r : rows)
                if (r.status != "ok")
                    std::fprintf(stderr, "S=%d %s failed: %s\n", r.steps, r.strategy.c_str(), r.message.c_str());
        }
    } catch (const lle::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
