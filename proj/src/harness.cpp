#include "lle/harness.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "lle/errors.hpp"
#include "lle/parallel.hpp"

namespace lle {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

namespace {

double parse_double(const std::string& s, const std::string& where) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError(where + ": cannot parse number '" + s + "'", 0);
    return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

EvalTable evaluate(const std::vector<Vec>& recon, const std::vector<Vec>& truth, double peak,
                   const std::vector<Vec>* mmse) {
    if (recon.size() != truth.size())
        throw DimensionError("evaluate: " + std::to_string(recon.size()) + " reconstructions vs " +
                             std::to_string(truth.size()) + " truths");
    if (recon.empty()) throw DimensionError("evaluate: empty batch");
    if (mmse && mmse->size() != recon.size()) throw DimensionError("evaluate: oracle batch size mismatch");
    EvalTable t;
    double sum_mse = 0.0;
    double sum_psnr = 0.0;
    double sum_oracle = 0.0;
    for (std::size_t n = 0; n < recon.size(); ++n) {
        SampleMetrics m;
        m.sample = n;
        m.mse = mse(recon[n], truth[n]);
        m.psnr = psnr_from_mse(m.mse, peak);
        if (mmse) {
            m.oracle_mse = mse(recon[n], (*mmse)[n]);
            sum_oracle += *m.oracle_mse;
        }
        sum_mse += m.mse;
        sum_psnr += m.psnr;
        t.rows.push_back(m);
    }
    const double inv = 1.0 / static_cast<double>(recon.size());
    t.mean_mse = sum_mse * inv;
    t.mean_psnr = sum_psnr * inv;
    if (mmse) t.mean_oracle_mse = sum_oracle * inv;
    return t;
}

void save_metrics_csv(const std::filesystem::path& path, const EvalTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << "sample,mse,psnr,oracle_mse\n";
    for (const SampleMetrics& m : table.rows)
        out << m.sample << ',' << format_double(m.mse) << ',' << format_double(m.psnr) << ','
            << (m.oracle_mse ? format_double(*m.oracle_mse) : "") << '\n';
}

EvalTable load_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != "sample,mse,psnr,oracle_mse")
        throw FormatError("metrics CSV: unexpected header", 0);
    EvalTable t;
    double sum_mse = 0.0, sum_psnr = 0.0, sum_oracle = 0.0;
    bool all_oracle = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 4) throw FormatError("metrics CSV: expected 4 columns in '" + line + "'", 0);
        SampleMetrics m;
        m.sample = static_cast<std::size_t>(std::stoull(f[0]));
        m.mse = parse_double(f[1], "mse");
        m.psnr = parse_double(f[2], "psnr");
        if (!f[3].empty()) {
            m.oracle_mse = parse_double(f[3], "oracle_mse");
            sum_oracle += *m.oracle_mse;
        } else {
            all_oracle = false;
        }
        sum_mse += m.mse;
        sum_psnr += m.psnr;
        t.rows.push_back(m);
    }
    if (!t.rows.empty()) {
        const double inv = 1.0 / static_cast<double>(t.rows.size());
        t.mean_mse = sum_mse * inv;
        t.mean_psnr = sum_psnr * inv;
        if (all_oracle) t.mean_oracle_mse = sum_oracle * inv;
    }
    return t;
}

std::vector<Observation> observe_batch(const ExperimentConfig& config,
                                       const std::vector<Vec>& truths, std::uint64_t seed) {
    const ObservationBuilder build = noisy_observations(*config.op, config.sigma_y, seed);
    std::vector<Observation> obs;
    obs.reserve(truths.size());
    for (std::size_t n = 0; n < truths.size(); ++n) obs.push_back(build(n, truths[n]));
    return obs;
}

Batch make_test_batch(const ExperimentConfig& config, std::uint64_t test_seed) {
    Batch b;
    for (int n = 0; n < config.n_test; ++n) {
        RngStream s(test_seed, stream_id(StreamPurpose::TestTruth, static_cast<std::uint64_t>(n)));
        b.truths.push_back(config.prior->sample(s));
    }
    b.observations = observe_batch(config, b.truths, test_seed);
    return b;
}

TrainingSet make_training_set(const ExperimentConfig& config) {
    TrainConfig tc = config.lle.value_or(TrainConfig{});
    tc.base_seed = config.train_seed;
    if (!config.references)
        return build_training_set(*config.prior, *config.schedule, tc,
                                  noisy_observations(*config.op, config.sigma_y, config.train_seed));
    TrainingSet set;
    set.references = rows_of(load_array(*config.references));
    for (const Vec& r : set.references)
        if (r.size() != config.prior->dim())
            throw ConfigError("reference file dimension does not match the prior");
    set.observations = observe_batch(config, set.references, config.train_seed);
    return set;
}

std::vector<Vec> reconstruct(const ExperimentConfig& config, const TimeGrid& grid,
                             const std::vector<Observation>& observations,
                             const LLECoefficients* coeffs, std::uint64_t seed) {
    std::vector<Vec> out(observations.size());
    parallel_for(observations.size(), [&](std::size_t n) {
        const RngStream stream = trajectory_stream(seed, n);
        out[n] = coeffs ? infer(config.algo, *config.prior, *config.schedule, observations[n], grid,
                                *coeffs, stream)
                        : run(config.algo, *config.prior, *config.schedule, observations[n], grid,
                              stream);
    });
    return out;
}

std::vector<Vec> oracle_means(const ExperimentConfig& config,
                              const std::vector<Observation>& observations) {
    std::vector<Vec> out(observations.size());
    parallel_for(observations.size(), [&](std::size_t n) {
        const Observation& o = observations[n];
        out[n] = oracle_posterior(*config.prior, o.op.linear("oracle posterior"), o.y, o.sigma_y, true)
                     .mmse_mean;
    });
    return out;
}

namespace {

double mean_mse(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    double s = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) s += mse(a[n], b[n]);
    return s / static_cast<double>(a.size());
}

}  // namespace

std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::vector<int>& steps_list) {
    if (steps_list.empty()) throw ConfigError("sweep: empty steps list");
    const Batch test = make_test_batch(config, config.test_seed);
    const TrainingSet train_set = make_training_set(config);
    const std::string name = to_string(config.algo.algorithm);
    std::vector<SweepRow> rows;
    for (int steps : steps_list) {
        SweepRow base{name, steps, "base", NAN, NAN, NAN, "ok", ""};
        SweepRow lle_row{name, steps, "LLE", NAN, NAN, NAN, "ok", ""};
        std::optional<TimeGrid> grid;
        try {
            grid = make_time_grid(*config.schedule, steps);
            const EvalTable t = evaluate(reconstruct(config, *grid, test.observations, nullptr, config.test_seed),
                                         test.truths, config.peak);
            base.mean_mse = t.mean_mse;
            base.mean_psnr = t.mean_psnr;
            base.train_mse = mean_mse(reconstruct(config, *grid, train_set.observations, nullptr,
                                                  config.train_seed),
                                      train_set.references);
        } catch (const std::exception& e) {
            base.status = "error";
            base.message = e.what();
        }
        try {
            if (!grid) grid = make_time_grid(*config.schedule, steps);
            LLECoefficients coeffs;
            if (config.lle) {
                const TrainResult tr = train(config.algo, *config.prior, *config.schedule, *grid,
                                             *config.lle, train_set);
                coeffs = tr.coeffs;
                lle_row.train_mse = mean_mse(tr.final_estimates, train_set.references);
            } else {
                std::vector<int> ts;
                for (int i = steps; i >= 1; --i) ts.push_back(grid->at(i));
                coeffs = LLECoefficients::identity(ts);
                lle_row.train_mse = mean_mse(reconstruct(config, *grid, train_set.observations, &coeffs,
                                                         config.train_seed),
                                             train_set.references);
            }
            const EvalTable t = evaluate(reconstruct(config, *grid, test.observations, &coeffs, config.test_seed),
                                         test.truths, config.peak);
            lle_row.mean_mse = t.mean_mse;
            lle_row.mean_psnr = t.mean_psnr;
        } catch (const std::exception& e) {
            lle_row.status = "error";
            lle_row.message = e.what();
        }
        rows.push_back(base);
        rows.push_back(lle_row);
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "algorithm,steps,strategy,mean_mse,mean_psnr,train_mse,status\n";
    for (const SweepRow& r : rows)
        out << r.algorithm << ',' << r.steps << ',' << r.strategy << ',' << format_double(r.mean_mse)
            << ',' << format_double(r.mean_psnr) << ',' << format_double(r.train_mse) << ','
            << r.status << '\n';
    return out.str();
}

std::vector<Vec> rows_of(const ArrayData& data) {
    std::vector<Vec> out;
    for (std::size_t r = 0; r < data.rows; ++r)
        out.push_back(Eigen::Map<const Vec>(data.data.data() + r * data.cols,
                                            static_cast<Eigen::Index>(data.cols)));
    return out;
}

Mat stack_rows(const std::vector<Vec>& rows) {
    if (rows.empty()) return Mat();
    Mat m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) throw DimensionError("stack_rows: ragged rows");
        m.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    }
    return m;
}

}  // namespace lle
