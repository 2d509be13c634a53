// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
// usage: acceptance <path-to-lle-cli> <work-dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lle/harness.hpp"
#include "lle/parallel.hpp"

using namespace lle;

namespace {

// Tolerances, pinned.
constexpr double kOpAlgebraTol = 1e-10;
constexpr double kOpAlgebraSeconds = 1.0;
constexpr double kFdRelTol = 1e-5;
constexpr double kFdStep = 1e-5;
constexpr double kScoreSeconds = 5.0;
constexpr double kTweedieTol = 1e-12;
constexpr double kVarianceIdentityTol = 1e-12;
constexpr double kConsistencyTol = 1e-8;
constexpr double kNestingOutputTol = 1e-12;
constexpr double kNestingLossTol = 1e-9;
constexpr double kMonotoneTol = 1e-9;
constexpr double kOptimizerGapTol = 1e-6;
constexpr int kOptimizerEpochs = 2000;
constexpr double kOptimizerLr = 0.05;
constexpr double kLangevinMeanSE = 3.0;
constexpr double kLangevinCovRelTol = 0.10;
constexpr double kLangevinSeconds = 10.0;
constexpr double kWeightTol = 0.03;
constexpr double kMeanSigmas = 4.0;
constexpr double kSweepSeconds = 300.0;
constexpr double kHeldOutSoftRatio = 1.05;
constexpr double kNoisyGtTol = 1e-12;
// DPS step scale for the desk experiment (library default is 1.0).
constexpr double kDeskZeta = 0.5;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const DiffusionSchedule& schedule() {
    static const DiffusionSchedule s = DiffusionSchedule::linear();
    return s;
}

Vec randn(RngStream& s, int n, double scale = 1.0) {
    return scale * sample_standard_normal(s, static_cast<std::size_t>(n));
}

Mat random_spd(RngStream& s, int n, double floor) {
    Mat b(n, n);
    for (int c = 0; c < n; ++c) b.col(c) = randn(s, n);
    Mat m = b * b.transpose() / n;
    m.diagonal().array() += floor;
    return 0.5 * (m + m.transpose());
}

Mat random_dense(RngStream& s, int rows, int cols) {
    Mat a(rows, cols);
    for (int c = 0; c < cols; ++c) a.col(c) = randn(s, rows);
    return a;
}

double rel_err(const Vec& a, const Vec& b) {
    return (a - b).norm() / std::max(1e-300, std::max(a.norm(), b.norm()));
}

bool same_bits(const Vec& a, const Vec& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

std::vector<int> descending_without_zero(const TimeGrid& g) {
    std::vector<int> ts = g.descending();
    ts.pop_back();
    return ts;
}

// 1 ------------------------------------------------------------------------
Outcome operator_algebra() {
    const auto t0 = std::chrono::steady_clock::now();
    RngStream s(1, 1);
    std::vector<std::pair<std::string, LinearOperator>> ops;
    ops.emplace_back("mask", build_operator(64, MaskSpec{random_keep_indices(64, 0.5, 1)}));
    ops.emplace_back("avgpool", build_operator(64, AvgPoolSpec{4}));
    ops.emplace_back("blur", build_operator(64, BlurSpec{gaussian_kernel(1.0, 3)}));
    ops.emplace_back("hadamard", build_operator(64, HadamardSpec{0.25, 2}));
    ops.emplace_back("dense", build_operator(48, DenseSpec{random_dense(s, 20, 48) / std::sqrt(48.0)}));
    double worst = 0.0;
    for (const auto& [name, op] : ops) {
        const Mat a = op.dense();
        const Mat p = op.dense_pinv();
        const int n = op.signal_dim();
        Mat pr(n, n), pn(n, n);
        for (int k = 0; k < n; ++k) {
            pr.col(k) = op.project_range(Vec::Unit(n, k));
            pn.col(k) = op.project_null(Vec::Unit(n, k));
        }
        const Mat id = Mat::Identity(n, n);
        worst = std::max({worst, (a * p * a - a).norm(), (p * a * p - p).norm(), (pr * pr - pr).norm(),
                          (pn * pn - pn).norm(), (pr * pn).norm(), (pr - pr.transpose()).norm(),
                          (pr + pn - id).norm(), (pr - p * a).norm()});
    }
    const double secs = seconds_since(t0);
    return {worst <= kOpAlgebraTol && secs < kOpAlgebraSeconds,
            "max residual " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// 2 ------------------------------------------------------------------------
Outcome score_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    RngStream s(2, 2);
    double worst = 0.0;
    for (int draw = 0; draw < 20; ++draw) {
        std::vector<double> w{0.2 + s.next_uniform(), 0.2 + s.next_uniform(), 0.2 + s.next_uniform()};
        const double tot = w[0] + w[1] + w[2];
        for (auto& x : w) x /= tot;
        w[2] = 1.0 - w[0] - w[1];
        std::vector<Vec> mu;
        std::vector<Mat> cov;
        for (int k = 0; k < 3; ++k) {
            mu.push_back(randn(s, 8));
            cov.push_back(random_spd(s, 8, 0.05));
        }
        const GaussianMixturePrior prior(w, mu, cov);
        const int t = 1 + static_cast<int>(s.next_below(1000));
        const Vec x = randn(s, 8, 1.5);
        const Vec v = randn(s, 8);

        const Vec fd = (gmm_eps(prior, schedule(), x + kFdStep * v, t) -
                        gmm_eps(prior, schedule(), x - kFdStep * v, t)) / (2 * kFdStep);
        worst = std::max(worst, rel_err(gmm_eps_jvp(prior, schedule(), x, t, v), fd));

        const auto op = build_operator(8, MaskSpec{random_keep_indices(8, 0.5, static_cast<std::uint64_t>(draw))});
        const Observation obs{randn(s, 4), ForwardModel(op), 0.05};
        const DiffusionModel m{prior, schedule()};
        StepContext ctx;
        ctx.step = 1;
        ctx.t = t;
        ctx.t_prev = t - 1;
        ctx.x_t = x;
        ctx.eps = gmm_eps(prior, schedule(), x, t);
        ctx.x0 = tweedie_from_eps(schedule(), x, t, ctx.eps);
        const auto f = [&](const Vec& z) {
            return (obs.y - op.apply(tweedie(prior, schedule(), z, t))).squaredNorm();
        };
        const double fd_dir = (f(x + kFdStep * v) - f(x - kFdStep * v)) / (2 * kFdStep);
        const double an = dps_gradient(m, ctx, obs).dot(v);
        worst = std::max(worst, std::abs(an - fd_dir) / std::max(std::abs(an), std::abs(fd_dir)));
    }
    const double secs = seconds_since(t0);
    return {worst <= kFdRelTol && secs < kScoreSeconds,
            "max rel err " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// 3 ------------------------------------------------------------------------
Outcome tweedie_exactness() {
    RngStream s(3, 3);
    const int d = 6;
    const Vec mu = randn(s, d);
    const Mat cov = random_spd(s, d, 0.1);
    const GaussianMixturePrior prior({1.0}, {mu}, {cov});
    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
        const int t = 1 + static_cast<int>(s.next_below(1000));
        const double a = schedule().alphabar(t);
        const Vec x = std::sqrt(a) * prior.sample(s) + std::sqrt(1 - a) * randn(s, d);
        const Mat noised = a * cov + (1 - a) * Mat::Identity(d, d);
        const Vec expect = mu + std::sqrt(a) * cov * noised.ldlt().solve(x - std::sqrt(a) * mu);
        worst = std::max(worst, (tweedie(prior, schedule(), x, t) - expect).cwiseAbs().maxCoeff());
    }
    return {worst <= kTweedieTol, "max abs err " + fmt(worst)};
}

// 4 ------------------------------------------------------------------------
Outcome ddim_variance_identity() {
    double worst = 0.0;
    int pairs = 0;
    for (int steps : {1, 2, 3, 4, 5, 7, 10, 15, 20, 50, 100, 250, 999, 1000}) {
        const TimeGrid g = make_time_grid(schedule(), steps);
        for (int i = 1; i <= steps; ++i)
            for (double eta : {0.0, 0.5, 0.85, 1.0}) {
                const auto c = ddim_coefficients(schedule(), g.at(i), g.at(i - 1), eta);
                worst = std::max(worst, std::abs(c.c1 * c.c1 + c.c2 * c.c2 - (1 - schedule().alphabar(g.at(i - 1)))));
                ++pairs;
            }
    }
    return {worst <= kVarianceIdentityTol, std::to_string(pairs) + " pairs, max deviation " + fmt(worst)};
}

// 5 ------------------------------------------------------------------------
Outcome noiseless_consistency() {
    RngStream s(5, 5);
    const GaussianMixturePrior prior = random_prior(16, 3, 5);
    const DiffusionModel m{prior, schedule()};
    std::vector<LinearOperator> ops{build_operator(16, MaskSpec{random_keep_indices(16, 0.5, 5)}),
                                    build_operator(16, AvgPoolSpec{2}),
                                    build_operator(16, HadamardSpec{0.5, 5}),
                                    build_operator(16, DenseSpec{random_dense(s, 6, 16)})};
    double worst_run = 0.0;
    for (const auto& op : ops)
        for (int steps : {1, 2, 3, 5, 10, 50}) {
            const Vec truth = prior.sample(s);
            const Observation obs{op.apply(truth), ForwardModel(op), 0.0};
            const Vec x = run(AlgoParams::defaults(Algorithm::DDNM), prior, schedule(), obs,
                              make_time_grid(schedule(), steps), static_cast<std::uint64_t>(steps));
            worst_run = std::max(worst_run, (op.apply(x) - obs.y).norm());
        }
    double worst_pir = 0.0;
    const AlgoParams pir = AlgoParams::defaults(Algorithm::DiffPIR);
    for (const auto& op : ops)
        for (int t : {1, 100, 500, 1000}) {
            const Vec truth = prior.sample(s);
            const Observation obs{op.apply(truth), ForwardModel(op), 0.0};
            StepContext ctx;
            ctx.t = t;
            ctx.t_prev = t - 1;
            ctx.x_t = randn(s, 16);
            ctx.eps = gmm_eps(prior, schedule(), ctx.x_t, t);
            ctx.x0 = tweedie_from_eps(schedule(), ctx.x_t, t, ctx.eps);
            worst_pir = std::max(worst_pir, (op.apply(corr_diffpir(m, ctx, obs, pir)) - obs.y).norm());
        }
    return {worst_run <= kConsistencyTol && worst_pir <= kConsistencyTol,
            "DDNM max |Ax-y| " + fmt(worst_run) + ", DiffPIR corrector " + fmt(worst_pir)};
}

// 6 ------------------------------------------------------------------------
Outcome trajectory_equivalence() {
    const GaussianMixturePrior prior = random_prior(8, 3, 6);
    RngStream s(6, 6);
    const auto op = build_operator(8, MaskSpec{random_keep_indices(8, 0.5, 6)});
    const Vec truth = prior.sample(s);
    const Observation obs{op.apply(truth) + 0.05 * randn(s, 4), ForwardModel(op), 0.05};
    std::string bad;
    for (int steps : {1, 4}) {
        const TimeGrid g = make_time_grid(schedule(), steps);
        const auto id = LLECoefficients::identity(descending_without_zero(g));
        for (Algorithm alg : kAllAlgorithms) {
            const AlgoParams p = AlgoParams::defaults(alg);
            for (std::uint64_t seed : {0u, 17u}) {
                const Vec base = run(p, prior, schedule(), obs, g, trajectory_stream(seed, 3));
                const Vec ext = infer(p, prior, schedule(), obs, g, id, trajectory_stream(seed, 3));
                if (!same_bits(base, ext)) bad += to_string(alg) + "(S=" + std::to_string(steps) + ") ";
            }
        }
    }
    return {bad.empty(), bad.empty() ? "bit-identical for all nine algorithms, S in {1,4}" : "mismatch: " + bad};
}

// Training fixture shared by 7, 8 and 13.
struct Fixture {
    GaussianMixturePrior prior;
    LinearOperator op;
    TrainingSet data;
};

Fixture make_fixture(int dim, std::uint64_t seed, int n_refs, double sigma) {
    Fixture f{random_prior(dim, 4, seed), build_operator(dim, MaskSpec{random_keep_indices(dim, 0.5, seed)}), {}};
    TrainConfig c;
    c.n_refs = n_refs;
    c.base_seed = seed;
    f.data = build_training_set(f.prior, schedule(), c, noisy_observations(ForwardModel(f.op), sigma, seed));
    return f;
}

double mean_mse(const std::vector<Vec>& x, const std::vector<Vec>& ref) {
    double acc = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) acc += mse(x[n], ref[n]);
    return acc / static_cast<double>(x.size());
}

std::vector<Vec> base_estimates(const AlgoParams& p, const Fixture& f, const TimeGrid& g, std::uint64_t seed) {
    std::vector<Vec> out;
    for (std::size_t n = 0; n < f.data.observations.size(); ++n)
        out.push_back(run(p, f.prior, schedule(), f.data.observations[n], g, trajectory_stream(seed, n)));
    return out;
}

// 7 ------------------------------------------------------------------------
Outcome search_space_nesting() {
    const Fixture f = make_fixture(16, 7, 30, 0.05);
    AlgoParams p = AlgoParams::defaults(Algorithm::DPS);
    p.zeta = kDeskZeta;
    const TimeGrid g = make_time_grid(schedule(), 3);
    TrainConfig c;
    c.base_seed = 7;
    c.closed_form = true;
    const TrainResult coupled = train(p, f.prior, schedule(), g, c, f.data);
    const auto dec_copy = to_decoupled(coupled.coeffs);
    double out_gap = 0.0;
    for (std::size_t n = 0; n < f.data.observations.size(); ++n) {
        const Vec a = infer(p, f.prior, schedule(), f.data.observations[n], g, coupled.coeffs, trajectory_stream(7, n));
        const Vec b = infer(p, f.prior, schedule(), f.data.observations[n], g, dec_copy, trajectory_stream(7, n));
        out_gap = std::max(out_gap, (a - b).cwiseAbs().maxCoeff());
    }

    // Per timestep, compare the decoupled optimum with the coupled optimum on the same batch.
    c.decoupled = true;
    double loss_gap = -1e300;
    std::string trace;
    train(p, f.prior, schedule(), g, c, f.data, [&](const TimestepReport& r) {
        std::vector<TrainingSample> cb;
        for (std::size_t n = 0; n < r.xhats->size(); ++n)
            cb.push_back({design_matrix((*r.histories)[n], (*r.xhats)[n]), (*r.targets)[n]});
        const double coupled_loss = batch_loss(cb, solve_ls_closed_form(cb), 0.0, nullptr);
        loss_gap = std::max(loss_gap, r.result->final_loss - coupled_loss);
        trace += " t=" + std::to_string(r.t) + ":" + fmt(r.result->final_loss) + "<=" + fmt(coupled_loss);
    });
    return {out_gap <= kNestingOutputTol && loss_gap <= kNestingLossTol,
            "replica gap " + fmt(out_gap) + ";" + trace};
}

// 8 ------------------------------------------------------------------------
Outcome training_monotonicity() {
    const Fixture f = make_fixture(16, 8, 30, 0.05);
    std::string detail;
    bool ok = true;
    for (Algorithm alg : {Algorithm::DDNM, Algorithm::DPS, Algorithm::DiffPIR, Algorithm::PiGDM}) {
        AlgoParams p = AlgoParams::defaults(alg);
        if (alg == Algorithm::DPS) p.zeta = kDeskZeta;
        for (int steps : {3, 5}) {
            const TimeGrid g = make_time_grid(schedule(), steps);
            TrainConfig c;
            c.base_seed = 8;
            const TrainResult r = train(p, f.prior, schedule(), g, c, f.data);
            for (const auto& st : r.steps) ok = ok && st.final_loss <= st.init_loss + kMonotoneTol;
            const double lle_mse = mean_mse(r.final_estimates, f.data.references);
            const double base_mse = mean_mse(base_estimates(p, f, g, 8), f.data.references);
            ok = ok && lle_mse <= base_mse;
            detail += " " + to_string(alg) + "/S" + std::to_string(steps) + ":" + fmt(lle_mse) + "<=" + fmt(base_mse);
        }
    }
    return {ok, "train mse LLE<=base" + detail};
}

// 9 ------------------------------------------------------------------------
Outcome optimizer_vs_closed_form() {
    RngStream s(9, 9);
    double worst = 0.0;
    TrainConfig c;
    c.epochs = kOptimizerEpochs;
    for (int inst = 0; inst < 10; ++inst) {
        const int dim = 8 + static_cast<int>(s.next_below(8));
        const int bases = 2 + static_cast<int>(s.next_below(4));
        std::vector<TrainingSample> batch;
        for (int n = 0; n < 12; ++n) batch.push_back({random_dense(s, dim, bases), randn(s, dim)});
        const double cf = batch_loss(batch, solve_ls_closed_form(batch), 0.0, nullptr);
        const auto r = train_timestep(batch, Vec::Unit(bases, bases - 1), inst, kOptimizerLr, c, nullptr);
        worst = std::max(worst, r.final_loss - cf);
    }
    return {worst <= kOptimizerGapTol, "max loss gap " + fmt(worst)};
}

// 10 -----------------------------------------------------------------------
Outcome langevin_stationarity() {
    const auto t0 = std::chrono::steady_clock::now();
    const int d = 4;
    const GaussianMixturePrior prior({1.0}, {Vec::Zero(d)}, {Mat::Identity(d, d)});
    const DiffusionModel m{prior, schedule()};
    const int t = 500;
    const double r2 = 1.0 - schedule().alphabar(t);
    AlgoParams p = AlgoParams::defaults(Algorithm::DAPS);
    // Step size η = r2 / 2, so the chain contracts by 1/2 per iteration.
    p.daps.eta0 = 0.5 * r2 / (p.daps.delta + (static_cast<double>(t) / schedule().horizon()) * (1 - p.daps.delta));
    p.daps.n_langevin = 40;
    const double a = daps_step_size(m, p.daps, t) / r2;
    const double var = r2 / (1.0 - a / 2.0);

    // No observed coordinates: the data term vanishes.
    const Observation obs{Vec::Zero(0), ForwardModel(build_operator(d, MaskSpec{{}})), 0.05};
    StepContext ctx;
    ctx.t = t;
    ctx.t_prev = t - 1;
    ctx.x0 = Vec::LinSpaced(d, -1.0, 1.5);

    const int chains = 5000;
    Vec mean = Vec::Zero(d);
    Mat cov = Mat::Zero(d, d);
    std::vector<Vec> draws;
    draws.reserve(chains);
    for (int k = 0; k < chains; ++k) {
        RngStream st(10, stream_id(StreamPurpose::Trajectory, static_cast<std::uint64_t>(k)));
        draws.push_back(corr_daps(m, ctx, obs, p, st));
        mean += draws.back();
    }
    mean /= chains;
    for (const auto& x : draws) cov += (x - mean) * (x - mean).transpose();
    cov /= chains - 1;
    const double se = std::sqrt(var / chains);
    const double mean_dev = (mean - ctx.x0).cwiseAbs().maxCoeff() / se;
    const Mat target = var * Mat::Identity(d, d);
    const double cov_err = (cov - target).norm() / target.norm();
    const double secs = seconds_since(t0);
    return {mean_dev <= kLangevinMeanSE && cov_err <= kLangevinCovRelTol && secs < kLangevinSeconds,
            std::to_string(chains) + " chains x " + std::to_string(p.daps.n_langevin) + " steps, mean dev " +
                fmt(mean_dev) + " SE, cov rel err " + fmt(cov_err) + ", " + fmt(secs) + " s"};
}

// 11 -----------------------------------------------------------------------
Outcome sampling_fidelity() {
    const int d = 4;
    Vec m1 = Vec::Constant(d, 1.5), m2 = Vec::Constant(d, -1.5);
    m2(1) = 1.0;
    RngStream ps(11, 0);
    const GaussianMixturePrior prior({0.3, 0.7}, {m1, m2}, {random_spd(ps, d, 0.05) * 0.3, random_spd(ps, d, 0.05) * 0.3});
    const int n = 4000;
    std::vector<Vec> out(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
        RngStream s(11, stream_id(StreamPurpose::Trajectory, k));
        const Vec x = sample_standard_normal(s, d);
        out[k] = ddim_run(prior, schedule(), x, schedule().horizon(), 500, 0.0, s);
    });
    int first = 0;
    Vec mean = Vec::Zero(d);
    for (const auto& x : out) {
        if ((x - m1).norm() < (x - m2).norm()) ++first;
        mean += x;
    }
    mean /= n;
    const double w_err = std::abs(first / static_cast<double>(n) - 0.3);
    const Vec sd = prior.covariance().diagonal().cwiseSqrt();
    const double z = ((mean - prior.mean()).cwiseAbs().array() / (sd.array() / std::sqrt(n))).maxCoeff();
    return {w_err <= kWeightTol && z <= kMeanSigmas,
            "weight err " + fmt(w_err) + ", max mean dev " + fmt(z) + " sigma/sqrt(n)"};
}

// 12 -----------------------------------------------------------------------
Outcome desk_experiment() {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig c;
    c.prior = std::make_shared<GaussianMixturePrior>(random_prior(32, 4, 12));
    c.schedule = std::make_shared<DiffusionSchedule>(schedule());
    c.op = std::make_shared<ForwardModel>(build_operator(32, MaskSpec{random_keep_indices(32, 0.5, 12)}));
    c.sigma_y = 0.05;
    c.algo = AlgoParams::defaults(Algorithm::DPS);
    c.algo.zeta = kDeskZeta;
    c.steps = 3;
    TrainConfig tc;
    tc.n_refs = 50;
    c.lle = tc;
    c.train_seed = 12;
    c.test_seed = 13;
    c.n_test = 50;
    const auto rows = sweep(c, {3, 5, 10});
    const double secs = seconds_since(t0);
    bool ok = rows.size() == 6 && secs < kSweepSeconds;
    std::string detail;
    for (std::size_t k = 0; k + 1 < rows.size(); k += 2) {
        const auto& b = rows[k];
        const auto& l = rows[k + 1];
        ok = ok && b.status == "ok" && l.status == "ok" && l.train_mse <= b.train_mse;
        const double ratio = l.mean_mse / b.mean_mse;
        detail += " S=" + std::to_string(b.steps) + " train " + fmt(l.train_mse) + "<=" + fmt(b.train_mse) +
                  " held-out " + fmt(l.mean_mse) + "/" + fmt(b.mean_mse) +
                  (ratio <= kHeldOutSoftRatio ? "" : " [soft gate exceeded]") + ";";
    }
    return {ok, fmt(secs) + " s;" + detail};
}

// 13 -----------------------------------------------------------------------
Outcome noisy_ground_truth() {
    const Fixture f = make_fixture(16, 13, 30, 0.05);
    const AlgoParams p = AlgoParams::defaults(Algorithm::DDNM);
    const DiffusionModel m{f.prior, schedule()};
    RngStream s(13, 13);
    double gt_gap = 0.0;
    const TimeGrid g = make_time_grid(schedule(), 5);
    for (int i = 1; i <= 5; ++i)
        for (std::size_t n = 0; n < 5; ++n) {
            StepContext ctx;
            ctx.step = i;
            ctx.t = g.at(i);
            ctx.t_prev = g.at(i - 1);
            ctx.x_t = randn(s, 16);
            ctx.eps = gmm_eps(f.prior, schedule(), ctx.x_t, ctx.t);
            ctx.x0 = tweedie_from_eps(schedule(), ctx.x_t, ctx.t, ctx.eps);
            const Vec& x0 = f.data.references[n];
            StepContext direct = ctx;
            direct.x0 = x0;
            gt_gap = std::max(gt_gap, (make_ground_truth(p, m, ctx, f.data.observations[n], x0, true) -
                                       corr_ddnm(m, direct, f.data.observations[n], p)).cwiseAbs().maxCoeff());
        }
    TrainConfig c;
    c.base_seed = 13;
    c.noisy_gt = true;
    const TrainResult r = train(p, f.prior, schedule(), g, c, f.data);
    bool mono = true;
    for (const auto& st : r.steps) mono = mono && st.final_loss <= st.init_loss + kMonotoneTol;
    const double lle_mse = mean_mse(r.final_estimates, f.data.references);
    const double base_mse = mean_mse(base_estimates(p, f, g, 13), f.data.references);
    return {gt_gap <= kNoisyGtTol && mono && lle_mse <= base_mse,
            "target gap " + fmt(gt_gap) + ", monotone " + (mono ? "yes" : "no") + ", train mse " + fmt(lle_mse) +
                "<=" + fmt(base_mse)};
}

// 14 -----------------------------------------------------------------------
Outcome sweep_determinism(const std::string& cli, const std::filesystem::path& work) {
    std::filesystem::create_directories(work);
    const auto cfg = work / "determinism.json";
    std::ofstream(cfg) << R"({
  "prior": {"random": {"dim": 16, "components": 3, "seed": 14}},
  "task": {"operator": {"kind": "mask", "keep_ratio": 0.5, "seed": 14}, "sigma_y": 0.05},
  "algorithm": {"name": "DAPS", "daps": {"n_langevin": 20}},
  "steps": 3,
  "lle": {"n_refs": 10, "ref_steps": 200, "epochs": 30},
  "seeds": {"train": 3, "test": 4},
  "n_test": 8
})";
    std::string out[2];
    for (int k = 0; k < 2; ++k) {
        const auto csv = work / ("sweep" + std::to_string(k) + ".csv");
        std::filesystem::remove(csv);
        const std::string cmd = "\"" + cli + "\" sweep --config \"" + cfg.string() + "\" --steps 2,3,5 --out \"" +
                                csv.string() + "\"";
        if (std::system(cmd.c_str()) != 0) return {false, "sweep command failed: " + cmd};
        std::ifstream in(csv, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[k] = ss.str();
    }
    const bool ok = !out[0].empty() && out[0] == out[1];
    return {ok, std::to_string(out[0].size()) + " bytes, " + (ok ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: acceptance <lle-cli> <work-dir>\n";
        return 2;
    }
    const std::string cli = argv[1];
    const std::filesystem::path work = argv[2];

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"operator algebra", operator_algebra},
        {"score correctness", score_correctness},
        {"tweedie exactness", tweedie_exactness},
        {"DDIM variance identity", ddim_variance_identity},
        {"noiseless data consistency", noiseless_consistency},
        {"trajectory equivalence", trajectory_equivalence},
        {"search-space nesting", search_space_nesting},
        {"training monotonicity", training_monotonicity},
        {"optimizer vs closed form", optimizer_vs_closed_form},
        {"Langevin stationarity", langevin_stationarity},
        {"sampling fidelity", sampling_fidelity},
        {"desk experiment", desk_experiment},
        {"noisy ground truth", noisy_ground_truth},
        {"sweep determinism", [&] { return sweep_determinism(cli, work); }},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
