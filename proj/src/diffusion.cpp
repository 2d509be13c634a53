#include "lle/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "lle/errors.hpp"

namespace lle {

DiffusionSchedule DiffusionSchedule::linear(int horizon, double beta_start, double beta_end) {
    if (horizon < 1) throw ConfigError("schedule horizon must be >= 1");
    if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end))
        throw ConfigError("schedule betas must satisfy 0 < beta_start <= beta_end < 1");
    std::vector<double> table(static_cast<std::size_t>(horizon) + 1);
    table[0] = 1.0;
    double prod = 1.0;
    for (int s = 1; s <= horizon; ++s) {
        const double beta =
            horizon == 1 ? beta_end
                         : beta_start + (beta_end - beta_start) * (s - 1) / (horizon - 1.0);
        prod *= 1.0 - beta;
        table[static_cast<std::size_t>(s)] = prod;
    }
    return DiffusionSchedule(std::move(table));
}

DiffusionSchedule::DiffusionSchedule(std::vector<double> alphabar) : alphabar_(std::move(alphabar)) {
    if (alphabar_.size() < 2) throw ConfigError("schedule needs at least t = 0 and t = 1");
    if (alphabar_.front() != 1.0) throw ConfigError("schedule: alphabar(0) must equal 1");
    for (std::size_t t = 1; t < alphabar_.size(); ++t) {
        if (!(alphabar_[t] > 0.0 && alphabar_[t] < alphabar_[t - 1]))
            throw ConfigError("schedule: alphabar must be positive and strictly decreasing (t = " +
                              std::to_string(t) + ")");
    }
    if (alphabar_.back() > 1e-4)
        throw ConfigError("schedule: alphabar(T) must be <= 1e-4, got " +
                          std::to_string(alphabar_.back()));
}

double DiffusionSchedule::alphabar(int t) const {
    if (t < 0 || t > horizon())
        throw BoundsError("timestep " + std::to_string(t) + " outside [0, " +
                          std::to_string(horizon()) + "]");
    return alphabar_[static_cast<std::size_t>(t)];
}

double DiffusionSchedule::sigma(int t) const { return std::sqrt(1.0 - alphabar(t)); }

double alphabar(const DiffusionSchedule& schedule, int t) { return schedule.alphabar(t); }

TimeGrid make_time_grid(const DiffusionSchedule& schedule, int steps) {
    const int horizon = schedule.horizon();
    if (steps < 1 || steps > horizon)
        throw ConfigError("invalid grid: steps = " + std::to_string(steps) + " must be in [1, " +
                          std::to_string(horizon) + "]");
    TimeGrid grid;
    grid.steps = steps;
    grid.t.resize(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i) {
        grid.t[static_cast<std::size_t>(i)] =
            static_cast<int>(std::lround(static_cast<double>(i) * horizon / steps));
    }
    for (int i = 1; i <= steps; ++i) {
        if (grid.at(i) <= grid.at(i - 1))
            throw ConfigError("invalid grid: rounding collision at step " + std::to_string(i));
    }
    return grid;
}

// ---------------------------------------------------------------------------

struct GaussianMixturePrior::Eval {
    std::vector<double> resp;
    std::vector<Vec> prec_diff;  // C_k^{-1} (x - m_k)
    std::vector<Vec> noised_eigvals;
    double log_q = 0.0;
};

GaussianMixturePrior::GaussianMixturePrior(std::vector<double> weights, std::vector<Vec> means,
                                           std::vector<Mat> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covariances_(std::move(covariances)) {
    const std::size_t k = weights_.size();
    if (k == 0) throw ConfigError("prior: at least one component required");
    if (means_.size() != k || covariances_.size() != k)
        throw ConfigError("prior: weights, means and covariances must have equal counts");
    dim_ = static_cast<int>(means_.front().size());
    if (dim_ < 1) throw ConfigError("prior: dimension must be >= 1");

    double total = 0.0;
    for (double w : weights_) {
        if (!(w > 0.0)) throw ConfigError("prior: weights must be positive");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("prior: weights must sum to 1");

    factors_.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
        const Mat& cov = covariances_[c];
        if (means_[c].size() != dim_ || cov.rows() != dim_ || cov.cols() != dim_)
            throw ConfigError("prior: component " + std::to_string(c) + " has wrong dimension");
        if ((cov - cov.transpose()).norm() > 1e-10 * std::max(1.0, cov.norm()))
            throw ConfigError("prior: covariance " + std::to_string(c) + " is not symmetric");
        Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
        if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0))
            throw ConfigError("prior: covariance " + std::to_string(c) +
                              " is not positive definite");
        factors_.push_back({eig.eigenvectors(), eig.eigenvalues()});
    }
}

void GaussianMixturePrior::check_dim(const Vec& x, const char* what) const {
    if (x.size() != dim_)
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(dim_) +
                             ", got " + std::to_string(x.size()));
}

GaussianMixturePrior::Eval GaussianMixturePrior::evaluate(const DiffusionSchedule& schedule,
                                                          const Vec& x, int t) const {
    check_dim(x, "prior");
    const double a = schedule.alphabar(t);
    const double sa = std::sqrt(a);
    const std::size_t k = weights_.size();
    Eval ev;
    ev.resp.resize(k);
    ev.prec_diff.resize(k);
    ev.noised_eigvals.resize(k);
    std::vector<double> logp(k);
    const double log2pi = std::log(2.0 * std::numbers::pi);
    for (std::size_t c = 0; c < k; ++c) {
        const Component& f = factors_[c];
        Vec lam = (a * f.eigvals.array() + (1.0 - a)).matrix();
        if (!(lam.minCoeff() > 0.0)) throw NumericError("noised covariance is not positive definite");
        const Vec z = f.eigvecs.transpose() * (x - sa * means_[c]);
        const Vec zs = (z.array() / lam.array()).matrix();
        const double quad = z.dot(zs);
        const double logdet = lam.array().log().sum();
        logp[c] = std::log(weights_[c]) - 0.5 * (dim_ * log2pi + logdet + quad);
        ev.prec_diff[c] = f.eigvecs * zs;
        ev.noised_eigvals[c] = std::move(lam);
    }
    const double mx = *std::max_element(logp.begin(), logp.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        ev.resp[c] = std::exp(logp[c] - mx);
        sum += ev.resp[c];
    }
    for (double& r : ev.resp) r /= sum;
    ev.log_q = mx + std::log(sum);
    return ev;
}

double GaussianMixturePrior::log_density(const DiffusionSchedule& schedule, const Vec& x,
                                         int t) const {
    return evaluate(schedule, x, t).log_q;
}

std::vector<double> GaussianMixturePrior::responsibilities(const DiffusionSchedule& schedule,
                                                           const Vec& x, int t) const {
    return evaluate(schedule, x, t).resp;
}

Vec GaussianMixturePrior::score(const DiffusionSchedule& schedule, const Vec& x, int t) const {
    const Eval ev = evaluate(schedule, x, t);
    Vec s = Vec::Zero(dim_);
    for (std::size_t c = 0; c < ev.resp.size(); ++c) s -= ev.resp[c] * ev.prec_diff[c];
    return s;
}

Vec GaussianMixturePrior::score_hvp(const DiffusionSchedule& schedule, const Vec& x, int t,
                                    const Vec& v) const {
    check_dim(v, "score_hvp direction");
    const Eval ev = evaluate(schedule, x, t);
    // H = sum_k r_k (-C_k^{-1} + p_k p_k^T) - s s^T, with s = -sum_k r_k p_k.
    Vec s = Vec::Zero(dim_);
    Vec hv = Vec::Zero(dim_);
    for (std::size_t c = 0; c < ev.resp.size(); ++c) {
        const Component& f = factors_[c];
        const Vec& p = ev.prec_diff[c];
        const Vec cinv_v =
            f.eigvecs * ((f.eigvecs.transpose() * v).array() / ev.noised_eigvals[c].array()).matrix();
        hv += ev.resp[c] * (p * p.dot(v) - cinv_v);
        s -= ev.resp[c] * p;
    }
    hv -= s * s.dot(v);
    return hv;
}

Vec GaussianMixturePrior::sample(RngStream& stream) const {
    const double u = stream.next_uniform();
    std::size_t c = 0;
    double acc = weights_[0];
    while (u > acc && c + 1 < weights_.size()) acc += weights_[++c];
    const Vec z = sample_standard_normal(stream, static_cast<std::size_t>(dim_));
    const Component& f = factors_[c];
    return means_[c] + f.eigvecs * (f.eigvals.array().sqrt() * z.array()).matrix();
}

Vec GaussianMixturePrior::mean() const {
    Vec m = Vec::Zero(dim_);
    for (std::size_t c = 0; c < weights_.size(); ++c) m += weights_[c] * means_[c];
    return m;
}

Mat GaussianMixturePrior::covariance() const {
    const Vec m = mean();
    Mat cov = Mat::Zero(dim_, dim_);
    for (std::size_t c = 0; c < weights_.size(); ++c)
        cov += weights_[c] * (covariances_[c] + means_[c] * means_[c].transpose());
    return cov - m * m.transpose();
}

// ---------------------------------------------------------------------------

Vec gmm_eps(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule, const Vec& x,
            int t) {
    return -schedule.sigma(t) * prior.score(schedule, x, t);
}

Vec gmm_eps_jvp(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule,
                const Vec& x, int t, const Vec& v) {
    return -schedule.sigma(t) * prior.score_hvp(schedule, x, t, v);
}

Vec tweedie_from_eps(const DiffusionSchedule& schedule, const Vec& x, int t, const Vec& eps) {
    if (t == 0) return x;
    const double a = schedule.alphabar(t);
    return (x - std::sqrt(1.0 - a) * eps) / std::sqrt(a);
}

Vec tweedie(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule, const Vec& x,
            int t) {
    if (t == 0) return x;
    return tweedie_from_eps(schedule, x, t, gmm_eps(prior, schedule, x, t));
}

Vec tweedie_jvp(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule,
                const Vec& x, int t, const Vec& v) {
    if (t == 0) return v;
    const double a = schedule.alphabar(t);
    return (v + (1.0 - a) * prior.score_hvp(schedule, x, t, v)) / std::sqrt(a);
}

DdimCoefficients ddim_coefficients(const DiffusionSchedule& schedule, int t_from, int t_to,
                                   double eta) {
    if (t_to < 0 || t_from < t_to)
        throw BoundsError("ddim: require t_from >= t_to >= 0, got " + std::to_string(t_from) +
                          " -> " + std::to_string(t_to));
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("ddim: eta must lie in [0, 1]");
    const double a_from = schedule.alphabar(t_from);
    const double a_to = schedule.alphabar(t_to);
    DdimCoefficients c;
    if (t_from != t_to) {
        c.c1 = eta * std::sqrt(std::max(0.0, 1.0 - a_from / a_to)) *
               std::sqrt((1.0 - a_to) / (1.0 - a_from));
    }
    double rad = 1.0 - a_to - c.c1 * c.c1;
    if (rad < -1e-12) throw NumericError("ddim: c1^2 exceeds 1 - alphabar");
    c.c2 = std::sqrt(std::max(0.0, rad));
    return c;
}

Vec ddim_step(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule, const Vec& x,
              int t_from, int t_to, double eta, const Vec& noise) {
    const DdimCoefficients c = ddim_coefficients(schedule, t_from, t_to, eta);
    if (t_from == t_to) return x;
    if (noise.size() != x.size()) throw DimensionError("ddim_step: noise length mismatch");
    const Vec eps = gmm_eps(prior, schedule, x, t_from);
    const Vec x0 = tweedie_from_eps(schedule, x, t_from, eps);
    return std::sqrt(schedule.alphabar(t_to)) * x0 + c.c1 * noise + c.c2 * eps;
}

Vec ddim_step(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule, const Vec& x,
              int t_from, int t_to, double eta, RngStream& stream) {
    if (t_from == t_to) return x;
    const Vec noise = eta > 0.0 ? sample_standard_normal(stream, static_cast<std::size_t>(x.size()))
                                : Vec::Zero(x.size()).eval();
    return ddim_step(prior, schedule, x, t_from, t_to, eta, noise);
}

Vec ddim_run(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule, const Vec& x,
             int t_start, int k_steps, double eta, RngStream& stream) {
    if (k_steps < 1) throw ConfigError("ddim_run: k_steps must be >= 1");
    schedule.alphabar(t_start);
    Vec cur = x;
    int prev = t_start;
    for (int j = k_steps - 1; j >= 0; --j) {
        const int next = static_cast<int>(std::lround(static_cast<double>(j) * t_start / k_steps));
        cur = ddim_step(prior, schedule, cur, prev, next, eta, stream);
        prev = next;
    }
    return cur;
}

}  // namespace lle
