#pragma once

#include <vector>

#include "lle/numerics.hpp"

namespace lle {

// Variance-preserving noise schedule: alphabar(t) for t in [0, T], alphabar(0) = 1.
class DiffusionSchedule {
public:
    // Linear beta from beta_start to beta_end over steps 1..T.
    static DiffusionSchedule linear(int horizon = 1000, double beta_start = 1e-4,
                                    double beta_end = 0.02);
    // Table indexed by t = 0..T; must start at 1, decrease, and end at <= 1e-4.
    explicit DiffusionSchedule(std::vector<double> alphabar);

    int horizon() const noexcept { return static_cast<int>(alphabar_.size()) - 1; }
    double alphabar(int t) const;
    double sigma(int t) const;  // sqrt(1 - alphabar(t))

private:
    std::vector<double> alphabar_;
};

double alphabar(const DiffusionSchedule& schedule, int t);

// Timesteps t_0 = 0 < t_1 < ... < t_S. Index i of `t` is the step index.
struct TimeGrid {
    int steps = 0;
    std::vector<int> t;

    int at(int i) const { return t.at(static_cast<std::size_t>(i)); }
    // t_S, t_{S-1}, ..., t_0
    std::vector<int> descending() const { return {t.rbegin(), t.rend()}; }
};

// t_i = round(i * T / S), i = S..0.
TimeGrid make_time_grid(const DiffusionSchedule& schedule, int steps);

// Gaussian mixture q(x0) = sum_k w_k N(mu_k, Sigma_k). Each covariance is
// eigendecomposed once; the noised covariance alphabar*Sigma + (1-alphabar)*I
// shares its eigenvectors, so every timestep is handled without refactoring.
class GaussianMixturePrior {
public:
    GaussianMixturePrior(std::vector<double> weights, std::vector<Vec> means,
                         std::vector<Mat> covariances);

    int dim() const noexcept { return dim_; }
    int components() const noexcept { return static_cast<int>(weights_.size()); }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<Vec>& means() const noexcept { return means_; }
    const std::vector<Mat>& covariances() const noexcept { return covariances_; }

    // log q_t(x) of the noised mixture.
    double log_density(const DiffusionSchedule& schedule, const Vec& x, int t) const;
    // grad_x log q_t(x).
    Vec score(const DiffusionSchedule& schedule, const Vec& x, int t) const;
    // Hess_x log q_t(x) * v.
    Vec score_hvp(const DiffusionSchedule& schedule, const Vec& x, int t, const Vec& v) const;
    // Posterior component responsibilities under q_t.
    std::vector<double> responsibilities(const DiffusionSchedule& schedule, const Vec& x,
                                         int t) const;

    // Exact draw from q(x0).
    Vec sample(RngStream& stream) const;
    Vec mean() const;
    Mat covariance() const;

private:
    struct Component {
        Mat eigvecs;
        Vec eigvals;
    };
    struct Eval;
    Eval evaluate(const DiffusionSchedule& schedule, const Vec& x, int t) const;
    void check_dim(const Vec& x, const char* what) const;

    int dim_ = 0;
    std::vector<double> weights_;
    std::vector<Vec> means_;
    std::vector<Mat> covariances_;
    std::vector<Component> factors_;
};

// eps(x, t) = -sqrt(1 - alphabar_t) * grad log q_t(x).
Vec gmm_eps(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule, const Vec& x,
            int t);
// (d eps / dx) v. The Jacobian is symmetric, so this is also the VJP.
Vec gmm_eps_jvp(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule,
                const Vec& x, int t, const Vec& v);

// (x - sqrt(1 - alphabar_t) eps) / sqrt(alphabar_t); identity at t = 0.
Vec tweedie(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule, const Vec& x,
            int t);
Vec tweedie_from_eps(const DiffusionSchedule& schedule, const Vec& x, int t, const Vec& eps);
// (d tweedie / dx) v = (v + (1 - alphabar_t) Hess log q_t v) / sqrt(alphabar_t).
Vec tweedie_jvp(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule,
                const Vec& x, int t, const Vec& v);

struct DdimCoefficients {
    double c1 = 0.0;  // fresh-noise weight
    double c2 = 0.0;  // predicted-noise weight
};

// c1 = eta * sqrt(1 - a_from/a_to) * sqrt((1 - a_to)/(1 - a_from)),
// c2 = sqrt(1 - a_to - c1^2).
DdimCoefficients ddim_coefficients(const DiffusionSchedule& schedule, int t_from, int t_to,
                                   double eta);

// One DDIM step with explicit noise. t_from == t_to returns x.
Vec ddim_step(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule, const Vec& x,
              int t_from, int t_to, double eta, const Vec& noise);
// Same, drawing noise from the stream when eta > 0.
Vec ddim_step(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule, const Vec& x,
              int t_from, int t_to, double eta, RngStream& stream);

// k DDIM steps on the evenly spaced sub-grid round(j * t_start / k), j = k..0.
Vec ddim_run(const GaussianMixturePrior& prior, const DiffusionSchedule& schedule, const Vec& x,
             int t_start, int k_steps, double eta, RngStream& stream);

}  // namespace lle
