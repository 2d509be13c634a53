#include "lle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lle/errors.hpp"

namespace lle {

Mat PosteriorMixture::covariance() const {
    const auto n = mmse_mean.size();
    Mat c = Mat::Zero(n, n);
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const Vec d = means[k] - mmse_mean;
        c += weights[k] * (covariances[k] + d * d.transpose());
    }
    return c;
}

PosteriorMixture oracle_posterior(const GaussianMixturePrior& prior, const LinearOperator& op,
                                  const Vec& y, double sigma_y, bool allow_floor) {
    if (op.signal_dim() != prior.dim()) throw DimensionError("oracle: operator/prior dimension mismatch");
    if (y.size() != op.obs_dim()) throw DimensionError("oracle: observation length mismatch");
    PosteriorMixture post;
    double sigma = sigma_y;
    if (!(sigma >= kOracleSigmaFloor)) {
        if (!allow_floor)
            throw ConfigError("oracle: sigma_y below 1e-6 requires the noiseless approximation flag");
        sigma = kOracleSigmaFloor;
        post.floored = true;
    }
    post.sigma_used = sigma;

    const Mat a = op.dense();
    const auto m = a.rows();
    const int kcount = prior.components();
    std::vector<double> logw(static_cast<std::size_t>(kcount));
    for (int k = 0; k < kcount; ++k) {
        const auto idx = static_cast<std::size_t>(k);
        const Vec& mu = prior.means()[idx];
        const Mat& cov = prior.covariances()[idx];
        const Mat ac = a * cov;
        Mat s = ac * a.transpose();
        s.diagonal().array() += sigma * sigma;
        const Eigen::LLT<Mat> llt(s);
        if (llt.info() != Eigen::Success) throw NumericError("oracle: innovation covariance not PD");
        const Vec innov = y - a * mu;
        const Vec sol = llt.solve(innov);
        const Mat gain_t = llt.solve(ac);  // S^{-1} A Sigma = K^T
        post.means.push_back(mu + gain_t.transpose() * innov);
        Mat pc = cov - ac.transpose() * gain_t;
        post.covariances.push_back(0.5 * (pc + pc.transpose()));
        const Mat l = llt.matrixL();
        const double logdet = 2.0 * l.diagonal().array().log().sum();
        logw[idx] = std::log(prior.weights()[idx]) -
                    0.5 * (innov.dot(sol) + logdet + static_cast<double>(m) * std::log(2.0 * std::numbers::pi));
    }
    const double mx = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    for (double& w : logw) {
        w = std::exp(w - mx);
        total += w;
    }
    post.mmse_mean = Vec::Zero(prior.dim());
    for (int k = 0; k < kcount; ++k) {
        const auto idx = static_cast<std::size_t>(k);
        post.weights.push_back(logw[idx] / total);
        post.mmse_mean += post.weights.back() * post.means[idx];
    }
    return post;
}

}  // namespace lle
