#pragma once

#include <vector>

#include "lle/diffusion.hpp"
#include "lle/operators.hpp"

namespace lle {

inline constexpr double kOracleSigmaFloor = 1e-6;

// Exact posterior of a Gaussian mixture prior under y = A x + sigma_y n.
struct PosteriorMixture {
    std::vector<double> weights;
    std::vector<Vec> means;
    std::vector<Mat> covariances;
    Vec mmse_mean;
    double sigma_used = 0.0;
    bool floored = false;  // sigma_y was raised to the floor

    Mat covariance() const;  // total posterior covariance
    double variance_trace() const { return covariance().trace(); }
};

// sigma_y below the floor is a ConfigError unless allow_floor is set, in which
// case the floor is used and `floored` reports it.
PosteriorMixture oracle_posterior(const GaussianMixturePrior& prior, const LinearOperator& op,
                                  const Vec& y, double sigma_y, bool allow_floor = false);

}  // namespace lle
