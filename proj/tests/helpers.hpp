#pragma once

#include <cmath>
#include <functional>

#include "lle/diffusion.hpp"
#include "lle/numerics.hpp"

namespace testing_util {

using lle::Mat;
using lle::Vec;

inline Vec random_vec(lle::RngStream& s, int n, double scale = 1.0) {
    return scale * lle::sample_standard_normal(s, static_cast<std::size_t>(n));
}

inline Mat random_spd(lle::RngStream& s, int n, double floor = 0.1) {
    Mat b(n, n);
    for (int c = 0; c < n; ++c) b.col(c) = random_vec(s, n);
    Mat m = b * b.transpose() / n;
    m.diagonal().array() += floor;
    return 0.5 * (m + m.transpose());
}

inline lle::GaussianMixturePrior random_mixture(std::uint64_t seed, int dim, int k) {
    lle::RngStream s(seed, 99);
    std::vector<double> w;
    std::vector<Vec> mu;
    std::vector<Mat> cov;
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        w.push_back(0.5 + s.next_uniform());
        total += w.back();
        mu.push_back(random_vec(s, dim));
        cov.push_back(random_spd(s, dim, 0.05));
    }
    double acc = 0.0;
    for (int i = 0; i + 1 < k; ++i) {
        w[static_cast<std::size_t>(i)] /= total;
        acc += w[static_cast<std::size_t>(i)];
    }
    w.back() = 1.0 - acc;
    return lle::GaussianMixturePrior(w, mu, cov);
}

inline lle::GaussianMixturePrior standard_normal_prior(int dim) {
    return lle::GaussianMixturePrior({1.0}, {Vec::Zero(dim)}, {Mat::Identity(dim, dim)});
}

// Central difference of a scalar function along direction v.
inline double directional_fd(const std::function<double(const Vec&)>& f, const Vec& x, const Vec& v,
                             double h = 1e-5) {
    return (f(x + h * v) - f(x - h * v)) / (2.0 * h);
}

// Central-difference Jacobian-vector product of a vector function.
inline Vec jvp_fd(const std::function<Vec(const Vec&)>& f, const Vec& x, const Vec& v,
                  double h = 1e-5) {
    return (f(x + h * v) - f(x - h * v)) / (2.0 * h);
}

inline double rel_err(const Vec& a, const Vec& b) {
    return (a - b).norm() / std::max(1e-300, std::max(a.norm(), b.norm()));
}

}  // namespace testing_util
