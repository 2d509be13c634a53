#include "lle/operators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include "lle/errors.hpp"

namespace lle {

std::string to_string(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::Mask: return "mask";
        case OperatorKind::AvgPool: return "avgpool";
        case OperatorKind::Blur: return "blur";
        case OperatorKind::Hadamard: return "hadamard";
        case OperatorKind::Dense: return "dense";
    }
    return "unknown";
}

LinearOperator::LinearOperator(OperatorKind kind, Mat v, Mat u, Vec s)
    : kind_(kind), v_(std::move(v)), u_(std::move(u)), s_(std::move(s)) {
    if (v_.cols() != s_.size() || u_.cols() != s_.size())
        throw DimensionError("LinearOperator: U, V and s disagree on rank");
    if (s_.size() > 0 && !(s_.minCoeff() > 0.0))
        throw NumericError("LinearOperator: singular values must be positive");
    const Mat eye = Mat::Identity(s_.size(), s_.size());
    if (s_.size() > 0 && ((v_.transpose() * v_ - eye).cwiseAbs().maxCoeff() > 1e-10 ||
                          (u_.transpose() * u_ - eye).cwiseAbs().maxCoeff() > 1e-10))
        throw NumericError("LinearOperator: singular vectors are not orthonormal");
}

void LinearOperator::check_signal(const Vec& x, const char* what) const {
    if (x.size() != v_.rows())
        throw DimensionError(std::string(what) + ": expected signal length " +
                             std::to_string(v_.rows()) + ", got " + std::to_string(x.size()));
}

void LinearOperator::check_obs(const Vec& y, const char* what) const {
    if (y.size() != u_.rows())
        throw DimensionError(std::string(what) + ": expected observation length " +
                             std::to_string(u_.rows()) + ", got " + std::to_string(y.size()));
}

Vec LinearOperator::apply(const Vec& x) const {
    check_signal(x, "apply");
    return u_ * (s_.array() * (v_.transpose() * x).array()).matrix();
}

Vec LinearOperator::apply_adjoint(const Vec& y) const {
    check_obs(y, "apply_adjoint");
    return v_ * (s_.array() * (u_.transpose() * y).array()).matrix();
}

Vec LinearOperator::pinv_apply(const Vec& y) const {
    check_obs(y, "pinv_apply");
    return v_ * ((u_.transpose() * y).array() / s_.array()).matrix();
}

Vec LinearOperator::project_range(const Vec& x) const {
    check_signal(x, "project");
    return v_ * (v_.transpose() * x);
}

Vec LinearOperator::project_null(const Vec& x) const { return x - project_range(x); }

Mat LinearOperator::dense() const { return u_ * s_.asDiagonal() * v_.transpose(); }

Mat LinearOperator::dense_pinv() const {
    return v_ * s_.cwiseInverse().asDiagonal() * u_.transpose();
}

Vec project(const LinearOperator& op, const Vec& x, Subspace which) {
    return which == Subspace::Range ? op.project_range(x) : op.project_null(x);
}

// ---------------------------------------------------------------------------

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void validate_kernel(const std::vector<double>& kernel) {
    if (kernel.empty() || kernel.size() % 2 == 0)
        throw ConfigError("blur kernel must have odd length");
    double sum = 0.0;
    for (std::size_t i = 0; i < kernel.size(); ++i) {
        sum += kernel[i];
        if (std::abs(kernel[i] - kernel[kernel.size() - 1 - i]) > 1e-12)
            throw ConfigError("blur kernel must be symmetric about its center");
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("blur kernel entries must sum to 1");
}

LinearOperator build_mask(int n, const MaskSpec& spec) {
    std::vector<int> keep = spec.keep;
    std::sort(keep.begin(), keep.end());
    if (std::adjacent_find(keep.begin(), keep.end()) != keep.end())
        throw ConfigError("mask: duplicate keep index");
    const int m = static_cast<int>(keep.size());
    Mat v = Mat::Zero(n, m);
    for (int j = 0; j < m; ++j) {
        if (keep[static_cast<std::size_t>(j)] < 0 || keep[static_cast<std::size_t>(j)] >= n)
            throw ConfigError("mask: keep index out of range");
        v(keep[static_cast<std::size_t>(j)], j) = 1.0;
    }
    return LinearOperator(OperatorKind::Mask, std::move(v), Mat::Identity(m, m), Vec::Ones(m));
}

LinearOperator build_avgpool(int n, const AvgPoolSpec& spec) {
    const int f = spec.factor;
    if (f < 1 || n % f != 0)
        throw ConfigError("avgpool: factor " + std::to_string(f) + " must divide n = " +
                          std::to_string(n));
    const int m = n / f;
    Mat v = Mat::Zero(n, m);
    const double w = 1.0 / std::sqrt(static_cast<double>(f));
    for (int j = 0; j < m; ++j) v.block(j * f, j, f, 1).setConstant(w);
    return LinearOperator(OperatorKind::AvgPool, std::move(v), Mat::Identity(m, m),
                          Vec::Constant(m, w));
}

LinearOperator build_blur(int n, const BlurSpec& spec) {
    validate_kernel(spec.kernel);
    // First column of the symmetric circulant.
    std::vector<double> c(static_cast<std::size_t>(n), 0.0);
    const int half = static_cast<int>(spec.kernel.size() / 2);
    for (int i = 0; i < static_cast<int>(spec.kernel.size()); ++i) {
        const int off = ((i - half) % n + n) % n;
        c[static_cast<std::size_t>(off)] += spec.kernel[static_cast<std::size_t>(i)];
    }
    // Real orthonormal eigenbasis: constant, cos/sin pairs, and alternating (n even).
    std::vector<Vec> basis;
    std::vector<double> eig;
    auto eigenvalue = [&](int k) {
        double lam = 0.0;
        for (int j = 0; j < n; ++j)
            lam += c[static_cast<std::size_t>(j)] * std::cos(2.0 * std::numbers::pi * j * k / n);
        return lam;
    };
    basis.push_back(Vec::Constant(n, 1.0 / std::sqrt(static_cast<double>(n))));
    eig.push_back(eigenvalue(0));
    for (int k = 1; 2 * k < n; ++k) {
        Vec cv(n), sv(n);
        const double scale = std::sqrt(2.0 / n);
        for (int j = 0; j < n; ++j) {
            const double phase = 2.0 * std::numbers::pi * j * k / n;
            cv[j] = scale * std::cos(phase);
            sv[j] = scale * std::sin(phase);
        }
        const double lam = eigenvalue(k);
        basis.push_back(std::move(cv));
        eig.push_back(lam);
        basis.push_back(std::move(sv));
        eig.push_back(lam);
    }
    if (n % 2 == 0) {
        Vec alt(n);
        for (int j = 0; j < n; ++j) alt[j] = (j % 2 == 0 ? 1.0 : -1.0) / std::sqrt(static_cast<double>(n));
        basis.push_back(std::move(alt));
        eig.push_back(eigenvalue(n / 2));
    }
    double max_abs = 0.0;
    for (double l : eig) max_abs = std::max(max_abs, std::abs(l));
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < eig.size(); ++k)
        if (std::abs(eig[k]) > 1e-12 * max_abs) kept.push_back(k);
    const int r = static_cast<int>(kept.size());
    Mat v(n, r), u(n, r);
    Vec s(r);
    for (int j = 0; j < r; ++j) {
        const std::size_t k = kept[static_cast<std::size_t>(j)];
        v.col(j) = basis[k];
        u.col(j) = eig[k] < 0.0 ? (-basis[k]).eval() : basis[k];
        s[j] = std::abs(eig[k]);
    }
    return LinearOperator(OperatorKind::Blur, std::move(v), std::move(u), std::move(s));
}

LinearOperator build_hadamard(int n, const HadamardSpec& spec) {
    if (!is_power_of_two(n))
        throw ConfigError("hadamard: n = " + std::to_string(n) + " is not a power of two");
    const std::vector<int> rows = random_keep_indices(n, spec.keep_ratio, spec.seed);
    const Eigen::MatrixXi h = hadamard_matrix(n);
    const int m = static_cast<int>(rows.size());
    Mat v(n, m);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < m; ++j)
        v.col(j) = h.row(rows[static_cast<std::size_t>(j)]).transpose().cast<double>() * scale;
    return LinearOperator(OperatorKind::Hadamard, std::move(v), Mat::Identity(m, m), Vec::Ones(m));
}

LinearOperator build_dense(int n, const DenseSpec& spec) {
    const Mat& a = spec.matrix;
    if (a.cols() != n)
        throw DimensionError("dense: matrix has " + std::to_string(a.cols()) +
                             " columns, expected " + std::to_string(n));
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec& sv = svd.singularValues();
    const double tol = 1e-12 * std::max(1.0, sv.size() > 0 ? sv[0] : 0.0);
    int r = 0;
    while (r < sv.size() && sv[r] > tol) ++r;
    return LinearOperator(OperatorKind::Dense, svd.matrixV().leftCols(r), svd.matrixU().leftCols(r),
                          sv.head(r));
}

}  // namespace

LinearOperator build_operator(int n, const OperatorSpec& spec) {
    if (n < 1) throw ConfigError("operator: signal dimension must be >= 1");
    return std::visit(
        [n](const auto& s) -> LinearOperator {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, MaskSpec>) return build_mask(n, s);
            else if constexpr (std::is_same_v<T, AvgPoolSpec>) return build_avgpool(n, s);
            else if constexpr (std::is_same_v<T, BlurSpec>) return build_blur(n, s);
            else if constexpr (std::is_same_v<T, HadamardSpec>) return build_hadamard(n, s);
            else return build_dense(n, s);
        },
        spec);
}

std::vector<int> random_keep_indices(int n, double keep_ratio, std::uint64_t seed) {
    if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) throw ConfigError("keep_ratio must lie in (0, 1]");
    const int m = static_cast<int>(std::lround(keep_ratio * n));
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    RngStream stream(seed, stream_id(StreamPurpose::OperatorLayout, 0));
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(stream.next_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(m));
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
    if (!(sigma > 0.0) || radius < 0) throw ConfigError("gaussian kernel needs sigma > 0, radius >= 0");
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    // Exact symmetry after normalization.
    for (int i = 0; i < radius; ++i) k[k.size() - 1 - static_cast<std::size_t>(i)] = k[static_cast<std::size_t>(i)];
    return k;
}

Eigen::MatrixXi hadamard_matrix(int n) {
    if (!is_power_of_two(n))
        throw ConfigError("hadamard: n = " + std::to_string(n) + " is not a power of two");
    Eigen::MatrixXi h(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) h(i, j) = (std::popcount(static_cast<unsigned>(i & j)) % 2) ? -1 : 1;
    return h;
}

Vec circular_convolve(const std::vector<double>& kernel, const Vec& x) {
    const int n = static_cast<int>(x.size());
    const int half = static_cast<int>(kernel.size() / 2);
    Vec out = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 0; k < static_cast<int>(kernel.size()); ++k) {
            const int j = ((i - (k - half)) % n + n) % n;
            acc += kernel[static_cast<std::size_t>(k)] * x[j];
        }
        out[i] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------

NonlinearOperator::NonlinearOperator(std::vector<double> kernel, double scale, int n)
    : kernel_(std::move(kernel)), scale_(scale), n_(n) {
    validate_kernel(kernel_);
    if (!(scale_ > 0.0)) throw ConfigError("nonlinear operator: scale must be positive");
    if (n_ < 1) throw ConfigError("nonlinear operator: dimension must be >= 1");
}

Vec NonlinearOperator::apply(const Vec& x) const {
    if (x.size() != n_) throw DimensionError("nl_apply: signal length mismatch");
    return (scale_ * circular_convolve(kernel_, x)).array().tanh().matrix();
}

Vec NonlinearOperator::vjp(const Vec& x, const Vec& v) const {
    if (v.size() != n_) throw DimensionError("nl_vjp: cotangent length mismatch");
    const Vec y = apply(x);
    const Vec w = (scale_ * (1.0 - y.array().square()) * v.array()).matrix();
    return circular_convolve(kernel_, w);
}

Vec nl_apply(const NonlinearOperator& op, const Vec& x) { return op.apply(x); }
Vec nl_vjp(const NonlinearOperator& op, const Vec& x, const Vec& v) { return op.vjp(x, v); }

ForwardModel::ForwardModel(LinearOperator op)
    : linear_(std::make_shared<const LinearOperator>(std::move(op))) {}

ForwardModel::ForwardModel(NonlinearOperator op)
    : nonlinear_(std::make_shared<const NonlinearOperator>(std::move(op))) {}

const LinearOperator& ForwardModel::linear(const char* caller) const {
    if (!linear_) throw ConfigError(std::string(caller) + ": unsupported operator (requires a linear operator)");
    return *linear_;
}

int ForwardModel::signal_dim() const {
    return linear_ ? linear_->signal_dim() : nonlinear_->signal_dim();
}

int ForwardModel::obs_dim() const { return linear_ ? linear_->obs_dim() : nonlinear_->obs_dim(); }

Vec ForwardModel::apply(const Vec& x) const {
    return linear_ ? linear_->apply(x) : nonlinear_->apply(x);
}

Vec ForwardModel::vjp(const Vec& x, const Vec& v) const {
    return linear_ ? linear_->apply_adjoint(v) : nonlinear_->vjp(x, v);
}

Vec ForwardModel::residual_grad(const Vec& x, const Vec& y) const {
    return 2.0 * vjp(x, apply(x) - y);
}

Observation observe(const ForwardModel& op, const Vec& x0, double sigma_y, RngStream& noise) {
    if (!(sigma_y >= 0.0)) throw ConfigError("observe: sigma_y must be >= 0");
    Vec y = op.apply(x0);
    if (sigma_y > 0.0) y += sigma_y * sample_standard_normal(noise, static_cast<std::size_t>(y.size()));
    return Observation{std::move(y), op, sigma_y};
}

}  // namespace lle
