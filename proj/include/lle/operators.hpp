#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "lle/numerics.hpp"

namespace lle {

enum class OperatorKind { Mask, AvgPool, Blur, Hadamard, Dense };

std::string to_string(OperatorKind kind);

// A = U diag(s) V^T with orthonormal columns in U (m x r) and V (n x r) and
// strictly positive s. Zero singular values are omitted; their directions form
// the null space.
class LinearOperator {
public:
    LinearOperator(OperatorKind kind, Mat v, Mat u, Vec s);

    OperatorKind kind() const noexcept { return kind_; }
    int signal_dim() const noexcept { return static_cast<int>(v_.rows()); }
    int obs_dim() const noexcept { return static_cast<int>(u_.rows()); }
    int rank() const noexcept { return static_cast<int>(s_.size()); }
    const Mat& v() const noexcept { return v_; }
    const Mat& u() const noexcept { return u_; }
    const Vec& s() const noexcept { return s_; }

    Vec apply(const Vec& x) const;
    Vec apply_adjoint(const Vec& y) const;
    Vec pinv_apply(const Vec& y) const;
    Vec project_range(const Vec& x) const;  // V V^T x
    Vec project_null(const Vec& x) const;   // x - V V^T x

    Mat dense() const;
    Mat dense_pinv() const;

private:
    void check_signal(const Vec& x, const char* what) const;
    void check_obs(const Vec& y, const char* what) const;

    OperatorKind kind_;
    Mat v_;
    Mat u_;
    Vec s_;
};

struct MaskSpec {
    std::vector<int> keep;
};
struct AvgPoolSpec {
    int factor = 1;
};
// Symmetric circular kernel of odd length, entries summing to 1.
struct BlurSpec {
    std::vector<double> kernel;
};
struct HadamardSpec {
    double keep_ratio = 0.5;
    std::uint64_t seed = 0;
};
struct DenseSpec {
    Mat matrix;
};
using OperatorSpec = std::variant<MaskSpec, AvgPoolSpec, BlurSpec, HadamardSpec, DenseSpec>;

LinearOperator build_operator(int n, const OperatorSpec& spec);

// round(keep_ratio * n) distinct sorted indices chosen by a seeded shuffle.
std::vector<int> random_keep_indices(int n, double keep_ratio, std::uint64_t seed);
// Normalized Gaussian kernel of length 2*radius + 1.
std::vector<double> gaussian_kernel(double sigma, int radius);
// Sylvester-ordered +-1 Walsh-Hadamard matrix; n must be a power of two.
Eigen::MatrixXi hadamard_matrix(int n);
// Circular convolution of x with a centered odd-length kernel.
Vec circular_convolve(const std::vector<double>& kernel, const Vec& x);

enum class Subspace { Range, Null };
Vec project(const LinearOperator& op, const Vec& x, Subspace which);

// y = tanh(scale * (K conv x)).
class NonlinearOperator {
public:
    NonlinearOperator(std::vector<double> kernel, double scale, int n);

    int signal_dim() const noexcept { return n_; }
    int obs_dim() const noexcept { return n_; }
    const std::vector<double>& kernel() const noexcept { return kernel_; }
    double scale() const noexcept { return scale_; }

    Vec apply(const Vec& x) const;
    // J(x)^T v = K conv (scale * (1 - y^2) * v); the kernel is symmetric.
    Vec vjp(const Vec& x, const Vec& v) const;

private:
    std::vector<double> kernel_;
    double scale_;
    int n_;
};

Vec nl_apply(const NonlinearOperator& op, const Vec& x);
Vec nl_vjp(const NonlinearOperator& op, const Vec& x, const Vec& v);

// Observation function, linear or nonlinear. Cheap to copy; the operator is shared.
class ForwardModel {
public:
    explicit ForwardModel(LinearOperator op);
    explicit ForwardModel(NonlinearOperator op);

    bool is_linear() const noexcept { return linear_ != nullptr; }
    // Throws ConfigError when the model is nonlinear.
    const LinearOperator& linear(const char* caller = "operation") const;
    const LinearOperator* linear_or_null() const noexcept { return linear_.get(); }
    const NonlinearOperator* nonlinear_or_null() const noexcept { return nonlinear_.get(); }

    int signal_dim() const;
    int obs_dim() const;
    Vec apply(const Vec& x) const;
    Vec vjp(const Vec& x, const Vec& v) const;
    // grad_x ||y - A(x)||^2 = 2 J^T (A(x) - y)
    Vec residual_grad(const Vec& x, const Vec& y) const;

private:
    std::shared_ptr<const LinearOperator> linear_;
    std::shared_ptr<const NonlinearOperator> nonlinear_;
};

struct Observation {
    Vec y;
    ForwardModel op;
    double sigma_y = 0.0;
};

// y = A(x0) + sigma_y * n, n ~ N(0, I) from the given stream.
Observation observe(const ForwardModel& op, const Vec& x0, double sigma_y, RngStream& noise);

}  // namespace lle
