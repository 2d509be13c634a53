#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lle/operators.hpp"

namespace lle {

// Per-timestep combination weights. Entry p = S - i holds the weights of step i
// (length p + 1): index j < p weights the extrapolated estimate of step S - j,
// index p weights the current corrected estimate.
struct LLECoefficients {
    int steps = 0;
    bool decoupled = false;
    std::vector<int> timesteps;  // t_S, ..., t_1
    std::vector<Vec> gamma;      // coupled
    std::vector<Vec> gamma_par;  // decoupled, range component
    std::vector<Vec> gamma_perp; // decoupled, null component

    // One-hot weight on the current estimate at every step.
    static LLECoefficients identity(const std::vector<int>& timesteps, bool decoupled = false);

    // Packed parameter vector of step i: gamma, or [gamma_par; gamma_perp].
    Vec packed(int i) const;
    void set_packed(int i, const Vec& theta);
    // Throws ConfigError on inconsistent lengths or non-finite entries.
    void validate() const;
};

// Range/null replicas of a coupled set.
LLECoefficients to_decoupled(const LLECoefficients& coupled);

// history[j] is the extrapolated estimate of step S - j, j = 0..S-i-1.
Vec extrapolate(const LLECoefficients& coeffs, int i, const std::vector<Vec>& history,
                const Vec& xhat, const LinearOperator* op = nullptr);
Vec combine(const Vec& gamma, const std::vector<Vec>& history, const Vec& xhat);
Vec combine_decoupled(const Vec& gamma_par, const Vec& gamma_perp,
                      const std::vector<Vec>& history, const Vec& xhat, const LinearOperator& op);

// Auxiliary term added to the squared error with weight omega.
class PerceptualTerm {
public:
    virtual ~PerceptualTerm() = default;
    virtual std::string name() const = 0;
    virtual double value(const Vec& x, const Vec& ref) const = 0;
    virtual Vec gradient(const Vec& x, const Vec& ref) const = 0;
};

// sum_k ((x_{k+1} - x_k) - (ref_{k+1} - ref_k))^2; blind to constant offsets.
class GradientDomainTerm final : public PerceptualTerm {
public:
    std::string name() const override { return "gradient-domain"; }
    double value(const Vec& x, const Vec& ref) const override;
    Vec gradient(const Vec& x, const Vec& ref) const override;
};

// "none" yields nullptr.
std::shared_ptr<const PerceptualTerm> make_perceptual(const std::string& tag);

// ||x - x_gt||^2 + omega * plugin(x, x_gt).
double loss(const Vec& x, const Vec& x_gt, double omega, const PerceptualTerm* plugin);

// Columns are the combination bases of one sample: history then xhat, or for
// the decoupled form the range projections followed by the null projections.
Mat design_matrix(const std::vector<Vec>& history, const Vec& xhat,
                  const LinearOperator* decoupled_op = nullptr);

struct TrainingSample {
    Mat bases;
    Vec target;
};

// Mean over samples of loss(bases * theta, target); gradient written when requested.
// Summation runs in sample order.
double batch_loss(const std::vector<TrainingSample>& batch, const Vec& theta, double omega,
                  const PerceptualTerm* plugin, Vec* grad = nullptr);
Vec loss_grad_gamma(const std::vector<TrainingSample>& batch, const Vec& theta, double omega,
                    const PerceptualTerm* plugin);

// Minimizer of the mean squared error with ridge 1e-10 on theta.
Vec solve_ls_closed_form(const std::vector<TrainingSample>& batch);

}  // namespace lle
