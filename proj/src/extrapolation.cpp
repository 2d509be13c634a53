#include "lle/extrapolation.hpp"

#include <cmath>

#include <Eigen/QR>

#include "lle/errors.hpp"

namespace lle {

LLECoefficients LLECoefficients::identity(const std::vector<int>& timesteps, bool decoupled) {
    LLECoefficients c;
    c.steps = static_cast<int>(timesteps.size());
    c.decoupled = decoupled;
    c.timesteps = timesteps;
    for (int p = 0; p < c.steps; ++p) {
        Vec g = Vec::Zero(p + 1);
        g(p) = 1.0;
        if (decoupled) {
            c.gamma_par.push_back(g);
            c.gamma_perp.push_back(g);
        } else {
            c.gamma.push_back(g);
        }
    }
    return c;
}

Vec LLECoefficients::packed(int i) const {
    const auto p = static_cast<std::size_t>(steps - i);
    if (i < 1 || i > steps) throw BoundsError("coefficient step index out of range");
    if (!decoupled) return gamma.at(p);
    const Vec& a = gamma_par.at(p);
    const Vec& b = gamma_perp.at(p);
    Vec out(a.size() + b.size());
    out << a, b;
    return out;
}

void LLECoefficients::set_packed(int i, const Vec& theta) {
    if (i < 1 || i > steps) throw BoundsError("coefficient step index out of range");
    const auto p = static_cast<std::size_t>(steps - i);
    const Eigen::Index len = static_cast<Eigen::Index>(p) + 1;
    if (!decoupled) {
        if (theta.size() != len) throw DimensionError("coefficient length mismatch");
        gamma.at(p) = theta;
        return;
    }
    if (theta.size() != 2 * len) throw DimensionError("decoupled coefficient length mismatch");
    gamma_par.at(p) = theta.head(len);
    gamma_perp.at(p) = theta.tail(len);
}

void LLECoefficients::validate() const {
    if (steps < 1) throw ConfigError("coefficients: steps must be >= 1");
    if (static_cast<int>(timesteps.size()) != steps)
        throw ConfigError("coefficients: timesteps length differs from steps");
    auto check = [&](const std::vector<Vec>& set, const char* name) {
        if (static_cast<int>(set.size()) != steps)
            throw ConfigError(std::string("coefficients: ") + name + " must have one entry per step");
        for (int p = 0; p < steps; ++p) {
            const Vec& g = set[static_cast<std::size_t>(p)];
            if (g.size() != p + 1)
                throw ConfigError(std::string("coefficients: ") + name + " entry " +
                                  std::to_string(p) + " must have " + std::to_string(p + 1) +
                                  " values");
            if (!g.allFinite()) throw ConfigError("coefficients: non-finite entry");
        }
    };
    if (decoupled) {
        check(gamma_par, "gamma_par");
        check(gamma_perp, "gamma_perp");
    } else {
        check(gamma, "gamma");
    }
}

LLECoefficients to_decoupled(const LLECoefficients& coupled) {
    if (coupled.decoupled) return coupled;
    LLECoefficients d = coupled;
    d.decoupled = true;
    d.gamma_par = coupled.gamma;
    d.gamma_perp = coupled.gamma;
    d.gamma.clear();
    return d;
}

namespace {

void check_history(const Vec& gamma, const std::vector<Vec>& history, const Vec& xhat) {
    if (gamma.size() != static_cast<Eigen::Index>(history.size()) + 1)
        throw DimensionError("extrapolate: coefficient count " + std::to_string(gamma.size()) +
                             " does not match history length " + std::to_string(history.size()) +
                             " + 1");
    for (const Vec& h : history)
        if (h.size() != xhat.size()) throw DimensionError("extrapolate: history dimension mismatch");
}

}  // namespace

Vec combine(const Vec& gamma, const std::vector<Vec>& history, const Vec& xhat) {
    check_history(gamma, history, xhat);
    const Eigen::Index last = gamma.size() - 1;
    Vec out = gamma(last) * xhat;
    // Zero weights are skipped so the one-hot case returns xhat bit for bit.
    for (std::size_t j = 0; j < history.size(); ++j) {
        const double g = gamma(static_cast<Eigen::Index>(j));
        if (g != 0.0) out += g * history[j];
    }
    return out;
}

Vec combine_decoupled(const Vec& gamma_par, const Vec& gamma_perp,
                      const std::vector<Vec>& history, const Vec& xhat, const LinearOperator& op) {
    check_history(gamma_par, history, xhat);
    check_history(gamma_perp, history, xhat);
    // P_r(sum gpar b) + P_n(sum gperp b) = sum gperp b + P_r(sum (gpar - gperp) b)
    Vec out = combine(gamma_perp, history, xhat);
    const Vec diff = gamma_par - gamma_perp;
    if (diff.cwiseAbs().maxCoeff() == 0.0) return out;
    Vec d = Vec::Zero(xhat.size());
    for (std::size_t j = 0; j < history.size(); ++j) d += diff(static_cast<Eigen::Index>(j)) * history[j];
    d += diff(diff.size() - 1) * xhat;
    return out + op.project_range(d);
}

Vec extrapolate(const LLECoefficients& coeffs, int i, const std::vector<Vec>& history,
                const Vec& xhat, const LinearOperator* op) {
    if (i < 1 || i > coeffs.steps) throw BoundsError("extrapolate: step index out of range");
    if (static_cast<int>(history.size()) != coeffs.steps - i)
        throw DimensionError("extrapolate: history length must be S - i");
    const auto p = static_cast<std::size_t>(coeffs.steps - i);
    if (!coeffs.decoupled) return combine(coeffs.gamma.at(p), history, xhat);
    if (!op) throw ConfigError("decoupled extrapolation requires a linear operator");
    return combine_decoupled(coeffs.gamma_par.at(p), coeffs.gamma_perp.at(p), history, xhat, *op);
}

double GradientDomainTerm::value(const Vec& x, const Vec& ref) const {
    if (x.size() != ref.size()) throw DimensionError("perceptual term: dimension mismatch");
    double acc = 0.0;
    for (Eigen::Index k = 0; k + 1 < x.size(); ++k) {
        const double d = (x(k + 1) - x(k)) - (ref(k + 1) - ref(k));
        acc += d * d;
    }
    return acc;
}

Vec GradientDomainTerm::gradient(const Vec& x, const Vec& ref) const {
    if (x.size() != ref.size()) throw DimensionError("perceptual term: dimension mismatch");
    Vec g = Vec::Zero(x.size());
    for (Eigen::Index k = 0; k + 1 < x.size(); ++k) {
        const double d = (x(k + 1) - x(k)) - (ref(k + 1) - ref(k));
        g(k + 1) += 2.0 * d;
        g(k) -= 2.0 * d;
    }
    return g;
}

std::shared_ptr<const PerceptualTerm> make_perceptual(const std::string& tag) {
    if (tag.empty() || tag == "none") return nullptr;
    if (tag == "gradient-domain") return std::make_shared<GradientDomainTerm>();
    throw ConfigError("unknown perceptual term '" + tag + "'");
}

double loss(const Vec& x, const Vec& x_gt, double omega, const PerceptualTerm* plugin) {
    if (x.size() != x_gt.size()) throw DimensionError("loss: dimension mismatch");
    double l = (x - x_gt).squaredNorm();
    if (plugin && omega != 0.0) l += omega * plugin->value(x, x_gt);
    return l;
}

Mat design_matrix(const std::vector<Vec>& history, const Vec& xhat,
                  const LinearOperator* decoupled_op) {
    const auto len = static_cast<Eigen::Index>(history.size()) + 1;
    Mat b(xhat.size(), len);
    for (std::size_t j = 0; j < history.size(); ++j) {
        if (history[j].size() != xhat.size()) throw DimensionError("design matrix: dimension mismatch");
        b.col(static_cast<Eigen::Index>(j)) = history[j];
    }
    b.col(len - 1) = xhat;
    if (!decoupled_op) return b;
    const Mat& v = decoupled_op->v();
    const Mat range = v * (v.transpose() * b);
    Mat out(xhat.size(), 2 * len);
    out.leftCols(len) = range;
    out.rightCols(len) = b - range;
    return out;
}

double batch_loss(const std::vector<TrainingSample>& batch, const Vec& theta, double omega,
                  const PerceptualTerm* plugin, Vec* grad) {
    if (batch.empty()) throw ConfigError("batch loss: empty batch");
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    if (grad) *grad = Vec::Zero(theta.size());
    for (const TrainingSample& s : batch) {
        if (s.bases.cols() != theta.size()) throw DimensionError("batch loss: coefficient length mismatch");
        const Vec x = s.bases * theta;
        total += loss(x, s.target, omega, plugin);
        if (grad) {
            Vec g = 2.0 * (x - s.target);
            if (plugin && omega != 0.0) g += omega * plugin->gradient(x, s.target);
            *grad += s.bases.transpose() * g;
        }
    }
    if (grad) *grad *= inv_n;
    return total * inv_n;
}

Vec loss_grad_gamma(const std::vector<TrainingSample>& batch, const Vec& theta, double omega,
                    const PerceptualTerm* plugin) {
    Vec g;
    batch_loss(batch, theta, omega, plugin, &g);
    return g;
}

Vec solve_ls_closed_form(const std::vector<TrainingSample>& batch) {
    if (batch.empty()) throw ConfigError("closed-form solve: empty batch");
    const Eigen::Index p = batch.front().bases.cols();
    Eigen::Index rows = p;
    for (const TrainingSample& s : batch) {
        if (s.bases.cols() != p) throw DimensionError("closed-form solve: inconsistent bases");
        rows += s.bases.rows();
    }
    // Stacked least squares with ridge rows; same minimizer as the regularized
    // normal equations but without squaring the condition number.
    Mat a(rows, p);
    Vec b(rows);
    Eigen::Index r = 0;
    for (const TrainingSample& s : batch) {
        a.middleRows(r, s.bases.rows()) = s.bases;
        b.segment(r, s.bases.rows()) = s.target;
        r += s.bases.rows();
    }
    a.bottomRows(p) = std::sqrt(1e-10) * Mat::Identity(p, p);
    b.tail(p).setZero();
    return a.colPivHouseholderQr().solve(b);
}

}  // namespace lle
