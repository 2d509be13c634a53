#include "lle/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lle/errors.hpp"

namespace lle {

namespace {

double warmup_scale(long step, int warmup) {
    if (warmup <= 0) return 1.0;
    return std::min(1.0, static_cast<double>(step) / warmup);
}

}  // namespace

ScheduleFreeAdamW::ScheduleFreeAdamW(Vec init, int warmup, AdamHyper hyper)
    : hyper_(hyper), warmup_(warmup), z_(init), x_(init), y_(init), v_(Vec::Zero(init.size())) {}

void ScheduleFreeAdamW::step(const Vec& grad, double lr) {
    if (grad.size() != z_.size()) throw DimensionError("sfadamw: gradient length mismatch");
    ++step_;
    const double lr_k = lr * warmup_scale(step_, warmup_);
    last_lr_ = lr_k;
    v_ = hyper_.beta2 * v_ + (1.0 - hyper_.beta2) * grad.cwiseProduct(grad);
    const double bias2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(step_));
    const Vec denom = ((v_ / bias2).array().sqrt() + hyper_.eps).matrix();
    z_ -= lr_k * ((grad.array() / denom.array()).matrix() + hyper_.weight_decay * y_);
    weight_sum_ += lr_k * lr_k;
    if (weight_sum_ > 0.0) {
        const double c = lr_k * lr_k / weight_sum_;
        x_ = (1.0 - c) * x_ + c * z_;
    }
    y_ = (1.0 - hyper_.beta1) * z_ + hyper_.beta1 * x_;
}

Adam::Adam(Vec init, int warmup, AdamHyper hyper)
    : hyper_(hyper), warmup_(warmup), x_(init), m_(Vec::Zero(init.size())), v_(Vec::Zero(init.size())) {}

void Adam::step(const Vec& grad, double lr) {
    if (grad.size() != x_.size()) throw DimensionError("adam: gradient length mismatch");
    ++step_;
    const double lr_k = lr * warmup_scale(step_, warmup_);
    m_ = hyper_.beta1 * m_ + (1.0 - hyper_.beta1) * grad;
    v_ = hyper_.beta2 * v_ + (1.0 - hyper_.beta2) * grad.cwiseProduct(grad);
    const double k = static_cast<double>(step_);
    const Vec mhat = m_ / (1.0 - std::pow(hyper_.beta1, k));
    const Vec vhat = v_ / (1.0 - std::pow(hyper_.beta2, k));
    x_ -= lr_k * ((mhat.array() / (vhat.array().sqrt() + hyper_.eps)).matrix() +
                  hyper_.weight_decay * x_);
}

MomentumSGD::MomentumSGD(Vec init, double momentum)
    : momentum_(momentum), x_(init), buf_(Vec::Zero(init.size())) {}

void MomentumSGD::step(const Vec& grad, double lr) {
    if (grad.size() != x_.size()) throw DimensionError("sgd: gradient length mismatch");
    ++step_;
    buf_ = momentum_ * buf_ + grad;
    x_ -= lr * buf_;
}

Vec minimize(const LossAndGrad& f, IterativeOptimizer& opt, int steps, double lr) {
    const double start = f(opt.params(), nullptr);
    if (!std::isfinite(start)) throw ConvergenceError("inner optimizer: non-finite initial loss");
    Vec grad;
    for (int k = 0; k < steps; ++k) {
        f(opt.eval_point(), &grad);
        opt.step(grad, lr);
        const double cur = f(opt.params(), nullptr);
        if (!std::isfinite(cur) || (cur > 10.0 * start && cur > 1e-20))
            throw ConvergenceError("inner optimizer diverged at iteration " + std::to_string(k + 1) +
                                   " (loss " + std::to_string(cur) + ", start " +
                                   std::to_string(start) + ")");
    }
    return opt.params();
}

}  // namespace lle
