#pragma once

#include <functional>
#include <memory>

#include "lle/numerics.hpp"

namespace lle {

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Gradient-based optimizer whose gradient is requested at eval_point() and
// whose current estimate is params(). The two differ for schedule-free methods.
class IterativeOptimizer {
public:
    virtual ~IterativeOptimizer() = default;
    virtual const Vec& eval_point() const = 0;
    virtual const Vec& params() const = 0;
    virtual void step(const Vec& grad, double lr) = 0;
    virtual long steps() const = 0;
};

// Schedule-free AdamW. Per step k (1-based), with gradient g taken at
// y = (1 - beta1) z + beta1 x:
//   lr_k = lr * min(1, k / warmup)
//   v    = beta2 v + (1 - beta2) g^2,  vhat = v / (1 - beta2^k)
//   z   -= lr_k (g / (sqrt(vhat) + eps) + weight_decay * y)
//   x    = (1 - c_k) x + c_k z,  c_k = lr_k^2 / sum_{j<=k} lr_j^2
// params() returns the averaged iterate x.
class ScheduleFreeAdamW final : public IterativeOptimizer {
public:
    ScheduleFreeAdamW(Vec init, int warmup, AdamHyper hyper = {});

    const Vec& eval_point() const override { return y_; }
    const Vec& params() const override { return x_; }
    void step(const Vec& grad, double lr) override;
    long steps() const override { return step_; }
    double last_lr() const noexcept { return last_lr_; }

private:
    AdamHyper hyper_;
    int warmup_;
    Vec z_, x_, y_, v_;
    long step_ = 0;
    double weight_sum_ = 0.0;
    double last_lr_ = 0.0;
};

// Bias-corrected Adam with the same warmup ramp; eval_point() == params().
class Adam final : public IterativeOptimizer {
public:
    Adam(Vec init, int warmup, AdamHyper hyper = {});

    const Vec& eval_point() const override { return x_; }
    const Vec& params() const override { return x_; }
    void step(const Vec& grad, double lr) override;
    long steps() const override { return step_; }

private:
    AdamHyper hyper_;
    int warmup_;
    Vec x_, m_, v_;
    long step_ = 0;
};

// Heavy-ball SGD: buf = momentum * buf + g; x -= lr * buf.
class MomentumSGD final : public IterativeOptimizer {
public:
    MomentumSGD(Vec init, double momentum);

    const Vec& eval_point() const override { return x_; }
    const Vec& params() const override { return x_; }
    void step(const Vec& grad, double lr) override;
    long steps() const override { return step_; }

private:
    double momentum_;
    Vec x_, buf_;
    long step_ = 0;
};

// Runs `steps` iterations of opt on f, returning opt.params(). Throws
// ConvergenceError when the loss at params() becomes non-finite or exceeds
// 10x its starting value.
using LossAndGrad = std::function<double(const Vec& x, Vec* grad)>;
Vec minimize(const LossAndGrad& f, IterativeOptimizer& opt, int steps, double lr);

}  // namespace lle
