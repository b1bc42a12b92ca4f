#pragma once

#include <cmath>
#include <cstdint>

#include "vipaint/types.hpp"

namespace vipaint {

/// Moment estimates for one parameter block updated with Adam.
class AdamState {
public:
    AdamState() = default;
    explicit AdamState(Eigen::Index n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : m_(Vec::Zero(n)), v_(Vec::Zero(n)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    /// In-place descent step on `param` with gradient `grad`.
    template <typename Derived>
    void step(Eigen::MatrixBase<Derived>& param, const Vec& grad, double lr) {
        ++t_;
        m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
        v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        const Vec update = (m_ / c1).array() / ((v_ / c2).array().sqrt() + eps_);
        param -= (lr * update).reshaped(param.rows(), param.cols());
    }

    std::int64_t steps() const { return t_; }

private:
    Vec m_;
    Vec v_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::int64_t t_ = 0;
};

} // namespace vipaint
