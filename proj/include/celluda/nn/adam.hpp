#pragma once

#include <celluda/nn/tensor.hpp>

#include <cmath>
#include <vector>

namespace celluda::nn {

/// Adaptive-moment gradient descent over a fixed parameter list.
template <class Scalar>
class Adam
{
public:
    Adam(std::vector<Param<Scalar>*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps)
    {
        for (auto* p : params_) {
            m_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
            v_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
        }
    }

    void zero_grad()
    {
        for (auto* p : params_) p->grad.setZero();
    }

    void step()
    {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        const auto b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
        const auto step = static_cast<Scalar>(lr_ / c1);
        const auto inv_c2 = static_cast<Scalar>(1.0 / c2);
        const auto eps = static_cast<Scalar>(eps_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& g = params_[i]->grad;
            m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
            v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g.cwiseAbs2();
            params_[i]->value.array()
                -= step * m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
        }
    }

    long steps() const { return t_; }

private:
    std::vector<Param<Scalar>*> params_;
    std::vector<Matrix<Scalar>> m_;
    std::vector<Matrix<Scalar>> v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

} // namespace celluda::nn
