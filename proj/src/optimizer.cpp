#include "lwal/optimizer.hpp"

#include <cmath>

#include "lwal/errors.hpp"

namespace lwal {

void AdamOptimizer::step(const std::vector<Tensor*>& params,
                         const std::vector<const Tensor*>& grads) {
    if (params.size() != grads.size()) {
        throw UsageError("adam: parameter and gradient counts differ");
    }
    if (m_.empty()) {
        for (const Tensor* p : params) {
            m_.push_back(Tensor::zeros(p->shape()));
            v_.push_back(Tensor::zeros(p->shape()));
        }
    }
    if (m_.size() != params.size()) {
        throw UsageError("adam: parameter count changed between steps");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& theta = *params[p];
        const Tensor& g = *grads[p];
        if (!theta.same_shape(m_[p]) || !theta.same_shape(g)) {
            throw ShapeError("adam: parameter shape mismatch");
        }
        Tensor& m = m_[p];
        Tensor& v = v_[p];
        for (std::size_t i = 0; i < theta.numel(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
        if (!theta.all_finite()) {
            throw NumericError("adam produced a non-finite parameter");
        }
    }
}

} // namespace lwal
