#pragma once

#include <vector>

#include "lwal/tensor.hpp"

namespace lwal {

// Adam with bias correction. Moment buffers are created on the first step
// and must see the same parameter shapes on every subsequent step.
class AdamOptimizer {
  public:
    AdamOptimizer() = default;
    AdamOptimizer(double learning_rate, double beta1, double beta2, double eps)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

    long t() const { return t_; }

  private:
    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

} // namespace lwal
