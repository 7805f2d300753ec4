#pragma once

#include <cstddef>
#include <vector>

#include "aircast/tensor.hpp"

namespace aircast::num {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam with bias correction over a fixed set of parameter tensors.
// step() reads each tensor's accumulated gradient; a NaN/Inf gradient
// aborts the step before any parameter is touched.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig config);

    void step();

    std::size_t steps() const { return t_; }
    const AdamConfig& config() const { return config_; }
    std::size_t n_params() const { return params_.size(); }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamConfig config_;
    std::size_t t_ = 0;
};

}  // namespace aircast::num
