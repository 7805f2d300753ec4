#include "aircast/adam.hpp"

#include <cmath>

namespace aircast::num {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    if (config_.learning_rate <= 0.0) throw ValidationError("adam: learning rate must be > 0");
    if (config_.beta1 <= 0.0 || config_.beta1 >= 1.0 || config_.beta2 <= 0.0 ||
        config_.beta2 >= 1.0) {
        throw ValidationError("adam: beta1/beta2 must lie in (0, 1)");
    }
    if (config_.epsilon <= 0.0) throw ValidationError("adam: epsilon must be > 0");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void Adam::step() {
    // validate every gradient before mutating anything
    for (const Tensor& p : params_) {
        if (!p.has_grad()) continue;
        for (double g : p.grad()) {
            if (!std::isfinite(g)) {
                throw NumericError("adam: non-finite gradient, step aborted");
            }
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = params_[k];
        const double* g = p.has_grad() ? p.grad().data() : nullptr;
        auto& m = m_[k];
        auto& v = v_[k];
        double* w = p.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g ? g[i] : 0.0;
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

}  // namespace aircast::num
