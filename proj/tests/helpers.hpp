#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "aircast/ops.hpp"
#include "aircast/tensor.hpp"

namespace testutil {

using aircast::num::Tape;
using aircast::num::Tensor;

// Central finite-difference check of reverse-mode gradients.
// loss_fn rebuilds the graph from the current values of `inputs` and
// returns a scalar; every element of every input is perturbed by +-step.
// Returns the worst relative error across all checked elements.
inline double max_grad_rel_err(const std::function<Tensor(Tape&)>& loss_fn,
                               const std::vector<Tensor>& inputs, double step = 1e-5) {
    for (const Tensor& in : inputs) {
        Tensor t = in;
        t.zero_grad();
    }
    Tape tape;
    Tensor loss = loss_fn(tape);
    tape.backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const Tensor& in : inputs) {
        analytic.push_back(in.has_grad() ? in.grad() : std::vector<double>(in.size(), 0.0));
    }

    auto eval = [&]() {
        Tape t(false);
        return loss_fn(t).item();
    };

    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        Tensor in = inputs[k];
        for (std::size_t i = 0; i < in.size(); ++i) {
            const double saved = in[i];
            in[i] = saved + step;
            const double lp = eval();
            in[i] = saved - step;
            const double lm = eval();
            in[i] = saved;
            const double fd = (lp - lm) / (2.0 * step);
            const double g = analytic[k][i];
            const double denom = std::max(std::abs(g), std::abs(fd));
            if (denom < 1e-7) continue;  // both effectively zero
            worst = std::max(worst, std::abs(g - fd) / denom);
        }
    }
    return worst;
}

inline Tensor rand_tensor(aircast::num::Shape shape, aircast::Rng& rng, double lo = -1.0,
                          double hi = 1.0, bool requires_grad = true) {
    return Tensor::uniform(std::move(shape), rng, lo, hi, requires_grad);
}

}  // namespace testutil
