#include "aircast/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace aircast::num {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                             std::to_string(data.size()) + " elements");
    }
    impl_ = std::make_shared<detail::TensorImpl>();
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> data(shape_numel(shape), 0.0);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> data(shape_numel(shape), value);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
    std::vector<double> data(shape_numel(shape));
    for (double& x : data) x = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::normal(Shape shape, Rng& rng, double mean, double stddev, bool requires_grad) {
    std::vector<double> data(shape_numel(shape));
    for (double& x : data) x = rng.normal(mean, stddev);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

double Tensor::item() const {
    if (size() != 1) {
        throw DimensionError("item() called on tensor of shape " + shape_str(shape()));
    }
    return impl_->data[0];
}

const std::vector<double>& Tensor::grad() const {
    static const std::vector<double> empty;
    return has_grad() ? impl_->grad : empty;
}

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    return Tensor(impl_->shape, impl_->data, false);
}

Tensor Tensor::clone() const {
    Tensor out(impl_->shape, impl_->data, impl_->requires_grad);
    return out;
}

bool Tensor::all_finite() const {
    for (double x : impl_->data) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void Tape::backward(const Tensor& loss) {
    if (!recording_) {
        throw ValidationError("backward() on a non-recording tape");
    }
    if (loss.size() != 1) {
        throw DimensionError("backward() expects a scalar loss, got shape " +
                             shape_str(loss.shape()));
    }
    auto& seed = loss.impl()->grad_buffer();
    seed[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

}  // namespace aircast::num
