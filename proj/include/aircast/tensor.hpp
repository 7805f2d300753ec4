#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "aircast/errors.hpp"
#include "aircast/rng.hpp"

namespace aircast::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until a backward pass touches it
    bool requires_grad = false;

    std::size_t size() const { return data.size(); }

    // lazily sized, zero-filled gradient buffer
    std::vector<double>& grad_buffer() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

// Dense row-major tensor of 64-bit floats. Copies are shallow (shared
// storage); use clone() for an independent copy. Gradients live next to
// the values and are populated by Tape::backward.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false);
    static Tensor normal(Shape shape, Rng& rng, double mean = 0.0, double stddev = 1.0,
                         bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t size() const { return impl_->data.size(); }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }

    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    std::vector<double>& data_vec() { return impl_->data; }
    const std::vector<double>& data_vec() const { return impl_->data; }

    double& operator[](std::size_t i) { return impl_->data[i]; }
    double operator[](std::size_t i) const { return impl_->data[i]; }

    // value of a single-element tensor
    double item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) { impl_->requires_grad = v; }

    bool has_grad() const { return impl_->grad.size() == impl_->data.size(); }
    const std::vector<double>& grad() const;
    std::vector<double>& grad_buffer() { return impl_->grad_buffer(); }
    void zero_grad();

    // same values, cut loose from any gradient graph
    Tensor detach() const;
    // deep copy (values only)
    Tensor clone() const;

    bool all_finite() const;

    const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

// Records the backward rule of every differentiable op executed against it.
// Single-threaded by contract; parameter values survive clear().
class Tape {
public:
    Tape() = default;
    explicit Tape(bool recording) : recording_(recording) {}

    bool recording() const { return recording_; }

    void record(std::function<void()> backward_fn) {
        entries_.push_back(std::move(backward_fn));
    }

    std::size_t size() const { return entries_.size(); }

    // Seeds d(loss)/d(loss) = 1 and replays recorded ops in reverse,
    // accumulating gradients into every reachable requires_grad tensor.
    void backward(const Tensor& loss);

    void clear() { entries_.clear(); }

    // non-recording tape for pure inference
    static Tape inference() { return Tape(false); }

private:
    bool recording_ = true;
    std::vector<std::function<void()>> entries_;
};

}  // namespace aircast::num
