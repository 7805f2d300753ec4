#pragma once

#include "aircast/tensor.hpp"

namespace aircast::num {

// ---------------------------------------------------------------------------
// Differentiable tensor operations. Every op takes the tape first; the
// backward rule is recorded when the tape is recording and some input
// requires a gradient. All ops are deterministic and single-threaded.
// ---------------------------------------------------------------------------

// elementwise, same shape
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

// y = s * x
Tensor scale(Tape& tape, const Tensor& x, double s);
// y = a * x + b, elementwise with scalar coefficients
Tensor affine(Tape& tape, const Tensor& x, double a, double b);

// x: [m, n], bias: [n], broadcast over rows
Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias);

Tensor relu(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor linear(Tape& tape, const Tensor& x);  // identity activation

// metadata-level ops (copying, with exact gradient routing)
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
Tensor slice(Tape& tape, const Tensor& x, std::size_t axis, std::size_t start, std::size_t len);
Tensor concat(Tape& tape, const std::vector<Tensor>& parts, std::size_t axis);

// a: [m, k], b: [k, n] -> [m, n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// input: [batch, in_ch, H, W], kernel: [out_ch, in_ch, kH, kW],
// optional bias: [out_ch]. Cross-correlation convention.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t padding, const Tensor& bias = Tensor());

// Adjoint of conv2d under the same stride/padding. input: [batch, out_ch, H', W'],
// kernel in conv layout [out_ch, in_ch, kH, kW], optional bias: [in_ch].
Tensor conv2d_transpose(Tape& tape, const Tensor& input, const Tensor& kernel,
                        std::size_t stride, std::size_t padding, const Tensor& bias = Tensor());

struct LstmWeights {
    Tensor w_i, u_i, b_i;
    Tensor w_o, u_o, b_o;
    Tensor w_f, u_f, b_f;
    Tensor w_c, u_c, b_c;
};

struct LstmState {
    Tensor h;  // [batch, hidden]
    Tensor c;  // [batch, hidden]
};

// One recurrence step over a batch. z_t: [batch, input].
LstmState lstm_cell(Tape& tape, const Tensor& z_t, const LstmState& prev, const LstmWeights& w);

// mean over all elements of (pred - target)^2
Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target);

// -mean(log x) with the log argument clamped at kLogClamp
Tensor neg_mean_log(Tape& tape, const Tensor& x);
// -mean(log(1 - x)), same clamp
Tensor neg_mean_log1m(Tape& tape, const Tensor& x);

// -mean(log d_real) - mean(log(1 - d_fake)); inputs must lie in [0, 1]
Tensor adversarial_loss(Tape& tape, const Tensor& d_real, const Tensor& d_fake);

inline constexpr double kLogClamp = 1e-7;

}  // namespace aircast::num
