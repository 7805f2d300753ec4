#include "aircast/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace aircast::num {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using CMapM = Eigen::Map<const EMat>;

bool track(const Tape& tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape.recording()) return false;
    for (const Tensor* t : inputs) {
        if (t->defined() && t->requires_grad()) return true;
    }
    return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()) + " differ");
    }
}

// grad of `out` if any reached it during the backward sweep, else null
const double* out_grad(const std::shared_ptr<detail::TensorImpl>& out) {
    return out->grad.size() == out->data.size() ? out->grad.data() : nullptr;
}

struct ConvGeom {
    std::size_t batch, in_ch, h, w;
    std::size_t out_ch, kh, kw;
    std::size_t stride, pad;
    std::size_t oh, ow;

    std::size_t col_rows() const { return in_ch * kh * kw; }
    std::size_t col_cols() const { return batch * oh * ow; }
};

ConvGeom conv_geometry(const Shape& input, const Shape& kernel, std::size_t stride,
                       std::size_t pad) {
    if (input.size() != 4 || kernel.size() != 4) {
        throw DimensionError("conv2d: input " + shape_str(input) + " and kernel " +
                             shape_str(kernel) + " must be rank 4");
    }
    if (stride < 1) throw ValidationError("conv2d: stride must be >= 1");
    ConvGeom g{};
    g.batch = input[0];
    g.in_ch = input[1];
    g.h = input[2];
    g.w = input[3];
    g.out_ch = kernel[0];
    g.kh = kernel[2];
    g.kw = kernel[3];
    g.stride = stride;
    g.pad = pad;
    if (kernel[1] != g.in_ch) {
        throw DimensionError("conv2d: kernel " + shape_str(kernel) + " expects " +
                             std::to_string(kernel[1]) + " input channels, input " +
                             shape_str(input) + " has " + std::to_string(g.in_ch));
    }
    if (g.h + 2 * pad < g.kh || g.w + 2 * pad < g.kw) {
        throw DimensionError("conv2d: kernel " + shape_str(kernel) +
                             " larger than padded input " + shape_str(input));
    }
    g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
    g.ow = (g.w + 2 * pad - g.kw) / stride + 1;
    return g;
}

// col: [in_ch*kh*kw, batch*oh*ow], row-major
void im2col(const double* im, const ConvGeom& g, double* col) {
    const std::size_t cols = g.col_cols();
    const std::size_t plane = g.h * g.w;
    for (std::size_t c = 0; c < g.in_ch; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                double* row = col + ((c * g.kh + ky) * g.kw + kx) * cols;
                for (std::size_t b = 0; b < g.batch; ++b) {
                    const double* src = im + (b * g.in_ch + c) * plane;
                    for (std::size_t oy = 0; oy < g.oh; ++oy) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                            static_cast<std::ptrdiff_t>(g.pad);
                        double* dst = row + (b * g.oh + oy) * g.ow;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
                            std::fill(dst, dst + g.ow, 0.0);
                            continue;
                        }
                        for (std::size_t ox = 0; ox < g.ow; ++ox) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                static_cast<std::ptrdiff_t>(g.pad);
                            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w))
                                          ? 0.0
                                          : src[iy * g.w + ix];
                        }
                    }
                }
            }
        }
    }
}

// adjoint of im2col: accumulates col back onto the image grid
void col2im(const double* col, const ConvGeom& g, double* im) {
    const std::size_t cols = g.col_cols();
    const std::size_t plane = g.h * g.w;
    for (std::size_t c = 0; c < g.in_ch; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const double* row = col + ((c * g.kh + ky) * g.kw + kx) * cols;
                for (std::size_t b = 0; b < g.batch; ++b) {
                    double* dst = im + (b * g.in_ch + c) * plane;
                    for (std::size_t oy = 0; oy < g.oh; ++oy) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                            static_cast<std::ptrdiff_t>(g.pad);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                        const double* src = row + (b * g.oh + oy) * g.ow;
                        for (std::size_t ox = 0; ox < g.ow; ++ox) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                static_cast<std::ptrdiff_t>(g.pad);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                            dst[iy * g.w + ix] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

// scatter [out_ch, batch*oh*ow] into tensor layout [batch, out_ch, oh, ow]
void mat_to_batched(const double* mat, std::size_t out_ch, std::size_t batch, std::size_t hw,
                    double* out) {
    CMapM m(mat, out_ch, batch * hw);
    for (std::size_t b = 0; b < batch; ++b) {
        MapM dst(out + b * out_ch * hw, out_ch, hw);
        dst = m.middleCols(b * hw, hw);
    }
}

// gather tensor layout [batch, out_ch, oh, ow] into [out_ch, batch*oh*ow]
void batched_to_mat(const double* t, std::size_t out_ch, std::size_t batch, std::size_t hw,
                    double* mat) {
    MapM m(mat, out_ch, batch * hw);
    for (std::size_t b = 0; b < batch; ++b) {
        CMapM src(t + b * out_ch * hw, out_ch, hw);
        m.middleCols(b * hw, hw) = src;
    }
}

void check_unit_range(const Tensor& x, const char* op) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw NumericError(std::string(op) + ": value " + std::to_string(v) +
                               " outside [0, 1]");
        }
    }
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out(a.shape(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    if (track(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record([ai = a.impl(), bi = b.impl(), oi = out.impl()] {
            const double* go = out_grad(oi);
            if (!go) return;
            if (ai->requires_grad) {
                auto& ga = ai->grad_buffer();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
            }
            if (bi->requires_grad) {
                auto& gb = bi->grad_buffer();
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i];
            }
        });
    }
    return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a.shape(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    if (track(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record([ai = a.impl(), bi = b.impl(), oi = out.impl()] {
            const double* go = out_grad(oi);
            if (!go) return;
            if (ai->requires_grad) {
                auto& ga = ai->grad_buffer();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
            }
            if (bi->requires_grad) {
                auto& gb = bi->grad_buffer();
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= go[i];
            }
        });
    }
    return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a.shape(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    if (track(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record([ai = a.impl(), bi = b.impl(), oi = out.impl()] {
            const double* go = out_grad(oi);
            if (!go) return;
            if (ai->requires_grad) {
                auto& ga = ai->grad_buffer();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * bi->data[i];
            }
            if (bi->requires_grad) {
                auto& gb = bi->grad_buffer();
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * ai->data[i];
            }
        });
    }
    return out;
}

Tensor scale(Tape& tape, const Tensor& x, double s) { return affine(tape, x, s, 0.0); }

Tensor affine(Tape& tape, const Tensor& x, double a, double b) {
    Tensor out(x.shape(), std::vector<double>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b;
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([xi = x.impl(), oi = out.impl(), a] {
            const double* go = out_grad(oi);
            if (!go) return;
            auto& gx = xi->grad_buffer();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += a * go[i];
        });
    }
    return out;
}

Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias) {
    if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
        throw DimensionError("add_bias: x " + shape_str(x.shape()) + " with bias " +
                             shape_str(bias.shape()));
    }
    const std::size_t m = x.dim(0), n = x.dim(1);
    Tensor out(x.shape(), std::vector<double>(x.size()));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + bias[j];
    }
    if (track(tape, {&x, &bias})) {
        out.set_requires_grad(true);
        tape.record([xi = x.impl(), bi = bias.impl(), oi = out.impl(), m, n] {
            const double* go = out_grad(oi);
            if (!go) return;
            if (xi->requires_grad) {
                auto& gx = xi->grad_buffer();
                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
            }
            if (bi->requires_grad) {
                auto& gb = bi->grad_buffer();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < n; ++j) gb[j] += go[i * n + j];
                }
            }
        });
    }
    return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
    Tensor out(x.shape(), std::vector<double>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([xi = x.impl(), oi = out.impl()] {
            const double* go = out_grad(oi);
            if (!go) return;
            auto& gx = xi->grad_buffer();
            for (std::size_t i = 0; i < gx.size(); ++i) {
                if (xi->data[i] > 0.0) gx[i] += go[i];
            }
        });
    }
    return out;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
    Tensor out(x.shape(), std::vector<double>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([xi = x.impl(), oi = out.impl()] {
            const double* go = out_grad(oi);
            if (!go) return;
            auto& gx = xi->grad_buffer();
            for (std::size_t i = 0; i < gx.size(); ++i) {
                const double y = oi->data[i];
                gx[i] += go[i] * y * (1.0 - y);
            }
        });
    }
    return out;
}

Tensor tanh(Tape& tape, const Tensor& x) {
    Tensor out(x.shape(), std::vector<double>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([xi = x.impl(), oi = out.impl()] {
            const double* go = out_grad(oi);
            if (!go) return;
            auto& gx = xi->grad_buffer();
            for (std::size_t i = 0; i < gx.size(); ++i) {
                const double y = oi->data[i];
                gx[i] += go[i] * (1.0 - y * y);
            }
        });
    }
    return out;
}

Tensor linear(Tape& tape, const Tensor& x) { return affine(tape, x, 1.0, 0.0); }

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.size()) {
        throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape) +
                             " changes element count");
    }
    Tensor out(std::move(shape), x.data_vec());
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([xi = x.impl(), oi = out.impl()] {
            const double* go = out_grad(oi);
            if (!go) return;
            auto& gx = xi->grad_buffer();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
        });
    }
    return out;
}

Tensor slice(Tape& tape, const Tensor& x, std::size_t axis, std::size_t start, std::size_t len) {
    if (axis >= x.rank() || start + len > x.dim(axis)) {
        throw DimensionError("slice: axis " + std::to_string(axis) + " [" +
                             std::to_string(start) + ", " + std::to_string(start + len) +
                             ") out of range for " + shape_str(x.shape()));
    }
    const Shape& s = x.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t axis_len = s[axis];

    Shape out_shape = s;
    out_shape[axis] = len;
    Tensor out(out_shape, std::vector<double>(outer * len * inner));
    for (std::size_t o = 0; o < outer; ++o) {
        const double* src = x.data() + (o * axis_len + start) * inner;
        double* dst = out.data() + o * len * inner;
        std::copy(src, src + len * inner, dst);
    }
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([xi = x.impl(), oi = out.impl(), outer, inner, axis_len, start, len] {
            const double* go = out_grad(oi);
            if (!go) return;
            auto& gx = xi->grad_buffer();
            for (std::size_t o = 0; o < outer; ++o) {
                double* dst = gx.data() + (o * axis_len + start) * inner;
                const double* src = go + o * len * inner;
                for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
            }
        });
    }
    return out;
}

Tensor concat(Tape& tape, const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ValidationError("concat: no inputs");
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) {
        throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " +
                             shape_str(first));
    }
    std::size_t total_axis = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != first.size()) {
            throw DimensionError("concat: rank mismatch " + shape_str(p.shape()) + " vs " +
                                 shape_str(first));
        }
        for (std::size_t i = 0; i < first.size(); ++i) {
            if (i != axis && p.dim(i) != first[i]) {
                throw DimensionError("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                     shape_str(first));
            }
        }
        total_axis += p.dim(axis);
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
    for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

    Shape out_shape = first;
    out_shape[axis] = total_axis;
    Tensor out(out_shape, std::vector<double>(outer * total_axis * inner));
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        const std::size_t len = p.dim(axis);
        for (std::size_t o = 0; o < outer; ++o) {
            const double* src = p.data() + o * len * inner;
            double* dst = out.data() + (o * total_axis + offset) * inner;
            std::copy(src, src + len * inner, dst);
        }
        offset += len;
    }

    bool any_grad = false;
    for (const Tensor& p : parts) any_grad |= p.requires_grad();
    if (tape.recording() && any_grad) {
        out.set_requires_grad(true);
        std::vector<std::shared_ptr<detail::TensorImpl>> impls;
        std::vector<std::size_t> lens;
        for (const Tensor& p : parts) {
            impls.push_back(p.impl());
            lens.push_back(p.dim(axis));
        }
        tape.record([impls, lens, oi = out.impl(), outer, inner, total_axis] {
            const double* go = out_grad(oi);
            if (!go) return;
            std::size_t offset = 0;
            for (std::size_t k = 0; k < impls.size(); ++k) {
                const std::size_t len = lens[k];
                if (impls[k]->requires_grad) {
                    auto& gp = impls[k]->grad_buffer();
                    for (std::size_t o = 0; o < outer; ++o) {
                        const double* src = go + (o * total_axis + offset) * inner;
                        double* dst = gp.data() + o * len * inner;
                        for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                    }
                }
                offset += len;
            }
        });
    }
    return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n});
    MapM om(out.data(), m, n);
    CMapM am(a.data(), m, k);
    CMapM bm(b.data(), k, n);
    om.noalias() = am * bm;
    if (track(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record([ai = a.impl(), bi = b.impl(), oi = out.impl(), m, k, n] {
            const double* go = out_grad(oi);
            if (!go) return;
            CMapM gom(go, m, n);
            if (ai->requires_grad) {
                MapM ga(ai->grad_buffer().data(), m, k);
                CMapM bm2(bi->data.data(), k, n);
                ga.noalias() += gom * bm2.transpose();
            }
            if (bi->requires_grad) {
                MapM gb(bi->grad_buffer().data(), k, n);
                CMapM am2(ai->data.data(), m, k);
                gb.noalias() += am2.transpose() * gom;
            }
        });
    }
    return out;
}

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t padding, const Tensor& bias) {
    ConvGeom g = conv_geometry(input.shape(), kernel.shape(), stride, padding);
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.out_ch)) {
        throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " must be [" +
                             std::to_string(g.out_ch) + "]");
    }
    auto col = std::make_shared<std::vector<double>>(g.col_rows() * g.col_cols());
    im2col(input.data(), g, col->data());

    const std::size_t hw = g.oh * g.ow;
    std::vector<double> out_mat(g.out_ch * g.col_cols());
    {
        MapM om(out_mat.data(), g.out_ch, g.col_cols());
        CMapM wm(kernel.data(), g.out_ch, g.col_rows());
        CMapM cm(col->data(), g.col_rows(), g.col_cols());
        om.noalias() = wm * cm;
        if (bias.defined()) {
            for (std::size_t oc = 0; oc < g.out_ch; ++oc) om.row(oc).array() += bias[oc];
        }
    }
    Tensor out = Tensor::zeros({g.batch, g.out_ch, g.oh, g.ow});
    mat_to_batched(out_mat.data(), g.out_ch, g.batch, hw, out.data());

    if (track(tape, {&input, &kernel, &bias})) {
        out.set_requires_grad(true);
        tape.record([ii = input.impl(), ki = kernel.impl(),
                     bi = bias.defined() ? bias.impl() : nullptr, oi = out.impl(), g, col, hw] {
            const double* go = out_grad(oi);
            if (!go) return;
            std::vector<double> go_mat(g.out_ch * g.col_cols());
            batched_to_mat(go, g.out_ch, g.batch, hw, go_mat.data());
            CMapM gom(go_mat.data(), g.out_ch, g.col_cols());
            if (ki->requires_grad) {
                MapM gk(ki->grad_buffer().data(), g.out_ch, g.col_rows());
                CMapM cm(col->data(), g.col_rows(), g.col_cols());
                gk.noalias() += gom * cm.transpose();
            }
            if (ii->requires_grad) {
                std::vector<double> col_grad(g.col_rows() * g.col_cols());
                MapM cgm(col_grad.data(), g.col_rows(), g.col_cols());
                CMapM wm(ki->data.data(), g.out_ch, g.col_rows());
                cgm.noalias() = wm.transpose() * gom;
                col2im(col_grad.data(), g, ii->grad_buffer().data());
            }
            if (bi && bi->requires_grad) {
                // fixed-order accumulation; vectorized reductions would make
                // the rounding depend on buffer alignment
                auto& gb = bi->grad_buffer();
                const std::size_t cols = g.col_cols();
                for (std::size_t oc = 0; oc < g.out_ch; ++oc) {
                    const double* row = go_mat.data() + oc * cols;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) acc += row[j];
                    gb[oc] += acc;
                }
            }
        });
    }
    return out;
}

Tensor conv2d_transpose(Tape& tape, const Tensor& input, const Tensor& kernel,
                        std::size_t stride, std::size_t padding, const Tensor& bias) {
    if (input.rank() != 4 || kernel.rank() != 4) {
        throw DimensionError("conv2d_transpose: input " + shape_str(input.shape()) +
                             " and kernel " + shape_str(kernel.shape()) + " must be rank 4");
    }
    if (input.dim(1) != kernel.dim(0)) {
        throw DimensionError("conv2d_transpose: input channels " + shape_str(input.shape()) +
                             " do not match kernel " + shape_str(kernel.shape()));
    }
    const std::size_t kh = kernel.dim(2), kw = kernel.dim(3);
    const std::size_t hp = input.dim(2), wp = input.dim(3);
    const std::ptrdiff_t h_out = static_cast<std::ptrdiff_t>((hp - 1) * stride + kh) -
                                 2 * static_cast<std::ptrdiff_t>(padding);
    const std::ptrdiff_t w_out = static_cast<std::ptrdiff_t>((wp - 1) * stride + kw) -
                                 2 * static_cast<std::ptrdiff_t>(padding);
    if (h_out < 1 || w_out < 1) {
        throw DimensionError("conv2d_transpose: kernel " + shape_str(kernel.shape()) +
                             " with padding " + std::to_string(padding) +
                             " produces empty output for input " + shape_str(input.shape()));
    }
    // geometry of the conv this op is adjoint to
    ConvGeom g{};
    g.batch = input.dim(0);
    g.in_ch = kernel.dim(1);
    g.h = static_cast<std::size_t>(h_out);
    g.w = static_cast<std::size_t>(w_out);
    g.out_ch = kernel.dim(0);
    g.kh = kh;
    g.kw = kw;
    g.stride = stride;
    g.pad = padding;
    g.oh = hp;
    g.ow = wp;
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.in_ch)) {
        throw DimensionError("conv2d_transpose: bias " + shape_str(bias.shape()) + " must be [" +
                             std::to_string(g.in_ch) + "]");
    }

    const std::size_t hw = g.oh * g.ow;
    std::vector<double> in_mat(g.out_ch * g.col_cols());
    batched_to_mat(input.data(), g.out_ch, g.batch, hw, in_mat.data());

    std::vector<double> col(g.col_rows() * g.col_cols());
    {
        MapM cm(col.data(), g.col_rows(), g.col_cols());
        CMapM wm(kernel.data(), g.out_ch, g.col_rows());
        CMapM im(in_mat.data(), g.out_ch, g.col_cols());
        cm.noalias() = wm.transpose() * im;
    }
    Tensor out = Tensor::zeros({g.batch, g.in_ch, g.h, g.w});
    col2im(col.data(), g, out.data());
    if (bias.defined()) {
        const std::size_t plane = g.h * g.w;
        for (std::size_t b = 0; b < g.batch; ++b) {
            for (std::size_t c = 0; c < g.in_ch; ++c) {
                double* dst = out.data() + (b * g.in_ch + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) dst[i] += bias[c];
            }
        }
    }

    if (track(tape, {&input, &kernel, &bias})) {
        out.set_requires_grad(true);
        auto in_mat_keep = std::make_shared<std::vector<double>>(std::move(in_mat));
        tape.record([ii = input.impl(), ki = kernel.impl(),
                     bi = bias.defined() ? bias.impl() : nullptr, oi = out.impl(), g, hw,
                     in_mat_keep] {
            const double* go = out_grad(oi);
            if (!go) return;
            // grad wrt the transposed-conv output behaves like a conv input
            std::vector<double> go_col(g.col_rows() * g.col_cols());
            im2col(go, g, go_col.data());
            CMapM gcm(go_col.data(), g.col_rows(), g.col_cols());
            if (ii->requires_grad) {
                std::vector<double> gi_mat(g.out_ch * g.col_cols());
                MapM gim(gi_mat.data(), g.out_ch, g.col_cols());
                CMapM wm(ki->data.data(), g.out_ch, g.col_rows());
                gim.noalias() = wm * gcm;
                std::vector<double> scattered(ii->data.size());
                mat_to_batched(gi_mat.data(), g.out_ch, g.batch, hw, scattered.data());
                auto& gi = ii->grad_buffer();
                for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += scattered[i];
            }
            if (ki->requires_grad) {
                MapM gk(ki->grad_buffer().data(), g.out_ch, g.col_rows());
                CMapM im(in_mat_keep->data(), g.out_ch, g.col_cols());
                gk.noalias() += im * gcm.transpose();
            }
            if (bi && bi->requires_grad) {
                auto& gb = bi->grad_buffer();
                const std::size_t plane = g.h * g.w;
                for (std::size_t b = 0; b < g.batch; ++b) {
                    for (std::size_t c = 0; c < g.in_ch; ++c) {
                        const double* src = go + (b * g.in_ch + c) * plane;
                        for (std::size_t i = 0; i < plane; ++i) gb[c] += src[i];
                    }
                }
            }
        });
    }
    return out;
}

LstmState lstm_cell(Tape& tape, const Tensor& z_t, const LstmState& prev, const LstmWeights& w) {
    if (z_t.rank() != 2 || prev.h.rank() != 2 || prev.c.rank() != 2) {
        throw DimensionError("lstm_cell: z_t " + shape_str(z_t.shape()) + ", h " +
                             shape_str(prev.h.shape()) + ", c " + shape_str(prev.c.shape()) +
                             " must be rank 2");
    }
    if (z_t.dim(0) != prev.h.dim(0) || prev.h.shape() != prev.c.shape()) {
        throw DimensionError("lstm_cell: batch mismatch between z_t " + shape_str(z_t.shape()) +
                             " and state " + shape_str(prev.h.shape()));
    }
    auto gate = [&](const Tensor& wz, const Tensor& uh, const Tensor& b) {
        return add_bias(tape, add(tape, matmul(tape, z_t, wz), matmul(tape, prev.h, uh)), b);
    };
    Tensor i_t = sigmoid(tape, gate(w.w_i, w.u_i, w.b_i));
    Tensor o_t = sigmoid(tape, gate(w.w_o, w.u_o, w.b_o));
    Tensor f_t = sigmoid(tape, gate(w.w_f, w.u_f, w.b_f));
    Tensor g_t = tanh(tape, gate(w.w_c, w.u_c, w.b_c));
    Tensor c_t = add(tape, mul(tape, f_t, prev.c), mul(tape, i_t, g_t));
    Tensor h_t = mul(tape, o_t, tanh(tape, c_t));
    return {h_t, c_t};
}

Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target) {
    check_same_shape(pred, target, "mse_loss");
    const std::size_t n = pred.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    Tensor out = Tensor::scalar(acc / static_cast<double>(n));
    if (track(tape, {&pred, &target})) {
        out.set_requires_grad(true);
        tape.record([pi = pred.impl(), ti = target.impl(), oi = out.impl(), n] {
            const double* go = out_grad(oi);
            if (!go) return;
            const double s = 2.0 * go[0] / static_cast<double>(n);
            if (pi->requires_grad) {
                auto& gp = pi->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) gp[i] += s * (pi->data[i] - ti->data[i]);
            }
            if (ti->requires_grad) {
                auto& gt = ti->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) gt[i] -= s * (pi->data[i] - ti->data[i]);
            }
        });
    }
    return out;
}

Tensor neg_mean_log(Tape& tape, const Tensor& x) {
    check_unit_range(x, "neg_mean_log");
    const std::size_t n = x.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::log(std::max(x[i], kLogClamp));
    Tensor out = Tensor::scalar(-acc / static_cast<double>(n));
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([xi = x.impl(), oi = out.impl(), n] {
            const double* go = out_grad(oi);
            if (!go) return;
            auto& gx = xi->grad_buffer();
            const double s = go[0] / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                if (xi->data[i] > kLogClamp) gx[i] -= s / xi->data[i];
            }
        });
    }
    return out;
}

Tensor neg_mean_log1m(Tape& tape, const Tensor& x) {
    check_unit_range(x, "neg_mean_log1m");
    const std::size_t n = x.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::log(std::max(1.0 - x[i], kLogClamp));
    Tensor out = Tensor::scalar(-acc / static_cast<double>(n));
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([xi = x.impl(), oi = out.impl(), n] {
            const double* go = out_grad(oi);
            if (!go) return;
            auto& gx = xi->grad_buffer();
            const double s = go[0] / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                if (1.0 - xi->data[i] > kLogClamp) gx[i] += s / (1.0 - xi->data[i]);
            }
        });
    }
    return out;
}

Tensor adversarial_loss(Tape& tape, const Tensor& d_real, const Tensor& d_fake) {
    return add(tape, neg_mean_log(tape, d_real), neg_mean_log1m(tape, d_fake));
}

}  // namespace aircast::num
