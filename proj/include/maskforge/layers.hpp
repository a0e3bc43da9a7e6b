#pragma once

#include <string>
#include <vector>

#include "maskforge/autograd.hpp"
#include "maskforge/linalg.hpp"
#include "maskforge/rng.hpp"
#include "maskforge/tensor.hpp"

namespace maskforge {

// ---- reshape helpers ---------------------------------------------------------

// (n,c,h,w) tensor -> (c, n*h*w) matrix, columns ordered (n, y, x).
template <typename T>
MatrixT<T> nchw_to_mat(const Tensor4T<T>& t) {
    const Dims d = t.shape;
    const int64_t plane = int64_t(d.h) * d.w;
    MatrixT<T> m(d.c, int64_t(d.n) * plane);
    for (int ci = 0; ci < d.c; ++ci) {
        T* dst = m.row(ci);
        for (int ni = 0; ni < d.n; ++ni)
            std::copy_n(t.data.data() + t.index(ni, ci, 0, 0), plane, dst + int64_t(ni) * plane);
    }
    return m;
}

template <typename T>
Tensor4T<T> mat_to_nchw(const MatrixT<T>& m, Dims d) {
    const int64_t plane = int64_t(d.h) * d.w;
    contract(m.rows == d.c && m.cols == int64_t(d.n) * plane,
             "mat_to_nchw: matrix " + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                 " does not reshape to " + to_string(d));
    Tensor4T<T> t(d);
    for (int ci = 0; ci < d.c; ++ci) {
        const T* src = m.row(ci);
        for (int ni = 0; ni < d.n; ++ni)
            std::copy_n(src + int64_t(ni) * plane, plane, t.data.data() + t.index(ni, ci, 0, 0));
    }
    return t;
}

// Weight tensors are stored (out_c, in_c, kh, kw), which is already row-major
// (out_c, in_c*kh*kw).
template <typename T>
MatrixT<T> weight_as_mat(const Tensor4T<T>& w) {
    MatrixT<T> m(w.shape.n, int64_t(w.shape.c) * w.shape.h * w.shape.w);
    m.data = w.data;
    return m;
}

template <typename T>
Tensor4T<T> mat_as_weight(const MatrixT<T>& m, Dims d) {
    contract(m.rows * m.cols == d.numel(), "mat_as_weight: size mismatch for " + to_string(d));
    Tensor4T<T> t(d);
    t.data = m.data;
    return t;
}

// ---- plain (tape-free) layer forwards ---------------------------------------

template <typename T>
Tensor4T<T> conv2d(const Tensor4T<T>& x, const Tensor4T<T>& weight, const Tensor4T<T>& bias,
                   int stride, int pad) {
    contract(x.shape.c == weight.shape.c,
             "conv2d: input channels " + std::to_string(x.shape.c) + " vs weight in_c " +
                 std::to_string(weight.shape.c));
    contract(bias.shape == Dims{1, weight.shape.n, 1, 1},
             "conv2d: bias shape " + to_string(bias.shape) + " must be (1," +
                 std::to_string(weight.shape.n) + ",1,1)");
    const ConvGeom g = ConvGeom::make(x.shape, weight.shape.h, weight.shape.w, stride, pad);
    const MatrixT<T> cols = im2col(x, g);
    MatrixT<T> out_mat = matmul(weight_as_mat(weight), cols);
    const int out_c = weight.shape.n;
    for (int64_t oc = 0; oc < out_c; ++oc) {
        T* row = out_mat.row(oc);
        const T b = bias.data[static_cast<size_t>(oc)];
        for (int64_t j = 0; j < out_mat.cols; ++j) row[j] += b;
    }
    return mat_to_nchw(out_mat, Dims{g.n, out_c, g.oh, g.ow});
}

// Transposed convolution, the exact adjoint of conv2d with the same stride and
// pad. Weight keeps conv orientation (out_c, in_c, kh, kw): the input here has
// out_c channels and the output has in_c channels.
template <typename T>
Tensor4T<T> conv_transpose2d(const Tensor4T<T>& x, const Tensor4T<T>& weight,
                             const Tensor4T<T>& bias, int stride, int pad) {
    contract(x.shape.c == weight.shape.n,
             "conv_transpose2d: input channels " + std::to_string(x.shape.c) +
                 " vs weight out_c " + std::to_string(weight.shape.n));
    contract(bias.shape == Dims{1, weight.shape.c, 1, 1},
             "conv_transpose2d: bias shape " + to_string(bias.shape) + " must be (1," +
                 std::to_string(weight.shape.c) + ",1,1)");
    const int oh = (x.shape.h - 1) * stride + weight.shape.h - 2 * pad;
    const int ow = (x.shape.w - 1) * stride + weight.shape.w - 2 * pad;
    contract(oh >= 1 && ow >= 1, "conv_transpose2d: output collapses for input " +
                                     to_string(x.shape) + " with stride " + std::to_string(stride));
    const Dims out_dims{x.shape.n, weight.shape.c, oh, ow};
    const ConvGeom g = ConvGeom::make(out_dims, weight.shape.h, weight.shape.w, stride, pad);
    const MatrixT<T> cols = matmul_at(weight_as_mat(weight), nchw_to_mat(x));
    Tensor4T<T> out = col2im(cols, g);
    for (int ni = 0; ni < out.shape.n; ++ni)
        for (int ci = 0; ci < out.shape.c; ++ci) {
            T* p = out.data.data() + out.index(ni, ci, 0, 0);
            const T b = bias.data[static_cast<size_t>(ci)];
            for (int64_t i = 0; i < int64_t(oh) * ow; ++i) p[i] += b;
        }
    return out;
}

template <typename T>
Tensor4T<T> leaky_relu(const Tensor4T<T>& x, T slope) {
    contract(slope >= T(0) && slope < T(1), "leaky_relu: slope must be in [0,1)");
    Tensor4T<T> out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i)
        out.data[i] = x.data[i] >= T(0) ? x.data[i] : slope * x.data[i];
    return out;
}

template <typename T>
Tensor4T<T> sigmoid(const Tensor4T<T>& x) {
    Tensor4T<T> out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) {
        const T v = x.data[i];
        out.data[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
    }
    return out;
}

template <typename T>
Tensor4T<T> concat_channels(const Tensor4T<T>& a, const Tensor4T<T>& b) {
    contract(a.shape.n == b.shape.n && a.shape.h == b.shape.h && a.shape.w == b.shape.w,
             "concat_channels: shapes " + to_string(a.shape) + " and " + to_string(b.shape) +
                 " differ outside the channel dim");
    Tensor4T<T> out(Dims{a.shape.n, a.shape.c + b.shape.c, a.shape.h, a.shape.w});
    const int64_t plane = int64_t(a.shape.h) * a.shape.w;
    for (int ni = 0; ni < a.shape.n; ++ni) {
        std::copy_n(a.data.data() + a.index(ni, 0, 0, 0), int64_t(a.shape.c) * plane,
                    out.data.data() + out.index(ni, 0, 0, 0));
        std::copy_n(b.data.data() + b.index(ni, 0, 0, 0), int64_t(b.shape.c) * plane,
                    out.data.data() + out.index(ni, a.shape.c, 0, 0));
    }
    return out;
}

// ---- batch normalization ------------------------------------------------------

template <typename T>
struct BatchNormParamsT {
    Tensor4T<T> gamma;
    Tensor4T<T> beta;
    Tensor4T<T> running_mean;
    Tensor4T<T> running_var;
    T eps = T(1e-5);
    T momentum = T(0.1);

    static BatchNormParamsT make(int channels) {
        BatchNormParamsT p;
        const Dims d{1, channels, 1, 1};
        p.gamma = Tensor4T<T>::constant(d, T(1));
        p.beta = Tensor4T<T>::zeros(d);
        p.running_mean = Tensor4T<T>::zeros(d);
        p.running_var = Tensor4T<T>::constant(d, T(1));
        return p;
    }
};

using BatchNormParams = BatchNormParamsT<float>;

// Training-mode forward on batch statistics; updates running stats in place:
// running <- (1 - momentum) * running + momentum * batch.
template <typename T>
Tensor4T<T> batchnorm_train(const Tensor4T<T>& x, BatchNormParamsT<T>& p) {
    contract(x.shape.c == p.gamma.shape.c, "batchnorm: channel mismatch " +
                                               std::to_string(x.shape.c) + " vs " +
                                               std::to_string(p.gamma.shape.c));
    contract(int64_t(x.shape.n) * x.shape.h * x.shape.w >= 2,
             "batchnorm train mode needs at least 2 values per channel, got shape " +
                 to_string(x.shape));
    const std::vector<T> mean = reduce_mean_per_channel(x);
    const std::vector<T> var = reduce_var_per_channel(x, mean);
    Tensor4T<T> out(x.shape);
    const int64_t plane = int64_t(x.shape.h) * x.shape.w;
    for (int ci = 0; ci < x.shape.c; ++ci) {
        const size_t cs = static_cast<size_t>(ci);
        const T inv = T(1) / std::sqrt(var[cs] + p.eps);
        const T g = p.gamma.data[cs], b = p.beta.data[cs], m = mean[cs];
        for (int ni = 0; ni < x.shape.n; ++ni) {
            const T* src = x.data.data() + x.index(ni, ci, 0, 0);
            T* dst = out.data.data() + out.index(ni, ci, 0, 0);
            for (int64_t i = 0; i < plane; ++i) dst[i] = g * (src[i] - m) * inv + b;
        }
        p.running_mean.data[cs] = (T(1) - p.momentum) * p.running_mean.data[cs] + p.momentum * m;
        p.running_var.data[cs] = (T(1) - p.momentum) * p.running_var.data[cs] + p.momentum * var[cs];
    }
    return out;
}

// Inference-mode forward on the stored running statistics; no side effects.
template <typename T>
Tensor4T<T> batchnorm_infer(const Tensor4T<T>& x, const BatchNormParamsT<T>& p) {
    contract(x.shape.c == p.gamma.shape.c, "batchnorm: channel mismatch " +
                                               std::to_string(x.shape.c) + " vs " +
                                               std::to_string(p.gamma.shape.c));
    Tensor4T<T> out(x.shape);
    const int64_t plane = int64_t(x.shape.h) * x.shape.w;
    for (int ci = 0; ci < x.shape.c; ++ci) {
        const size_t cs = static_cast<size_t>(ci);
        const T inv = T(1) / std::sqrt(p.running_var.data[cs] + p.eps);
        const T g = p.gamma.data[cs], b = p.beta.data[cs], m = p.running_mean.data[cs];
        for (int ni = 0; ni < x.shape.n; ++ni) {
            const T* src = x.data.data() + x.index(ni, ci, 0, 0);
            T* dst = out.data.data() + out.index(ni, ci, 0, 0);
            for (int64_t i = 0; i < plane; ++i) dst[i] = g * (src[i] - m) * inv + b;
        }
    }
    return out;
}

// ---- taped layer forwards -----------------------------------------------------

template <typename T>
VarT<T> conv2d(VarT<T> x, VarT<T> weight, VarT<T> bias, int stride, int pad) {
    TapeT<T>& t = *x.tape;
    Tensor4T<T> out = conv2d(t.value(x), t.value(weight), t.value(bias), stride, pad);
    const Dims out_dims = out.shape;
    const Dims w_dims = t.value(weight).shape;
    const ConvGeom g = ConvGeom::make(t.value(x).shape, w_dims.h, w_dims.w, stride, pad);
    const int ix = x.idx, iw = weight.idx, ib = bias.idx;
    return t.push(
        std::move(out), {ix, iw, ib},
        [ix, iw, ib, g, w_dims, out_dims, self = static_cast<int>(t.size())](TapeT<T>& tp) {
            const MatrixT<T> dy_mat = nchw_to_mat(tp.grad_at(self));
            const MatrixT<T> w_mat = weight_as_mat(tp.value_at(iw));
            // dW = dY * cols^T; the im2col is recomputed rather than kept alive.
            const MatrixT<T> cols = im2col(tp.value_at(ix), g);
            const MatrixT<T> dw = matmul_bt(dy_mat, cols);
            Tensor4T<T>& gw = tp.grad_at(iw);
            for (size_t i = 0; i < dw.data.size(); ++i) gw.data[i] += dw.data[i];
            // dX = col2im(W^T * dY)
            const Tensor4T<T> dx = col2im(matmul_at(w_mat, dy_mat), g);
            Tensor4T<T>& gx = tp.grad_at(ix);
            for (size_t i = 0; i < dx.data.size(); ++i) gx.data[i] += dx.data[i];
            // db = per-output-channel sum of dY
            Tensor4T<T>& gb = tp.grad_at(ib);
            for (int64_t oc = 0; oc < dy_mat.rows; ++oc) {
                T acc = 0;
                const T* row = dy_mat.row(oc);
                for (int64_t j = 0; j < dy_mat.cols; ++j) acc += row[j];
                gb.data[static_cast<size_t>(oc)] += acc;
            }
        });
}

template <typename T>
VarT<T> conv_transpose2d(VarT<T> x, VarT<T> weight, VarT<T> bias, int stride, int pad) {
    TapeT<T>& t = *x.tape;
    Tensor4T<T> out = conv_transpose2d(t.value(x), t.value(weight), t.value(bias), stride, pad);
    const Dims w_dims = t.value(weight).shape;
    const ConvGeom g = ConvGeom::make(out.shape, w_dims.h, w_dims.w, stride, pad);
    const Dims x_dims = t.value(x).shape;
    const int ix = x.idx, iw = weight.idx, ib = bias.idx;
    return t.push(std::move(out), {ix, iw, ib},
                  [ix, iw, ib, g, x_dims, self = static_cast<int>(t.size())](TapeT<T>& tp) {
                      const Tensor4T<T>& dout = tp.grad_at(self);
                      const MatrixT<T> dcols = im2col(dout, g);
                      const MatrixT<T> w_mat = weight_as_mat(tp.value_at(iw));
                      // dX = W * im2col(dOut)
                      const Tensor4T<T> dx = mat_to_nchw(matmul(w_mat, dcols), x_dims);
                      Tensor4T<T>& gx = tp.grad_at(ix);
                      for (size_t i = 0; i < dx.data.size(); ++i) gx.data[i] += dx.data[i];
                      // dW = X * im2col(dOut)^T
                      const MatrixT<T> dw = matmul_bt(nchw_to_mat(tp.value_at(ix)), dcols);
                      Tensor4T<T>& gw = tp.grad_at(iw);
                      for (size_t i = 0; i < dw.data.size(); ++i) gw.data[i] += dw.data[i];
                      // db = per-output-channel sum of dOut
                      Tensor4T<T>& gb = tp.grad_at(ib);
                      const int64_t plane = int64_t(dout.shape.h) * dout.shape.w;
                      for (int ci = 0; ci < dout.shape.c; ++ci) {
                          T acc = 0;
                          for (int ni = 0; ni < dout.shape.n; ++ni) {
                              const T* p = dout.data.data() + dout.index(ni, ci, 0, 0);
                              for (int64_t i = 0; i < plane; ++i) acc += p[i];
                          }
                          gb.data[static_cast<size_t>(ci)] += acc;
                      }
                  });
}

// Taped batch norm differentiates through the batch statistics. Running stats
// are updated on the params struct as a forward side effect; they are buffers,
// not graph nodes.
template <typename T>
VarT<T> batchnorm_train(VarT<T> x, VarT<T> gamma, VarT<T> beta, BatchNormParamsT<T>& p) {
    TapeT<T>& t = *x.tape;
    const Tensor4T<T>& xv = t.value(x);
    contract(xv.shape.c == t.value(gamma).shape.c, "batchnorm: channel mismatch " +
                                                       std::to_string(xv.shape.c) + " vs " +
                                                       std::to_string(t.value(gamma).shape.c));
    contract(int64_t(xv.shape.n) * xv.shape.h * xv.shape.w >= 2,
             "batchnorm train mode needs at least 2 values per channel, got shape " +
                 to_string(xv.shape));
    std::vector<T> mean = reduce_mean_per_channel(xv);
    std::vector<T> var = reduce_var_per_channel(xv, mean);
    Tensor4T<T> out(xv.shape);
    const int64_t plane = int64_t(xv.shape.h) * xv.shape.w;
    for (int ci = 0; ci < xv.shape.c; ++ci) {
        const size_t cs = static_cast<size_t>(ci);
        const T inv = T(1) / std::sqrt(var[cs] + p.eps);
        const T g = t.value(gamma).data[cs], b = t.value(beta).data[cs], m = mean[cs];
        for (int ni = 0; ni < xv.shape.n; ++ni) {
            const T* src = xv.data.data() + xv.index(ni, ci, 0, 0);
            T* dst = out.data.data() + out.index(ni, ci, 0, 0);
            for (int64_t i = 0; i < plane; ++i) dst[i] = g * (src[i] - m) * inv + b;
        }
        p.running_mean.data[cs] = (T(1) - p.momentum) * p.running_mean.data[cs] + p.momentum * m;
        p.running_var.data[cs] = (T(1) - p.momentum) * p.running_var.data[cs] + p.momentum * var[cs];
    }
    const int ixi = x.idx, ig = gamma.idx, ibe = beta.idx;
    const T eps = p.eps;
    return t.push(
        std::move(out), {ixi, ig, ibe},
        [ixi, ig, ibe, mean, var, eps, plane, self = static_cast<int>(t.size())](TapeT<T>& tp) {
            const Tensor4T<T>& dy = tp.grad_at(self);
            const Tensor4T<T>& xv = tp.value_at(ixi);
            const Tensor4T<T>& gv = tp.value_at(ig);
            Tensor4T<T>& gx = tp.grad_at(ixi);
            Tensor4T<T>& gg = tp.grad_at(ig);
            Tensor4T<T>& gb = tp.grad_at(ibe);
            const T count = static_cast<T>(int64_t(xv.shape.n) * plane);
            for (int ci = 0; ci < xv.shape.c; ++ci) {
                const size_t cs = static_cast<size_t>(ci);
                const T inv = T(1) / std::sqrt(var[cs] + eps);
                const T m = mean[cs];
                // First pass: sums of dy and dy * xhat over the channel.
                T sum_dy = 0, sum_dy_xhat = 0;
                for (int ni = 0; ni < xv.shape.n; ++ni) {
                    const T* xp = xv.data.data() + xv.index(ni, ci, 0, 0);
                    const T* dp = dy.data.data() + dy.index(ni, ci, 0, 0);
                    for (int64_t i = 0; i < plane; ++i) {
                        const T xhat = (xp[i] - m) * inv;
                        sum_dy += dp[i];
                        sum_dy_xhat += dp[i] * xhat;
                    }
                }
                const T mean_dy = sum_dy / count;
                const T mean_dy_xhat = sum_dy_xhat / count;
                const T gscale = gv.data[cs] * inv;
                for (int ni = 0; ni < xv.shape.n; ++ni) {
                    const T* xp = xv.data.data() + xv.index(ni, ci, 0, 0);
                    const T* dp = dy.data.data() + dy.index(ni, ci, 0, 0);
                    T* op = gx.data.data() + gx.index(ni, ci, 0, 0);
                    for (int64_t i = 0; i < plane; ++i) {
                        const T xhat = (xp[i] - m) * inv;
                        op[i] += gscale * (dp[i] - mean_dy - xhat * mean_dy_xhat);
                    }
                }
                gg.data[cs] += sum_dy_xhat;
                gb.data[cs] += sum_dy;
            }
        });
}

// Taped inference-mode batch norm: a per-channel affine map through the frozen
// running stats. Gradients flow to x, gamma, beta only.
template <typename T>
VarT<T> batchnorm_infer(VarT<T> x, VarT<T> gamma, VarT<T> beta, const BatchNormParamsT<T>& p) {
    TapeT<T>& t = *x.tape;
    Tensor4T<T> out = batchnorm_infer(t.value(x), p);
    // Rebuild with taped gamma/beta so grads reach them.
    const Tensor4T<T>& xv = t.value(x);
    const int64_t plane = int64_t(xv.shape.h) * xv.shape.w;
    std::vector<T> inv(static_cast<size_t>(xv.shape.c));
    std::vector<T> rmean(static_cast<size_t>(xv.shape.c));
    for (int ci = 0; ci < xv.shape.c; ++ci) {
        const size_t cs = static_cast<size_t>(ci);
        inv[cs] = T(1) / std::sqrt(p.running_var.data[cs] + p.eps);
        rmean[cs] = p.running_mean.data[cs];
        const T g = t.value(gamma).data[cs], b = t.value(beta).data[cs];
        for (int ni = 0; ni < xv.shape.n; ++ni) {
            const T* src = xv.data.data() + xv.index(ni, ci, 0, 0);
            T* dst = out.data.data() + out.index(ni, ci, 0, 0);
            for (int64_t i = 0; i < plane; ++i) dst[i] = g * (src[i] - rmean[cs]) * inv[cs] + b;
        }
    }
    const int ixi = x.idx, ig = gamma.idx, ibe = beta.idx;
    return t.push(std::move(out), {ixi, ig, ibe},
                  [ixi, ig, ibe, inv, rmean, plane, self = static_cast<int>(t.size())](TapeT<T>& tp) {
                      const Tensor4T<T>& dy = tp.grad_at(self);
                      const Tensor4T<T>& xv = tp.value_at(ixi);
                      const Tensor4T<T>& gv = tp.value_at(ig);
                      Tensor4T<T>& gx = tp.grad_at(ixi);
                      Tensor4T<T>& gg = tp.grad_at(ig);
                      Tensor4T<T>& gb = tp.grad_at(ibe);
                      for (int ci = 0; ci < xv.shape.c; ++ci) {
                          const size_t cs = static_cast<size_t>(ci);
                          const T scale = gv.data[cs] * inv[cs];
                          T sum_dy = 0, sum_dy_xhat = 0;
                          for (int ni = 0; ni < xv.shape.n; ++ni) {
                              const T* xp = xv.data.data() + xv.index(ni, ci, 0, 0);
                              const T* dp = dy.data.data() + dy.index(ni, ci, 0, 0);
                              T* op = gx.data.data() + gx.index(ni, ci, 0, 0);
                              for (int64_t i = 0; i < plane; ++i) {
                                  op[i] += scale * dp[i];
                                  sum_dy += dp[i];
                                  sum_dy_xhat += dp[i] * (xp[i] - rmean[cs]) * inv[cs];
                              }
                          }
                          gg.data[cs] += sum_dy_xhat;
                          gb.data[cs] += sum_dy;
                      }
                  });
}

}  // namespace maskforge
