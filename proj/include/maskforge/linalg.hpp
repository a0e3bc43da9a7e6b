#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

#include "maskforge/tensor.hpp"

namespace maskforge {

// ---- parallel execution ----------------------------------------------------
//
// Kernels may split their outermost loop across `parallelism()` threads.
// Every output element is written by exactly one thread and every scalar
// reduction runs in a fixed order, so results are bitwise identical for any
// degree. Degree 1 (the default) runs everything inline.

namespace detail {
inline std::atomic<int>& parallelism_degree() {
    static std::atomic<int> degree{1};
    return degree;
}
}  // namespace detail

inline int parallelism() { return detail::parallelism_degree().load(std::memory_order_relaxed); }

inline void set_parallelism(int degree) {
    contract(degree >= 1, "parallelism degree must be >= 1, got " + std::to_string(degree));
    detail::parallelism_degree().store(degree, std::memory_order_relaxed);
}

// Runs fn(lo, hi) over contiguous chunks of [0, count).
template <typename F>
void parallel_for_chunks(int64_t count, const F& fn) {
    const int degree = parallelism();
    if (degree <= 1 || count <= 1) {
        if (count > 0) fn(int64_t(0), count);
        return;
    }
    const int workers = static_cast<int>(std::min<int64_t>(degree, count));
    const int64_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(workers - 1));
    for (int t = 1; t < workers; ++t) {
        const int64_t lo = t * chunk;
        const int64_t hi = std::min<int64_t>(lo + chunk, count);
        if (lo >= hi) break;
        threads.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    fn(int64_t(0), std::min<int64_t>(chunk, count));
    for (auto& th : threads) th.join();
}

// ---- matrices --------------------------------------------------------------

template <typename T>
struct MatrixT {
    int64_t rows = 0, cols = 0;
    std::vector<T> data;

    MatrixT() = default;
    MatrixT(int64_t r, int64_t c) : rows(r), cols(c), data(static_cast<size_t>(r * c), T(0)) {}

    T* row(int64_t r) { return data.data() + r * cols; }
    const T* row(int64_t r) const { return data.data() + r * cols; }
};

using Matrix = MatrixT<float>;
using Matrixd = MatrixT<double>;

// C = A * B. Row-parallel axpy kernel with 4-row tiling: each C row is
// accumulated over k in a fixed sequential order, so the split across
// threads never changes the arithmetic.
template <typename T>
MatrixT<T> matmul(const MatrixT<T>& a, const MatrixT<T>& b) {
    contract(a.cols == b.rows, "matmul: inner dims " + std::to_string(a.cols) + " vs " +
                                   std::to_string(b.rows));
    MatrixT<T> c(a.rows, b.cols);
    const int64_t k = a.cols, n = b.cols;
    parallel_for_chunks(a.rows, [&](int64_t r0, int64_t r1) {
        int64_t i = r0;
        for (; i + 4 <= r1; i += 4) {
            T* c0 = c.row(i);
            T* c1 = c.row(i + 1);
            T* c2 = c.row(i + 2);
            T* c3 = c.row(i + 3);
            const T* a0 = a.row(i);
            const T* a1 = a.row(i + 1);
            const T* a2 = a.row(i + 2);
            const T* a3 = a.row(i + 3);
            for (int64_t kk = 0; kk < k; ++kk) {
                const T v0 = a0[kk], v1 = a1[kk], v2 = a2[kk], v3 = a3[kk];
                const T* br = b.row(kk);
                for (int64_t j = 0; j < n; ++j) {
                    c0[j] += v0 * br[j];
                    c1[j] += v1 * br[j];
                    c2[j] += v2 * br[j];
                    c3[j] += v3 * br[j];
                }
            }
        }
        for (; i < r1; ++i) {
            T* cr = c.row(i);
            const T* ar = a.row(i);
            for (int64_t kk = 0; kk < k; ++kk) {
                const T v = ar[kk];
                const T* br = b.row(kk);
                for (int64_t j = 0; j < n; ++j) cr[j] += v * br[j];
            }
        }
    });
    return c;
}

template <typename T>
MatrixT<T> transpose(const MatrixT<T>& a) {
    MatrixT<T> t(a.cols, a.rows);
    for (int64_t i = 0; i < a.rows; ++i) {
        const T* ar = a.row(i);
        for (int64_t j = 0; j < a.cols; ++j) t.data[static_cast<size_t>(j * a.rows + i)] = ar[j];
    }
    return t;
}

// C = A * B^T, via a materialized transpose so the kernel stays in axpy form.
template <typename T>
MatrixT<T> matmul_bt(const MatrixT<T>& a, const MatrixT<T>& b) {
    contract(a.cols == b.cols, "matmul_bt: inner dims " + std::to_string(a.cols) + " vs " +
                                   std::to_string(b.cols));
    return matmul(a, transpose(b));
}

// C = A^T * B without materializing A^T.
template <typename T>
MatrixT<T> matmul_at(const MatrixT<T>& a, const MatrixT<T>& b) {
    contract(a.rows == b.rows, "matmul_at: inner dims " + std::to_string(a.rows) + " vs " +
                                   std::to_string(b.rows));
    MatrixT<T> c(a.cols, b.cols);
    const int64_t k = a.rows, n = b.cols;
    parallel_for_chunks(a.cols, [&](int64_t r0, int64_t r1) {
        int64_t i = r0;
        for (; i + 4 <= r1; i += 4) {
            T* c0 = c.row(i);
            T* c1 = c.row(i + 1);
            T* c2 = c.row(i + 2);
            T* c3 = c.row(i + 3);
            for (int64_t kk = 0; kk < k; ++kk) {
                const T* ar = a.row(kk);
                const T v0 = ar[i], v1 = ar[i + 1], v2 = ar[i + 2], v3 = ar[i + 3];
                const T* br = b.row(kk);
                for (int64_t j = 0; j < n; ++j) {
                    c0[j] += v0 * br[j];
                    c1[j] += v1 * br[j];
                    c2[j] += v2 * br[j];
                    c3[j] += v3 * br[j];
                }
            }
        }
        for (; i < r1; ++i) {
            T* cr = c.row(i);
            for (int64_t kk = 0; kk < k; ++kk) {
                const T v = a.row(kk)[i];
                const T* br = b.row(kk);
                for (int64_t j = 0; j < n; ++j) cr[j] += v * br[j];
            }
        }
    });
    return c;
}

// ---- convolution lowering ---------------------------------------------------

struct ConvGeom {
    int n = 0, c = 0, h = 0, w = 0;
    int kh = 0, kw = 0, stride = 1, pad = 0;
    int oh = 0, ow = 0;

    static ConvGeom make(Dims x, int kh, int kw, int stride, int pad) {
        contract(kh >= 1 && kw >= 1, "conv geometry: kernel dims must be >= 1");
        contract(stride >= 1, "conv geometry: stride must be >= 1");
        contract(pad >= 0, "conv geometry: pad must be >= 0");
        ConvGeom g;
        g.n = x.n;
        g.c = x.c;
        g.h = x.h;
        g.w = x.w;
        g.kh = kh;
        g.kw = kw;
        g.stride = stride;
        g.pad = pad;
        const int eh = x.h + 2 * pad - kh;
        const int ew = x.w + 2 * pad - kw;
        contract(eh >= 0 && ew >= 0 && eh % stride == 0 && ew % stride == 0,
                 "conv geometry: output size not a positive integer for input " + to_string(x) +
                     ", kernel " + std::to_string(kh) + "x" + std::to_string(kw) + ", stride " +
                     std::to_string(stride) + ", pad " + std::to_string(pad));
        g.oh = eh / stride + 1;
        g.ow = ew / stride + 1;
        return g;
    }

    int64_t patch_rows() const { return int64_t(c) * kh * kw; }
    int64_t out_cols() const { return int64_t(n) * oh * ow; }
};

// Column j of the result holds the zero-padded receptive field of output
// position j = (ni * oh + oy) * ow + ox; row r = (ci * kh + u) * kw + v.
template <typename T>
MatrixT<T> im2col(const Tensor4T<T>& x, const ConvGeom& g) {
    MatrixT<T> cols(g.patch_rows(), g.out_cols());
    parallel_for_chunks(int64_t(g.c), [&](int64_t c0, int64_t c1) {
        for (int64_t ci = c0; ci < c1; ++ci) {
            for (int u = 0; u < g.kh; ++u) {
                for (int v = 0; v < g.kw; ++v) {
                    T* dst = cols.row((ci * g.kh + u) * g.kw + v);
                    int64_t j = 0;
                    for (int ni = 0; ni < g.n; ++ni) {
                        const T* src = x.data.data() + x.index(ni, static_cast<int>(ci), 0, 0);
                        for (int oy = 0; oy < g.oh; ++oy) {
                            const int iy = oy * g.stride + u - g.pad;
                            for (int ox = 0; ox < g.ow; ++ox, ++j) {
                                const int ix = ox * g.stride + v - g.pad;
                                dst[j] = (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w)
                                             ? src[int64_t(iy) * g.w + ix]
                                             : T(0);
                            }
                        }
                    }
                }
            }
        }
    });
    return cols;
}

template <typename T>
MatrixT<T> im2col(const Tensor4T<T>& x, int kh, int kw, int stride, int pad) {
    return im2col(x, ConvGeom::make(x.shape, kh, kw, stride, pad));
}

// Exact adjoint of im2col: scatter-adds each column back into the image.
// Parallel only across channels, whose output planes are disjoint.
template <typename T>
Tensor4T<T> col2im(const MatrixT<T>& cols, const ConvGeom& g) {
    contract(cols.rows == g.patch_rows() && cols.cols == g.out_cols(),
             "col2im: matrix " + std::to_string(cols.rows) + "x" + std::to_string(cols.cols) +
                 " does not match geometry");
    Tensor4T<T> x(Dims{g.n, g.c, g.h, g.w});
    parallel_for_chunks(int64_t(g.c), [&](int64_t c0, int64_t c1) {
        for (int64_t ci = c0; ci < c1; ++ci) {
            for (int u = 0; u < g.kh; ++u) {
                for (int v = 0; v < g.kw; ++v) {
                    const T* src = cols.row((ci * g.kh + u) * g.kw + v);
                    int64_t j = 0;
                    for (int ni = 0; ni < g.n; ++ni) {
                        T* dst = x.data.data() + x.index(ni, static_cast<int>(ci), 0, 0);
                        for (int oy = 0; oy < g.oh; ++oy) {
                            const int iy = oy * g.stride + u - g.pad;
                            for (int ox = 0; ox < g.ow; ++ox, ++j) {
                                const int ix = ox * g.stride + v - g.pad;
                                if (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w)
                                    dst[int64_t(iy) * g.w + ix] += src[j];
                            }
                        }
                    }
                }
            }
        }
    });
    return x;
}

}  // namespace maskforge
