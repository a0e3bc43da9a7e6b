#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "maskforge/errors.hpp"
#include "maskforge/rng.hpp"

namespace maskforge {

// Refuse allocations above this element count before touching the allocator.
inline constexpr int64_t kMaxTensorElements = int64_t(1) << 30;

struct Dims {
    int n = 0, c = 0, h = 0, w = 0;

    int64_t numel() const { return int64_t(n) * c * h * w; }
    bool operator==(const Dims&) const = default;
};

inline std::string to_string(const Dims& d) {
    return "(" + std::to_string(d.n) + "," + std::to_string(d.c) + "," + std::to_string(d.h) +
           "," + std::to_string(d.w) + ")";
}

// Dense rank-4 array in NCHW order, row-major with w fastest. Plain value
// type: copies are deep, all arithmetic lives in free functions.
template <typename T>
struct Tensor4T {
    Dims shape{};
    std::vector<T> data;

    Tensor4T() = default;

    explicit Tensor4T(Dims d) {
        contract(d.n >= 1 && d.c >= 1 && d.h >= 1 && d.w >= 1,
                 "tensor dims must all be >= 1, got " + maskforge::to_string(d));
        if (d.numel() > kMaxTensorElements)
            throw ContractError("tensor allocation refused: " + maskforge::to_string(d) + " has " +
                                std::to_string(d.numel()) + " elements, max is " +
                                std::to_string(kMaxTensorElements));
        shape = d;
        data.assign(static_cast<size_t>(d.numel()), T(0));
    }

    static Tensor4T zeros(Dims d) { return Tensor4T(d); }

    static Tensor4T constant(Dims d, T v) {
        Tensor4T t(d);
        for (auto& x : t.data) x = v;
        return t;
    }

    static Tensor4T normal(Dims d, T mean, T stddev, Rng& rng) {
        Tensor4T t(d);
        for (auto& x : t.data) x = mean + stddev * static_cast<T>(rng.next_normal());
        return t;
    }

    int64_t numel() const { return shape.numel(); }

    int64_t index(int ni, int ci, int yi, int xi) const {
        return ((int64_t(ni) * shape.c + ci) * shape.h + yi) * shape.w + xi;
    }

    T& at(int ni, int ci, int yi, int xi) { return data[static_cast<size_t>(index(ni, ci, yi, xi))]; }
    T at(int ni, int ci, int yi, int xi) const {
        return data[static_cast<size_t>(index(ni, ci, yi, xi))];
    }

    bool same_shape(const Tensor4T& o) const { return shape == o.shape; }
};

using Tensor4 = Tensor4T<float>;
using Tensor4d = Tensor4T<double>;

namespace detail {
template <typename T>
void require_same_shape(const Tensor4T<T>& a, const Tensor4T<T>& b, const char* op) {
    contract(a.shape == b.shape, std::string(op) + ": shape mismatch " + to_string(a.shape) +
                                     " vs " + to_string(b.shape));
}
}  // namespace detail

// ---- elementwise -----------------------------------------------------------

template <typename T>
Tensor4T<T> add(const Tensor4T<T>& a, const Tensor4T<T>& b) {
    detail::require_same_shape(a, b, "add");
    Tensor4T<T> out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
    return out;
}

template <typename T>
Tensor4T<T> sub(const Tensor4T<T>& a, const Tensor4T<T>& b) {
    detail::require_same_shape(a, b, "sub");
    Tensor4T<T> out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] - b.data[i];
    return out;
}

template <typename T>
Tensor4T<T> mul(const Tensor4T<T>& a, const Tensor4T<T>& b) {
    detail::require_same_shape(a, b, "mul");
    Tensor4T<T> out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    return out;
}

template <typename T>
Tensor4T<T> add_scalar(const Tensor4T<T>& a, T s) {
    Tensor4T<T> out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + s;
    return out;
}

template <typename T>
Tensor4T<T> mul_scalar(const Tensor4T<T>& a, T s) {
    Tensor4T<T> out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * s;
    return out;
}

template <typename T>
Tensor4T<T> neg(const Tensor4T<T>& a) {
    return mul_scalar(a, T(-1));
}

template <typename T>
Tensor4T<T> square(const Tensor4T<T>& a) {
    Tensor4T<T> out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * a.data[i];
    return out;
}

// ---- reductions ------------------------------------------------------------

template <typename T>
T reduce_mean(const Tensor4T<T>& t) {
    contract(t.numel() > 0, "reduce_mean: empty tensor");
    T acc = 0;
    for (T v : t.data) acc += v;
    return acc / static_cast<T>(t.numel());
}

template <typename T>
T reduce_sum(const Tensor4T<T>& t) {
    T acc = 0;
    for (T v : t.data) acc += v;
    return acc;
}

// Mean over (n, h, w) for each channel.
template <typename T>
std::vector<T> reduce_mean_per_channel(const Tensor4T<T>& t) {
    contract(t.numel() > 0, "reduce_mean_per_channel: empty tensor");
    std::vector<T> out(static_cast<size_t>(t.shape.c), T(0));
    const int64_t plane = int64_t(t.shape.h) * t.shape.w;
    for (int ni = 0; ni < t.shape.n; ++ni)
        for (int ci = 0; ci < t.shape.c; ++ci) {
            const T* p = t.data.data() + t.index(ni, ci, 0, 0);
            T acc = 0;
            for (int64_t i = 0; i < plane; ++i) acc += p[i];
            out[static_cast<size_t>(ci)] += acc;
        }
    const T count = static_cast<T>(int64_t(t.shape.n) * plane);
    for (auto& v : out) v /= count;
    return out;
}

// Biased (divide by count) per-channel variance around the provided means.
template <typename T>
std::vector<T> reduce_var_per_channel(const Tensor4T<T>& t, const std::vector<T>& means) {
    contract(means.size() == static_cast<size_t>(t.shape.c),
             "reduce_var_per_channel: means length " + std::to_string(means.size()) +
                 " does not match channel count " + std::to_string(t.shape.c));
    std::vector<T> out(static_cast<size_t>(t.shape.c), T(0));
    const int64_t plane = int64_t(t.shape.h) * t.shape.w;
    for (int ni = 0; ni < t.shape.n; ++ni)
        for (int ci = 0; ci < t.shape.c; ++ci) {
            const T* p = t.data.data() + t.index(ni, ci, 0, 0);
            const T m = means[static_cast<size_t>(ci)];
            T acc = 0;
            for (int64_t i = 0; i < plane; ++i) {
                const T d = p[i] - m;
                acc += d * d;
            }
            out[static_cast<size_t>(ci)] += acc;
        }
    const T count = static_cast<T>(int64_t(t.shape.n) * plane);
    for (auto& v : out) v /= count;
    return out;
}

template <typename T>
bool all_finite(const Tensor4T<T>& t) {
    for (T v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

template <typename To, typename From>
Tensor4T<To> tensor_cast(const Tensor4T<From>& t) {
    Tensor4T<To> out(t.shape);
    for (size_t i = 0; i < t.data.size(); ++i) out.data[i] = static_cast<To>(t.data[i]);
    return out;
}

}  // namespace maskforge
