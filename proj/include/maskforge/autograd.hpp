#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "maskforge/tensor.hpp"

namespace maskforge {

// Reverse-mode autodiff on an append-only tape. Ops record their output
// value plus a closure that maps the output gradient back onto the parents'
// gradients. backward() seeds a scalar root and replays closures in reverse
// push order, restricted to the root's ancestors, so gradient accumulation
// happens in one fixed order regardless of graph shape.

template <typename T>
class TapeT;

template <typename T>
struct VarT {
    TapeT<T>* tape = nullptr;
    int idx = -1;

    bool valid() const { return tape != nullptr && idx >= 0; }
};

template <typename T>
class TapeT {
  public:
    using BackwardFn = std::function<void(TapeT&)>;

    VarT<T> leaf(Tensor4T<T> value) {
        return push(std::move(value), {}, nullptr);
    }

    VarT<T> push(Tensor4T<T> value, std::vector<int> parents, BackwardFn backward) {
        Node node;
        node.grad = Tensor4T<T>(value.shape);
        node.value = std::move(value);
        node.parents = std::move(parents);
        node.backward = std::move(backward);
        nodes_.push_back(std::move(node));
        return VarT<T>{this, static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor4T<T>& value(VarT<T> v) const { return node_at(v).value; }
    const Tensor4T<T>& grad(VarT<T> v) const { return node_at(v).grad; }
    Tensor4T<T>& grad_at(int idx) { return nodes_.at(static_cast<size_t>(idx)).grad; }
    const Tensor4T<T>& value_at(int idx) const {
        return nodes_.at(static_cast<size_t>(idx)).value;
    }

    size_t size() const { return nodes_.size(); }

    // Accumulates d(root)/d(node) into every ancestor's grad. Root must be scalar.
    void backward(VarT<T> root) {
        const Node& r = node_at(root);
        contract(r.value.numel() == 1,
                 "backward: root must be scalar, got " + to_string(r.value.shape));
        std::vector<char> live(nodes_.size(), 0);
        live[static_cast<size_t>(root.idx)] = 1;
        for (int i = root.idx; i >= 0; --i) {
            if (!live[static_cast<size_t>(i)]) continue;
            for (int p : nodes_[static_cast<size_t>(i)].parents) live[static_cast<size_t>(p)] = 1;
        }
        nodes_[static_cast<size_t>(root.idx)].grad.data[0] += T(1);
        for (int i = root.idx; i >= 0; --i) {
            if (!live[static_cast<size_t>(i)]) continue;
            if (nodes_[static_cast<size_t>(i)].backward) nodes_[static_cast<size_t>(i)].backward(*this);
        }
    }

  private:
    struct Node {
        Tensor4T<T> value;
        Tensor4T<T> grad;
        std::vector<int> parents;
        BackwardFn backward;
    };

    const Node& node_at(VarT<T> v) const {
        contract(v.tape == this, "variable does not belong to this tape");
        return nodes_.at(static_cast<size_t>(v.idx));
    }

    std::vector<Node> nodes_;
};

using Tape = TapeT<float>;
using Taped = TapeT<double>;
using Var = VarT<float>;
using Vard = VarT<double>;

// ---- elementwise ops ---------------------------------------------------------

template <typename T>
VarT<T> add(VarT<T> a, VarT<T> b) {
    contract(a.tape == b.tape, "binary op: operands live on different tapes");
    TapeT<T>& t = *a.tape;
    Tensor4T<T> out = add(t.value(a), t.value(b));
    const int ia = a.idx, ib = b.idx;
    return t.push(std::move(out), {ia, ib}, [ia, ib, self = static_cast<int>(t.size())](TapeT<T>& tp) {
        const Tensor4T<T>& g = tp.grad_at(self);
        Tensor4T<T>& ga = tp.grad_at(ia);
        Tensor4T<T>& gb = tp.grad_at(ib);
        for (int64_t i = 0; i < g.numel(); ++i) {
            ga.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
            gb.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
        }
    });
}

template <typename T>
VarT<T> sub(VarT<T> a, VarT<T> b) {
    contract(a.tape == b.tape, "binary op: operands live on different tapes");
    TapeT<T>& t = *a.tape;
    Tensor4T<T> out = sub(t.value(a), t.value(b));
    const int ia = a.idx, ib = b.idx;
    return t.push(std::move(out), {ia, ib}, [ia, ib, self = static_cast<int>(t.size())](TapeT<T>& tp) {
        const Tensor4T<T>& g = tp.grad_at(self);
        Tensor4T<T>& ga = tp.grad_at(ia);
        Tensor4T<T>& gb = tp.grad_at(ib);
        for (int64_t i = 0; i < g.numel(); ++i) {
            ga.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
            gb.data[static_cast<size_t>(i)] -= g.data[static_cast<size_t>(i)];
        }
    });
}

template <typename T>
VarT<T> mul(VarT<T> a, VarT<T> b) {
    contract(a.tape == b.tape, "binary op: operands live on different tapes");
    TapeT<T>& t = *a.tape;
    Tensor4T<T> out = mul(t.value(a), t.value(b));
    const int ia = a.idx, ib = b.idx;
    return t.push(std::move(out), {ia, ib}, [ia, ib, self = static_cast<int>(t.size())](TapeT<T>& tp) {
        const Tensor4T<T>& g = tp.grad_at(self);
        const Tensor4T<T>& va = tp.value_at(ia);
        const Tensor4T<T>& vb = tp.value_at(ib);
        Tensor4T<T>& ga = tp.grad_at(ia);
        Tensor4T<T>& gb = tp.grad_at(ib);
        for (int64_t i = 0; i < g.numel(); ++i) {
            const size_t s = static_cast<size_t>(i);
            ga.data[s] += g.data[s] * vb.data[s];
            gb.data[s] += g.data[s] * va.data[s];
        }
    });
}

template <typename T>
VarT<T> add_scalar(VarT<T> a, T s) {
    TapeT<T>& t = *a.tape;
    Tensor4T<T> out = add_scalar(t.value(a), s);
    const int ia = a.idx;
    return t.push(std::move(out), {ia}, [ia, self = static_cast<int>(t.size())](TapeT<T>& tp) {
        const Tensor4T<T>& g = tp.grad_at(self);
        Tensor4T<T>& ga = tp.grad_at(ia);
        for (int64_t i = 0; i < g.numel(); ++i)
            ga.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
    });
}

template <typename T>
VarT<T> mul_scalar(VarT<T> a, T s) {
    TapeT<T>& t = *a.tape;
    Tensor4T<T> out = mul_scalar(t.value(a), s);
    const int ia = a.idx;
    return t.push(std::move(out), {ia}, [ia, s, self = static_cast<int>(t.size())](TapeT<T>& tp) {
        const Tensor4T<T>& g = tp.grad_at(self);
        Tensor4T<T>& ga = tp.grad_at(ia);
        for (int64_t i = 0; i < g.numel(); ++i)
            ga.data[static_cast<size_t>(i)] += s * g.data[static_cast<size_t>(i)];
    });
}

template <typename T>
VarT<T> square(VarT<T> a) {
    return mul(a, a);
}

template <typename T>
VarT<T> abs_val(VarT<T> a) {
    TapeT<T>& t = *a.tape;
    Tensor4T<T> out(t.value(a).shape);
    for (int64_t i = 0; i < out.numel(); ++i)
        out.data[static_cast<size_t>(i)] = std::abs(t.value(a).data[static_cast<size_t>(i)]);
    const int ia = a.idx;
    return t.push(std::move(out), {ia}, [ia, self = static_cast<int>(t.size())](TapeT<T>& tp) {
        const Tensor4T<T>& g = tp.grad_at(self);
        const Tensor4T<T>& v = tp.value_at(ia);
        Tensor4T<T>& ga = tp.grad_at(ia);
        for (int64_t i = 0; i < g.numel(); ++i) {
            const size_t s = static_cast<size_t>(i);
            const T sign = v.data[s] > T(0) ? T(1) : (v.data[s] < T(0) ? T(-1) : T(0));
            ga.data[s] += sign * g.data[s];
        }
    });
}

// log(max(x, floor)); keeps cross-entropy finite when a sigmoid saturates.
template <typename T>
VarT<T> log_clamped(VarT<T> a, T floor) {
    TapeT<T>& t = *a.tape;
    Tensor4T<T> out(t.value(a).shape);
    for (int64_t i = 0; i < out.numel(); ++i)
        out.data[static_cast<size_t>(i)] =
            std::log(std::max(t.value(a).data[static_cast<size_t>(i)], floor));
    const int ia = a.idx;
    return t.push(std::move(out), {ia}, [ia, floor, self = static_cast<int>(t.size())](TapeT<T>& tp) {
        const Tensor4T<T>& g = tp.grad_at(self);
        const Tensor4T<T>& v = tp.value_at(ia);
        Tensor4T<T>& ga = tp.grad_at(ia);
        for (int64_t i = 0; i < g.numel(); ++i) {
            const size_t s = static_cast<size_t>(i);
            if (v.data[s] > floor) ga.data[s] += g.data[s] / v.data[s];
        }
    });
}

// Subgradient at 0 is taken as 1.
template <typename T>
VarT<T> leaky_relu(VarT<T> a, T slope) {
    contract(slope >= T(0) && slope < T(1), "leaky_relu: slope must be in [0,1)");
    TapeT<T>& t = *a.tape;
    Tensor4T<T> out(t.value(a).shape);
    for (int64_t i = 0; i < out.numel(); ++i) {
        const T x = t.value(a).data[static_cast<size_t>(i)];
        out.data[static_cast<size_t>(i)] = x >= T(0) ? x : slope * x;
    }
    const int ia = a.idx;
    return t.push(std::move(out), {ia}, [ia, slope, self = static_cast<int>(t.size())](TapeT<T>& tp) {
        const Tensor4T<T>& g = tp.grad_at(self);
        const Tensor4T<T>& v = tp.value_at(ia);
        Tensor4T<T>& ga = tp.grad_at(ia);
        for (int64_t i = 0; i < g.numel(); ++i) {
            const size_t s = static_cast<size_t>(i);
            ga.data[s] += (v.data[s] >= T(0) ? T(1) : slope) * g.data[s];
        }
    });
}

template <typename T>
VarT<T> sigmoid(VarT<T> a) {
    TapeT<T>& t = *a.tape;
    Tensor4T<T> out(t.value(a).shape);
    for (int64_t i = 0; i < out.numel(); ++i) {
        const T x = t.value(a).data[static_cast<size_t>(i)];
        out.data[static_cast<size_t>(i)] =
            x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
    }
    const int ia = a.idx;
    return t.push(std::move(out), {ia}, [ia, self = static_cast<int>(t.size())](TapeT<T>& tp) {
        const Tensor4T<T>& g = tp.grad_at(self);
        const Tensor4T<T>& y = tp.value_at(self);
        Tensor4T<T>& ga = tp.grad_at(ia);
        for (int64_t i = 0; i < g.numel(); ++i) {
            const size_t s = static_cast<size_t>(i);
            ga.data[s] += y.data[s] * (T(1) - y.data[s]) * g.data[s];
        }
    });
}

// ---- reductions --------------------------------------------------------------

template <typename T>
VarT<T> sum(VarT<T> a) {
    TapeT<T>& t = *a.tape;
    Tensor4T<T> out(Dims{1, 1, 1, 1});
    out.data[0] = reduce_sum(t.value(a));
    const int ia = a.idx;
    return t.push(std::move(out), {ia}, [ia, self = static_cast<int>(t.size())](TapeT<T>& tp) {
        const T g = tp.grad_at(self).data[0];
        Tensor4T<T>& ga = tp.grad_at(ia);
        for (auto& v : ga.data) v += g;
    });
}

template <typename T>
VarT<T> mean(VarT<T> a) {
    TapeT<T>& t = *a.tape;
    const int64_t n = t.value(a).numel();
    Tensor4T<T> out(Dims{1, 1, 1, 1});
    out.data[0] = reduce_mean(t.value(a));
    const int ia = a.idx;
    return t.push(std::move(out), {ia}, [ia, n, self = static_cast<int>(t.size())](TapeT<T>& tp) {
        const T g = tp.grad_at(self).data[0] / static_cast<T>(n);
        Tensor4T<T>& ga = tp.grad_at(ia);
        for (auto& v : ga.data) v += g;
    });
}

// ---- shape ops ---------------------------------------------------------------

template <typename T>
VarT<T> concat_channels(VarT<T> a, VarT<T> b) {
    contract(a.tape == b.tape, "binary op: operands live on different tapes");
    TapeT<T>& t = *a.tape;
    const Dims da = t.value(a).shape, db = t.value(b).shape;
    contract(da.n == db.n && da.h == db.h && da.w == db.w,
             "concat_channels: shapes " + to_string(da) + " and " + to_string(db) +
                 " differ outside the channel dim");
    Tensor4T<T> out(Dims{da.n, da.c + db.c, da.h, da.w});
    const int64_t plane = int64_t(da.h) * da.w;
    for (int ni = 0; ni < da.n; ++ni) {
        std::copy_n(t.value(a).data.data() + t.value(a).index(ni, 0, 0, 0), da.c * plane,
                    out.data.data() + out.index(ni, 0, 0, 0));
        std::copy_n(t.value(b).data.data() + t.value(b).index(ni, 0, 0, 0), db.c * plane,
                    out.data.data() + out.index(ni, da.c, 0, 0));
    }
    const int ia = a.idx, ib = b.idx;
    return t.push(std::move(out), {ia, ib},
                  [ia, ib, da, db, plane, self = static_cast<int>(t.size())](TapeT<T>& tp) {
                      const Tensor4T<T>& g = tp.grad_at(self);
                      Tensor4T<T>& ga = tp.grad_at(ia);
                      Tensor4T<T>& gb = tp.grad_at(ib);
                      for (int ni = 0; ni < da.n; ++ni) {
                          const T* src = g.data.data() + g.index(ni, 0, 0, 0);
                          T* pa = ga.data.data() + ga.index(ni, 0, 0, 0);
                          for (int64_t i = 0; i < da.c * plane; ++i) pa[i] += src[i];
                          const T* srcb = g.data.data() + g.index(ni, da.c, 0, 0);
                          T* pb = gb.data.data() + gb.index(ni, 0, 0, 0);
                          for (int64_t i = 0; i < db.c * plane; ++i) pb[i] += srcb[i];
                      }
                  });
}

// ---- gradient checking -------------------------------------------------------

struct GradCheckReport {
    double max_rel_err = 0.0;
    int64_t checked = 0;
};

// f builds a scalar VarT<T> from leaves it creates on the given tape for the
// given inputs. Analytic grads are compared against central differences; the
// relative error uses max(|analytic|, |numeric|, 1e-8) in the denominator.
template <typename T, typename F>
GradCheckReport grad_check(const std::vector<Tensor4T<T>>& inputs, const F& f, T h) {
    auto eval = [&](const std::vector<Tensor4T<T>>& xs) {
        TapeT<T> tape;
        std::vector<VarT<T>> leaves;
        leaves.reserve(xs.size());
        for (const auto& x : xs) leaves.push_back(tape.leaf(x));
        VarT<T> out = f(tape, leaves);
        contract(tape.value(out).numel() == 1, "grad_check: objective must be scalar");
        return tape.value(out).data[0];
    };

    TapeT<T> tape;
    std::vector<VarT<T>> leaves;
    leaves.reserve(inputs.size());
    for (const auto& x : inputs) leaves.push_back(tape.leaf(x));
    VarT<T> out = f(tape, leaves);
    tape.backward(out);

    GradCheckReport report;
    std::vector<Tensor4T<T>> probe = inputs;
    for (size_t li = 0; li < inputs.size(); ++li) {
        const Tensor4T<T>& analytic = tape.grad(leaves[li]);
        for (int64_t i = 0; i < inputs[li].numel(); ++i) {
            const size_t s = static_cast<size_t>(i);
            const T saved = probe[li].data[s];
            probe[li].data[s] = saved + h;
            const T fp = eval(probe);
            probe[li].data[s] = saved - h;
            const T fm = eval(probe);
            probe[li].data[s] = saved;
            const double numeric = (double(fp) - double(fm)) / (2.0 * double(h));
            const double a = double(analytic.data[s]);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            report.max_rel_err = std::max(report.max_rel_err, std::abs(a - numeric) / denom);
            ++report.checked;
        }
    }
    return report;
}

}  // namespace maskforge
