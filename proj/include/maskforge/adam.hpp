#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "maskforge/errors.hpp"
#include "maskforge/tensor.hpp"

namespace maskforge {

struct AdamConfig {
    double lr = 0.00013;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Moment slots are keyed by parameter name so
// optimizer state serializes in a stable order. A step either applies to
// every parameter or is rejected whole: any non-finite gradient throws before
// anything mutates, leaving params, moments, and the step counter untouched.
template <typename T>
struct AdamT {
    struct Slot {
        Tensor4T<T> m, v;
    };

    AdamConfig cfg;
    uint64_t t = 0;
    std::map<std::string, Slot> slots;

    using ParamGrad = std::tuple<std::string, Tensor4T<T>*, const Tensor4T<T>*>;

    void step(const std::vector<ParamGrad>& updates) {
        for (const auto& [name, param, grad] : updates) {
            contract(param->shape == grad->shape,
                     "adam: param/grad shape mismatch for " + name + ": " +
                         to_string(param->shape) + " vs " + to_string(grad->shape));
            if (!all_finite(*grad))
                throw NumericError("adam: non-finite gradient for " + name + " at step " +
                                   std::to_string(t + 1) + "; step rejected");
        }
        t += 1;
        const T corr1 = static_cast<T>(1.0 - std::pow(cfg.beta1, double(t)));
        const T corr2 = static_cast<T>(1.0 - std::pow(cfg.beta2, double(t)));
        const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
        const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
        for (const auto& [name, param, grad] : updates) {
            Slot& slot = slots[name];
            if (slot.m.numel() == 0) {
                slot.m = Tensor4T<T>::zeros(param->shape);
                slot.v = Tensor4T<T>::zeros(param->shape);
            }
            contract(slot.m.shape == param->shape,
                     "adam: stored moments for " + name + " have shape " + to_string(slot.m.shape) +
                         ", param is " + to_string(param->shape));
            for (size_t i = 0; i < param->data.size(); ++i) {
                const T g = grad->data[i];
                slot.m.data[i] = b1 * slot.m.data[i] + (T(1) - b1) * g;
                slot.v.data[i] = b2 * slot.v.data[i] + (T(1) - b2) * g * g;
                const T mhat = slot.m.data[i] / corr1;
                const T vhat = slot.v.data[i] / corr2;
                param->data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

using Adam = AdamT<float>;

}  // namespace maskforge
