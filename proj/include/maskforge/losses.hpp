#pragma once

#include "maskforge/autograd.hpp"
#include "maskforge/tensor.hpp"

namespace maskforge {

struct ObjectiveWeights {
    double lambda = 0.012;
};

inline void check_lambda(const ObjectiveWeights& w) {
    contract(w.lambda >= 0.0, "objective lambda must be >= 0, got " + std::to_string(w.lambda));
}

namespace detail {
template <typename T>
void require_probability_scores(const Tensor4T<T>& s, const char* op) {
    for (T v : s.data)
        contract(v >= T(0) && v <= T(1),
                 std::string(op) + ": scores must lie in [0,1], got " + std::to_string(double(v)));
}
}  // namespace detail

inline constexpr double kLogFloor = 1e-12;

// ---- plain losses -------------------------------------------------------------

// Reference GAN loss on sigmoid scores. d_loss = -mean(log d_real)
// - mean(log(1 - d_fake)); g_loss = mean(log(1 - d_fake)), the saturating
// generator form. Logs are clamped at 1e-12.
template <typename T>
std::pair<T, T> bce_gan_losses(const Tensor4T<T>& d_real, const Tensor4T<T>& d_fake) {
    detail::require_probability_scores(d_real, "bce_gan_losses");
    detail::require_probability_scores(d_fake, "bce_gan_losses");
    T log_real = 0, log_one_minus_fake = 0;
    for (T v : d_real.data) log_real += std::log(std::max(v, T(kLogFloor)));
    for (T v : d_fake.data) log_one_minus_fake += std::log(std::max(T(1) - v, T(kLogFloor)));
    log_real /= static_cast<T>(d_real.numel());
    log_one_minus_fake /= static_cast<T>(d_fake.numel());
    return {-log_real - log_one_minus_fake, log_one_minus_fake};
}

// Least-squares discriminator loss: mean((1 - d_real)^2) + mean(d_fake^2).
// Scores are linear; targets are 1 for real, 0 for fake.
template <typename T>
T lsgan_d_loss(const Tensor4T<T>& d_real, const Tensor4T<T>& d_fake) {
    T real_term = 0, fake_term = 0;
    for (T v : d_real.data) real_term += (T(1) - v) * (T(1) - v);
    for (T v : d_fake.data) fake_term += v * v;
    return real_term / static_cast<T>(d_real.numel()) + fake_term / static_cast<T>(d_fake.numel());
}

template <typename T>
T l1_recon(const Tensor4T<T>& x, const Tensor4T<T>& gx) {
    detail::require_same_shape(x, gx, "l1_recon");
    T acc = 0;
    for (size_t i = 0; i < x.data.size(); ++i) acc += std::abs(x.data[i] - gx.data[i]);
    return acc / static_cast<T>(x.numel());
}

template <typename T>
T mse(const Tensor4T<T>& x, const Tensor4T<T>& gx) {
    detail::require_same_shape(x, gx, "mse");
    T acc = 0;
    for (size_t i = 0; i < x.data.size(); ++i) {
        const T d = x.data[i] - gx.data[i];
        acc += d * d;
    }
    return acc / static_cast<T>(x.numel());
}

// Full generator objective: lambda * mean((1 - d_fake)^2) + mean(|x - gx|).
// lambda weights the adversarial term against the reconstruction term.
template <typename T>
T generator_objective(const Tensor4T<T>& d_fake, const Tensor4T<T>& x, const Tensor4T<T>& gx,
                      const ObjectiveWeights& w) {
    check_lambda(w);
    T adv = 0;
    for (T v : d_fake.data) adv += (T(1) - v) * (T(1) - v);
    adv /= static_cast<T>(d_fake.numel());
    return static_cast<T>(w.lambda) * adv + l1_recon(x, gx);
}

// ---- taped losses --------------------------------------------------------------

template <typename T>
VarT<T> one_minus(VarT<T> v) {
    return add_scalar(mul_scalar(v, T(-1)), T(1));
}

template <typename T>
VarT<T> lsgan_d_loss(VarT<T> d_real, VarT<T> d_fake) {
    VarT<T> real_term = mean(square(one_minus(d_real)));
    VarT<T> fake_term = mean(square(d_fake));
    return add(real_term, fake_term);
}

template <typename T>
std::pair<VarT<T>, VarT<T>> bce_gan_losses(VarT<T> d_real, VarT<T> d_fake) {
    detail::require_probability_scores(d_real.tape->value(d_real), "bce_gan_losses");
    detail::require_probability_scores(d_fake.tape->value(d_fake), "bce_gan_losses");
    VarT<T> log_real = mean(log_clamped(d_real, T(kLogFloor)));
    VarT<T> log_one_minus_fake = mean(log_clamped(one_minus(d_fake), T(kLogFloor)));
    VarT<T> d_loss = mul_scalar(add(log_real, log_one_minus_fake), T(-1));
    return {d_loss, log_one_minus_fake};
}

template <typename T>
VarT<T> l1_recon(VarT<T> x, VarT<T> gx) {
    return mean(abs_val(sub(x, gx)));
}

template <typename T>
VarT<T> generator_objective(VarT<T> d_fake, VarT<T> x, VarT<T> gx, const ObjectiveWeights& w) {
    check_lambda(w);
    VarT<T> adv = mean(square(one_minus(d_fake)));
    return add(mul_scalar(adv, static_cast<T>(w.lambda)), l1_recon(x, gx));
}

}  // namespace maskforge
