#pragma once

#include <string>

#include "maskforge/preprocess.hpp"
#include "maskforge/tensor.hpp"

namespace maskforge {

// Mean local SSIM over 8x8 uniform windows at stride 1, with C1=(0.01·L)^2,
// C2=(0.03·L)^2, L=1, biased variances. Inputs are expected in [0,1].
double ssim(const Image2D& a, const Image2D& b);

// Fraction of patch scores classified correctly at threshold 0.5; a score is
// called real iff it is strictly greater than 0.5.
double discriminator_accuracy(const Tensor4& scores, bool is_real);

// decay*prev + (1-decay)*value. The first observation initializes the average
// (callers pass it through unmodified).
double ema_update(double prev, double value, double decay);

struct MetricsRow {
    int64_t iteration = 0;
    double g_loss = 0, d_loss = 0, d_acc_real = 0, d_acc_fake = 0;
    double g_loss_ema = 0, d_loss_ema = 0, acc_real_ema = 0, acc_fake_ema = 0;
};

extern const char* const kMetricsHeader;

std::string format_metrics_row(const MetricsRow& row);

}  // namespace maskforge
