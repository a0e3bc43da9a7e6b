#include "maskforge/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "maskforge/errors.hpp"

namespace maskforge {

double ssim(const Image2D& a, const Image2D& b) {
    contract(a.h == b.h && a.w == b.w, "ssim: shape mismatch " + std::to_string(a.h) + "x" +
                                           std::to_string(a.w) + " vs " + std::to_string(b.h) +
                                           "x" + std::to_string(b.w));
    const int win = 8;
    contract(a.h >= win && a.w >= win,
             "ssim: image " + std::to_string(a.h) + "x" + std::to_string(a.w) +
                 " smaller than the " + std::to_string(win) + "x" + std::to_string(win) +
                 " window");
    const double c1 = (0.01 * 1.0) * (0.01 * 1.0);
    const double c2 = (0.03 * 1.0) * (0.03 * 1.0);
    const double nwin = double(win) * win;
    double total = 0;
    int64_t count = 0;
    for (int y = 0; y + win <= a.h; ++y)
        for (int x = 0; x + win <= a.w; ++x) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int i = 0; i < win; ++i) {
                const float* pa = a.pix.data() + static_cast<size_t>(y + i) * a.w + x;
                const float* pb = b.pix.data() + static_cast<size_t>(y + i) * b.w + x;
                for (int j = 0; j < win; ++j) {
                    const double va = pa[j], vb = pb[j];
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            }
            const double ma = sa / nwin, mb = sb / nwin;
            const double var_a = saa / nwin - ma * ma;
            const double var_b = sbb / nwin - mb * mb;
            const double cov = sab / nwin - ma * mb;
            total += ((2.0 * (ma * mb) + c1) * (2.0 * cov + c2)) /
                     (((ma * ma + mb * mb) + c1) * ((var_a + var_b) + c2));
            ++count;
        }
    return total / double(count);
}

double discriminator_accuracy(const Tensor4& scores, bool is_real) {
    contract(scores.numel() > 0, "discriminator_accuracy: no scores");
    int64_t correct = 0;
    for (float v : scores.data) {
        const bool called_real = v > 0.5f;
        if (called_real == is_real) ++correct;
    }
    return double(correct) / double(scores.numel());
}

double ema_update(double prev, double value, double decay) {
    contract(decay >= 0.0 && decay < 1.0, "ema decay must be in [0,1)");
    return decay * prev + (1.0 - decay) * value;
}

const char* const kMetricsHeader =
    "iter,g_loss,d_loss,d_acc_real,d_acc_fake,g_loss_ema,d_loss_ema,acc_real_ema,acc_fake_ema";

std::string format_metrics_row(const MetricsRow& row) {
    char buf[320];
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                  static_cast<long long>(row.iteration), row.g_loss, row.d_loss, row.d_acc_real,
                  row.d_acc_fake, row.g_loss_ema, row.d_loss_ema, row.acc_real_ema,
                  row.acc_fake_ema);
    return std::string(buf);
}

}  // namespace maskforge
