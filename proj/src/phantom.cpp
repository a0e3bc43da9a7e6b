#include "maskforge/phantom.hpp"

#include <cmath>

namespace maskforge {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Ellipse {
    double cx, cy, rx, ry;
};

// Bounding boxes must be separated by at least a 2-pixel gap.
bool boxes_clear(const Ellipse& a, const Ellipse& b) {
    const double gap = 2.0;
    const bool x_clear = a.cx + a.rx + gap < b.cx - b.rx || b.cx + b.rx + gap < a.cx - a.rx;
    const bool y_clear = a.cy + a.ry + gap < b.cy - b.ry || b.cy + b.ry + gap < a.cy - a.ry;
    return x_clear || y_clear;
}

}  // namespace

TrainingPair phantom_pair(const PhantomSpec& spec, int64_t index) {
    spec.validate();
    Rng rng(Rng::mix(spec.seed, static_cast<uint64_t>(index)));
    const int s = spec.size;

    int64_t want = spec.min_shapes;
    if (spec.max_shapes > spec.min_shapes)
        want += static_cast<int64_t>(rng.next_u64() %
                                     static_cast<uint64_t>(spec.max_shapes - spec.min_shapes + 1));

    std::vector<Ellipse> shapes;
    for (int64_t k = 0; k < want; ++k) {
        for (int attempt = 0; attempt < 40; ++attempt) {
            Ellipse e;
            e.rx = s * (0.1 + 0.1 * rng.next_unit());
            e.ry = s * (0.1 + 0.1 * rng.next_unit());
            e.cx = e.rx + rng.next_unit() * (s - 1 - 2.0 * e.rx);
            e.cy = e.ry + rng.next_unit() * (s - 1 - 2.0 * e.ry);
            bool ok = true;
            for (const auto& other : shapes)
                if (!boxes_clear(e, other)) {
                    ok = false;
                    break;
                }
            if (ok) {
                shapes.push_back(e);
                break;
            }
        }
    }

    const int denom = std::max(spec.max_shapes, 1);
    TrainingPair pair;
    pair.condition = Tensor4(Dims{1, 1, s, s});
    pair.target = Tensor4(Dims{1, 1, s, s});
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            int label = 0;
            for (size_t k = 0; k < shapes.size(); ++k) {
                const Ellipse& e = shapes[k];
                const double dx = (x - e.cx) / e.rx;
                const double dy = (y - e.cy) / e.ry;
                if (dx * dx + dy * dy <= 1.0) {
                    label = static_cast<int>(k) + 1;
                    break;
                }
            }
            double value;
            if (label > 0) {
                value = 0.3 + 0.1 * label +
                        0.05 * std::sin(2.0 * kPi * x / 16.0) * std::sin(2.0 * kPi * y / 16.0);
            } else {
                value = 0.1 + 0.2 * (double(y) / (s - 1));
            }
            pair.condition.at(0, 0, y, x) = static_cast<float>(double(label) / denom);
            pair.target.at(0, 0, y, x) =
                static_cast<float>(std::min(1.0, std::max(0.0, value)));
        }
    return pair;
}

std::vector<TrainingPair> phantom_dataset(const PhantomSpec& spec, int64_t count) {
    contract(count >= 0, "phantom_dataset: negative count");
    std::vector<TrainingPair> out;
    out.reserve(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) out.push_back(phantom_pair(spec, i));
    return out;
}

}  // namespace maskforge
