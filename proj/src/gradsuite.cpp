#include "maskforge/gradsuite.hpp"

#include <cstdio>
#include <functional>

#include "maskforge/autograd.hpp"
#include "maskforge/layers.hpp"
#include "maskforge/losses.hpp"
#include "maskforge/models.hpp"
#include "maskforge/rng.hpp"

namespace maskforge {

namespace {

constexpr double kStep = 1e-4;

using Fn = std::function<Vard(Taped&, const std::vector<Vard>&)>;

struct Instance {
    std::vector<Tensor4d> inputs;
    Fn f;
};

// Random tensors for gradcheck. `offset` keeps values away from kinks
// (|x| >= offset), scale shrinks the spread.
Tensor4d sample(Rng& rng, Dims d, double offset = 0.0, double scale = 1.0) {
    Tensor4d t(d);
    for (auto& x : t.data) {
        double v = rng.next_normal() * scale;
        if (offset > 0) v = (v < 0 ? -1.0 : 1.0) * (offset + std::abs(v));
        x = v;
    }
    return t;
}

// Values uniform in [lo, hi]; used where the op demands a bounded domain.
Tensor4d sample_range(Rng& rng, Dims d, double lo, double hi) {
    Tensor4d t(d);
    for (auto& x : t.data) x = lo + (hi - lo) * rng.next_unit();
    return t;
}

// Scalarizes a tensor output through a fixed random projection so every
// output element carries independent weight in the check.
Fn project(std::function<Vard(Taped&, const std::vector<Vard>&)> op, Tensor4d r) {
    return [op, r](Taped& tape, const std::vector<Vard>& xs) {
        Vard out = op(tape, xs);
        return mean(mul(out, tape.leaf(r)));
    };
}

Dims small_dims(Rng& rng) {
    const int n = 1 + int(rng.next_u64() % 2);
    const int c = 1 + int(rng.next_u64() % 3);
    const int h = 2 + int(rng.next_u64() % 4);
    const int w = 2 + int(rng.next_u64() % 4);
    return Dims{n, c, h, w};
}

GradCaseResult run_case(const std::string& name, int instances, uint64_t seed,
                        const std::function<Instance(Rng&)>& make) {
    GradCaseResult result;
    result.name = name;
    result.instances = instances;
    Rng rng(seed);
    for (int i = 0; i < instances; ++i) {
        Instance inst = make(rng);
        GradCheckReport rep = grad_check<double>(inst.inputs, inst.f, kStep);
        result.checked += rep.checked;
        result.max_rel_err = std::max(result.max_rel_err, rep.max_rel_err);
    }
    return result;
}

}  // namespace

double GradSuiteReport::worst() const {
    double w = 0;
    for (const auto& c : cases) w = std::max(w, c.max_rel_err);
    return w;
}

bool GradSuiteReport::passed(double threshold) const {
    for (const auto& c : cases)
        if (!(c.max_rel_err < threshold)) return false;
    return !cases.empty();
}

GradSuiteReport run_gradient_suite(uint64_t seed, int instances_per_case) {
    contract(instances_per_case >= 1, "gradient suite: instances_per_case must be >= 1");
    GradSuiteReport report;
    int case_idx = 0;
    auto run = [&](const std::string& name, const std::function<Instance(Rng&)>& make) {
        report.cases.push_back(
            run_case(name, instances_per_case, Rng::mix(seed, uint64_t(++case_idx)), make));
    };

    // ---- elementwise ----
    run("add", [](Rng& rng) {
        Dims d = small_dims(rng);
        return Instance{{sample(rng, d), sample(rng, d)},
                        project([](Taped&, const std::vector<Vard>& xs) { return add(xs[0], xs[1]); },
                                sample(rng, d))};
    });
    run("sub", [](Rng& rng) {
        Dims d = small_dims(rng);
        return Instance{{sample(rng, d), sample(rng, d)},
                        project([](Taped&, const std::vector<Vard>& xs) { return sub(xs[0], xs[1]); },
                                sample(rng, d))};
    });
    run("mul", [](Rng& rng) {
        Dims d = small_dims(rng);
        return Instance{{sample(rng, d), sample(rng, d)},
                        project([](Taped&, const std::vector<Vard>& xs) { return mul(xs[0], xs[1]); },
                                sample(rng, d))};
    });
    run("add_scalar/mul_scalar", [](Rng& rng) {
        Dims d = small_dims(rng);
        const double a = rng.next_normal(), b = rng.next_normal();
        return Instance{{sample(rng, d)},
                        project(
                            [a, b](Taped&, const std::vector<Vard>& xs) {
                                return add_scalar(mul_scalar(xs[0], b), a);
                            },
                            sample(rng, d))};
    });
    run("square", [](Rng& rng) {
        Dims d = small_dims(rng);
        return Instance{{sample(rng, d)},
                        project([](Taped&, const std::vector<Vard>& xs) { return square(xs[0]); },
                                sample(rng, d))};
    });
    run("abs", [](Rng& rng) {
        Dims d = small_dims(rng);
        return Instance{{sample(rng, d, 0.05)},
                        project([](Taped&, const std::vector<Vard>& xs) { return abs_val(xs[0]); },
                                sample(rng, d))};
    });
    run("log_clamped", [](Rng& rng) {
        Dims d = small_dims(rng);
        return Instance{{sample_range(rng, d, 0.1, 2.0)},
                        project(
                            [](Taped&, const std::vector<Vard>& xs) {
                                return log_clamped(xs[0], 1e-12);
                            },
                            sample(rng, d))};
    });
    run("mean", [](Rng& rng) {
        Dims d = small_dims(rng);
        return Instance{{sample(rng, d)},
                        [](Taped&, const std::vector<Vard>& xs) { return mean(xs[0]); }};
    });
    run("sum", [](Rng& rng) {
        Dims d = small_dims(rng);
        return Instance{{sample(rng, d)},
                        [](Taped&, const std::vector<Vard>& xs) { return sum(xs[0]); }};
    });

    // ---- activations ----
    run("leaky_relu", [](Rng& rng) {
        Dims d = small_dims(rng);
        const double slope = 0.2;
        return Instance{{sample(rng, d, 0.05)},
                        project(
                            [slope](Taped&, const std::vector<Vard>& xs) {
                                return leaky_relu(xs[0], slope);
                            },
                            sample(rng, d))};
    });
    run("sigmoid", [](Rng& rng) {
        Dims d = small_dims(rng);
        return Instance{{sample(rng, d)},
                        project([](Taped&, const std::vector<Vard>& xs) { return sigmoid(xs[0]); },
                                sample(rng, d))};
    });

    // ---- structure ----
    run("concat_channels", [](Rng& rng) {
        Dims d = small_dims(rng);
        Dims d2{d.n, 1 + int(rng.next_u64() % 3), d.h, d.w};
        Dims dout{d.n, d.c + d2.c, d.h, d.w};
        return Instance{{sample(rng, d), sample(rng, d2)},
                        project(
                            [](Taped&, const std::vector<Vard>& xs) {
                                return concat_channels(xs[0], xs[1]);
                            },
                            sample(rng, dout))};
    });
    run("extract_patches", [](Rng& rng) {
        const int patch = 2;
        const int n = 1 + int(rng.next_u64() % 2);
        const int c = 1 + int(rng.next_u64() % 2);
        const int tiles = 2 + int(rng.next_u64() % 2);
        Dims d{n, c, patch * tiles, patch * tiles};
        Dims dout{n * tiles * tiles, c, patch, patch};
        return Instance{{sample(rng, d)},
                        project(
                            [patch](Taped&, const std::vector<Vard>& xs) {
                                return extract_patches(xs[0], patch);
                            },
                            sample(rng, dout))};
    });

    // ---- convolutions ----
    run("conv2d", [](Rng& rng) {
        const int n = 1 + int(rng.next_u64() % 2);
        const int cin = 1 + int(rng.next_u64() % 3);
        const int cout = 1 + int(rng.next_u64() % 3);
        const int k = 1 + int(rng.next_u64() % 4);
        const int stride = 1 + int(rng.next_u64() % 2);
        const int o = 1 + int(rng.next_u64() % 3);
        int pad = int(rng.next_u64() % 2);
        int h = (o - 1) * stride + k - 2 * pad;  // exact geometry: oh == o
        if (h < 1) {
            pad = 0;
            h = (o - 1) * stride + k;
        }
        Dims dx{n, cin, h, h};
        return Instance{
            {sample(rng, dx), sample(rng, Dims{cout, cin, k, k}), sample(rng, Dims{1, cout, 1, 1})},
            project(
                [stride, pad](Taped&, const std::vector<Vard>& xs) {
                    return conv2d(xs[0], xs[1], xs[2], stride, pad);
                },
                sample(rng, Dims{n, cout, o, o}))};
    });
    run("conv_transpose2d", [](Rng& rng) {
        const int n = 1 + int(rng.next_u64() % 2);
        const int cin = 1 + int(rng.next_u64() % 3);
        const int cout = 1 + int(rng.next_u64() % 3);
        const int k = 2 + int(rng.next_u64() % 3);
        const int stride = 1 + int(rng.next_u64() % 2);
        const int pad = k >= 3 ? int(rng.next_u64() % 2) : 0;
        const int h = 2 + int(rng.next_u64() % 3);
        const int oh = (h - 1) * stride + k - 2 * pad;
        Dims dx{n, cin, h, h};
        return Instance{
            {sample(rng, dx), sample(rng, Dims{cin, cout, k, k}), sample(rng, Dims{1, cout, 1, 1})},
            project(
                [stride, pad](Taped&, const std::vector<Vard>& xs) {
                    return conv_transpose2d(xs[0], xs[1], xs[2], stride, pad);
                },
                sample(rng, Dims{n, cout, oh, oh}))};
    });

    // ---- batchnorm ----
    run("batchnorm_train", [](Rng& rng) {
        const int n = 2 + int(rng.next_u64() % 2);
        const int c = 1 + int(rng.next_u64() % 3);
        const int h = 2 + int(rng.next_u64() % 3);
        Dims dx{n, c, h, h};
        Dims dc{1, c, 1, 1};
        return Instance{{sample(rng, dx), sample(rng, dc, 0.1), sample(rng, dc)},
                        project(
                            [c](Taped&, const std::vector<Vard>& xs) {
                                auto p = BatchNormParamsT<double>::make(c);
                                return batchnorm_train(xs[0], xs[1], xs[2], p);
                            },
                            sample(rng, dx))};
    });
    run("batchnorm_infer", [](Rng& rng) {
        const int n = 1 + int(rng.next_u64() % 2);
        const int c = 1 + int(rng.next_u64() % 3);
        const int h = 2 + int(rng.next_u64() % 3);
        Dims dx{n, c, h, h};
        Dims dc{1, c, 1, 1};
        auto p = BatchNormParamsT<double>::make(c);
        p.running_mean = sample(rng, dc, 0.0, 0.5);
        p.running_var = sample_range(rng, dc, 0.5, 2.0);
        return Instance{{sample(rng, dx), sample(rng, dc, 0.1), sample(rng, dc)},
                        project(
                            [p](Taped&, const std::vector<Vard>& xs) {
                                return batchnorm_infer(xs[0], xs[1], xs[2], p);
                            },
                            sample(rng, dx))};
    });

    // ---- losses ----
    run("lsgan_d_loss", [](Rng& rng) {
        Dims d{2 + int(rng.next_u64() % 3), 1, 1, 1};
        return Instance{{sample(rng, d), sample(rng, d)},
                        [](Taped&, const std::vector<Vard>& xs) {
                            return lsgan_d_loss(xs[0], xs[1]);
                        }};
    });
    run("bce_d_loss", [](Rng& rng) {
        Dims d{2 + int(rng.next_u64() % 3), 1, 1, 1};
        return Instance{{sample_range(rng, d, 0.1, 0.9), sample_range(rng, d, 0.1, 0.9)},
                        [](Taped&, const std::vector<Vard>& xs) {
                            return bce_gan_losses(xs[0], xs[1]).first;
                        }};
    });
    run("bce_g_loss", [](Rng& rng) {
        Dims d{2 + int(rng.next_u64() % 3), 1, 1, 1};
        return Instance{{sample_range(rng, d, 0.1, 0.9), sample_range(rng, d, 0.1, 0.9)},
                        [](Taped&, const std::vector<Vard>& xs) {
                            return bce_gan_losses(xs[0], xs[1]).second;
                        }};
    });
    run("l1_recon", [](Rng& rng) {
        Dims d = small_dims(rng);
        Tensor4d x = sample(rng, d);
        Tensor4d gx = x;
        for (auto& v : gx.data) {
            const double off = 0.05 + std::abs(rng.next_normal());
            v += (rng.next_unit() < 0.5 ? -off : off);
        }
        return Instance{{std::move(x), std::move(gx)},
                        [](Taped&, const std::vector<Vard>& xs) {
                            return l1_recon(xs[0], xs[1]);
                        }};
    });
    run("generator_objective", [](Rng& rng) {
        Dims ds{2 + int(rng.next_u64() % 3), 1, 1, 1};
        Dims d = small_dims(rng);
        Tensor4d x = sample(rng, d);
        Tensor4d gx = x;
        for (auto& v : gx.data) {
            const double off = 0.05 + std::abs(rng.next_normal());
            v += (rng.next_unit() < 0.5 ? -off : off);
        }
        return Instance{{sample(rng, ds), std::move(x), std::move(gx)},
                        [](Taped&, const std::vector<Vard>& xs) {
                            ObjectiveWeights w;
                            return generator_objective(xs[0], xs[1], xs[2], w);
                        }};
    });

    return report;
}

std::string format_gradient_report(const GradSuiteReport& report, double threshold) {
    std::string out;
    char line[160];
    for (const auto& c : report.cases) {
        std::snprintf(line, sizeof(line), "%-24s instances=%-3d checks=%-6lld max_rel_err=%.3e %s\n",
                      c.name.c_str(), c.instances, static_cast<long long>(c.checked),
                      c.max_rel_err, c.max_rel_err < threshold ? "ok" : "FAIL");
        out += line;
    }
    std::snprintf(line, sizeof(line), "worst=%.3e threshold=%.1e -> %s\n", report.worst(),
                  threshold, report.passed(threshold) ? "PASS" : "FAIL");
    out += line;
    return out;
}

}  // namespace maskforge
