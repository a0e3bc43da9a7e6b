// Python bindings: numpy-centric access to the main operations.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "maskforge/dataset_builder.hpp"
#include "maskforge/gradsuite.hpp"
#include "maskforge/linalg.hpp"
#include "maskforge/losses.hpp"
#include "maskforge/metrics.hpp"
#include "maskforge/models.hpp"
#include "maskforge/nifti.hpp"
#include "maskforge/phantom.hpp"
#include "maskforge/preprocess.hpp"
#include "maskforge/trainer.hpp"

namespace py = pybind11;
using namespace maskforge;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

// Accepts (h,w) or (n,c,h,w) arrays; 2-d input becomes a single-sample tensor.
Tensor4 to_tensor(const FloatArray& a) {
    const auto info = a.request();
    Dims d;
    if (info.ndim == 2) {
        d = Dims{1, 1, int(info.shape[0]), int(info.shape[1])};
    } else if (info.ndim == 4) {
        d = Dims{int(info.shape[0]), int(info.shape[1]), int(info.shape[2]),
                 int(info.shape[3])};
    } else {
        throw ContractError("expected a 2-d (h,w) or 4-d (n,c,h,w) float array");
    }
    Tensor4 t(d);
    const float* src = static_cast<const float*>(info.ptr);
    std::copy(src, src + t.data.size(), t.data.begin());
    return t;
}

py::array_t<float> from_tensor(const Tensor4& t) {
    py::array_t<float> a({t.shape.n, t.shape.c, t.shape.h, t.shape.w});
    std::copy(t.data.begin(), t.data.end(), a.mutable_data());
    return a;
}

Image2D to_image(const FloatArray& a) {
    const auto info = a.request();
    if (info.ndim != 2) throw ContractError("expected a 2-d (h,w) float array");
    Image2D img(int(info.shape[0]), int(info.shape[1]));
    const float* src = static_cast<const float*>(info.ptr);
    std::copy(src, src + img.pix.size(), img.pix.begin());
    return img;
}

py::array_t<float> from_image(const Image2D& img) {
    py::array_t<float> a({img.h, img.w});
    std::copy(img.pix.begin(), img.pix.end(), a.mutable_data());
    return a;
}

// Volumes cross the boundary as (nz,ny,nx) arrays; at(x,y,z) maps to v[z,y,x].
Volume to_volume(const FloatArray& a, float sx, float sy, float sz, bool label) {
    const auto info = a.request();
    if (info.ndim != 3) throw ContractError("expected a 3-d (nz,ny,nx) float array");
    Volume v;
    v.nz = int(info.shape[0]);
    v.ny = int(info.shape[1]);
    v.nx = int(info.shape[2]);
    v.sx = sx;
    v.sy = sy;
    v.sz = sz;
    v.kind = label ? VolumeKind::label : VolumeKind::intensity;
    const float* src = static_cast<const float*>(info.ptr);
    v.voxels.assign(src, src + v.count());
    return v;
}

py::array_t<float> from_volume(const Volume& v) {
    py::array_t<float> a({v.nz, v.ny, v.nx});
    std::copy(v.voxels.begin(), v.voxels.end(), a.mutable_data());
    return a;
}

std::vector<uint8_t> to_bytes(const py::bytes& b) {
    const std::string s = b;
    return std::vector<uint8_t>(s.begin(), s.end());
}

}  // namespace

PYBIND11_MODULE(_maskforge, m) {
    m.doc() = "mask-conditioned image synthesis core";

    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def("set_parallelism", &set_parallelism, py::arg("degree"));

    // ---- data ------------------------------------------------------------------

    m.def(
        "phantom_pair",
        [](int size, uint64_t seed, int64_t index, int min_shapes, int max_shapes) {
            PhantomSpec spec;
            spec.size = size;
            spec.seed = seed;
            spec.min_shapes = min_shapes;
            spec.max_shapes = max_shapes;
            const TrainingPair p = phantom_pair(spec, index);
            return py::make_tuple(from_image(tensor_to_image(p.condition, 0, 0)),
                                  from_image(tensor_to_image(p.target, 0, 0)));
        },
        py::arg("size") = 64, py::arg("seed") = 0, py::arg("index") = 0,
        py::arg("min_shapes") = 1, py::arg("max_shapes") = 4,
        "Deterministic synthetic (condition, target) pair as (h,w) arrays.");

    m.def(
        "resize",
        [](const FloatArray& img, int out_h, int out_w, const std::string& mode) {
            ResizeMode rm;
            if (mode == "bilinear")
                rm = ResizeMode::bilinear;
            else if (mode == "nearest")
                rm = ResizeMode::nearest;
            else
                throw ContractError("resize mode must be 'bilinear' or 'nearest'");
            return from_image(resize(to_image(img), out_h, out_w, rm));
        },
        py::arg("image"), py::arg("out_h"), py::arg("out_w"), py::arg("mode") = "bilinear");

    // ---- metrics and losses ----------------------------------------------------

    m.def("ssim",
          [](const FloatArray& a, const FloatArray& b) { return ssim(to_image(a), to_image(b)); });
    m.def("l1", [](const FloatArray& x, const FloatArray& gx) {
        return double(l1_recon(to_tensor(x), to_tensor(gx)));
    });
    m.def("mse", [](const FloatArray& x, const FloatArray& gx) {
        return double(mse(to_tensor(x), to_tensor(gx)));
    });
    m.def("lsgan_d_loss", [](const FloatArray& real, const FloatArray& fake) {
        return double(lsgan_d_loss(to_tensor(real), to_tensor(fake)));
    });
    m.def("bce_gan_losses", [](const FloatArray& real, const FloatArray& fake) {
        const auto [d, g] = bce_gan_losses(to_tensor(real), to_tensor(fake));
        return py::make_tuple(double(d), double(g));
    });
    m.def(
        "generator_objective",
        [](const FloatArray& d_fake, const FloatArray& x, const FloatArray& gx, double lam) {
            ObjectiveWeights w;
            w.lambda = lam;
            return double(generator_objective(to_tensor(d_fake), to_tensor(x), to_tensor(gx), w));
        },
        py::arg("d_fake"), py::arg("x"), py::arg("gx"), py::arg("lam") = 0.012);

    // ---- models ----------------------------------------------------------------

    py::class_<Generator>(m, "Generator")
        .def_static(
            "build",
            [](int depth, int base_channels, int channel_cap, int image_size, uint64_t seed) {
                GeneratorConfig cfg;
                cfg.depth = depth;
                cfg.base_channels = base_channels;
                cfg.channel_cap = channel_cap;
                cfg.image_size = image_size;
                cfg.validate();
                Rng rng(seed);
                return Generator::build(cfg, rng);
            },
            py::arg("depth") = 7, py::arg("base_channels") = 64, py::arg("channel_cap") = 512,
            py::arg("image_size") = 256, py::arg("seed") = 0)
        .def(
            "forward",
            [](Generator& g, const FloatArray& condition, bool train) {
                return from_tensor(g.forward(to_tensor(condition), train));
            },
            py::arg("condition"), py::arg("train") = false)
        .def("parameter_count", &Generator::parameter_count);

    py::class_<Discriminator>(m, "Discriminator")
        .def_static(
            "build",
            [](int patch_size, int layers, int base_channels, uint64_t seed) {
                DiscriminatorConfig cfg;
                cfg.patch_size = patch_size;
                cfg.layers = layers;
                cfg.base_channels = base_channels;
                cfg.validate();
                Rng rng(seed);
                return Discriminator::build(cfg, rng);
            },
            py::arg("patch_size") = 32, py::arg("layers") = 5, py::arg("base_channels") = 64,
            py::arg("seed") = 0)
        .def(
            "forward",
            [](Discriminator& d, const FloatArray& image, const FloatArray& condition,
               bool train) {
                return from_tensor(d.forward(to_tensor(image), to_tensor(condition), train));
            },
            py::arg("image"), py::arg("condition"), py::arg("train") = false)
        .def("parameter_count", &Discriminator::parameter_count);

    // ---- volumes ---------------------------------------------------------------

    m.def("parse_nifti", [](const py::bytes& raw) {
        const Volume v = parse_nifti(to_bytes(raw));
        return py::make_tuple(from_volume(v), py::make_tuple(v.sx, v.sy, v.sz));
    });
    m.def(
        "write_nifti",
        [](const FloatArray& voxels, float sx, float sy, float sz, bool label) {
            const auto bytes = write_nifti(to_volume(voxels, sx, sy, sz, label));
            return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        },
        py::arg("voxels"), py::arg("sx") = 1.0f, py::arg("sy") = 1.0f, py::arg("sz") = 1.0f,
        py::arg("label") = false);

    // ---- training --------------------------------------------------------------

    m.def(
        "run_training",
        [](const std::string& config_text, const std::string& out_dir,
           const std::string& resume) {
            const RunConfig cfg = resolve_config(config_text, {});
            const auto data = build_dataset(cfg);
            run_training(cfg, data, out_dir, resume);
        },
        py::arg("config_text"), py::arg("out_dir"), py::arg("resume") = "",
        "Full training loop driven by config text (same key=value format as the CLI).");

    m.def(
        "echo_config",
        [](const std::string& config_text) {
            return echo_config(resolve_config(config_text, {}));
        },
        py::arg("config_text") = "");

    m.def(
        "gradient_suite",
        [](uint64_t seed, int instances) {
            const GradSuiteReport rep = run_gradient_suite(seed, instances);
            py::dict per_case;
            for (const auto& c : rep.cases) per_case[py::str(c.name)] = c.max_rel_err;
            return py::make_tuple(rep.worst(), per_case);
        },
        py::arg("seed") = 1, py::arg("instances") = 5,
        "Finite-difference check over every layer and loss; returns (worst_rel_err, per_case).");
}
