#include "maskforge/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "maskforge/errors.hpp"

namespace maskforge {

Volume normalize_volume(const Volume& v) {
    contract(v.kind == VolumeKind::intensity, "normalize_volume: volume is not intensity-kind");
    contract(!v.voxels.empty(), "normalize_volume: empty volume");
    float lo = v.voxels[0], hi = v.voxels[0];
    for (float x : v.voxels) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    Volume out = v;
    if (hi == lo) {
        std::fill(out.voxels.begin(), out.voxels.end(), 0.0f);
        return out;
    }
    const float scale = 1.0f / (hi - lo);
    for (auto& x : out.voxels) x = (x - lo) * scale;
    return out;
}

std::vector<Image2D> extract_axial_slices(const Volume& v) {
    contract(v.nz >= 1, "extract_axial_slices: volume has no slices");
    std::vector<Image2D> slices;
    slices.reserve(static_cast<size_t>(v.nz));
    for (int z = 0; z < v.nz; ++z) {
        Image2D s(v.nx, v.ny);
        for (int i = 0; i < v.nx; ++i)
            for (int j = 0; j < v.ny; ++j) s.at(i, j) = v.at(i, j, z);
        slices.push_back(std::move(s));
    }
    return slices;
}

Image2D resize(const Image2D& img, int out_h, int out_w, ResizeMode mode) {
    contract(out_h >= 1 && out_w >= 1, "resize: target size must be positive");
    contract(img.h >= 1 && img.w >= 1, "resize: source image is empty");
    Image2D out(out_h, out_w);
    const double sy = double(img.h) / out_h;
    const double sx = double(img.w) / out_w;
    if (mode == ResizeMode::nearest) {
        for (int y = 0; y < out_h; ++y) {
            const int src_y = std::min(img.h - 1, int((y + 0.5) * sy));
            for (int x = 0; x < out_w; ++x) {
                const int src_x = std::min(img.w - 1, int((x + 0.5) * sx));
                out.at(y, x) = img.at(src_y, src_x);
            }
        }
        return out;
    }
    for (int y = 0; y < out_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = int(std::floor(fy));
        const double wy = fy - y0;
        const int ya = std::clamp(y0, 0, img.h - 1);
        const int yb = std::clamp(y0 + 1, 0, img.h - 1);
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = int(std::floor(fx));
            const double wx = fx - x0;
            const int xa = std::clamp(x0, 0, img.w - 1);
            const int xb = std::clamp(x0 + 1, 0, img.w - 1);
            const double top = (1.0 - wx) * img.at(ya, xa) + wx * img.at(ya, xb);
            const double bot = (1.0 - wx) * img.at(yb, xa) + wx * img.at(yb, xb);
            out.at(y, x) = static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    }
    return out;
}

const std::vector<std::string>& LabelMap::structure_names() {
    static const std::vector<std::string> names = {"Myo", "LA", "LV", "RA", "RV", "Ao", "PA"};
    return names;
}

void LabelMap::validate() const {
    const auto& names = structure_names();
    contract(labels.size() == names.size(),
             "label map must define exactly " + std::to_string(names.size()) +
                 " structures, got " + std::to_string(labels.size()));
    for (size_t i = 0; i < labels.size(); ++i) {
        contract(labels[i] > 0, "label for " + names[i] + " must be positive, got " +
                                    std::to_string(labels[i]));
        for (size_t j = i + 1; j < labels.size(); ++j)
            contract(labels[i] != labels[j], "labels for " + names[i] + " and " + names[j] +
                                                 " collide at " + std::to_string(labels[i]));
    }
}

int LabelMap::label_of(const std::string& name) const {
    const auto& names = structure_names();
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) {
            contract(i < labels.size(), "label map missing entry for " + name);
            return labels[i];
        }
    throw DataError("unknown structure name: " + name);
}

Image2D make_condition(const Image2D& label_slice, const std::vector<std::string>& selection,
                       const LabelMap& lm) {
    contract(!selection.empty(), "make_condition: empty selection");
    lm.validate();
    std::vector<std::string> selected;
    if (selection.size() == 1 && selection[0] == "WH") {
        selected = LabelMap::structure_names();
    } else {
        // Keep canonical order regardless of how the selection was written.
        for (const auto& name : LabelMap::structure_names())
            for (const auto& s : selection)
                if (s == name) {
                    selected.push_back(name);
                    break;
                }
        contract(selected.size() == selection.size(),
                 "make_condition: selection contains unknown or duplicate structure names");
    }
    const int k = static_cast<int>(selected.size());
    Image2D out(label_slice.h, label_slice.w);
    for (int r = 1; r <= k; ++r) {
        const int label = lm.label_of(selected[static_cast<size_t>(r - 1)]);
        const float level = float(r) / float(k);
        for (size_t i = 0; i < out.pix.size(); ++i)
            if (label_slice.pix[i] == float(label)) out.pix[i] = level;
    }
    return out;
}

Tensor4 image_to_tensor(const Image2D& img) {
    Tensor4 t(Dims{1, 1, img.h, img.w});
    std::copy(img.pix.begin(), img.pix.end(), t.data.begin());
    return t;
}

Image2D tensor_to_image(const Tensor4& t, int sample, int channel) {
    contract(sample >= 0 && sample < t.shape.n && channel >= 0 && channel < t.shape.c,
             "tensor_to_image: sample/channel out of range for " + to_string(t.shape));
    Image2D img(t.shape.h, t.shape.w);
    std::copy_n(t.data.data() + t.index(sample, channel, 0, 0), img.pix.size(), img.pix.begin());
    return img;
}

}  // namespace maskforge
