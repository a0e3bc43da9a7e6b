#pragma once

#include <string>
#include <vector>

#include "maskforge/nifti.hpp"
#include "maskforge/tensor.hpp"

namespace maskforge {

struct Image2D {
    int h = 0, w = 0;
    std::vector<float> pix;

    Image2D() = default;
    Image2D(int h_, int w_) : h(h_), w(w_), pix(static_cast<size_t>(h_) * w_, 0.0f) {}

    float at(int y, int x) const { return pix[static_cast<size_t>(y) * w + x]; }
    float& at(int y, int x) { return pix[static_cast<size_t>(y) * w + x]; }
};

enum class ResizeMode { bilinear, nearest };

// Per-volume min-max normalization to [0,1]; a constant volume maps to zeros.
Volume normalize_volume(const Volume& v);

// Slice k is the (x,y) plane at z = k; slice pixel (i,j) = voxel (i,j,k).
std::vector<Image2D> extract_axial_slices(const Volume& v);

// Bilinear uses half-pixel-center sampling ((i+0.5)/S); nearest picks the
// covering source pixel and never invents new values.
Image2D resize(const Image2D& img, int out_h, int out_w, ResizeMode mode);

// The seven heart substructures in canonical order. Label values come from
// configuration; they are never hardcoded.
struct LabelMap {
    static const std::vector<std::string>& structure_names();

    std::vector<int> labels;  // parallel to structure_names()

    void validate() const;
    int label_of(const std::string& name) const;
};

// Condition encoding: background 0; the r-th selected structure (1-based, in
// canonical order) of K selected gets gray level r/K. selection may be
// structure names or the single entry "WH" (all seven).
Image2D make_condition(const Image2D& label_slice, const std::vector<std::string>& selection,
                       const LabelMap& lm);

// (1,1,h,w) tensor from an image and back; plumbing between the 2-D world and
// the network input.
Tensor4 image_to_tensor(const Image2D& img);
Image2D tensor_to_image(const Tensor4& t, int sample, int channel);

}  // namespace maskforge
