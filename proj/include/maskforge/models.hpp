#pragma once

#include <string>
#include <utility>
#include <vector>

#include "maskforge/layers.hpp"

namespace maskforge {

template <typename T>
using NamedVarsT = std::vector<std::pair<std::string, VarT<T>>>;

// ---- patch tiling --------------------------------------------------------------

// Splits (n,c,h,w) into non-overlapping patch×patch tiles, row-major from the
// top-left: output sample (ni*(h/p) + ty)*(w/p) + tx is tile (ty,tx) of input ni.
template <typename T>
Tensor4T<T> extract_patches(const Tensor4T<T>& t, int patch) {
    contract(patch >= 1, "extract_patches: patch must be >= 1");
    contract(t.shape.h % patch == 0 && t.shape.w % patch == 0,
             "extract_patches: " + to_string(t.shape) + " not divisible by patch " +
                 std::to_string(patch));
    const int th = t.shape.h / patch, tw = t.shape.w / patch;
    Tensor4T<T> out(Dims{t.shape.n * th * tw, t.shape.c, patch, patch});
    for (int ni = 0; ni < t.shape.n; ++ni)
        for (int ty = 0; ty < th; ++ty)
            for (int tx = 0; tx < tw; ++tx) {
                const int oi = (ni * th + ty) * tw + tx;
                for (int ci = 0; ci < t.shape.c; ++ci)
                    for (int py = 0; py < patch; ++py)
                        std::copy_n(
                            t.data.data() + t.index(ni, ci, ty * patch + py, tx * patch),
                            patch, out.data.data() + out.index(oi, ci, py, 0));
            }
    return out;
}

// Inverse of extract_patches; bitwise round trip.
template <typename T>
Tensor4T<T> merge_patches(const Tensor4T<T>& patches, int n, int h, int w) {
    const int patch = patches.shape.h;
    contract(patches.shape.w == patch, "merge_patches: tiles must be square");
    contract(h % patch == 0 && w % patch == 0 && patches.shape.n == n * (h / patch) * (w / patch),
             "merge_patches: tile count " + std::to_string(patches.shape.n) +
                 " does not cover (n,h,w)=(" + std::to_string(n) + "," + std::to_string(h) + "," +
                 std::to_string(w) + ")");
    const int th = h / patch, tw = w / patch;
    Tensor4T<T> out(Dims{n, patches.shape.c, h, w});
    for (int ni = 0; ni < n; ++ni)
        for (int ty = 0; ty < th; ++ty)
            for (int tx = 0; tx < tw; ++tx) {
                const int pi = (ni * th + ty) * tw + tx;
                for (int ci = 0; ci < patches.shape.c; ++ci)
                    for (int py = 0; py < patch; ++py)
                        std::copy_n(patches.data.data() + patches.index(pi, ci, py, 0), patch,
                                    out.data.data() + out.index(ni, ci, ty * patch + py, tx * patch));
            }
    return out;
}

template <typename T>
VarT<T> extract_patches(VarT<T> x, int patch) {
    TapeT<T>& t = *x.tape;
    const Dims in_dims = t.value(x).shape;
    Tensor4T<T> out = extract_patches(t.value(x), patch);
    const int ix = x.idx;
    return t.push(std::move(out), {ix},
                  [ix, in_dims, patch, self = static_cast<int>(t.size())](TapeT<T>& tp) {
                      const Tensor4T<T> dx =
                          merge_patches(tp.grad_at(self), in_dims.n, in_dims.h, in_dims.w);
                      Tensor4T<T>& gx = tp.grad_at(ix);
                      for (size_t i = 0; i < dx.data.size(); ++i) gx.data[i] += dx.data[i];
                  });
}

// ---- shared conv block ----------------------------------------------------------

template <typename T>
struct ConvBlockT {
    Tensor4T<T> w;
    Tensor4T<T> b;
    BatchNormParamsT<T> bn;
};

namespace detail {

template <typename T>
ConvBlockT<T> make_block(int out_c, int in_c, int k, int norm_channels, Rng& rng) {
    ConvBlockT<T> blk;
    blk.w = Tensor4T<T>::normal(Dims{out_c, in_c, k, k}, T(0), T(0.02), rng);
    blk.b = Tensor4T<T>::zeros(Dims{1, norm_channels, 1, 1});
    blk.bn = BatchNormParamsT<T>::make(norm_channels);
    return blk;
}

template <typename T>
void block_params(ConvBlockT<T>& blk, const std::string& name,
                  std::vector<std::pair<std::string, Tensor4T<T>*>>& out) {
    out.emplace_back(name + ".w", &blk.w);
    out.emplace_back(name + ".b", &blk.b);
    out.emplace_back(name + ".gamma", &blk.bn.gamma);
    out.emplace_back(name + ".beta", &blk.bn.beta);
}

template <typename T>
void block_buffers(ConvBlockT<T>& blk, const std::string& name,
                   std::vector<std::pair<std::string, Tensor4T<T>*>>& out) {
    out.emplace_back(name + ".running_mean", &blk.bn.running_mean);
    out.emplace_back(name + ".running_var", &blk.bn.running_var);
}

}  // namespace detail

// ---- generator -------------------------------------------------------------------

struct GeneratorConfig {
    int depth = 7;
    int base_channels = 64;
    int channel_cap = 512;
    int in_channels = 1;
    int out_channels = 1;
    int image_size = 256;

    int channels_at(int level) const {
        const int64_t v = int64_t(base_channels) << level;
        return static_cast<int>(std::min<int64_t>(v, channel_cap));
    }

    void validate() const {
        contract(depth >= 1 && depth < 31, "generator depth out of range");
        contract(base_channels >= 1 && channel_cap >= base_channels,
                 "generator channel schedule invalid");
        contract(in_channels >= 1 && out_channels >= 1, "generator io channels invalid");
        const int stride_total = 1 << depth;
        contract(image_size >= 1 && image_size % stride_total == 0 &&
                     image_size / stride_total >= 1,
                 "image_size " + std::to_string(image_size) + " not divisible by 2^depth = " +
                     std::to_string(stride_total));
    }
};

// U-Net: `depth` stride-2 conv blocks down, `depth` stride-2 transposed-conv
// blocks up with skip concatenation, then a stride-1 conv + sigmoid. Every
// block is conv -> batchnorm -> leaky_relu(0.2); only the output conv skips
// the norm.
template <typename T>
struct GeneratorT {
    GeneratorConfig cfg;
    std::vector<ConvBlockT<T>> enc;
    std::vector<ConvBlockT<T>> dec;
    Tensor4T<T> final_w;
    Tensor4T<T> final_b;

    static constexpr T kLeakySlope = T(0.2);

    // Decoder level i consumes the previous decoder activation concatenated
    // with the skip from encoder level depth-1-i (level 0 reads the
    // bottleneck directly).
    int decoder_in_channels(int i) const {
        if (i == 0) return cfg.channels_at(cfg.depth - 1);
        return decoder_out_channels(i - 1) + cfg.channels_at(cfg.depth - 1 - i);
    }
    int decoder_out_channels(int i) const {
        if (i == cfg.depth - 1) return cfg.base_channels;
        return cfg.channels_at(cfg.depth - 2 - i);
    }

    static GeneratorT build(const GeneratorConfig& cfg, Rng& rng) {
        cfg.validate();
        GeneratorT g;
        g.cfg = cfg;
        for (int i = 0; i < cfg.depth; ++i) {
            const int in_c = i == 0 ? cfg.in_channels : cfg.channels_at(i - 1);
            g.enc.push_back(detail::make_block<T>(cfg.channels_at(i), in_c, 4, cfg.channels_at(i), rng));
        }
        for (int i = 0; i < cfg.depth; ++i) {
            const int in_c = g.decoder_in_channels(i);
            const int out_c = g.decoder_out_channels(i);
            // Transposed conv keeps conv weight orientation: (in_c, out_c, k, k).
            ConvBlockT<T> blk;
            blk.w = Tensor4T<T>::normal(Dims{in_c, out_c, 4, 4}, T(0), T(0.02), rng);
            blk.b = Tensor4T<T>::zeros(Dims{1, out_c, 1, 1});
            blk.bn = BatchNormParamsT<T>::make(out_c);
            g.dec.push_back(std::move(blk));
        }
        g.final_w = Tensor4T<T>::normal(Dims{cfg.out_channels, cfg.base_channels, 3, 3}, T(0),
                                        T(0.02), rng);
        g.final_b = Tensor4T<T>::zeros(Dims{1, cfg.out_channels, 1, 1});
        return g;
    }

    void check_input(const Dims& d) const {
        contract(d.c == cfg.in_channels && d.h == cfg.image_size && d.w == cfg.image_size,
                 "generator input " + to_string(d) + " must be (n," +
                     std::to_string(cfg.in_channels) + "," + std::to_string(cfg.image_size) + "," +
                     std::to_string(cfg.image_size) + ")");
    }

    Tensor4T<T> forward(const Tensor4T<T>& y, bool train) {
        check_input(y.shape);
        std::vector<Tensor4T<T>> skips;
        skips.reserve(static_cast<size_t>(cfg.depth));
        Tensor4T<T> cur = y;
        for (int i = 0; i < cfg.depth; ++i) {
            auto& blk = enc[static_cast<size_t>(i)];
            Tensor4T<T> z = conv2d(cur, blk.w, blk.b, 2, 1);
            z = train ? batchnorm_train(z, blk.bn) : batchnorm_infer(z, blk.bn);
            cur = leaky_relu(z, kLeakySlope);
            skips.push_back(cur);
        }
        Tensor4T<T> up = skips.back();
        for (int i = 0; i < cfg.depth; ++i) {
            auto& blk = dec[static_cast<size_t>(i)];
            Tensor4T<T> in =
                i == 0 ? up : concat_channels(up, skips[static_cast<size_t>(cfg.depth - 1 - i)]);
            Tensor4T<T> z = conv_transpose2d(in, blk.w, blk.b, 2, 1);
            z = train ? batchnorm_train(z, blk.bn) : batchnorm_infer(z, blk.bn);
            up = leaky_relu(z, kLeakySlope);
        }
        return sigmoid(conv2d(up, final_w, final_b, 1, 1));
    }

    // params_out doubles as a reuse table: a second forward on the same tape
    // with the same list binds to the leaves the first call created, so
    // gradients from both passes accumulate on one node per parameter.
    VarT<T> forward(TapeT<T>& tape, VarT<T> y, bool train, NamedVarsT<T>* params_out) {
        check_input(tape.value(y).shape);
        auto track = [&](const std::string& name, Tensor4T<T>& t) {
            if (params_out)
                for (const auto& [n, v] : *params_out)
                    if (n == name) return v;
            VarT<T> v = tape.leaf(t);
            if (params_out) params_out->emplace_back(name, v);
            return v;
        };
        std::vector<VarT<T>> skips;
        skips.reserve(static_cast<size_t>(cfg.depth));
        VarT<T> cur = y;
        for (int i = 0; i < cfg.depth; ++i) {
            auto& blk = enc[static_cast<size_t>(i)];
            const std::string name = "enc" + std::to_string(i);
            VarT<T> z = conv2d(cur, track(name + ".w", blk.w), track(name + ".b", blk.b), 2, 1);
            VarT<T> gm = track(name + ".gamma", blk.bn.gamma);
            VarT<T> bt = track(name + ".beta", blk.bn.beta);
            z = train ? batchnorm_train(z, gm, bt, blk.bn) : batchnorm_infer(z, gm, bt, blk.bn);
            cur = leaky_relu(z, kLeakySlope);
            skips.push_back(cur);
        }
        VarT<T> up = skips.back();
        for (int i = 0; i < cfg.depth; ++i) {
            auto& blk = dec[static_cast<size_t>(i)];
            const std::string name = "dec" + std::to_string(i);
            VarT<T> in =
                i == 0 ? up : concat_channels(up, skips[static_cast<size_t>(cfg.depth - 1 - i)]);
            VarT<T> z = conv_transpose2d(in, track(name + ".w", blk.w), track(name + ".b", blk.b),
                                         2, 1);
            VarT<T> gm = track(name + ".gamma", blk.bn.gamma);
            VarT<T> bt = track(name + ".beta", blk.bn.beta);
            z = train ? batchnorm_train(z, gm, bt, blk.bn) : batchnorm_infer(z, gm, bt, blk.bn);
            up = leaky_relu(z, kLeakySlope);
        }
        VarT<T> out = conv2d(up, track("final.w", final_w), track("final.b", final_b), 1, 1);
        return sigmoid(out);
    }

    std::vector<std::pair<std::string, Tensor4T<T>*>> parameters() {
        std::vector<std::pair<std::string, Tensor4T<T>*>> out;
        for (int i = 0; i < cfg.depth; ++i)
            detail::block_params(enc[static_cast<size_t>(i)], "enc" + std::to_string(i), out);
        for (int i = 0; i < cfg.depth; ++i)
            detail::block_params(dec[static_cast<size_t>(i)], "dec" + std::to_string(i), out);
        out.emplace_back("final.w", &final_w);
        out.emplace_back("final.b", &final_b);
        return out;
    }

    // Parameters plus batchnorm running statistics, for serialization.
    std::vector<std::pair<std::string, Tensor4T<T>*>> named_state() {
        auto out = parameters();
        for (int i = 0; i < cfg.depth; ++i)
            detail::block_buffers(enc[static_cast<size_t>(i)], "enc" + std::to_string(i), out);
        for (int i = 0; i < cfg.depth; ++i)
            detail::block_buffers(dec[static_cast<size_t>(i)], "dec" + std::to_string(i), out);
        return out;
    }

    int64_t parameter_count() {
        int64_t n = 0;
        for (auto& [name, t] : parameters()) n += t->numel();
        return n;
    }
};

using Generator = GeneratorT<float>;

// ---- discriminator -----------------------------------------------------------------

struct DiscriminatorConfig {
    int patch_size = 32;
    int layers = 5;
    int in_channels = 2;
    int base_channels = 64;

    int channels_at(int layer) const { return base_channels << layer; }

    void validate() const {
        contract(layers >= 2, "discriminator needs at least 2 layers");
        contract(base_channels >= 1 && in_channels >= 1, "discriminator channels invalid");
        // layers-1 stride-2 halvings must land on 2x2 so the final k2 conv
        // yields one score: patch / 2^(layers-1) == 2.
        contract(patch_size == (1 << layers),
                 "patch_size " + std::to_string(patch_size) +
                     " inconsistent with layer count " + std::to_string(layers) +
                     " (expected " + std::to_string(1 << layers) + ")");
    }
};

// Conditional patch classifier: scores each non-overlapping patch of
// concat(image, condition) independently. layers-1 stride-2 conv blocks bring
// a patch down to 2x2; the last layer is a linear 2x2 conv to one score.
template <typename T>
struct DiscriminatorT {
    DiscriminatorConfig cfg;
    std::vector<ConvBlockT<T>> blocks;
    Tensor4T<T> final_w;
    Tensor4T<T> final_b;

    static constexpr T kLeakySlope = T(0.2);

    static DiscriminatorT build(const DiscriminatorConfig& cfg, Rng& rng) {
        cfg.validate();
        DiscriminatorT d;
        d.cfg = cfg;
        for (int i = 0; i < cfg.layers - 1; ++i) {
            const int in_c = i == 0 ? cfg.in_channels : cfg.channels_at(i - 1);
            d.blocks.push_back(
                detail::make_block<T>(cfg.channels_at(i), in_c, 4, cfg.channels_at(i), rng));
        }
        d.final_w = Tensor4T<T>::normal(Dims{1, cfg.channels_at(cfg.layers - 2), 2, 2}, T(0),
                                        T(0.02), rng);
        d.final_b = Tensor4T<T>::zeros(Dims{1, 1, 1, 1});
        return d;
    }

    void check_inputs(const Dims& image, const Dims& condition) const {
        contract(image.n == condition.n && image.h == condition.h && image.w == condition.w,
                 "discriminator inputs " + to_string(image) + " vs " + to_string(condition) +
                     " disagree");
        contract(image.c + condition.c == cfg.in_channels,
                 "discriminator expects " + std::to_string(cfg.in_channels) +
                     " combined channels, got " + std::to_string(image.c + condition.c));
        contract(image.h % cfg.patch_size == 0 && image.w % cfg.patch_size == 0,
                 "discriminator input " + to_string(image) + " not divisible by patch size " +
                     std::to_string(cfg.patch_size));
    }

    // Scores shape: (n * patches, 1, 1, 1), linear range.
    Tensor4T<T> forward(const Tensor4T<T>& image, const Tensor4T<T>& condition, bool train) {
        check_inputs(image.shape, condition.shape);
        Tensor4T<T> cur = extract_patches(concat_channels(image, condition), cfg.patch_size);
        for (auto& blk : blocks) {
            Tensor4T<T> z = conv2d(cur, blk.w, blk.b, 2, 1);
            z = train ? batchnorm_train(z, blk.bn) : batchnorm_infer(z, blk.bn);
            cur = leaky_relu(z, kLeakySlope);
        }
        return conv2d(cur, final_w, final_b, 1, 0);
    }

    // Same reuse convention as the generator: pass one params_out across the
    // real and fake passes so each parameter is a single tape leaf.
    VarT<T> forward(TapeT<T>& tape, VarT<T> image, VarT<T> condition, bool train,
                    NamedVarsT<T>* params_out) {
        check_inputs(tape.value(image).shape, tape.value(condition).shape);
        auto track = [&](const std::string& name, Tensor4T<T>& t) {
            if (params_out)
                for (const auto& [n, v] : *params_out)
                    if (n == name) return v;
            VarT<T> v = tape.leaf(t);
            if (params_out) params_out->emplace_back(name, v);
            return v;
        };
        VarT<T> cur = extract_patches(concat_channels(image, condition), cfg.patch_size);
        for (size_t i = 0; i < blocks.size(); ++i) {
            auto& blk = blocks[i];
            const std::string name = "layer" + std::to_string(i);
            VarT<T> z = conv2d(cur, track(name + ".w", blk.w), track(name + ".b", blk.b), 2, 1);
            VarT<T> gm = track(name + ".gamma", blk.bn.gamma);
            VarT<T> bt = track(name + ".beta", blk.bn.beta);
            z = train ? batchnorm_train(z, gm, bt, blk.bn) : batchnorm_infer(z, gm, bt, blk.bn);
            cur = leaky_relu(z, kLeakySlope);
        }
        return conv2d(cur, track("final.w", final_w), track("final.b", final_b), 1, 0);
    }

    std::vector<std::pair<std::string, Tensor4T<T>*>> parameters() {
        std::vector<std::pair<std::string, Tensor4T<T>*>> out;
        for (size_t i = 0; i < blocks.size(); ++i)
            detail::block_params(blocks[i], "layer" + std::to_string(i), out);
        out.emplace_back("final.w", &final_w);
        out.emplace_back("final.b", &final_b);
        return out;
    }

    std::vector<std::pair<std::string, Tensor4T<T>*>> named_state() {
        auto out = parameters();
        for (size_t i = 0; i < blocks.size(); ++i)
            detail::block_buffers(blocks[i], "layer" + std::to_string(i), out);
        return out;
    }

    int64_t parameter_count() {
        int64_t n = 0;
        for (auto& [name, t] : parameters()) n += t->numel();
        return n;
    }
};

using Discriminator = DiscriminatorT<float>;

}  // namespace maskforge
