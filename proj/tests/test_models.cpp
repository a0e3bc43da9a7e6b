#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "maskforge/models.hpp"
#include "maskforge/rng.hpp"

using namespace maskforge;

namespace {

Tensor4 uniform01(Rng& rng, Dims d) {
    Tensor4 t(d);
    for (auto& v : t.data) v = float(rng.next_unit());
    return t;
}

GeneratorConfig desk_gen_cfg() {
    GeneratorConfig cfg;
    cfg.depth = 5;
    cfg.base_channels = 16;
    cfg.channel_cap = 128;
    cfg.image_size = 64;
    return cfg;
}

DiscriminatorConfig desk_disc_cfg() {
    DiscriminatorConfig cfg;
    cfg.patch_size = 32;
    cfg.layers = 5;
    cfg.base_channels = 16;
    return cfg;
}

// Independent parameter-count oracle from the architecture arithmetic alone.
int64_t generator_param_oracle(const GeneratorConfig& cfg) {
    int64_t n = 0;
    for (int i = 0; i < cfg.depth; ++i) {
        const int in_c = i == 0 ? cfg.in_channels : cfg.channels_at(i - 1);
        const int out_c = cfg.channels_at(i);
        n += int64_t(out_c) * in_c * 16 + 3 * out_c;  // w + b + gamma + beta
    }
    int prev_out = 0;
    for (int i = 0; i < cfg.depth; ++i) {
        const int in_c = i == 0 ? cfg.channels_at(cfg.depth - 1)
                                : prev_out + cfg.channels_at(cfg.depth - 1 - i);
        const int out_c =
            i == cfg.depth - 1 ? cfg.base_channels : cfg.channels_at(cfg.depth - 2 - i);
        n += int64_t(in_c) * out_c * 16 + 3 * out_c;
        prev_out = out_c;
    }
    n += int64_t(cfg.out_channels) * cfg.base_channels * 9 + cfg.out_channels;
    return n;
}

int64_t discriminator_param_oracle(const DiscriminatorConfig& cfg) {
    int64_t n = 0;
    for (int i = 0; i < cfg.layers - 1; ++i) {
        const int in_c = i == 0 ? cfg.in_channels : cfg.channels_at(i - 1);
        const int out_c = cfg.channels_at(i);
        n += int64_t(out_c) * in_c * 16 + 3 * out_c;
    }
    n += int64_t(cfg.channels_at(cfg.layers - 2)) * 4 + 1;
    return n;
}

}  // namespace

TEST_CASE("patch tiling is row-major per sample and round-trips bitwise") {
    Tensor4 t(Dims{1, 1, 4, 4});
    for (int i = 0; i < 16; ++i) t.data[size_t(i)] = float(i);
    const Tensor4 p = extract_patches(t, 2);
    REQUIRE(p.shape == Dims{4, 1, 2, 2});
    // tile 0 = rows 0-1, cols 0-1; tile 1 = rows 0-1, cols 2-3; then the next row of tiles
    CHECK(p.at(0, 0, 0, 0) == 0.0f);
    CHECK(p.at(0, 0, 1, 1) == 5.0f);
    CHECK(p.at(1, 0, 0, 0) == 2.0f);
    CHECK(p.at(2, 0, 0, 0) == 8.0f);
    CHECK(p.at(3, 0, 1, 1) == 15.0f);

    Rng rng(88);
    const Tensor4 big = Tensor4::normal(Dims{3, 2, 8, 8}, 0.0f, 1.0f, rng);
    const Tensor4 tiles = extract_patches(big, 4);
    REQUIRE(tiles.shape == Dims{12, 2, 4, 4});
    // all tiles of sample 0 precede those of sample 1
    CHECK(tiles.at(0, 0, 0, 0) == big.at(0, 0, 0, 0));
    CHECK(tiles.at(4, 0, 0, 0) == big.at(1, 0, 0, 0));
    const Tensor4 back = merge_patches(tiles, 3, 8, 8);
    REQUIRE(back.shape == big.shape);
    for (size_t i = 0; i < big.data.size(); ++i) CHECK(back.data[i] == big.data[i]);

    CHECK_THROWS_AS(extract_patches(big, 3), ContractError);
    CHECK_THROWS_AS(merge_patches(tiles, 2, 8, 8), ContractError);
}

TEST_CASE("taped patch extraction routes gradients back to source pixels") {
    Rng rng(9);
    Tape tape;
    Var x = tape.leaf(Tensor4::normal(Dims{2, 1, 4, 4}, 0.0f, 1.0f, rng));
    Var tiles = extract_patches(x, 2);
    Var m = mean(tiles);
    tape.backward(m);
    const Tensor4& g = tape.grad(x);
    for (float v : g.data) CHECK(v == doctest::Approx(1.0f / 32.0f));
}

TEST_CASE("generator config schedule and validation") {
    GeneratorConfig cfg;  // defaults = full profile
    CHECK(cfg.depth == 7);
    const int want[] = {64, 128, 256, 512, 512, 512, 512};
    for (int i = 0; i < 7; ++i) CHECK(cfg.channels_at(i) == want[i]);

    GeneratorConfig bad = cfg;
    bad.image_size = 100;  // not divisible by 2^7
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad = cfg;
    bad.depth = 0;
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad = cfg;
    bad.channel_cap = 8;
    CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("full-profile generator has the documented block shapes and parameter count") {
    GeneratorConfig cfg;
    Rng rng(1);
    auto g = Generator::build(cfg, rng);
    REQUIRE(int(g.enc.size()) == 7);
    REQUIRE(int(g.dec.size()) == 7);
    CHECK(g.enc[0].w.shape == Dims{64, 1, 4, 4});
    CHECK(g.enc[1].w.shape == Dims{128, 64, 4, 4});
    CHECK(g.enc[6].w.shape == Dims{512, 512, 4, 4});
    // decoder weights are conv-oriented (in, out, kh, kw)
    CHECK(g.dec[0].w.shape == Dims{512, 512, 4, 4});
    CHECK(g.dec[1].w.shape == Dims{1024, 512, 4, 4});
    CHECK(g.dec[4].w.shape == Dims{512, 128, 4, 4});
    CHECK(g.dec[6].w.shape == Dims{128, 64, 4, 4});
    CHECK(g.final_w.shape == Dims{1, 64, 3, 3});
    CHECK(g.parameter_count() == generator_param_oracle(cfg));
}

TEST_CASE("desk generator forward: bottleneck, output shape and range") {
    const GeneratorConfig cfg = desk_gen_cfg();
    Rng rng(42);
    auto g = Generator::build(cfg, rng);
    CHECK(g.parameter_count() == generator_param_oracle(cfg));

    Rng drng(7);
    const Tensor4 y = uniform01(drng, Dims{2, 1, 64, 64});

    // walk the encoder manually to observe the bottleneck
    Tensor4 cur = y;
    for (int i = 0; i < cfg.depth; ++i) {
        auto& blk = g.enc[size_t(i)];
        cur = leaky_relu(batchnorm_infer(conv2d(cur, blk.w, blk.b, 2, 1), blk.bn), 0.2f);
    }
    CHECK(cur.shape == Dims{2, 128, 2, 2});

    const Tensor4 out = g.forward(y, /*train=*/false);
    REQUIRE(out.shape == y.shape);
    for (float v : out.data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
    // deterministic: same input twice gives the same output in infer mode
    const Tensor4 out2 = g.forward(y, false);
    for (size_t i = 0; i < out.data.size(); ++i) CHECK(out.data[i] == out2.data[i]);

    CHECK_THROWS_AS(g.forward(Tensor4::zeros(Dims{1, 2, 64, 64}), false), ContractError);
    CHECK_THROWS_AS(g.forward(Tensor4::zeros(Dims{1, 1, 32, 64}), false), ContractError);
}

TEST_CASE("taped generator forward matches the plain forward bitwise") {
    const GeneratorConfig cfg = desk_gen_cfg();
    Rng rng(5);
    auto g = Generator::build(cfg, rng);
    Rng drng(6);
    const Tensor4 y = uniform01(drng, Dims{1, 1, 64, 64});
    const Tensor4 plain = g.forward(y, false);
    Tape tape;
    NamedVarsT<float> params;
    Var out = g.forward(tape, tape.leaf(y), false, &params);
    const Tensor4& taped = tape.value(out);
    REQUIRE(plain.shape == taped.shape);
    for (size_t i = 0; i < plain.data.size(); ++i) CHECK(plain.data[i] == taped.data[i]);
    // every parameter tracked exactly once
    CHECK(params.size() == g.parameters().size());
    std::set<std::string> names;
    for (auto& [n, v] : params) names.insert(n);
    CHECK(names.size() == params.size());
}

TEST_CASE("generator init statistics and build determinism") {
    const GeneratorConfig cfg = desk_gen_cfg();
    Rng r1(99), r2(99), r3(100);
    auto a = Generator::build(cfg, r1);
    auto b = Generator::build(cfg, r2);
    auto c = Generator::build(cfg, r3);

    auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    REQUIRE(pa.size() == pb.size());
    bool any_diff_vs_c = false;
    double wsum = 0.0, wsq = 0.0;
    int64_t wn = 0;
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        REQUIRE(pa[i].second->shape == pb[i].second->shape);
        for (size_t j = 0; j < pa[i].second->data.size(); ++j) {
            CHECK(pa[i].second->data[j] == pb[i].second->data[j]);
            if (pa[i].second->data[j] != pc[i].second->data[j]) any_diff_vs_c = true;
        }
        const std::string& name = pa[i].first;
        const Tensor4& t = *pa[i].second;
        if (name.size() >= 2 && name.substr(name.size() - 2) == ".w") {
            for (float v : t.data) {
                wsum += v;
                wsq += double(v) * v;
                ++wn;
            }
        } else if (name.size() >= 2 && name.substr(name.size() - 2) == ".b") {
            for (float v : t.data) CHECK(v == 0.0f);
        } else if (name.find(".gamma") != std::string::npos) {
            for (float v : t.data) CHECK(v == 1.0f);
        } else if (name.find(".beta") != std::string::npos) {
            for (float v : t.data) CHECK(v == 0.0f);
        }
    }
    CHECK(any_diff_vs_c);
    const double mean = wsum / double(wn);
    const double sd = std::sqrt(wsq / double(wn) - mean * mean);
    CHECK(std::abs(mean) < 1e-3);
    CHECK(sd == doctest::Approx(0.02).epsilon(0.05));

    // parameters: 4 per block, 2*depth blocks, plus the final conv pair
    CHECK(pa.size() == size_t(8 * cfg.depth + 2));
    CHECK(a.named_state().size() == pa.size() + size_t(4 * cfg.depth));
}

TEST_CASE("discriminator config invariant ties patch size to layer count") {
    DiscriminatorConfig cfg = desk_disc_cfg();
    CHECK_NOTHROW(cfg.validate());
    cfg.patch_size = 16;
    CHECK_THROWS_AS(cfg.validate(), ContractError);
    cfg = desk_disc_cfg();
    cfg.layers = 1;
    CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("discriminator scores one value per patch") {
    const DiscriminatorConfig cfg = desk_disc_cfg();
    Rng rng(3);
    auto d = Discriminator::build(cfg, rng);
    CHECK(d.parameter_count() == discriminator_param_oracle(cfg));
    REQUIRE(int(d.blocks.size()) == 4);
    CHECK(d.blocks[0].w.shape == Dims{16, 2, 4, 4});
    CHECK(d.final_w.shape == Dims{1, 128, 2, 2});

    Rng drng(4);
    const Tensor4 img = uniform01(drng, Dims{2, 1, 64, 64});
    const Tensor4 cond = uniform01(drng, Dims{2, 1, 64, 64});
    const Tensor4 scores = d.forward(img, cond, /*train=*/false);
    CHECK(scores.shape == Dims{2 * 4, 1, 1, 1});  // (64/32)^2 = 4 patches per sample

    CHECK_THROWS_AS(d.forward(img, Tensor4::zeros(Dims{2, 1, 32, 32}), false), ContractError);
    CHECK_THROWS_AS(d.forward(img, Tensor4::zeros(Dims{2, 2, 64, 64}), false), ContractError);
    Tensor4 off = Tensor4::zeros(Dims{2, 1, 48, 48});
    CHECK_THROWS_AS(d.forward(off, off, false), ContractError);
}

TEST_CASE("taped discriminator matches plain and reuses parameter leaves") {
    const DiscriminatorConfig cfg = desk_disc_cfg();
    Rng rng(11);
    auto d = Discriminator::build(cfg, rng);
    Rng drng(12);
    const Tensor4 img = uniform01(drng, Dims{1, 1, 64, 64});
    const Tensor4 cond = uniform01(drng, Dims{1, 1, 64, 64});

    const Tensor4 plain = d.forward(img, cond, false);
    Tape tape;
    NamedVarsT<float> params;
    Var s1 = d.forward(tape, tape.leaf(img), tape.leaf(cond), false, &params);
    const size_t after_first = params.size();
    Var s2 = d.forward(tape, tape.leaf(cond), tape.leaf(img), false, &params);
    CHECK(params.size() == after_first);  // second pass reused every leaf
    CHECK(after_first == d.parameters().size());

    const Tensor4& taped = tape.value(s1);
    REQUIRE(plain.shape == taped.shape);
    for (size_t i = 0; i < plain.data.size(); ++i) CHECK(plain.data[i] == taped.data[i]);

    // gradients from both passes land on the shared leaves
    tape.backward(add(mean(s1), mean(s2)));
    bool any_nonzero = false;
    for (auto& [n, v] : params)
        for (float g : tape.grad(v).data)
            if (g != 0.0f) any_nonzero = true;
    CHECK(any_nonzero);
}

TEST_CASE("patch scores are local: distant pixels never affect a patch") {
    const DiscriminatorConfig cfg = desk_disc_cfg();
    Rng rng(21);
    auto d = Discriminator::build(cfg, rng);
    Rng drng(22);
    const Tensor4 img = uniform01(drng, Dims{1, 1, 64, 64});
    const Tensor4 cond = uniform01(drng, Dims{1, 1, 64, 64});
    const Tensor4 base = d.forward(img, cond, /*train=*/false);

    Tensor4 poked = img;
    poked.at(0, 0, 5, 7) += 10.0f;  // inside patch 0 only
    const Tensor4 after = d.forward(poked, cond, false);
    CHECK(after.data[0] != base.data[0]);
    for (size_t i = 1; i < base.data.size(); ++i) CHECK(after.data[i] == base.data[i]);
}

TEST_CASE("discriminator init statistics and determinism") {
    const DiscriminatorConfig cfg = desk_disc_cfg();
    Rng r1(7), r2(7);
    auto a = Discriminator::build(cfg, r1);
    auto b = Discriminator::build(cfg, r2);
    auto pa = a.parameters(), pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    CHECK(pa.size() == size_t(4 * (cfg.layers - 1) + 2));
    std::set<std::string> names;
    for (size_t i = 0; i < pa.size(); ++i) {
        names.insert(pa[i].first);
        for (size_t j = 0; j < pa[i].second->data.size(); ++j)
            CHECK(pa[i].second->data[j] == pb[i].second->data[j]);
    }
    CHECK(names.size() == pa.size());
    CHECK(a.named_state().size() == pa.size() + size_t(2 * (cfg.layers - 1)));
}
