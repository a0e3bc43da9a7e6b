#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "maskforge/dataset_builder.hpp"
#include "maskforge/phantom.hpp"
#include "maskforge/preprocess.hpp"
#include "oracles.hpp"

using namespace maskforge;

namespace {

LabelMap test_label_map() {
    LabelMap lm;
    lm.labels = {205, 420, 500, 550, 600, 820, 850};  // Myo, LA, LV, RA, RV, Ao, PA
    return lm;
}

Image2D label_slice_from(std::initializer_list<std::initializer_list<int>> rows) {
    const int h = int(rows.size());
    const int w = int(rows.begin()->size());
    Image2D img(h, w);
    int y = 0;
    for (const auto& row : rows) {
        int x = 0;
        for (int v : row) img.at(y, x++) = float(v);
        ++y;
    }
    return img;
}

}  // namespace

TEST_CASE("per-volume normalization maps min to 0 and max to 1") {
    Volume v;
    v.nx = 3;
    v.ny = 1;
    v.nz = 1;
    v.voxels = {-100.0f, 0.0f, 300.0f};
    const Volume n = normalize_volume(v);
    CHECK(n.voxels[0] == 0.0f);
    CHECK(n.voxels[1] == doctest::Approx(0.25));
    CHECK(n.voxels[2] == 1.0f);
    CHECK(n.nx == 3);

    Volume flat = v;
    flat.voxels = {7.0f, 7.0f, 7.0f};
    for (float x : normalize_volume(flat).voxels) CHECK(x == 0.0f);

    Volume unit = v;
    unit.voxels = {0.0f, 0.5f, 1.0f};
    const Volume same = normalize_volume(unit);
    for (size_t i = 0; i < unit.voxels.size(); ++i) CHECK(same.voxels[i] == unit.voxels[i]);
}

TEST_CASE("axial slices index the (x,y) plane at fixed z") {
    Volume v;
    v.nx = 4;
    v.ny = 4;
    v.nz = 3;
    v.voxels.resize(size_t(v.count()));
    for (int z = 0; z < 3; ++z)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                v.voxels[size_t((z * 4 + y) * 4 + x)] = float(x + 10 * y + 100 * z);

    const auto slices = extract_axial_slices(v);
    REQUIRE(slices.size() == 3);
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) CHECK(slices[size_t(k)].at(i, j) == v.at(i, j, k));
}

TEST_CASE("nearest resize replicates and never invents values") {
    Image2D small(2, 2);
    small.at(0, 0) = 1.0f;
    small.at(0, 1) = 2.0f;
    small.at(1, 0) = 3.0f;
    small.at(1, 1) = 4.0f;
    const Image2D up = resize(small, 4, 4, ResizeMode::nearest);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(up.at(y, x) == small.at(y / 2, x / 2));

    Image2D labels(7, 7);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 7; ++x) labels.at(y, x) = float((x + y) % 2 ? 0 : (y < 3 ? 1 : 3));
    const Image2D down = resize(labels, 3, 3, ResizeMode::nearest);
    const std::set<float> allowed = {0.0f, 1.0f, 3.0f};
    for (float p : down.pix) CHECK(allowed.count(p) == 1);
}

TEST_CASE("bilinear resize reproduces a linear ramp analytically") {
    const double a = 0.2, b = 0.6;
    Image2D img(64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            img.at(y, x) = float(oracles::ramp_value(a, b, x, 64));
    const Image2D down = resize(img, 16, 16, ResizeMode::bilinear);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            CHECK(std::abs(double(down.at(y, x)) - oracles::ramp_value(a, b, x, 16)) < 1e-6);

    Image2D flat(5, 5);
    for (auto& p : flat.pix) p = 0.37f;
    for (float p : resize(flat, 11, 11, ResizeMode::bilinear).pix)
        CHECK(p == doctest::Approx(0.37f));

    const Image2D same = resize(img, 64, 64, ResizeMode::bilinear);
    for (size_t i = 0; i < img.pix.size(); ++i)
        CHECK(same.pix[i] == doctest::Approx(img.pix[i]).epsilon(1e-6));
}

TEST_CASE("condition encoding assigns canonical-order gray levels") {
    const LabelMap lm = test_label_map();
    const Image2D slice = label_slice_from({{0, 205, 500},
                                            {205, 0, 500},
                                            {0, 0, 999}});

    SUBCASE("single structure") {
        const Image2D c = make_condition(slice, {"LV"}, lm);
        CHECK(c.at(0, 2) == 1.0f);
        CHECK(c.at(1, 2) == 1.0f);
        CHECK(c.at(0, 1) == 0.0f);  // Myo not selected
        CHECK(c.at(2, 2) == 0.0f);  // unknown label stays background
    }
    SUBCASE("two structures keep canonical rank regardless of spelling order") {
        const Image2D c = make_condition(slice, {"LV", "Myo"}, lm);
        CHECK(c.at(0, 1) == doctest::Approx(0.5f));  // Myo is rank 1 of 2
        CHECK(c.at(0, 2) == 1.0f);                   // LV is rank 2 of 2
    }
    SUBCASE("whole-heart selection uses sevenths") {
        const Image2D c = make_condition(slice, {"WH"}, lm);
        CHECK(c.at(0, 1) == doctest::Approx(1.0f / 7.0f));  // Myo rank 1
        CHECK(c.at(0, 2) == doctest::Approx(3.0f / 7.0f));  // LV rank 3
    }
    SUBCASE("empty slice gives a zero condition") {
        Image2D zeros(3, 3);
        const Image2D c = make_condition(zeros, {"WH"}, lm);
        for (float p : c.pix) CHECK(p == 0.0f);
    }
    SUBCASE("unknown or duplicate selections are rejected") {
        CHECK_THROWS_AS(make_condition(slice, {"LV", "XX"}, lm), ContractError);
        CHECK_THROWS_AS(make_condition(slice, {"LV", "LV"}, lm), ContractError);
        CHECK_THROWS_AS(make_condition(slice, {}, lm), ContractError);
    }
    SUBCASE("label map validation") {
        LabelMap bad = lm;
        bad.labels[1] = bad.labels[0];
        CHECK_THROWS_AS(make_condition(slice, {"WH"}, bad), ContractError);
        bad = lm;
        bad.labels.pop_back();
        CHECK_THROWS_AS(make_condition(slice, {"WH"}, bad), ContractError);
        CHECK_THROWS_AS(lm.label_of("nope"), DataError);
    }
}

TEST_CASE("image/tensor plumbing round-trips") {
    Image2D img(2, 3);
    for (size_t i = 0; i < img.pix.size(); ++i) img.pix[i] = float(i) * 0.5f;
    const Tensor4 t = image_to_tensor(img);
    REQUIRE(t.shape == Dims{1, 1, 2, 3});
    const Image2D back = tensor_to_image(t, 0, 0);
    CHECK(back.h == 2);
    CHECK(back.w == 3);
    for (size_t i = 0; i < img.pix.size(); ++i) CHECK(back.pix[i] == img.pix[i]);
}

TEST_CASE("phantom pairs are pure functions of spec and index") {
    PhantomSpec spec;
    spec.size = 32;
    spec.seed = 7;
    const TrainingPair a = phantom_pair(spec, 5);
    const TrainingPair b = phantom_pair(spec, 5);
    for (size_t i = 0; i < a.condition.data.size(); ++i) {
        CHECK(a.condition.data[i] == b.condition.data[i]);
        CHECK(a.target.data[i] == b.target.data[i]);
    }
    const TrainingPair c = phantom_pair(spec, 6);
    bool differs = false;
    for (size_t i = 0; i < a.condition.data.size(); ++i)
        if (a.condition.data[i] != c.condition.data[i]) differs = true;
    CHECK(differs);

    REQUIRE(a.condition.shape == Dims{1, 1, 32, 32});
    const std::set<float> levels = {0.0f, 0.25f, 0.5f, 0.75f, 1.0f};
    for (float v : a.condition.data) CHECK(levels.count(v) == 1);
    for (float v : a.target.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("shapeless phantom renders the pure background ramp") {
    PhantomSpec spec;
    spec.size = 16;
    spec.min_shapes = 0;
    spec.max_shapes = 0;
    const TrainingPair p = phantom_pair(spec, 0);
    for (float v : p.condition.data) CHECK(v == 0.0f);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            CHECK(double(p.target.at(0, 0, y, x)) ==
                  doctest::Approx(0.1 + 0.2 * (double(y) / 15.0)).epsilon(1e-6));
}

TEST_CASE("phantom dataset and spec validation") {
    PhantomSpec spec;
    spec.size = 16;
    const auto data = phantom_dataset(spec, 12);
    CHECK(data.size() == 12);
    CHECK_THROWS_AS(phantom_dataset(spec, -1), ContractError);
    PhantomSpec bad;
    bad.size = 4;
    CHECK_THROWS_AS(phantom_pair(bad, 0), ContractError);
    bad = PhantomSpec{};
    bad.min_shapes = 3;
    bad.max_shapes = 1;
    CHECK_THROWS_AS(phantom_pair(bad, 0), ContractError);
}

TEST_CASE("batch iterator addresses batches by ordinal") {
    PhantomSpec spec;
    spec.size = 16;
    const auto data = phantom_dataset(spec, 100);
    const BatchIterator it(data, 16, 42);
    CHECK(it.batches_per_epoch() == 6);

    const auto i0 = it.batch_indices(3);
    const auto i1 = it.batch_indices(3);
    CHECK(i0 == i1);  // idempotent

    const BatchIterator same(data, 16, 42);
    CHECK(same.batch_indices(3) == i0);
    const BatchIterator other(data, 16, 43);
    CHECK(other.batch_indices(3) != i0);

    // one epoch covers 96 distinct samples, no repeats
    std::set<size_t> seen;
    for (int64_t k = 0; k < 6; ++k)
        for (size_t idx : it.batch_indices(k)) seen.insert(idx);
    CHECK(seen.size() == 96);

    // epochs reshuffle
    CHECK(it.batch_indices(0) != it.batch_indices(6));

    const auto [cond, target] = it.batch(0);
    CHECK(cond.shape == Dims{16, 1, 16, 16});
    CHECK(target.shape == cond.shape);
    const auto idx = it.batch_indices(0);
    for (int i = 0; i < 16; ++i)
        CHECK(cond.at(i, 0, 3, 3) == data[idx[size_t(i)]].condition.at(0, 0, 3, 3));

    CHECK_THROWS_AS(it.batch_indices(-1), ContractError);
    CHECK_THROWS_AS(BatchIterator(data, 0, 1), ContractError);
    CHECK_THROWS_AS(BatchIterator(data, 101, 1), ContractError);
    const std::vector<TrainingPair> empty;
    CHECK_THROWS_AS(BatchIterator(empty, 1, 1), ContractError);
}

TEST_CASE("stack_pairs validates its inputs") {
    PhantomSpec spec;
    spec.size = 16;
    auto data = phantom_dataset(spec, 3);
    CHECK_THROWS_AS(stack_pairs(data, {}), ContractError);
    data[2].target = Tensor4::zeros(Dims{1, 1, 8, 8});
    CHECK_THROWS_AS(stack_pairs(data, {0, 2}), ContractError);
}

TEST_CASE("build_dataset phantom branch respects the config") {
    RunConfig cfg;
    cfg.source = "phantom";
    cfg.image_size = 16;
    cfg.phantom_count = 9;
    cfg.phantom_seed = 3;
    const auto data = build_dataset(cfg);
    CHECK(data.size() == 9);
    CHECK(data[0].condition.shape == Dims{1, 1, 16, 16});
    PhantomSpec spec;
    spec.size = 16;
    spec.seed = 3;
    const TrainingPair direct = phantom_pair(spec, 4);
    for (size_t i = 0; i < direct.target.data.size(); ++i)
        CHECK(data[4].target.data[i] == direct.target.data[i]);
}

TEST_CASE("nifti dataset builder pairs volumes and encodes slices") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "maskforge_data_test";
    fs::remove_all(dir);
    fs::create_directories(dir);

    const LabelMap lm = test_label_map();
    const int nx = 8, ny = 8;

    // case a: slice 0 has Myo+LV, slice 1 empty; case b: slice 0 has LV only
    auto write_case = [&](const std::string& name, int nz,
                          const std::vector<std::vector<int>>& slice_labels) {
        Volume labels;
        labels.nx = nx;
        labels.ny = ny;
        labels.nz = nz;
        labels.voxels.assign(size_t(labels.count()), 0.0f);
        for (int z = 0; z < nz; ++z)
            for (size_t s = 0; s < slice_labels[size_t(z)].size(); ++s) {
                // paint a 2x2 block per listed label, blocks spaced apart
                const int label = slice_labels[size_t(z)][s];
                const int bx = 1 + 3 * int(s);
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx)
                        labels.voxels[size_t((z * ny + (2 + dy)) * nx + bx + dx)] = float(label);
            }
        Volume image;
        image.nx = nx;
        image.ny = ny;
        image.nz = nz;
        image.voxels.resize(size_t(image.count()));
        for (size_t i = 0; i < image.voxels.size(); ++i)
            image.voxels[i] = float(100 + int(i) % 37) * (name == "b" ? -2.0f : 1.0f);
        write_nifti_file((dir / (name + "_label.nii")).string(), labels);
        write_nifti_file((dir / (name + "_image.nii")).string(), image);
    };
    write_case("a", 2, {{205, 500}, {}});
    write_case("b", 1, {{500}});

    RunConfig cfg;
    cfg.source = "nifti";
    cfg.data_dir = dir.string();
    cfg.image_size = 16;
    cfg.selection = "WH";
    const auto& names = LabelMap::structure_names();
    for (size_t i = 0; i < names.size(); ++i) cfg.labels[names[i]] = lm.labels[i];

    SUBCASE("empty slices excluded by default") {
        const auto data = load_nifti_dataset(cfg);
        REQUIRE(data.size() == 2);  // a slice 1 dropped
        CHECK(data[0].condition.shape == Dims{1, 1, 16, 16});
        // conditions carry the canonical gray levels after nearest resize
        std::set<float> seen;
        for (float v : data[0].condition.data) seen.insert(v);
        CHECK(seen.count(float(1.0 / 7.0)) == 1);  // Myo
        CHECK(seen.count(float(3.0 / 7.0)) == 1);  // LV
        for (float v : data[0].target.data) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
    SUBCASE("empty slices kept when the flag is off") {
        RunConfig keep = cfg;
        keep.exclude_empty = false;
        const auto data = load_nifti_dataset(keep);
        REQUIRE(data.size() == 3);
        bool zero_found = false;
        for (const auto& p : data) {
            bool all0 = true;
            for (float v : p.condition.data)
                if (v != 0.0f) all0 = false;
            zero_found = zero_found || all0;
        }
        CHECK(zero_found);
    }
    SUBCASE("selection narrows the condition") {
        RunConfig lv = cfg;
        lv.selection = "LV";
        const auto data = load_nifti_dataset(lv);
        REQUIRE(data.size() == 2);
        for (const auto& p : data) {
            std::set<float> seen;
            for (float v : p.condition.data) seen.insert(v);
            for (float v : seen) CHECK((v == 0.0f || v == 1.0f));
        }
    }
    SUBCASE("errors") {
        RunConfig bad = cfg;
        bad.data_dir = (dir / "nope").string();
        CHECK_THROWS_AS(load_nifti_dataset(bad), DataError);

        bad = cfg;
        bad.labels.erase("PA");
        CHECK_THROWS_AS(load_nifti_dataset(bad), DataError);

        // orphan label volume
        Volume orphan;
        orphan.nx = orphan.ny = orphan.nz = 2;
        orphan.voxels.assign(8, 0.0f);
        write_nifti_file((dir / "c_label.nii").string(), orphan);
        CHECK_THROWS_AS(load_nifti_dataset(cfg), DataError);
        fs::remove(dir / "c_label.nii");

        // mismatched dims
        write_nifti_file((dir / "c_label.nii").string(), orphan);
        Volume wrong = orphan;
        wrong.nz = 1;
        wrong.voxels.assign(4, 0.0f);
        write_nifti_file((dir / "c_image.nii").string(), wrong);
        CHECK_THROWS_AS(load_nifti_dataset(cfg), DataError);
        fs::remove(dir / "c_label.nii");
        fs::remove(dir / "c_image.nii");

        // all slices empty and excluded
        RunConfig lone = cfg;
        const auto lonely = fs::temp_directory_path() / "maskforge_data_empty";
        fs::remove_all(lonely);
        fs::create_directories(lonely);
        write_nifti_file((lonely / "z_label.nii").string(), orphan);
        write_nifti_file((lonely / "z_image.nii").string(), orphan);
        lone.data_dir = lonely.string();
        CHECK_THROWS_AS(load_nifti_dataset(lone), DataError);
        fs::remove_all(lonely);
    }

    fs::remove_all(dir);
}
