#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>

#include "maskforge/errors.hpp"
#include "maskforge/nifti.hpp"
#include "maskforge/rng.hpp"
#include "nifti_fixture.hpp"

using namespace maskforge;

namespace {

using FixtureBuilder = fixtures::NiftiBuilder;

std::filesystem::path temp_dir() {
    auto p = std::filesystem::temp_directory_path() / "maskforge_nifti_test";
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("uint8 volumes parse in both byte orders") {
    for (bool be : {false, true}) {
        CAPTURE(be);
        FixtureBuilder fb(be);
        fb.set_dims(2, 2, 2, 1.0f, 2.0f, 3.0f);
        fb.set_datatype(2);
        fb.append_u8({0, 1, 2, 3, 4, 5, 6, 7});
        const Volume v = parse_nifti(fb.bytes);
        CHECK(v.nx == 2);
        CHECK(v.ny == 2);
        CHECK(v.nz == 2);
        CHECK(v.sx == 1.0f);
        CHECK(v.sy == 2.0f);
        CHECK(v.sz == 3.0f);
        REQUIRE(v.count() == 8);
        for (int i = 0; i < 8; ++i) CHECK(v.voxels[size_t(i)] == float(i));
        // x varies fastest
        CHECK(v.at(1, 0, 0) == 1.0f);
        CHECK(v.at(0, 1, 0) == 2.0f);
        CHECK(v.at(0, 0, 1) == 4.0f);

        const NiftiInfo info = parse_nifti_info(fb.bytes);
        CHECK(info.datatype == 2);
        CHECK(info.swapped == be);
        CHECK(info.magic == "n+1");
        CHECK(info.vox_offset == 352.0f);
    }
}

TEST_CASE("int16 volumes parse in both byte orders") {
    for (bool be : {false, true}) {
        CAPTURE(be);
        FixtureBuilder fb(be);
        fb.set_dims(3, 1, 1, 0.5f, 0.5f, 0.5f);
        fb.set_datatype(4);
        fb.append_i16({-300, 0, 1024});
        const Volume v = parse_nifti(fb.bytes);
        CHECK(v.voxels[0] == -300.0f);
        CHECK(v.voxels[1] == 0.0f);
        CHECK(v.voxels[2] == 1024.0f);
    }
}

TEST_CASE("float32 volumes parse bitwise in both byte orders") {
    for (bool be : {false, true}) {
        CAPTURE(be);
        FixtureBuilder fb(be);
        fb.set_dims(2, 2, 1, 1.0f, 1.0f, 1.0f);
        fb.set_datatype(16);
        fb.append_f32({1.5f, -2.25f, 3.0e-7f, 100.125f});
        const Volume v = parse_nifti(fb.bytes);
        CHECK(v.voxels[0] == 1.5f);
        CHECK(v.voxels[1] == -2.25f);
        CHECK(v.voxels[2] == 3.0e-7f);
        CHECK(v.voxels[3] == 100.125f);
    }
}

TEST_CASE("slope and intercept rescale stored values") {
    FixtureBuilder fb(false);
    fb.set_dims(4, 1, 1, 1.0f, 1.0f, 1.0f);
    fb.set_datatype(4);
    fb.set_scaling(2.0f, -1.0f);
    fb.append_i16({1, 2, 3, 4});
    const Volume v = parse_nifti(fb.bytes);
    CHECK(v.voxels[0] == 1.0f);
    CHECK(v.voxels[1] == 3.0f);
    CHECK(v.voxels[2] == 5.0f);
    CHECK(v.voxels[3] == 7.0f);

    // slope 0 means "no scaling defined": values pass through untouched
    FixtureBuilder raw(false);
    raw.set_dims(1, 1, 1, 1.0f, 1.0f, 1.0f);
    raw.set_datatype(2);
    raw.set_scaling(0.0f, 100.0f);
    raw.append_u8({5});
    CHECK(parse_nifti(raw.bytes).voxels[0] == 5.0f);
}

TEST_CASE("write then parse round-trips bitwise") {
    Volume v;
    v.nx = 3;
    v.ny = 4;
    v.nz = 2;
    v.sx = 0.5f;
    v.sy = 0.75f;
    v.sz = 1.25f;
    Rng rng(2024);
    v.voxels.resize(size_t(v.count()));
    for (auto& x : v.voxels) x = float(rng.next_normal());

    const auto bytes = write_nifti(v);
    const NiftiInfo info = parse_nifti_info(bytes);
    CHECK(info.datatype == 16);
    CHECK(info.vox_offset == 352.0f);
    CHECK(info.magic == "n+1");
    CHECK(!info.swapped);
    CHECK(info.nx == 3);
    CHECK(info.sy == 0.75f);

    const Volume back = parse_nifti(bytes);
    CHECK(back.nx == v.nx);
    CHECK(back.ny == v.ny);
    CHECK(back.nz == v.nz);
    CHECK(back.sx == v.sx);
    CHECK(back.sy == v.sy);
    CHECK(back.sz == v.sz);
    REQUIRE(back.voxels.size() == v.voxels.size());
    for (size_t i = 0; i < v.voxels.size(); ++i) CHECK(back.voxels[i] == v.voxels[i]);

    // writing the parsed volume again reproduces the identical byte stream
    CHECK(write_nifti(back) == bytes);
}

TEST_CASE("big-endian input round-trips through the little-endian writer") {
    FixtureBuilder fb(true);
    fb.set_dims(2, 1, 1, 2.0f, 2.0f, 2.0f);
    fb.set_datatype(16);
    fb.append_f32({0.125f, -8.5f});
    const Volume v = parse_nifti(fb.bytes);
    const Volume back = parse_nifti(write_nifti(v));
    CHECK(back.voxels[0] == 0.125f);
    CHECK(back.voxels[1] == -8.5f);
    CHECK(back.sx == 2.0f);
}

TEST_CASE("file-level helpers") {
    const auto dir = temp_dir();
    const auto path = (dir / "roundtrip.nii").string();
    Volume v;
    v.nx = 2;
    v.ny = 2;
    v.nz = 1;
    v.voxels = {1.0f, 2.0f, 3.0f, 4.0f};
    write_nifti_file(path, v);
    const Volume back = parse_nifti_file(path);
    CHECK(back.voxels == v.voxels);
    CHECK_THROWS_AS(parse_nifti_file((dir / "missing.nii").string()), DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("malformed inputs are rejected with data errors") {
    {  // too small
        std::vector<uint8_t> tiny(100, 0);
        CHECK_THROWS_AS(parse_nifti(tiny), DataError);
    }
    {  // sizeof_hdr wrong in both byte orders
        FixtureBuilder fb(false);
        fb.set_dims(1, 1, 1, 1, 1, 1);
        fb.set_datatype(2);
        fb.put_i32(0, 500);
        fb.append_u8({0});
        CHECK_THROWS_AS(parse_nifti(fb.bytes), DataError);
    }
    {  // bad magic
        FixtureBuilder fb(false);
        fb.set_dims(1, 1, 1, 1, 1, 1);
        fb.set_datatype(2);
        fb.bytes[344] = 'x';
        fb.append_u8({0});
        CHECK_THROWS_AS(parse_nifti(fb.bytes), DataError);
    }
    {  // unsupported datatype (int32 = 8)
        FixtureBuilder fb(false);
        fb.set_dims(1, 1, 1, 1, 1, 1);
        fb.set_datatype(8);
        fb.append_u8({0, 0, 0, 0});
        CHECK_THROWS_AS(parse_nifti(fb.bytes), DataError);
    }
    {  // vox_offset below the header
        FixtureBuilder fb(false);
        fb.set_dims(1, 1, 1, 1, 1, 1);
        fb.set_datatype(2);
        fb.put_f32(108, 100.0f);
        fb.append_u8({0});
        CHECK_THROWS_AS(parse_nifti(fb.bytes), DataError);
    }
    {  // fractional vox_offset
        FixtureBuilder fb(false);
        fb.set_dims(1, 1, 1, 1, 1, 1);
        fb.set_datatype(2);
        fb.put_f32(108, 352.5f);
        fb.append_u8({0, 0});
        CHECK_THROWS_AS(parse_nifti(fb.bytes), DataError);
    }
    {  // dim[0] out of range
        FixtureBuilder fb(false);
        fb.set_dims(1, 1, 1, 1, 1, 1);
        fb.set_datatype(2);
        fb.put_i16(40, 0);
        fb.append_u8({0});
        CHECK_THROWS_AS(parse_nifti(fb.bytes), DataError);
    }
    {  // trailing dims beyond 3 must be singleton
        FixtureBuilder fb(false);
        fb.set_dims(1, 1, 1, 1, 1, 1);
        fb.set_datatype(2);
        fb.put_i16(40, 4);
        fb.put_i16(48, 2);  // dim[4] = 2
        fb.append_u8({0, 0});
        CHECK_THROWS_AS(parse_nifti(fb.bytes), DataError);
    }
    {  // negative extent
        FixtureBuilder fb(false);
        fb.set_dims(-2, 1, 1, 1, 1, 1);
        fb.set_datatype(2);
        fb.append_u8({0});
        CHECK_THROWS_AS(parse_nifti(fb.bytes), DataError);
    }
    {  // truncated payload
        FixtureBuilder fb(false);
        fb.set_dims(4, 4, 4, 1, 1, 1);
        fb.set_datatype(16);
        fb.append_f32({1.0f, 2.0f});
        CHECK_THROWS_AS(parse_nifti(fb.bytes), DataError);
    }
}
