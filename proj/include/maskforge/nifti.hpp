#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace maskforge {

enum class VolumeKind { intensity, label };

// Volume voxels are stored x-fastest, then y, then z.
struct Volume {
    int nx = 0, ny = 0, nz = 0;
    float sx = 1.0f, sy = 1.0f, sz = 1.0f;
    std::vector<float> voxels;
    VolumeKind kind = VolumeKind::intensity;

    int64_t count() const { return int64_t(nx) * ny * nz; }
    float at(int x, int y, int z) const {
        return voxels[static_cast<size_t>((int64_t(z) * ny + y) * nx + x)];
    }
};

// Header fields surfaced by nifti-info.
struct NiftiInfo {
    int nx = 0, ny = 0, nz = 0;
    float sx = 0, sy = 0, sz = 0;
    int16_t datatype = 0;
    float vox_offset = 0;
    float scl_slope = 0;
    float scl_inter = 0;
    std::string magic;
    bool swapped = false;  // file byte order differs from host
};

// NIfTI-1, uncompressed, datatypes uint8 (2) / int16 (4) / float32 (16).
// Byte order is detected from sizeof_hdr; scl_slope/scl_inter are applied
// when slope != 0.
Volume parse_nifti(const std::vector<uint8_t>& bytes);
NiftiInfo parse_nifti_info(const std::vector<uint8_t>& bytes);

// Always emits float32 little-endian, vox_offset 352, magic "n+1".
std::vector<uint8_t> write_nifti(const Volume& v);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& bytes);

Volume parse_nifti_file(const std::string& path);
void write_nifti_file(const std::string& path, const Volume& v);

}  // namespace maskforge
