#include "maskforge/nifti.hpp"

#include <cstring>
#include <fstream>

#include "maskforge/errors.hpp"

namespace maskforge {

namespace {

constexpr int32_t kHeaderSize = 348;
constexpr size_t kMinFileSize = 352;

// Header field offsets (NIfTI-1).
constexpr size_t kOffDim = 40;        // int16 dim[8]
constexpr size_t kOffDatatype = 70;   // int16
constexpr size_t kOffPixdim = 76;     // float pixdim[8]
constexpr size_t kOffVoxOffset = 108; // float
constexpr size_t kOffSclSlope = 112;  // float
constexpr size_t kOffSclInter = 116;  // float
constexpr size_t kOffMagic = 344;     // char[4]

uint16_t swap16(uint16_t v) { return static_cast<uint16_t>((v << 8) | (v >> 8)); }
uint32_t swap32(uint32_t v) {
    return (v << 24) | ((v << 8) & 0x00ff0000u) | ((v >> 8) & 0x0000ff00u) | (v >> 24);
}

struct Reader {
    const std::vector<uint8_t>& bytes;
    bool swapped = false;

    int16_t i16(size_t off) const {
        uint16_t v;
        std::memcpy(&v, bytes.data() + off, 2);
        if (swapped) v = swap16(v);
        int16_t out;
        std::memcpy(&out, &v, 2);
        return out;
    }
    int32_t i32(size_t off) const {
        uint32_t v;
        std::memcpy(&v, bytes.data() + off, 4);
        if (swapped) v = swap32(v);
        int32_t out;
        std::memcpy(&out, &v, 4);
        return out;
    }
    float f32(size_t off) const {
        uint32_t v;
        std::memcpy(&v, bytes.data() + off, 4);
        if (swapped) v = swap32(v);
        float out;
        std::memcpy(&out, &v, 4);
        return out;
    }
};

Reader open_header(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < kMinFileSize)
        throw DataError("nifti: file too small (" + std::to_string(bytes.size()) +
                        " bytes, need at least " + std::to_string(kMinFileSize) + ")");
    Reader r{bytes, false};
    if (r.i32(0) != kHeaderSize) {
        r.swapped = true;
        if (r.i32(0) != kHeaderSize)
            throw DataError("nifti: sizeof_hdr is not 348 in either byte order");
    }
    return r;
}

std::string read_magic(const Reader& r) {
    const char* m = reinterpret_cast<const char*>(r.bytes.data() + kOffMagic);
    if ((std::memcmp(m, "n+1", 4) != 0) && (std::memcmp(m, "ni1", 4) != 0))
        throw DataError(std::string("nifti: bad magic \"") + std::string(m, m + 3) +
                        "\" (expected n+1 or ni1)");
    return std::string(m, m + 3);
}

NiftiInfo read_info(const Reader& r) {
    NiftiInfo info;
    info.swapped = r.swapped;
    info.magic = read_magic(r);
    const int16_t ndim = r.i16(kOffDim);
    if (ndim < 1 || ndim > 7) throw DataError("nifti: dim[0] out of range: " + std::to_string(ndim));
    info.nx = r.i16(kOffDim + 2);
    info.ny = ndim >= 2 ? r.i16(kOffDim + 4) : 1;
    info.nz = ndim >= 3 ? r.i16(kOffDim + 6) : 1;
    if (info.nx < 1 || info.ny < 1 || info.nz < 1)
        throw DataError("nifti: non-positive dim entries (" + std::to_string(info.nx) + "," +
                        std::to_string(info.ny) + "," + std::to_string(info.nz) + ")");
    // Trailing dims, if present, must be singleton: only 3-D payloads are supported.
    for (int d = 4; d <= ndim; ++d) {
        const int16_t extent = r.i16(kOffDim + 2 * static_cast<size_t>(d));
        if (extent > 1)
            throw DataError("nifti: dim[" + std::to_string(d) + "]=" + std::to_string(extent) +
                            " unsupported (volumes must be 3-D)");
    }
    info.sx = r.f32(kOffPixdim + 4);
    info.sy = r.f32(kOffPixdim + 8);
    info.sz = r.f32(kOffPixdim + 12);
    info.datatype = r.i16(kOffDatatype);
    info.vox_offset = r.f32(kOffVoxOffset);
    info.scl_slope = r.f32(kOffSclSlope);
    info.scl_inter = r.f32(kOffSclInter);
    return info;
}

}  // namespace

NiftiInfo parse_nifti_info(const std::vector<uint8_t>& bytes) {
    return read_info(open_header(bytes));
}

Volume parse_nifti(const std::vector<uint8_t>& bytes) {
    const Reader r = open_header(bytes);
    const NiftiInfo info = read_info(r);

    size_t elem = 0;
    switch (info.datatype) {
        case 2: elem = 1; break;   // uint8
        case 4: elem = 2; break;   // int16
        case 16: elem = 4; break;  // float32
        default:
            throw DataError("nifti: unsupported datatype " + std::to_string(info.datatype) +
                            " (supported: 2=uint8, 4=int16, 16=float32)");
    }

    const auto offset = static_cast<size_t>(info.vox_offset);
    if (info.vox_offset < float(kHeaderSize) || float(offset) != info.vox_offset)
        throw DataError("nifti: bad vox_offset " + std::to_string(info.vox_offset));

    Volume v;
    v.nx = info.nx;
    v.ny = info.ny;
    v.nz = info.nz;
    v.sx = info.sx;
    v.sy = info.sy;
    v.sz = info.sz;
    const int64_t count = v.count();
    if (bytes.size() < offset + static_cast<size_t>(count) * elem)
        throw DataError("nifti: truncated payload: need " +
                        std::to_string(offset + static_cast<size_t>(count) * elem) +
                        " bytes, file has " + std::to_string(bytes.size()));

    v.voxels.resize(static_cast<size_t>(count));
    const uint8_t* p = bytes.data() + offset;
    for (int64_t i = 0; i < count; ++i) {
        float raw = 0;
        switch (info.datatype) {
            case 2:
                raw = static_cast<float>(p[i]);
                break;
            case 4: {
                uint16_t u;
                std::memcpy(&u, p + i * 2, 2);
                if (r.swapped) u = swap16(u);
                int16_t s;
                std::memcpy(&s, &u, 2);
                raw = static_cast<float>(s);
                break;
            }
            case 16: {
                uint32_t u;
                std::memcpy(&u, p + i * 4, 4);
                if (r.swapped) u = swap32(u);
                std::memcpy(&raw, &u, 4);
                break;
            }
        }
        v.voxels[static_cast<size_t>(i)] =
            info.scl_slope != 0.0f ? info.scl_slope * raw + info.scl_inter : raw;
    }
    return v;
}

std::vector<uint8_t> write_nifti(const Volume& v) {
    contract(v.count() == int64_t(v.voxels.size()),
             "write_nifti: voxel count mismatch: dims say " + std::to_string(v.count()) +
                 ", vector has " + std::to_string(v.voxels.size()));
    std::vector<uint8_t> out(kMinFileSize + v.voxels.size() * 4, 0);
    auto put16 = [&](size_t off, int16_t val) {
        const auto u = static_cast<uint16_t>(val);
        out[off] = static_cast<uint8_t>(u & 0xff);
        out[off + 1] = static_cast<uint8_t>(u >> 8);
    };
    auto put32 = [&](size_t off, uint32_t u) {
        out[off] = static_cast<uint8_t>(u & 0xff);
        out[off + 1] = static_cast<uint8_t>((u >> 8) & 0xff);
        out[off + 2] = static_cast<uint8_t>((u >> 16) & 0xff);
        out[off + 3] = static_cast<uint8_t>((u >> 24) & 0xff);
    };
    auto putf = [&](size_t off, float val) {
        uint32_t u;
        std::memcpy(&u, &val, 4);
        put32(off, u);
    };
    put32(0, static_cast<uint32_t>(kHeaderSize));
    put16(kOffDim, 3);
    put16(kOffDim + 2, static_cast<int16_t>(v.nx));
    put16(kOffDim + 4, static_cast<int16_t>(v.ny));
    put16(kOffDim + 6, static_cast<int16_t>(v.nz));
    for (size_t d = 4; d <= 7; ++d) put16(kOffDim + 2 * d, 1);
    put16(kOffDatatype, 16);
    put16(kOffDatatype + 2, 32);  // bitpix
    putf(kOffPixdim, 1.0f);
    putf(kOffPixdim + 4, v.sx);
    putf(kOffPixdim + 8, v.sy);
    putf(kOffPixdim + 12, v.sz);
    putf(kOffVoxOffset, 352.0f);
    putf(kOffSclSlope, 0.0f);
    putf(kOffSclInter, 0.0f);
    std::memcpy(out.data() + kOffMagic, "n+1", 4);
    for (size_t i = 0; i < v.voxels.size(); ++i) {
        uint32_t u;
        std::memcpy(&u, &v.voxels[i], 4);
        put32(kMinFileSize + i * 4, u);
    }
    return out;
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    const std::streamoff size = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    if (size > 0) f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw DataError("failed to read file: " + path);
    return bytes;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write file: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("failed to write file: " + path);
}

Volume parse_nifti_file(const std::string& path) { return parse_nifti(read_file(path)); }

void write_nifti_file(const std::string& path, const Volume& v) {
    write_file(path, write_nifti(v));
}

}  // namespace maskforge
