#include "maskforge/checkpoint.hpp"

#include <cstring>

#include "maskforge/errors.hpp"
#include "maskforge/nifti.hpp"  // read_file / write_file

namespace maskforge {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'G', '1'};
constexpr uint32_t kVersion = 1;

struct ByteWriter {
    std::vector<uint8_t> bytes;

    void u8(uint8_t v) { bytes.push_back(v); }
    void u16(uint16_t v) {
        bytes.push_back(static_cast<uint8_t>(v & 0xff));
        bytes.push_back(static_cast<uint8_t>(v >> 8));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
    }
    void f32(float v) {
        uint32_t u;
        std::memcpy(&u, &v, 4);
        u32(u);
    }
    void f64(double v) {
        uint64_t u;
        std::memcpy(&u, &v, 8);
        u64(u);
    }
    void name(const std::string& s) {
        contract(s.size() <= 0xffff, "checkpoint: name too long: " + s);
        u16(static_cast<uint16_t>(s.size()));
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    void tensor_payload(const Tensor4& t) {
        for (float v : t.data) f32(v);
    }
};

struct ByteReader {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;

    void need(size_t n, const char* what) {
        if (pos + n > bytes.size())
            throw DataError("checkpoint: truncated at byte " + std::to_string(pos) +
                            " while reading " + what);
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return bytes[pos++];
    }
    uint16_t u16(const char* what) {
        need(2, what);
        const uint16_t v = static_cast<uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(bytes[pos + static_cast<size_t>(i)]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(bytes[pos + static_cast<size_t>(i)]) << (8 * i);
        pos += 8;
        return v;
    }
    float f32(const char* what) {
        const uint32_t u = u32(what);
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
    double f64(const char* what) {
        const uint64_t u = u64(what);
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
    std::string name() {
        const uint16_t len = u16("name length");
        need(len, "name");
        std::string s(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
        return s;
    }
    Tensor4 tensor_of(int64_t numel, Dims shape, const char* what) {
        Tensor4 t(shape);
        contract(t.numel() == numel, "checkpoint: dim/numel mismatch");
        for (int64_t i = 0; i < numel; ++i) t.data[static_cast<size_t>(i)] = f32(what);
        return t;
    }
};

void write_opt(ByteWriter& w, const CheckpointData::OptState& opt) {
    w.u64(opt.t);
    w.u32(static_cast<uint32_t>(opt.slots.size()));
    for (const auto& [name, m, v] : opt.slots) {
        w.name(name);
        w.u32(static_cast<uint32_t>(m.numel()));
        w.tensor_payload(m);
        w.tensor_payload(v);
    }
}

CheckpointData::OptState read_opt(ByteReader& r) {
    CheckpointData::OptState opt;
    opt.t = r.u64("optimizer step counter");
    const uint32_t count = r.u32("optimizer slot count");
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = r.name();
        const uint32_t numel = r.u32("moment size");
        if (numel < 1) throw DataError("checkpoint: empty moment entry for " + name);
        // Moments are stored flat; shape is restored when attached to params.
        Tensor4 m = r.tensor_of(numel, Dims{1, 1, 1, static_cast<int>(numel)}, "first moment");
        Tensor4 v = r.tensor_of(numel, Dims{1, 1, 1, static_cast<int>(numel)}, "second moment");
        opt.slots.emplace_back(std::move(name), std::move(m), std::move(v));
    }
    return opt;
}

}  // namespace

std::vector<uint8_t> save_checkpoint(const CheckpointData& data) {
    ByteWriter w;
    w.bytes.insert(w.bytes.end(), kMagic, kMagic + 4);
    w.u32(kVersion);
    w.u32(static_cast<uint32_t>(data.tensors.size()));
    for (const auto& [name, t] : data.tensors) {
        w.name(name);
        w.u8(4);
        w.u32(static_cast<uint32_t>(t.shape.n));
        w.u32(static_cast<uint32_t>(t.shape.c));
        w.u32(static_cast<uint32_t>(t.shape.h));
        w.u32(static_cast<uint32_t>(t.shape.w));
        w.tensor_payload(t);
    }
    write_opt(w, data.opt_g);
    write_opt(w, data.opt_d);
    w.u64(data.rng_state);
    w.u64(data.iteration);
    w.u8(data.ema.initialized ? 1 : 0);
    w.f64(data.ema.g_loss);
    w.f64(data.ema.d_loss);
    w.f64(data.ema.acc_real);
    w.f64(data.ema.acc_fake);
    return std::move(w.bytes);
}

CheckpointData load_checkpoint(const std::vector<uint8_t>& bytes) {
    ByteReader r{bytes};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw DataError("checkpoint: bad magic (expected MFG1)");
    r.pos = 4;
    const uint32_t version = r.u32("version");
    if (version != kVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));

    CheckpointData data;
    const uint32_t tensor_count = r.u32("tensor count");
    for (uint32_t i = 0; i < tensor_count; ++i) {
        std::string name = r.name();
        const uint8_t ndim = r.u8("ndim");
        if (ndim != 4)
            throw DataError("checkpoint: tensor " + name + " has unsupported ndim " +
                            std::to_string(ndim));
        Dims d;
        d.n = static_cast<int>(r.u32("dim 0"));
        d.c = static_cast<int>(r.u32("dim 1"));
        d.h = static_cast<int>(r.u32("dim 2"));
        d.w = static_cast<int>(r.u32("dim 3"));
        if (d.n < 1 || d.c < 1 || d.h < 1 || d.w < 1 || d.numel() > kMaxTensorElements)
            throw DataError("checkpoint: invalid dims for tensor " + name);
        Tensor4 t = r.tensor_of(d.numel(), d, "tensor payload");
        data.tensors.emplace_back(std::move(name), std::move(t));
    }
    data.opt_g = read_opt(r);
    data.opt_d = read_opt(r);
    data.rng_state = r.u64("rng state");
    data.iteration = r.u64("iteration");
    data.ema.initialized = r.u8("ema flag") != 0;
    data.ema.g_loss = r.f64("ema g_loss");
    data.ema.d_loss = r.f64("ema d_loss");
    data.ema.acc_real = r.f64("ema acc_real");
    data.ema.acc_fake = r.f64("ema acc_fake");
    if (r.pos != bytes.size())
        throw DataError("checkpoint: " + std::to_string(bytes.size() - r.pos) +
                        " trailing bytes after payload");
    return data;
}

void save_checkpoint_file(const std::string& path, const CheckpointData& data) {
    write_file(path, save_checkpoint(data));
}

CheckpointData load_checkpoint_file(const std::string& path) {
    return load_checkpoint(read_file(path));
}

}  // namespace maskforge
