#include "maskforge/image_io.hpp"

#include <cmath>
#include <fstream>

#include "maskforge/errors.hpp"

namespace maskforge {

namespace {

uint8_t to_byte(float v) {
    const long b = std::lround(double(v) * 255.0);
    return static_cast<uint8_t>(std::min(255l, std::max(0l, b)));
}

}  // namespace

void write_pgm(const std::string& path, const Image2D& img) {
    contract(img.h >= 1 && img.w >= 1, "write_pgm: empty image");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write file: " + path);
    f << "P5\n" << img.w << " " << img.h << "\n255\n";
    std::vector<uint8_t> bytes(img.pix.size());
    for (size_t i = 0; i < img.pix.size(); ++i) bytes[i] = to_byte(img.pix[i]);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("failed to write file: " + path);
}

Image2D read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open file: " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P5" || w < 1 || h < 1 || maxval != 255)
        throw DataError("not a supported P5 pgm: " + path);
    f.get();  // single whitespace after maxval
    Image2D img(h, w);
    std::vector<uint8_t> bytes(img.pix.size());
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("truncated pgm payload: " + path);
    for (size_t i = 0; i < bytes.size(); ++i) img.pix[i] = float(bytes[i]) / 255.0f;
    return img;
}

void export_sample_grid(const std::vector<Image2D>& conditions,
                        const std::vector<Image2D>& generated,
                        const std::vector<Image2D>& targets, const std::string& path) {
    contract(!conditions.empty(), "export_sample_grid: no samples");
    contract(conditions.size() == generated.size() && generated.size() == targets.size(),
             "export_sample_grid: column counts differ");
    const int h = conditions[0].h, w = conditions[0].w;
    auto check = [&](const Image2D& img) {
        contract(img.h == h && img.w == w, "export_sample_grid: images must share one size");
    };
    for (const auto& i : conditions) check(i);
    for (const auto& i : generated) check(i);
    for (const auto& i : targets) check(i);

    const int rows = static_cast<int>(conditions.size());
    Image2D grid(rows * h, 3 * w);
    for (int r = 0; r < rows; ++r) {
        const Image2D* cols[3] = {&conditions[static_cast<size_t>(r)],
                                  &generated[static_cast<size_t>(r)],
                                  &targets[static_cast<size_t>(r)]};
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) grid.at(r * h + y, c * w + x) = cols[c]->at(y, x);
    }
    write_pgm(path, grid);
}

}  // namespace maskforge
