#pragma once

#include <string>
#include <vector>

#include "maskforge/preprocess.hpp"

namespace maskforge {

// Binary PGM (P5, maxval 255). Values in [0,1] map to bytes via round(v*255).
void write_pgm(const std::string& path, const Image2D& img);
Image2D read_pgm(const std::string& path);

/// One grid image: rows are samples, columns are [condition | generated |
// target]. All images must share one size; counts must match.
void export_sample_grid(const std::vector<Image2D>& conditions,
                        const std::vector<Image2D>& generated,
                        const std::vector<Image2D>& targets, const std::string& path);

}  // namespace maskforge
