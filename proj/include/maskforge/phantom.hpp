#pragma once

#include <cstdint>
#include <vector>

#include "maskforge/dataset.hpp"

namespace maskforge {

// Synthetic desk-scale dataset: each pair is a mask of 1-4 disjoint
// axis-aligned ellipses and a target image that is a fixed deterministic
// function of that mask (per-label fill level plus a sinusoidal texture over a
// vertical background gradient). Rendering is a pure function of (spec, index).
struct PhantomSpec {
    int size = 64;
    int min_shapes = 1;
    int max_shapes = 4;
    uint64_t seed = 0;

    void validate() const {
        contract(size >= 8, "phantom size must be >= 8");
        contract(min_shapes >= 0 && max_shapes >= min_shapes, "phantom shape range invalid");
    }
};

TrainingPair phantom_pair(const PhantomSpec& spec, int64_t index);

std::vector<TrainingPair> phantom_dataset(const PhantomSpec& spec, int64_t count);

}  // namespace maskforge
