#pragma once

#include <string>
#include <vector>

#include "maskforge/config.hpp"
#include "maskforge/dataset.hpp"

namespace maskforge {

// Materializes the training pairs a config describes: either the procedural
// phantom corpus or slices of paired NIfTI volumes under data_dir (files named
// <case>_image.nii / <case>_label.nii, matched by prefix, cases in
// lexicographic order).
std::vector<TrainingPair> build_dataset(const RunConfig& cfg);

std::vector<TrainingPair> load_nifti_dataset(const RunConfig& cfg);

}  // namespace maskforge
