#include "maskforge/dataset_builder.hpp"

#include <algorithm>
#include <filesystem>

#include "maskforge/phantom.hpp"
#include "maskforge/preprocess.hpp"

namespace maskforge {

namespace {

bool all_zero(const Image2D& img) {
    for (float v : img.pix)
        if (v != 0.0f) return false;
    return true;
}

}  // namespace

std::vector<TrainingPair> load_nifti_dataset(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(cfg.data_dir))
        throw DataError("data_dir is not a directory: " + cfg.data_dir);

    const std::string label_suffix = "_label.nii";
    const std::string image_suffix = "_image.nii";
    std::vector<std::string> cases;
    for (const auto& entry : fs::directory_iterator(cfg.data_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.size() > label_suffix.size() &&
            name.compare(name.size() - label_suffix.size(), label_suffix.size(), label_suffix) == 0)
            cases.push_back(name.substr(0, name.size() - label_suffix.size()));
    }
    std::sort(cases.begin(), cases.end());
    if (cases.empty())
        throw DataError("no *" + label_suffix + " volumes found in " + cfg.data_dir);

    LabelMap lm;
    for (const auto& name : LabelMap::structure_names()) {
        const auto it = cfg.labels.find(name);
        if (it == cfg.labels.end()) throw DataError("missing label." + name + " in config");
        lm.labels.push_back(it->second);
    }
    lm.validate();
    const std::vector<std::string> selection =
        cfg.selection == "WH" ? std::vector<std::string>{"WH"} : split_csv(cfg.selection);

    std::vector<TrainingPair> pairs;
    for (const auto& c : cases) {
        const std::string label_path = cfg.data_dir + "/" + c + label_suffix;
        const std::string image_path = cfg.data_dir + "/" + c + image_suffix;
        if (!fs::exists(image_path))
            throw DataError("label volume " + label_path + " has no matching " + image_path);
        Volume labels = parse_nifti_file(label_path);
        labels.kind = VolumeKind::label;
        Volume image = parse_nifti_file(image_path);
        if (labels.nx != image.nx || labels.ny != image.ny || labels.nz != image.nz)
            throw DataError("volume dims differ between " + image_path + " and " + label_path);
        image = normalize_volume(image);

        auto label_slices = extract_axial_slices(labels);
        auto image_slices = extract_axial_slices(image);
        for (size_t k = 0; k < label_slices.size(); ++k) {
            Image2D lab = resize(label_slices[k], cfg.image_size, cfg.image_size,
                                 ResizeMode::nearest);
            Image2D condition = make_condition(lab, selection, lm);
            if (cfg.exclude_empty && all_zero(condition)) continue;
            Image2D img = resize(image_slices[k], cfg.image_size, cfg.image_size,
                                 ResizeMode::bilinear);
            pairs.push_back({image_to_tensor(condition), image_to_tensor(img)});
        }
    }
    if (pairs.empty()) throw DataError("nifti dataset produced no usable slices");
    return pairs;
}

std::vector<TrainingPair> build_dataset(const RunConfig& cfg) {
    if (cfg.source == "phantom") {
        PhantomSpec spec;
        spec.size = cfg.image_size;
        spec.seed = cfg.phantom_seed;
        return phantom_dataset(spec, cfg.phantom_count);
    }
    return load_nifti_dataset(cfg);
}

}  // namespace maskforge
