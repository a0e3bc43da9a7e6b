#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace maskforge {

// Flat key=value configuration. Defaults are the full-scale reference profile;
// a config file overrides defaults, command-line key=value pairs override the file.
struct RunConfig {
    // training
    int64_t iterations = 100000;
    int batch_size = 16;
    double lr = 0.00013;
    double lambda = 0.012;
    int patch_size = 32;
    int image_size = 256;
    int depth = 7;
    int base_channels = 64;
    int channel_cap = 512;
    int d_base_channels = 64;
    int d_layers = 5;
    uint64_t seed = 1;
    std::vector<int64_t> milestones = {0, 10000, 25000, 50000, 75000, 100000};
    double ema_decay = 0.99;
    std::string loss_mode = "lse";  // lse | bce
    int holdout = 16;
    int grid_samples = 8;
    bool freeze_discriminator = false;
    // data
    std::string source = "phantom";  // phantom | nifti
    int64_t phantom_count = 200;
    uint64_t phantom_seed = 7;
    std::string data_dir;
    std::string selection = "WH";
    bool exclude_empty = true;  // drop slices whose condition is all background
    std::map<std::string, int> labels;  // keyed by structure name (label.Myo=205 style)

    void validate() const;
};

// Applies key=value text on top of defaults. `origin` names the source in
// error messages ("config file", "command line").
RunConfig parse_config(const std::string& text);
void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value,
                       const std::string& where);

// File (optional) then command-line overrides ("key=value" strings), then
// validation.
RunConfig resolve_config(const std::string& file_text, const std::vector<std::string>& overrides);

// Every effective key exactly once, one per line, stable order.
std::string echo_config(const RunConfig& cfg);

std::vector<std::string> split_csv(const std::string& s);

}  // namespace maskforge
