#include "maskforge/config.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "maskforge/errors.hpp"
#include "maskforge/preprocess.hpp"

namespace maskforge {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

int64_t parse_i64(const std::string& v, const std::string& key, const std::string& where) {
    try {
        size_t used = 0;
        const int64_t out = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw DataError(where + ": value for " + key + " is not an integer: '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& v, const std::string& key, const std::string& where) {
    try {
        size_t used = 0;
        const uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw DataError(where + ": value for " + key + " is not an unsigned integer: '" + v + "'");
    }
}

double parse_f64(const std::string& v, const std::string& key, const std::string& where) {
    try {
        size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw DataError(where + ": value for " + key + " is not a number: '" + v + "'");
    }
}

bool parse_flag(const std::string& v, const std::string& key, const std::string& where) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw DataError(where + ": value for " + key + " must be 0/1/true/false, got '" + v + "'");
}

int parse_int(const std::string& v, const std::string& key, const std::string& where) {
    const int64_t out = parse_i64(v, key, where);
    if (out < INT32_MIN || out > INT32_MAX)
        throw DataError(where + ": value for " + key + " out of range: '" + v + "'");
    return static_cast<int>(out);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value,
                       const std::string& where) {
    if (key == "iterations") cfg.iterations = parse_i64(value, key, where);
    else if (key == "batch_size") cfg.batch_size = parse_int(value, key, where);
    else if (key == "lr") cfg.lr = parse_f64(value, key, where);
    else if (key == "lambda") cfg.lambda = parse_f64(value, key, where);
    else if (key == "patch_size") cfg.patch_size = parse_int(value, key, where);
    else if (key == "image_size") cfg.image_size = parse_int(value, key, where);
    else if (key == "depth") cfg.depth = parse_int(value, key, where);
    else if (key == "base_channels") cfg.base_channels = parse_int(value, key, where);
    else if (key == "channel_cap") cfg.channel_cap = parse_int(value, key, where);
    else if (key == "d_base_channels") cfg.d_base_channels = parse_int(value, key, where);
    else if (key == "d_layers") cfg.d_layers = parse_int(value, key, where);
    else if (key == "seed") cfg.seed = parse_u64(value, key, where);
    else if (key == "milestones") {
        cfg.milestones.clear();
        for (const auto& part : split_csv(value))
            cfg.milestones.push_back(parse_i64(part, key, where));
    } else if (key == "ema_decay") cfg.ema_decay = parse_f64(value, key, where);
    else if (key == "loss_mode") cfg.loss_mode = value;
    else if (key == "holdout") cfg.holdout = parse_int(value, key, where);
    else if (key == "grid_samples") cfg.grid_samples = parse_int(value, key, where);
    else if (key == "freeze_discriminator") cfg.freeze_discriminator = parse_flag(value, key, where);
    else if (key == "source") cfg.source = value;
    else if (key == "phantom_count") cfg.phantom_count = parse_i64(value, key, where);
    else if (key == "phantom_seed") cfg.phantom_seed = parse_u64(value, key, where);
    else if (key == "data_dir") cfg.data_dir = value;
    else if (key == "selection") cfg.selection = value;
    else if (key == "exclude_empty") cfg.exclude_empty = parse_flag(value, key, where);
    else if (key.rfind("label.", 0) == 0) {
        const std::string name = key.substr(6);
        const auto& names = LabelMap::structure_names();
        if (std::find(names.begin(), names.end(), name) == names.end())
            throw DataError(where + ": unknown structure in key '" + key + "'");
        cfg.labels[name] = parse_int(value, key, where);
    } else {
        throw DataError(where + ": unknown key '" + key + "'");
    }
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = "config file line " + std::to_string(lineno);
        if (eq == std::string::npos)
            throw DataError(where + ": expected key=value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw DataError(where + ": empty key");
        apply_config_line(cfg, key, value, where);
    }
    return cfg;
}

RunConfig resolve_config(const std::string& file_text, const std::vector<std::string>& overrides) {
    RunConfig cfg = parse_config(file_text);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw DataError("command line: expected key=value, got '" + kv + "'");
        apply_config_line(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)), "command line");
    }
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    contract(iterations >= 1, "iterations must be >= 1");
    contract(batch_size >= 1, "batch_size must be >= 1");
    contract(lr > 0, "lr must be positive");
    contract(lambda >= 0, "lambda must be >= 0");
    contract(patch_size >= 2, "patch_size must be >= 2");
    contract(image_size >= 8, "image_size must be >= 8");
    contract(depth >= 1, "depth must be >= 1");
    contract(base_channels >= 1 && channel_cap >= base_channels, "generator widths invalid");
    contract(d_base_channels >= 1, "d_base_channels must be >= 1");
    contract(d_layers >= 2, "d_layers must be >= 2");
    contract(ema_decay >= 0 && ema_decay < 1, "ema_decay must be in [0,1)");
    contract(loss_mode == "lse" || loss_mode == "bce",
             "loss_mode must be lse or bce, got '" + loss_mode + "'");
    contract(holdout >= 1, "holdout must be >= 1");
    contract(grid_samples >= 1 && grid_samples <= holdout,
             "grid_samples must be in [1, holdout]");
    for (int64_t m : milestones)
        contract(m >= 0 && m <= iterations,
                 "milestone " + std::to_string(m) + " outside [0, iterations]");
    if (source == "phantom") {
        contract(phantom_count >= 1, "phantom_count must be >= 1");
        contract(phantom_count > holdout,
                 "phantom_count must exceed holdout (" + std::to_string(holdout) + ")");
    } else if (source == "nifti") {
        if (data_dir.empty()) throw DataError("missing required dataset path (data_dir)");
        LabelMap lm;
        for (const auto& name : LabelMap::structure_names()) {
            const auto it = labels.find(name);
            if (it == labels.end())
                throw DataError("missing label." + name + " (required for nifti source)");
            lm.labels.push_back(it->second);
        }
        lm.validate();
        contract(!split_csv(selection).empty(), "selection must not be empty");
    } else {
        throw DataError("source must be phantom or nifti, got '" + source + "'");
    }
}

std::string echo_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "iterations=" << cfg.iterations << "\n";
    out << "batch_size=" << cfg.batch_size << "\n";
    out << "lr=" << fmt_double(cfg.lr) << "\n";
    out << "lambda=" << fmt_double(cfg.lambda) << "\n";
    out << "patch_size=" << cfg.patch_size << "\n";
    out << "image_size=" << cfg.image_size << "\n";
    out << "depth=" << cfg.depth << "\n";
    out << "base_channels=" << cfg.base_channels << "\n";
    out << "channel_cap=" << cfg.channel_cap << "\n";
    out << "d_base_channels=" << cfg.d_base_channels << "\n";
    out << "d_layers=" << cfg.d_layers << "\n";
    out << "seed=" << cfg.seed << "\n";
    out << "milestones=";
    for (size_t i = 0; i < cfg.milestones.size(); ++i)
        out << (i ? "," : "") << cfg.milestones[i];
    out << "\n";
    out << "ema_decay=" << fmt_double(cfg.ema_decay) << "\n";
    out << "loss_mode=" << cfg.loss_mode << "\n";
    out << "holdout=" << cfg.holdout << "\n";
    out << "grid_samples=" << cfg.grid_samples << "\n";
    out << "freeze_discriminator=" << (cfg.freeze_discriminator ? 1 : 0) << "\n";
    out << "source=" << cfg.source << "\n";
    if (cfg.source == "phantom") {
        out << "phantom_count=" << cfg.phantom_count << "\n";
        out << "phantom_seed=" << cfg.phantom_seed << "\n";
    } else {
        out << "data_dir=" << cfg.data_dir << "\n";
        out << "selection=" << cfg.selection << "\n";
        out << "exclude_empty=" << (cfg.exclude_empty ? 1 : 0) << "\n";
        for (const auto& name : LabelMap::structure_names()) {
            const auto it = cfg.labels.find(name);
            if (it != cfg.labels.end()) out << "label." << name << "=" << it->second << "\n";
        }
    }
    return out.str();
}

}  // namespace maskforge
