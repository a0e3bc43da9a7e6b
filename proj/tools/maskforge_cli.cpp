#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "maskforge/dataset_builder.hpp"
#include "maskforge/gradsuite.hpp"
#include "maskforge/image_io.hpp"
#include "maskforge/linalg.hpp"
#include "maskforge/nifti.hpp"
#include "maskforge/phantom.hpp"
#include "maskforge/trainer.hpp"

namespace {

using namespace maskforge;

std::string read_text_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Leftover tokens become config overrides; both --key=value and key=value
// spellings are accepted.
std::vector<std::string> overrides_from(const std::vector<std::string>& extras) {
    std::vector<std::string> out;
    for (std::string tok : extras) {
        while (!tok.empty() && tok.front() == '-') tok.erase(tok.begin());
        if (tok.find('=') == std::string::npos)
            throw CLI::ValidationError("overrides", "expected key=value, got '" + tok + "'");
        out.push_back(tok);
    }
    return out;
}

RunConfig resolve_from(const std::string& config_path, const std::vector<std::string>& extras) {
    const std::string text = config_path.empty() ? "" : read_text_file(config_path);
    return resolve_config(text, overrides_from(extras));
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& extras,
              const std::string& out_dir, const std::string& resume, int threads) {
    RunConfig cfg = resolve_from(config_path, extras);
    std::cout << echo_config(cfg) << std::flush;
    set_parallelism(threads);
    auto data = build_dataset(cfg);
    run_training(cfg, data, out_dir, resume);
    std::cout << "training complete: " << out_dir << "/metrics.csv\n";
    return 0;
}

int cmd_sample(const std::string& config_path, const std::vector<std::string>& extras,
               const std::string& checkpoint_path, const std::string& out_dir,
               const std::vector<std::string>& mask_paths, int count, int threads) {
    RunConfig cfg = resolve_from(config_path, extras);
    set_parallelism(threads);
    Trainer trainer(cfg);
    trainer.restore(load_checkpoint_file(checkpoint_path));

    std::vector<Image2D> conds, gens, targs;
    if (!mask_paths.empty()) {
        // Free-standing masks have no paired target; that column stays black.
        for (const auto& path : mask_paths) {
            Image2D mask = read_pgm(path);
            if (mask.h != cfg.image_size || mask.w != cfg.image_size)
                mask = resize(mask, cfg.image_size, cfg.image_size, ResizeMode::nearest);
            Tensor4 fake = trainer.generate(image_to_tensor(mask));
            conds.push_back(mask);
            gens.push_back(tensor_to_image(fake, 0, 0));
            targs.push_back(Image2D(cfg.image_size, cfg.image_size));
        }
    } else {
        auto data = build_dataset(cfg);
        contract(static_cast<int>(data.size()) > cfg.holdout,
                 "sample: dataset smaller than holdout");
        const size_t first = data.size() - static_cast<size_t>(cfg.holdout);
        const int n = std::min<int>(count > 0 ? count : cfg.grid_samples, cfg.holdout);
        for (int i = 0; i < n; ++i) {
            const auto& pair = data[first + static_cast<size_t>(i)];
            Tensor4 fake = trainer.generate(pair.condition);
            conds.push_back(tensor_to_image(pair.condition, 0, 0));
            gens.push_back(tensor_to_image(fake, 0, 0));
            targs.push_back(tensor_to_image(pair.target, 0, 0));
        }
    }
    std::filesystem::create_directories(out_dir);
    const std::string path = out_dir + "/samples.pgm";
    export_sample_grid(conds, gens, targs, path);
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_gradcheck(uint64_t seed, int instances) {
    constexpr double kThreshold = 1e-4;
    GradSuiteReport report = run_gradient_suite(seed, instances);
    std::cout << format_gradient_report(report, kThreshold) << std::flush;
    return report.passed(kThreshold) ? 0 : 3;
}

int cmd_phantom(int64_t count, int size, uint64_t seed, const std::string& out_dir) {
    PhantomSpec spec;
    spec.size = size;
    spec.seed = seed;
    spec.validate();
    std::filesystem::create_directories(out_dir);
    std::ofstream manifest(out_dir + "/manifest.txt", std::ios::trunc);
    if (!manifest) throw DataError("cannot open " + out_dir + "/manifest.txt for writing");
    for (int64_t i = 0; i < count; ++i) {
        TrainingPair pair = phantom_pair(spec, i);
        write_pgm(out_dir + "/phantom_" + std::to_string(i) + "_cond.pgm",
                  tensor_to_image(pair.condition, 0, 0));
        write_pgm(out_dir + "/phantom_" + std::to_string(i) + "_target.pgm",
                  tensor_to_image(pair.target, 0, 0));
        manifest << i << "," << seed << "," << size << "\n";
    }
    std::cout << "wrote " << count << " pairs to " << out_dir << "\n";
    return 0;
}

int cmd_nifti_info(const std::string& path) {
    NiftiInfo info = parse_nifti_info(read_file(path));
    std::cout << "dims=" << info.nx << "x" << info.ny << "x" << info.nz << "\n";
    std::cout << "spacing=" << info.sx << "x" << info.sy << "x" << info.sz << "\n";
    const char* type = info.datatype == 2 ? "uint8" : info.datatype == 4 ? "int16" : "float32";
    std::cout << "datatype=" << type << " (" << info.datatype << ")\n";
    std::cout << "vox_offset=" << info.vox_offset << "\n";
    std::cout << "scl_slope=" << info.scl_slope << "\n";
    std::cout << "scl_inter=" << info.scl_inter << "\n";
    std::cout << "magic=" << info.magic << "\n";
    std::cout << "byte_order=" << (info.swapped ? "swapped" : "native") << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mask-conditioned patch-GAN: train, sample, and inspect"};
    app.require_subcommand(1);

    std::string config_path, out_dir, resume, checkpoint_path, nifti_path;
    std::vector<std::string> mask_paths;
    uint64_t seed = 17;
    int instances = 20, threads = 1, sample_count = 0, size = 64;
    int64_t count = 200;

    CLI::App* train = app.add_subcommand("train", "run the training loop");
    train->add_option("--config", config_path, "flat key=value config file");
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_option("--resume", resume, "checkpoint to resume from");
    train->add_option("--threads", threads, "parallelism degree")->check(CLI::PositiveNumber);
    train->allow_extras();

    CLI::App* sample = app.add_subcommand("sample", "generate images from masks");
    sample->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    sample->add_option("--config", config_path, "flat key=value config file");
    sample->add_option("--out", out_dir, "output directory")->required();
    sample->add_option("--mask", mask_paths, "mask PGM (repeatable; default: held-out set)");
    sample->add_option("--count", sample_count, "rows in the grid")->check(CLI::PositiveNumber);
    sample->add_option("--threads", threads, "parallelism degree")->check(CLI::PositiveNumber);
    sample->allow_extras();

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck->add_option("--seed", seed, "suite seed");
    gradcheck->add_option("--instances", instances, "random instances per case")
        ->check(CLI::PositiveNumber);

    CLI::App* phantom = app.add_subcommand("phantom", "materialize a phantom dataset");
    phantom->add_option("--count", count, "number of pairs")->check(CLI::PositiveNumber);
    phantom->add_option("--size", size, "image size")->check(CLI::PositiveNumber);
    phantom->add_option("--seed", seed, "dataset seed");
    phantom->add_option("--out", out_dir, "output directory")->required();

    CLI::App* nifti_info = app.add_subcommand("nifti-info", "print parsed NIfTI header fields");
    nifti_info->add_option("file", nifti_path, "NIfTI-1 file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train->parsed())
            return cmd_train(config_path, train->remaining(), out_dir, resume, threads);
        if (sample->parsed())
            return cmd_sample(config_path, sample->remaining(), checkpoint_path, out_dir,
                              mask_paths, sample_count, threads);
        if (gradcheck->parsed()) return cmd_gradcheck(seed, instances);
        if (phantom->parsed()) return cmd_phantom(count, size, seed, out_dir);
        if (nifti_info->parsed()) return cmd_nifti_info(nifti_path);
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
