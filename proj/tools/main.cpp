#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "veinpad/pipeline.hpp"

namespace {

// 0 success, 2 usage, 3 data (parse/IO/contract), 4 compute.
constexpr int kUsageExit = 2;
constexpr int kDataExit = 3;
constexpr int kComputeExit = 4;

veinpad::DescriptorKind parse_descriptor(const std::string& name) {
    return veinpad::descriptor_from_name(name);
}

bool parse_mode(const std::string& mode) {
    if (mode == "proposed") return true;
    if (mode == "baseline") return false;
    throw CLI::ValidationError("--mode", "expected 'proposed' or 'baseline'");
}

std::filesystem::path default_maps_dir(const std::filesystem::path& manifest_path) {
    return manifest_path.parent_path() / "maps";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finger-vein presentation attack detection toolkit"};
    app.require_subcommand(1);

    std::string manifest_path, out_path, maps_path, bank_path;
    std::string descriptor = "bsif", mode = "proposed";
    std::uint64_t seed = 0;
    double svm_c = 1.0;
    int subjects = 78, width = 744, height = 480;
    std::vector<std::string> score_files;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic capture dataset");
    synth->add_option("--out", out_path, "Output dataset directory")->required();
    synth->add_option("--subjects", subjects, "Number of subjects");
    synth->add_option("--width", width, "Image width");
    synth->add_option("--height", height, "Image height");
    synth->add_option("--seed", seed, "Generator seed");

    auto* decompose = app.add_subcommand("decompose", "Decompose manifest images into maps");
    decompose->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    decompose->add_option("--out", maps_path, "Map cache directory (default <dataset>/maps)");

    auto* extract = app.add_subcommand("extract", "Write a descriptor feature table");
    extract->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    extract->add_option("--out", out_path, "Output CSV file")->required();
    extract->add_option("--descriptor", descriptor, "lbp|lpq|bsif");
    extract->add_option("--mode", mode, "proposed|baseline");
    extract->add_option("--maps", maps_path, "Map cache directory");
    extract->add_option("--bsif-bank", bank_path, "Filter bank file (required for bsif)");

    auto* train = app.add_subcommand("train", "Split, extract, and train the SVMs");
    train->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    train->add_option("--out", out_path, "Model bundle directory")->required();
    train->add_option("--descriptor", descriptor, "lbp|lpq|bsif");
    train->add_option("--mode", mode, "proposed|baseline");
    train->add_option("--seed", seed, "Split/training seed");
    train->add_option("--svm-c", svm_c, "Hinge penalty C");
    train->add_option("--maps", maps_path, "Map cache directory");
    train->add_option("--bsif-bank", bank_path, "Import a filter bank instead of learning");
    int split_train = 36, split_test = 42;
    train->add_option("--train-subjects", split_train, "Training subjects");
    train->add_option("--test-subjects", split_test, "Test subjects");

    auto* eval = app.add_subcommand("eval", "Score a bundle's test set and report metrics");
    std::string bundle_path;
    eval->add_option("--bundle", bundle_path, "Model bundle directory")->required();
    eval->add_option("--out", out_path, "Output directory")->required();
    eval->add_option("--maps", maps_path, "Map cache directory override");

    auto* det = app.add_subcommand("det", "DET tables and a combined plot from score files");
    det->add_option("scores", score_files, "Score CSV files")->required();
    det->add_option("--out", out_path, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageExit;
    }

    try {
        if (synth->parsed()) {
            veinpad::SynthConfig config;
            config.n_subjects = subjects;
            config.width = width;
            config.height = height;
            config.seed = seed;
            config.validate();
            const veinpad::Manifest m = veinpad::cmd_synth(config, out_path);
            std::printf("wrote %zu images under %s\n", m.entries.size(), out_path.c_str());
        } else if (decompose->parsed()) {
            const veinpad::Manifest m = veinpad::load_manifest(manifest_path);
            const std::filesystem::path maps =
                maps_path.empty() ? default_maps_dir(manifest_path)
                                  : std::filesystem::path(maps_path);
            veinpad::cmd_decompose(m, veinpad::SolverConfig{}, maps);
            std::printf("decomposed %zu images into %s\n", m.entries.size(),
                        maps.string().c_str());
        } else if (extract->parsed()) {
            const veinpad::Manifest m = veinpad::load_manifest(manifest_path);
            veinpad::PipelineConfig config;
            config.descriptor = parse_descriptor(descriptor);
            config.use_decomposition = parse_mode(mode);
            config.bsif_bank_path = bank_path;
            const std::filesystem::path maps =
                maps_path.empty() ? default_maps_dir(manifest_path)
                                  : std::filesystem::path(maps_path);
            veinpad::cmd_extract(m, config, maps, out_path);
            std::printf("wrote features to %s\n", out_path.c_str());
        } else if (train->parsed()) {
            const veinpad::Manifest m = veinpad::load_manifest(manifest_path);
            veinpad::PipelineConfig config;
            config.descriptor = parse_descriptor(descriptor);
            config.use_decomposition = parse_mode(mode);
            config.bsif_bank_path = bank_path;
            config.train.c = svm_c;
            config.train.seed = seed;
            config.split.seed = seed;
            config.split.n_train_subjects = split_train;
            config.split.n_test_subjects = split_test;
            config.solver.seed = seed;
            const std::filesystem::path maps =
                maps_path.empty() ? default_maps_dir(manifest_path)
                                  : std::filesystem::path(maps_path);
            veinpad::cmd_train(m, config, maps, out_path);
            std::printf("bundle written to %s\n", out_path.c_str());
        } else if (eval->parsed()) {
            const veinpad::EvalSummary s =
                veinpad::cmd_eval(bundle_path, maps_path, out_path);
            std::printf("fused d_eer=%.6f bpcer_at_apcer5=%.6f bpcer_at_apcer10=%.6f\n",
                        s.fused_deer, s.fused_bpcer_at_5, s.fused_bpcer_at_10);
        } else if (det->parsed()) {
            std::vector<std::filesystem::path> files(score_files.begin(), score_files.end());
            veinpad::cmd_det(files, out_path);
            std::printf("DET outputs written to %s\n", out_path.c_str());
        }
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsageExit;
    } catch (const veinpad::ParseError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kDataExit;
    } catch (const veinpad::IoError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kDataExit;
    } catch (const veinpad::DimensionError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kDataExit;
    } catch (const veinpad::ContractError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kDataExit;
    } catch (const veinpad::Error& e) {
        std::fprintf(stderr, "compute error: %s\n", e.what());
        return kComputeExit;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "compute error: %s\n", e.what());
        return kComputeExit;
    }
    return 0;
}
