#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "veinpad/classifier.hpp"
#include "veinpad/dataset.hpp"
#include "veinpad/decomposition.hpp"
#include "veinpad/descriptors.hpp"
#include "veinpad/metrics.hpp"

namespace veinpad {

// Knobs for one end-to-end run; commands take the subsets they consume.
struct PipelineConfig {
    DescriptorKind descriptor = DescriptorKind::BSIF;
    bool use_decomposition = true; // false: descriptors on raw images (baseline)
    SolverConfig solver;
    TrainConfig train;
    SplitConfig split;
    int bsif_k = 8;
    int bsif_s = 11;
    // Optional pre-learned filter bank; empty means learn one from the
    // training partition's bona fide images.
    std::filesystem::path bsif_bank_path;
};

// Quantize through the 8-bit codec. Descriptors in the pipeline always see
// quantized maps, so a cached map file and an in-memory map extract
// identically.
GrayImage quantize8(const GrayImage& image);

// Canonical cache key for one capture, independent of where the manifest
// lives: "S001_s1_i2_bonafide".
std::string map_cache_stem(const ManifestEntry& entry);

// Quantized decomposition products of one image, ready for descriptors.
struct DecomposedMaps {
    std::vector<GrayImage> normal_channels; // x, y, z as (v+1)/2
    GrayImage diffuse;
};

// Returns the cached maps when all four graymaps exist under cache_dir,
// otherwise decomposes and (if cache_dir is non-empty) writes them.
DecomposedMaps decomposed_maps(const GrayImage& image, const ManifestEntry& entry,
                               const SolverConfig& solver,
                               const std::filesystem::path& cache_dir);

// Feature of one manifest entry for one source kind. Raw sources skip
// decomposition entirely.
FeatureVector entry_feature(const GrayImage& image, const ManifestEntry& entry,
                            SourceKind source, DescriptorKind kind, const FilterBank* bank,
                            const SolverConfig& solver, const std::filesystem::path& cache_dir);

// Filter bank learned from randomly placed patches of the manifest's bona
// fide images (at least 5000 patches, more per image on small sets).
FilterBank learn_bank_from_manifest(const Manifest& manifest, int k, int s, std::uint64_t seed);

// --- commands (the CLI maps exceptions from these to exit codes) ---------

// Dataset under out_dir plus out_dir/manifest.csv.
Manifest cmd_synth(const SynthConfig& config, const std::filesystem::path& out_dir);

// Decompose every manifest image into maps_dir (skips already-cached ones).
void cmd_decompose(const Manifest& manifest, const SolverConfig& solver,
                   const std::filesystem::path& maps_dir);

// Feature table for auditing: one CSV row per entry and source.
void cmd_extract(const Manifest& manifest, const PipelineConfig& config,
                 const std::filesystem::path& maps_dir, const std::filesystem::path& out_file);

// Splits the manifest, trains one model per (source, illumination), and
// writes the bundle directory: config.txt, train/test manifests, models,
// the filter bank when the descriptor needs one, and training_report.txt.
// A partially written bundle is removed on failure.
void cmd_train(const Manifest& manifest, const PipelineConfig& config,
               const std::filesystem::path& maps_dir, const std::filesystem::path& bundle_dir);

struct EvalSummary {
    double fused_deer = 0.0;
    double fused_bpcer_at_5 = 0.0;
    double fused_bpcer_at_10 = 0.0;
};

// Scores the bundle's test manifest: per-model score files, fused scores
// (per presentation, models normalized by their training score range and
// averaged), DET table of the fused scores, and report.txt.
EvalSummary cmd_eval(const std::filesystem::path& bundle_dir,
                     const std::filesystem::path& maps_dir, const std::filesystem::path& out_dir);

// Per-file DET tables plus one combined SVG under out_dir.
void cmd_det(const std::vector<std::filesystem::path>& score_files,
             const std::filesystem::path& out_dir);

} // namespace veinpad
