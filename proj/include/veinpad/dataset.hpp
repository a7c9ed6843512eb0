#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "veinpad/image.hpp"

namespace veinpad {

struct ManifestEntry {
    std::string subject_id;
    int session = 1;       // 1|2
    int illumination = 1;  // 1|2|3
    PresentationLabel label = PresentationLabel::BonaFide;
    std::string path;      // relative to the manifest's directory
};

// Validated collection of capture records. Every subject must carry the full
// 2 sessions x 3 illuminations grid for each label it appears with.
struct Manifest {
    std::filesystem::path root; // directory image paths resolve against
    std::vector<ManifestEntry> entries;

    void validate() const;
    std::vector<std::string> subjects() const; // sorted unique ids
    std::size_t count_label(PresentationLabel label) const;
    std::filesystem::path resolve(const ManifestEntry& e) const { return root / e.path; }
};

struct SplitConfig {
    int n_train_subjects = 36;
    int n_test_subjects = 42;
    std::uint64_t seed = 0;
};

struct SynthConfig {
    int n_subjects = 78;
    int width = 744;
    int height = 480;
    int vein_count_min = 4;
    int vein_count_max = 8;
    double vein_width_min = 3.5;   // gaussian cross-profile width, px
    double vein_width_max = 9.0;
    double vein_contrast_min = 0.18;
    double vein_contrast_max = 0.40;
    std::array<double, 3> illumination_scales{0.8, 1.0, 1.2};
    double sensor_noise_sigma = 0.012;
    double halftone_period = 4.0;      // px, print screen pitch
    double halftone_amplitude = 0.008; // multiplicative screen depth on albedo
    double paper_grain_amplitude = 0.01;
    double normal_flattening = 0.75;   // 0 keeps geometry, 1 prints perfectly flat
    std::uint64_t seed = 0;

    void validate() const;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Seeded permutation over the sorted subject ids; first n_train subjects'
// entries become the train manifest, the next n_test the test manifest.
std::pair<Manifest, Manifest> subject_disjoint_split(const Manifest& manifest,
                                                     const SplitConfig& config);

// Binary P5 graymap, maxval 255.
GrayImage read_image(const std::filesystem::path& path);
void write_image(const GrayImage& image, const std::filesystem::path& path);

// Portable float maps (little-endian, bottom-up scanlines) for debug dumps:
// "Pf" for scalar fields, "PF" with normals in the three channels.
void write_pfm(const ScalarMap& map, const std::filesystem::path& path);
void write_pfm(const NormalMap& map, const std::filesystem::path& path);
ScalarMap read_pfm_scalar(const std::filesystem::path& path);
NormalMap read_pfm_normals(const std::filesystem::path& path);

// Renders the synthetic capture set under out_dir and writes
// out_dir/manifest.csv. Bona fide images are Lambertian renders of a smooth
// finger height-field with dark vein curves in the albedo; attacks re-render
// the same albedo through a halftone screen and paper grain with the geometry
// flattened toward the camera. Bit-deterministic for a given config.
Manifest synth_generate(const SynthConfig& config, const std::filesystem::path& out_dir);

} // namespace veinpad
