#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is written the slow, obvious way on purpose: plain
// per-pixel loops, exhaustive threshold sweeps, a generic projected-gradient
// solver. None of it shares code with src/.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "veinpad/descriptors.hpp"
#include "veinpad/image.hpp"
#include "veinpad/metrics.hpp"

namespace veinpad::testing {

// --- descriptor references (per-pixel nested loops) -----------------------

std::vector<std::uint64_t> ref_lbp_counts(const GrayImage& image);
std::vector<std::uint64_t> ref_lpq_counts(const GrayImage& image);
std::vector<std::uint64_t> ref_bsif_counts(const GrayImage& image, const FilterBank& bank);

// The 8x49 LPQ Fourier basis (rows Re f1, Im f1, ..., taps row-major) and the
// 8x8 covariance of the correlation model, built from scratch so the
// library's decorrelation matrix can be verified without trusting it.
std::array<std::array<double, 49>, 8> ref_lpq_basis();
std::array<double, 64> ref_lpq_covariance();

// --- metric references (exhaustive sweeps) --------------------------------

struct RefRates {
    double apcer = 0.0;
    double bpcer = 0.0;
};

RefRates ref_rates(const ScoreSet& set, double threshold);

struct RefEer {
    double threshold = 0.0;
    double eer = 0.0;
    double apcer = 0.0;
    double bpcer = 0.0;
};

// Enumerates every distinct score plus accept-all / reject-all sentinels.
RefEer ref_d_eer(const ScoreSet& set);
double ref_bpcer_at_apcer(const ScoreSet& set, double target);
std::vector<DetPoint> ref_det_curve(const ScoreSet& set);

// --- SVM reference ---------------------------------------------------------

// Maximizes the C-SVM dual (linear kernel, bias through the equality
// constraint) by projected gradient ascent on raw sample rows. Returns the
// final dual objective.
double ref_svm_dual_optimum(const std::vector<std::vector<double>>& samples,
                            const std::vector<int>& labels, double c);

// The library trains on min-max scaled features; this mirrors that scaling
// so the reference optimizes the same problem.
std::vector<std::vector<double>> ref_minmax_scale(const std::vector<std::vector<double>>& samples);

// --- shared synthetic render scenes ----------------------------------------

struct RenderScene {
    GrayImage image;
    NormalMap true_normals;
    ScalarMap true_albedo;
    LightingCoeffs true_lighting;
};

// Finger-like Lambertian render with known ground truth: a blended cylinder
// profile with gentle bumps, dark vein curves in the albedo, near-frontal
// lighting. Deterministic per index.
RenderScene make_render_scene(int index, int width, int height);

// Mean angular error between two normal fields, in degrees.
double mean_angular_error_deg(const NormalMap& a, const NormalMap& b);

// --- misc -------------------------------------------------------------------

// Self-deleting unique temp directory.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Runs the CLI binary named by the VEINPAD_CLI environment variable with the
// given arguments, stdout/stderr discarded; returns the exit code (-1 when
// the variable is unset or the process did not exit normally).
int run_cli(const std::vector<std::string>& args);

GrayImage random_image(int width, int height, std::uint64_t seed);

} // namespace veinpad::testing
