#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "veinpad/image.hpp"

namespace veinpad {

enum class DescriptorKind { LBP, LPQ, BSIF };
enum class SourceKind { Raw, NormalMap, DiffuseMap };

// L1-normalized descriptor histogram. Bin counts: LBP 59, LPQ 256, BSIF 2^k.
struct FeatureVector {
    std::vector<double> bins;
    DescriptorKind descriptor_kind = DescriptorKind::LBP;
    SourceKind source_kind = SourceKind::Raw;
};

// Learned BSIF filters: k zero-mean s x s kernels, linearly independent.
class FilterBank {
public:
    // filters[i] is row-major s*s. Validates zero-mean (1e-6) and linear
    // independence (Gram rank k).
    FilterBank(int k, int s, std::vector<std::vector<double>> filters,
               bool ica_converged = true);

    int k() const { return k_; }
    int s() const { return s_; }
    const std::vector<double>& filter(int i) const { return filters_[i]; }
    // False when filter learning hit its iteration cap before the fixed
    // point; the bank is still the best iterate seen.
    bool ica_converged() const { return ica_converged_; }

private:
    int k_;
    int s_;
    std::vector<std::vector<double>> filters_;
    bool ica_converged_;
};

// --- LBP: 8 neighbors, radius 1, bilinear interpolation at the diagonals,
// bit_i = 1 iff neighbor_i >= center, uniform-2 mapping to 59 bins.
// Interpolated values are computed as center + sum w_i*(corner_i - center) so
// a constant neighborhood compares exactly equal to its center.
std::vector<std::uint64_t> lbp_counts(const GrayImage& image);
FeatureVector lbp_histogram(const GrayImage& image);

// --- LPQ: 7x7 short-time Fourier window at frequencies (a,0),(0,a),(a,a),
// (a,-a) with a=1/7; responses are center-subtracted sums (the basis has no
// DC component, so this is the same coefficient with exact zeros on constant
// windows); the 8-vector [Re f1, Im f1, ..., Re f4, Im f4] is decorrelated
// with the rho=0.9 correlation model; bit_j = 1 iff whitened_j > 0.
std::vector<std::uint64_t> lpq_counts(const GrayImage& image);
FeatureVector lpq_histogram(const GrayImage& image);

// The 8x8 decorrelation matrix V (row-major; columns are eigenvectors of the
// window-correlation-transformed covariance, eigenvalues descending, each
// column's largest-magnitude entry positive). Exposed so the whitening can be
// validated independently of the histogram path.
std::array<double, 64> lpq_decorrelation();

// --- BSIF: response_i(p) = sum_t filter_i[t] * (I[p+t] - I[p]) over the s x s
// window (valid positions only); bit_i = 1 iff response_i > 0.
std::vector<std::uint64_t> bsif_counts(const GrayImage& image, const FilterBank& bank);
FeatureVector bsif_histogram(const GrayImage& image, const FilterBank& bank);

// ICA filter learning on s x s patches: per-dimension mean centering, PCA
// whitening to k components, fixed-point ICA with the cubic nonlinearity and
// symmetric decorrelation (max 200 iterations, tol 1e-5, seeded start).
FilterBank learn_bsif_filters(const std::vector<std::vector<double>>& patches, int k, int s,
                              std::uint64_t seed);

// Text format: "BSIF k s" header then k*s*s reals; round-trips bitwise.
void save_filter_bank(const FilterBank& bank, const std::filesystem::path& path);
FilterBank load_filter_bank(const std::filesystem::path& path);

// --- dispatch over map sources -----------------------------------------
// Normal maps feed descriptors as three gray channels (v+1)/2; channel
// histograms are concatenated and L1-renormalized.
std::vector<GrayImage> normal_channels(const NormalMap& normals);

FeatureVector extract(const GrayImage& raw, DescriptorKind kind,
                      const FilterBank* bank = nullptr);
FeatureVector extract(const ScalarMap& diffuse, DescriptorKind kind,
                      const FilterBank* bank = nullptr);
FeatureVector extract(const NormalMap& normals, DescriptorKind kind,
                      const FilterBank* bank = nullptr);

// Shared multi-channel path (the pipeline uses it with externally quantized
// channels so cached and in-memory maps extract identically).
FeatureVector extract_channels(const std::vector<GrayImage>& channels, DescriptorKind kind,
                               const FilterBank* bank, SourceKind source);

} // namespace veinpad
