#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "veinpad/descriptors.hpp"
#include "veinpad/image.hpp"

namespace veinpad {

struct TrainConfig {
    double c = 1.0;       // hinge penalty
    int epochs = 200;
    double tol = 1e-6;    // stop when the maximal optimality violation drops below this
    std::uint64_t seed = 0;

    void validate() const;
};

// Identifies which pipeline slot a model was trained for.
struct TrainMeta {
    DescriptorKind descriptor_kind = DescriptorKind::LBP;
    SourceKind source_kind = SourceKind::Raw;
    int illumination = 1;
};

// Linear max-margin classifier with the feature scaling frozen at training
// time. Higher score means more bona fide.
struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    std::vector<double> feature_min;
    std::vector<double> feature_max;
    // Training score range, kept for min-max normalization before fusion.
    double score_min = 0.0;
    double score_max = 1.0;
    TrainMeta meta;
};

// Solver diagnostics for tests and the training report.
struct TrainReport {
    std::vector<double> dual_objective; // after each epoch
    double final_violation = 0.0;
    int epochs_run = 0;
    double primal_objective = 0.0;
};

// Trains the C-SVM  min 1/2|w|^2 + C sum hinge(y_i (w.x_i + b))  on min-max
// scaled features by pairwise dual coordinate ascent: each epoch sweeps a
// seed-derived permutation, pairs the swept index with its maximal-violating
// partner, and solves that two-variable subproblem exactly. Deterministic.
LinearModel train(const std::vector<FeatureVector>& features,
                  const std::vector<PresentationLabel>& labels, const TrainConfig& config,
                  const TrainMeta& meta = {}, TrainReport* report = nullptr);

// w . scale(x) + b, scaled values clamped to [-0.5, 1.5]; constant training
// dimensions contribute 0 regardless of the test value.
double score(const LinearModel& model, const FeatureVector& feature);

// Text model file; reload is bitwise.
void save_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_model(const std::filesystem::path& path);

const char* descriptor_name(DescriptorKind kind);
const char* source_name(SourceKind kind);
DescriptorKind descriptor_from_name(const std::string& name);
SourceKind source_from_name(const std::string& name);

} // namespace veinpad
