#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "veinpad/errors.hpp"
#include "veinpad/image.hpp"

namespace veinpad {

// Scored samples of one evaluation run. Higher score means more bona fide;
// a sample is accepted as bona fide iff score >= threshold.
struct ScoreSet {
    std::vector<double> scores;
    std::vector<PresentationLabel> labels;
    std::vector<std::string> sample_ids; // optional, parallel when non-empty

    void validate() const;
    std::size_t size() const { return scores.size(); }
};

struct ErrorRates {
    double apcer = 0.0; // attacks accepted as bona fide
    double bpcer = 0.0; // bona fide rejected
};

struct DetPoint {
    double threshold = 0.0;
    double apcer = 0.0;
    double bpcer = 0.0;
};

struct EerResult {
    double threshold = 0.0;
    double eer = 0.0;
    double apcer = 0.0;
    double bpcer = 0.0;
};

// Both error rates at one decision threshold. Requires both classes present.
ErrorRates apcer_bpcer(const ScoreSet& set, double threshold);

// Threshold minimizing |APCER - BPCER| over all distinct scores plus the two
// sentinels min-1 (accept all) and max+1 (reject all); ties pick the lower
// threshold. The reported rate is the mean of the two errors there.
EerResult d_eer(const ScoreSet& set);

// Lowest BPCER among thresholds with APCER <= target. The reject-all
// sentinel always qualifies, so the result exists for every target >= 0.
double bpcer_at_apcer(const ScoreSet& set, double apcer_target);

// One point per distinct score ascending, plus the reject-all sentinel.
// APCER is non-increasing and BPCER non-decreasing along the curve; the
// first point is (1, 0) and the last (0, 1) when both classes are present.
std::vector<DetPoint> det_curve(const ScoreSet& set);

// (s - min) / (max - min) clamped to [0, 1]. Fixed-range overload for
// normalizing against training statistics rather than the batch itself.
std::vector<double> minmax_normalize(const std::vector<double>& scores);
double minmax_normalize(double score, double min_value, double max_value);

// Arithmetic mean across classifiers, per sample. Inner vectors are one
// classifier's scores each and must agree in length.
std::vector<double> sum_rule_fuse(const std::vector<std::vector<double>>& per_classifier);

// CSV persistence: header "sample_id,label,score", scores %.17g.
void save_scores(const ScoreSet& set, const std::filesystem::path& path);
ScoreSet load_scores(const std::filesystem::path& path);

// CSV "threshold,apcer,bpcer" with %.6f values.
void save_det_table(const std::vector<DetPoint>& curve, const std::filesystem::path& path);

// Standalone SVG, log-log axes, one polyline per named curve.
void write_det_svg(const std::vector<std::pair<std::string, std::vector<DetPoint>>>& curves,
                   const std::filesystem::path& path);

} // namespace veinpad
