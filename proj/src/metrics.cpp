#include "veinpad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace veinpad {

void ScoreSet::validate() const {
    if (scores.size() != labels.size()) {
        throw ContractError("ScoreSet: score/label count mismatch");
    }
    if (!sample_ids.empty() && sample_ids.size() != scores.size()) {
        throw ContractError("ScoreSet: sample_id count mismatch");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) throw ContractError("ScoreSet: non-finite score");
    }
}

namespace {

struct ClassCounts {
    std::size_t n_attack = 0;
    std::size_t n_bona = 0;
};

ClassCounts count_classes(const ScoreSet& set) {
    ClassCounts c;
    for (const auto lab : set.labels) {
        (lab == PresentationLabel::Attack ? c.n_attack : c.n_bona)++;
    }
    if (c.n_attack == 0 || c.n_bona == 0) {
        throw ContractError("ScoreSet: both classes required");
    }
    return c;
}

ErrorRates rates_at(const ScoreSet& set, const ClassCounts& c, double threshold) {
    std::size_t attack_accepted = 0, bona_rejected = 0;
    for (std::size_t i = 0; i < set.scores.size(); ++i) {
        const bool accepted = set.scores[i] >= threshold;
        if (set.labels[i] == PresentationLabel::Attack) {
            attack_accepted += accepted ? 1 : 0;
        } else {
            bona_rejected += accepted ? 0 : 1;
        }
    }
    return {static_cast<double>(attack_accepted) / static_cast<double>(c.n_attack),
            static_cast<double>(bona_rejected) / static_cast<double>(c.n_bona)};
}

// Distinct scores ascending plus accept-all / reject-all sentinels.
std::vector<double> candidate_thresholds(const ScoreSet& set) {
    std::set<double> distinct(set.scores.begin(), set.scores.end());
    std::vector<double> out(distinct.begin(), distinct.end());
    out.insert(out.begin(), out.front() - 1.0);
    out.push_back(out.back() + 1.0);
    return out;
}

} // namespace

ErrorRates apcer_bpcer(const ScoreSet& set, double threshold) {
    set.validate();
    if (set.scores.empty()) throw ContractError("apcer_bpcer: empty score set");
    return rates_at(set, count_classes(set), threshold);
}

EerResult d_eer(const ScoreSet& set) {
    set.validate();
    if (set.scores.empty()) throw ContractError("d_eer: empty score set");
    const ClassCounts counts = count_classes(set);
    EerResult best;
    double best_gap = 1e300;
    for (const double t : candidate_thresholds(set)) {
        const ErrorRates r = rates_at(set, counts, t);
        const double gap = std::abs(r.apcer - r.bpcer);
        if (gap < best_gap) { // strict: ties keep the lower threshold
            best_gap = gap;
            best = {t, (r.apcer + r.bpcer) / 2.0, r.apcer, r.bpcer};
        }
    }
    return best;
}

double bpcer_at_apcer(const ScoreSet& set, double apcer_target) {
    set.validate();
    if (set.scores.empty()) throw ContractError("bpcer_at_apcer: empty score set");
    if (apcer_target < 0.0 || apcer_target > 1.0) {
        throw ContractError("bpcer_at_apcer: target outside [0, 1]");
    }
    const ClassCounts counts = count_classes(set);
    double best = 1.0; // reject-all sentinel has APCER 0, BPCER 1
    for (const double t : candidate_thresholds(set)) {
        const ErrorRates r = rates_at(set, counts, t);
        if (r.apcer <= apcer_target) best = std::min(best, r.bpcer);
    }
    return best;
}

std::vector<DetPoint> det_curve(const ScoreSet& set) {
    set.validate();
    if (set.scores.empty()) throw ContractError("det_curve: empty score set");
    const ClassCounts counts = count_classes(set);
    std::set<double> distinct(set.scores.begin(), set.scores.end());
    std::vector<double> thresholds(distinct.begin(), distinct.end());
    thresholds.push_back(thresholds.back() + 1.0);
    std::vector<DetPoint> curve;
    curve.reserve(thresholds.size());
    for (const double t : thresholds) {
        const ErrorRates r = rates_at(set, counts, t);
        curve.push_back({t, r.apcer, r.bpcer});
    }
    return curve;
}

std::vector<double> minmax_normalize(const std::vector<double>& scores) {
    if (scores.empty()) throw ContractError("minmax_normalize: empty input");
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi == lo) throw NormalizationError("minmax_normalize: constant scores");
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::clamp((scores[i] - lo) / (hi - lo), 0.0, 1.0);
    }
    return out;
}

double minmax_normalize(double score, double min_value, double max_value) {
    if (max_value == min_value) throw NormalizationError("minmax_normalize: empty range");
    return std::clamp((score - min_value) / (max_value - min_value), 0.0, 1.0);
}

std::vector<double> sum_rule_fuse(const std::vector<std::vector<double>>& per_classifier) {
    if (per_classifier.empty()) throw ContractError("sum_rule_fuse: no classifiers");
    const std::size_t n = per_classifier[0].size();
    if (n == 0) throw ContractError("sum_rule_fuse: empty score lists");
    for (const auto& list : per_classifier) {
        if (list.size() != n) throw ContractError("sum_rule_fuse: ragged score lists");
    }
    std::vector<double> fused(n, 0.0);
    for (const auto& list : per_classifier) {
        for (std::size_t i = 0; i < n; ++i) fused[i] += list[i];
    }
    const double inv = 1.0 / static_cast<double>(per_classifier.size());
    for (double& f : fused) f *= inv;
    return fused;
}

void save_scores(const ScoreSet& set, const std::filesystem::path& path) {
    set.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write scores " + path.string());
    out << "sample_id,label,score\n";
    char buf[32];
    for (std::size_t i = 0; i < set.scores.size(); ++i) {
        const std::string id =
            set.sample_ids.empty() ? "s" + std::to_string(i) : set.sample_ids[i];
        std::snprintf(buf, sizeof(buf), "%.17g", set.scores[i]);
        out << id << "," << (set.labels[i] == PresentationLabel::BonaFide ? "bonafide" : "attack")
            << "," << buf << "\n";
    }
    if (!out) throw IoError("failed writing scores " + path.string());
}

ScoreSet load_scores(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scores " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty score file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "sample_id,label,score") {
        throw ParseError("bad score header in " + path.string());
    }
    ScoreSet set;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw ParseError("score line " + std::to_string(line_no) + " malformed in " +
                             path.string());
        }
        const std::string label_str = line.substr(c1 + 1, c2 - c1 - 1);
        PresentationLabel label;
        if (label_str == "bonafide") {
            label = PresentationLabel::BonaFide;
        } else if (label_str == "attack") {
            label = PresentationLabel::Attack;
        } else {
            throw ParseError("score line " + std::to_string(line_no) + ": unknown label '" +
                             label_str + "'");
        }
        std::size_t pos = 0;
        const std::string value = line.substr(c2 + 1);
        double s = 0.0;
        try {
            s = std::stod(value, &pos);
        } catch (const std::exception&) {
            throw ParseError("score line " + std::to_string(line_no) + ": bad value");
        }
        if (pos != value.size() || !std::isfinite(s)) {
            throw ParseError("score line " + std::to_string(line_no) + ": bad value");
        }
        set.sample_ids.push_back(line.substr(0, c1));
        set.labels.push_back(label);
        set.scores.push_back(s);
    }
    set.validate();
    return set;
}

void save_det_table(const std::vector<DetPoint>& curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write DET table " + path.string());
    out << "threshold,apcer,bpcer\n";
    char buf[96];
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f\n", p.threshold, p.apcer, p.bpcer);
        out << buf;
    }
    if (!out) throw IoError("failed writing DET table " + path.string());
}

namespace {

// Rates below this floor are drawn at the floor so zeros stay on the log plot.
constexpr double kPlotFloor = 1e-4;

double log_coord(double rate) {
    return std::log10(std::max(rate, kPlotFloor));
}

} // namespace

void write_det_svg(const std::vector<std::pair<std::string, std::vector<DetPoint>>>& curves,
                   const std::filesystem::path& path) {
    constexpr double kW = 640.0, kH = 640.0, kMargin = 70.0;
    const double span = -std::log10(kPlotFloor); // decades shown per axis
    const auto px = [&](double apcer) {
        return kMargin + (log_coord(apcer) + span) / span * (kW - 2.0 * kMargin);
    };
    const auto py = [&](double bpcer) {
        return kH - kMargin - (log_coord(bpcer) + span) / span * (kH - 2.0 * kMargin);
    };
    static const char* kColors[] = {"#c0392b", "#2980b9", "#27ae60", "#8e44ad",
                                    "#d35400", "#16a085", "#7f8c8d", "#2c3e50"};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write SVG " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    char buf[256];
    for (int d = 0; d >= static_cast<int>(-span); --d) {
        const double v = std::pow(10.0, d);
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                      "stroke=\"#dddddd\"/>\n",
                      px(v), kMargin, px(v), kH - kMargin);
        out << buf;
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                      "stroke=\"#dddddd\"/>\n",
                      kMargin, py(v), kW - kMargin, py(v));
        out << buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\" "
                      "fill=\"#444444\">1e%d</text>\n",
                      px(v), kH - kMargin + 18.0, d);
        out << buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\" "
                      "fill=\"#444444\">1e%d</text>\n",
                      kMargin - 8.0, py(v) + 4.0, d);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
                  "stroke=\"#333333\"/>\n",
                  kMargin, kMargin, kW - 2.0 * kMargin, kH - 2.0 * kMargin);
    out << buf;
    out << "<text x=\"" << kW / 2.0 << "\" y=\"" << kH - 20.0
        << "\" font-size=\"13\" text-anchor=\"middle\">APCER</text>\n";
    out << "<text x=\"18\" y=\"" << kH / 2.0 << "\" font-size=\"13\" text-anchor=\"middle\" "
        << "transform=\"rotate(-90 18 " << kH / 2.0 << ")\">BPCER</text>\n";

    std::size_t ci = 0;
    for (const auto& [name, curve] : curves) {
        const char* color = kColors[ci % (sizeof(kColors) / sizeof(kColors[0]))];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : curve) {
            std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", px(p.apcer), py(p.bpcer));
            out << buf;
        }
        out << "\"/>\n";
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" fill=\"%s\">",
                      kW - kMargin - 150.0, kMargin + 18.0 + 16.0 * static_cast<double>(ci),
                      color);
        out << buf << name << "</text>\n";
        ++ci;
    }
    out << "</svg>\n";
    if (!out) throw IoError("failed writing SVG " + path.string());
}

} // namespace veinpad
