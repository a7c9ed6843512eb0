// Release gate: seven self-contained checks, one PASS/FAIL line each on
// stdout. Progress for the long-running checks goes to stderr. Exits nonzero
// when any check fails. Tolerances are fixed here, not configurable; moving
// them means renegotiating what the toolkit promises.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "veinpad/classifier.hpp"
#include "veinpad/decomposition.hpp"
#include "veinpad/descriptors.hpp"
#include "veinpad/metrics.hpp"
#include "veinpad/pipeline.hpp"
#include "veinpad/rng.hpp"

using namespace veinpad;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string format(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return buf;
}

void progress(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    std::fprintf(stderr, "  .. %s\n", buf);
    std::fflush(stderr);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

// --- 1: descriptor histograms against the naive per-pixel references -------

Outcome criterion_descriptor_oracles() {
    const auto t0 = Clock::now();

    // Fixed random zero-mean bank; oracle and library plug in the same one.
    const int k = 8, s = 5;
    Rng rng(4242);
    std::vector<std::vector<double>> filters(k);
    for (auto& f : filters) {
        f.resize(static_cast<std::size_t>(s) * s);
        double mean = 0.0;
        for (auto& v : f) {
            v = rng.gaussian();
            mean += v;
        }
        mean /= static_cast<double>(f.size());
        for (auto& v : f) v -= mean;
    }
    const FilterBank bank(k, s, std::move(filters));

    std::size_t matched = 0;
    for (int i = 0; i < 100; ++i) {
        const GrayImage img = veinpad::testing::random_image(16, 16, 9000 + i);
        if (lbp_counts(img) != veinpad::testing::ref_lbp_counts(img)) {
            return {false, format("lbp histogram mismatch on image %d", i)};
        }
        if (lpq_counts(img) != veinpad::testing::ref_lpq_counts(img)) {
            return {false, format("lpq histogram mismatch on image %d", i)};
        }
        if (bsif_counts(img, bank) != veinpad::testing::ref_bsif_counts(img, bank)) {
            return {false, format("bsif histogram mismatch on image %d", i)};
        }
        matched += 3;
    }
    const double dt = seconds_since(t0);
    if (dt >= 30.0) {
        return {false, format("%zu histograms matched but took %.1fs (budget 30s)", matched, dt)};
    }
    return {true, format("%zu histograms bitwise equal in %.2fs", matched, dt)};
}

// --- 2: decomposition fidelity on renders with known ground truth ----------

Outcome criterion_decomposition_fidelity() {
    double worst_rmse = 0.0, worst_ang = 0.0, worst_grad = 0.0;
    for (int i = 0; i < 20; ++i) {
        const auto scene = veinpad::testing::make_render_scene(i, 128, 128);
        const DecompositionResult res = decompose(scene.image, SolverConfig{});

        worst_rmse = std::max(worst_rmse, res.residual_rmse);
        if (res.residual_rmse > 0.02) {
            return {false, format("render %d residual rmse %.4f > 0.02", i, res.residual_rmse)};
        }
        const double ang =
            veinpad::testing::mean_angular_error_deg(res.normal_map, scene.true_normals);
        worst_ang = std::max(worst_ang, ang);
        if (ang > 15.0) {
            return {false, format("render %d mean normal error %.2f deg > 15", i, ang)};
        }
        for (std::size_t j = 1; j < res.objective_trace.size(); ++j) {
            if (res.objective_trace[j] > res.objective_trace[j - 1]) {
                return {false, format("render %d objective rose at outer iteration %zu", i, j)};
            }
        }

        // Analytic normal gradient against central differences at a seeded
        // off-solution state, where the gradient is far from zero.
        Rng rng(7000 + static_cast<std::uint64_t>(i));
        const std::size_t n = scene.image.pixels().size();
        std::vector<std::array<double, 3>> normals(n);
        for (auto& v : normals) {
            std::array<double, 3> r{0.4 * (2.0 * rng.uniform01() - 1.0),
                                    0.4 * (2.0 * rng.uniform01() - 1.0), 1.0};
            const double len = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
            v = {r[0] / len, r[1] / len, r[2] / len};
        }
        std::vector<double> albedo(n);
        for (auto& a : albedo) a = 0.3 + 0.9 * rng.uniform01();
        LightingCoeffs l{};
        for (int q = 0; q < 9; ++q) {
            l.l[q] = (q == 0 ? 1.0 : 0.3 * (2.0 * rng.uniform01() - 1.0));
        }
        const double lambda = SolverConfig{}.smoothness_weight;
        const auto grad = solver::normal_gradient(scene.image, normals, albedo, l, lambda);
        const double step = 1e-5;
        for (int trial = 0; trial < 6; ++trial) {
            const std::size_t p = rng.index(n);
            const auto c = rng.index(3);
            auto plus = normals, minus = normals;
            plus[p][c] += step;
            minus[p][c] -= step;
            const double fd = (solver::objective(scene.image, plus, albedo, l, lambda) -
                               solver::objective(scene.image, minus, albedo, l, lambda)) /
                              (2.0 * step);
            const double an = grad[p][c];
            const double rel = std::fabs(fd - an) / std::max(1.0, std::fabs(an));
            worst_grad = std::max(worst_grad, rel);
            if (rel > 1e-3) {
                return {false,
                        format("render %d gradient mismatch %.2e at pixel %zu", i, rel, p)};
            }
        }
    }
    return {true, format("20 renders: worst rmse %.4f, worst normal error %.2f deg, "
                         "worst gradient deviation %.1e",
                         worst_rmse, worst_ang, worst_grad)};
}

// --- 3: metric exactness against exhaustive threshold enumeration ----------

ScoreSet random_score_set(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = 20 + rng.index(81); // up to 100
    ScoreSet set;
    const std::size_t n_bona = 1 + rng.index(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        set.labels.push_back(i < n_bona ? PresentationLabel::BonaFide
                                        : PresentationLabel::Attack);
        // Half the scores land on a coarse grid so ties across and within
        // classes are guaranteed to occur.
        const double v = 2.0 * rng.uniform01() - 0.5;
        set.scores.push_back(rng.uniform01() < 0.5 ? std::round(v * 10.0) / 10.0 : v);
    }
    return set;
}

Outcome criterion_metric_exactness() {
    const double targets[] = {0.0, 0.01, 0.05, 0.10, 0.25, 1.0};
    for (int i = 0; i < 50; ++i) {
        const ScoreSet set = random_score_set(5100 + static_cast<std::uint64_t>(i));
        const EerResult got = d_eer(set);
        const veinpad::testing::RefEer want = veinpad::testing::ref_d_eer(set);
        if (got.threshold != want.threshold || got.eer != want.eer ||
            got.apcer != want.apcer || got.bpcer != want.bpcer) {
            return {false, format("d_eer differs from enumeration on set %d", i)};
        }
        for (const double target : targets) {
            if (bpcer_at_apcer(set, target) !=
                veinpad::testing::ref_bpcer_at_apcer(set, target)) {
                return {false, format("bpcer_at_apcer(%.2f) differs on set %d", target, i)};
            }
        }
        const auto got_curve = det_curve(set);
        const auto want_curve = veinpad::testing::ref_det_curve(set);
        if (got_curve.size() != want_curve.size()) {
            return {false, format("det_curve length differs on set %d", i)};
        }
        for (std::size_t p = 0; p < got_curve.size(); ++p) {
            if (got_curve[p].threshold != want_curve[p].threshold ||
                got_curve[p].apcer != want_curve[p].apcer ||
                got_curve[p].bpcer != want_curve[p].bpcer) {
                return {false, format("det_curve point %zu differs on set %d", p, i)};
            }
        }
    }

    ScoreSet separable;
    for (int i = 0; i < 12; ++i) {
        separable.scores.push_back(0.8 + 0.01 * i);
        separable.labels.push_back(PresentationLabel::BonaFide);
        separable.scores.push_back(0.2 - 0.01 * i);
        separable.labels.push_back(PresentationLabel::Attack);
    }
    if (d_eer(separable).eer != 0.0) {
        return {false, "separable set did not reach EER 0"};
    }

    ScoreSet identical;
    for (int i = 0; i < 15; ++i) {
        const double v = 0.1 + 0.05 * i;
        identical.scores.push_back(v);
        identical.labels.push_back(PresentationLabel::BonaFide);
        identical.scores.push_back(v);
        identical.labels.push_back(PresentationLabel::Attack);
    }
    if (d_eer(identical).eer != 0.5) {
        return {false, format("identical distributions gave EER %.4f, want 0.5",
                              d_eer(identical).eer)};
    }
    return {true, "50 score sets exact (d_eer, bpcer_at_apcer, det_curve); degenerate "
                  "sets hit 0 and 0.5"};
}

// --- 4: classifier against the projected-gradient convex reference ---------

FeatureVector as_feature(std::vector<double> values) {
    FeatureVector f;
    f.bins = std::move(values);
    return f;
}

Outcome criterion_classifier_correctness() {
    // Separable toy set: one informative dimension, one noise dimension.
    std::vector<FeatureVector> toy;
    std::vector<PresentationLabel> toy_labels;
    const double noise[] = {0.0, 1.0, 0.25, 0.75};
    for (int i = 0; i < 4; ++i) {
        toy.push_back(as_feature({1.0, noise[i]}));
        toy_labels.push_back(PresentationLabel::BonaFide);
        toy.push_back(as_feature({0.0, noise[i]}));
        toy_labels.push_back(PresentationLabel::Attack);
    }
    TrainConfig toy_cfg;
    toy_cfg.c = 10.0;
    const LinearModel toy_model = train(toy, toy_labels, toy_cfg);
    for (std::size_t i = 0; i < toy.size(); ++i) {
        const double sc = score(toy_model, toy[i]);
        const bool want_bona = toy_labels[i] == PresentationLabel::BonaFide;
        if ((want_bona && sc <= 0.0) || (!want_bona && sc >= 0.0)) {
            return {false, format("toy sample %zu misclassified (score %.4f)", i, sc)};
        }
    }

    double worst_gap = 0.0;
    for (int prob = 0; prob < 20; ++prob) {
        Rng rng(6200 + static_cast<std::uint64_t>(prob));
        const std::size_t n = 14 + rng.index(17);
        std::vector<FeatureVector> features;
        std::vector<PresentationLabel> labels;
        std::vector<std::vector<double>> raw;
        std::vector<int> pm;
        for (std::size_t i = 0; i < n; ++i) {
            const bool bona = i % 2 == 0;
            std::vector<double> x(5);
            for (auto& v : x) v = rng.gaussian() + (bona ? 0.6 : -0.6);
            raw.push_back(x);
            features.push_back(as_feature(std::move(x)));
            labels.push_back(bona ? PresentationLabel::BonaFide : PresentationLabel::Attack);
            pm.push_back(bona ? 1 : -1);
        }
        TrainConfig cfg;
        cfg.c = prob % 2 == 0 ? 1.0 : 0.3;
        cfg.epochs = 400;
        TrainReport report;
        const LinearModel model = train(features, labels, cfg, {}, &report);
        if (report.dual_objective.empty()) {
            return {false, format("problem %d produced no dual trace", prob)};
        }
        const double impl = report.dual_objective.back();
        const double ref = veinpad::testing::ref_svm_dual_optimum(
            veinpad::testing::ref_minmax_scale(raw), pm, cfg.c);
        const double gap = std::fabs(impl - ref) / std::max(1e-9, std::fabs(ref));
        worst_gap = std::max(worst_gap, gap);
        if (gap > 0.01) {
            return {false, format("problem %d dual %.9g vs reference %.9g (%.2f%% off)",
                                  prob, impl, ref, 100.0 * gap)};
        }

        const LinearModel again = train(features, labels, cfg, {}, nullptr);
        if (again.weights != model.weights || again.bias != model.bias ||
            again.feature_min != model.feature_min ||
            again.feature_max != model.feature_max ||
            again.score_min != model.score_min || again.score_max != model.score_max) {
            return {false, format("problem %d retrained to a different model", prob)};
        }
    }
    return {true, format("toy set classified cleanly; 20 duals within 1%% of the convex "
                         "reference (worst %.3f%%); retraining bitwise stable",
                         100.0 * worst_gap)};
}

// --- 5: proposed mode beats raw baselines on the synthetic dataset ---------

struct OrderingArtifacts {
    fs::path manifest_csv;
    fs::path proposed_bundle;
    fs::path proposed_eval;
    fs::path baseline_bundle;
    bool ready = false;
};

Outcome criterion_paper_ordering(const fs::path& work, OrderingArtifacts* artifacts) {
    const auto t0 = Clock::now();
    const SynthConfig synth; // 78 subjects, 744x480, seed 0
    progress("criterion 5: rendering %d subjects at %dx%d", synth.n_subjects, synth.width,
             synth.height);
    const Manifest manifest = cmd_synth(synth, work / "data");
    artifacts->manifest_csv = work / "data" / "manifest.csv";
    progress("criterion 5: dataset ready after %.0fs", seconds_since(t0));

    const fs::path maps = work / "maps";
    const DescriptorKind kinds[] = {DescriptorKind::LBP, DescriptorKind::LPQ,
                                    DescriptorKind::BSIF};
    double deer[3][2]; // [descriptor][0 proposed, 1 baseline]
    for (int di = 0; di < 3; ++di) {
        for (int mode = 0; mode < 2; ++mode) {
            PipelineConfig config;
            config.descriptor = kinds[di];
            config.use_decomposition = mode == 0;
            const std::string tag = std::string(descriptor_name(kinds[di])) + "_" +
                                    (mode == 0 ? "proposed" : "baseline");
            const fs::path bundle = work / ("bundle_" + tag);
            cmd_train(manifest, config, maps, bundle);
            const EvalSummary summary = cmd_eval(bundle, maps, work / ("eval_" + tag));
            deer[di][mode] = summary.fused_deer;
            progress("criterion 5: %s fused d_eer %.4f (%.0fs elapsed)", tag.c_str(),
                     summary.fused_deer, seconds_since(t0));
            if (di == 0 && mode == 0) {
                artifacts->proposed_bundle = bundle;
                artifacts->proposed_eval = work / ("eval_" + tag);
            }
            if (di == 0 && mode == 1) {
                artifacts->baseline_bundle = bundle;
            }
        }
    }
    artifacts->ready = true;

    int strict = 0;
    for (int di = 0; di < 3; ++di) {
        if (deer[di][0] > deer[di][1]) {
            return {false, format("%s proposed d_eer %.4f exceeds baseline %.4f",
                                  descriptor_name(kinds[di]), deer[di][0], deer[di][1])};
        }
        if (deer[di][0] < deer[di][1]) ++strict;
    }
    const double dt = seconds_since(t0);
    const std::string table =
        format("lbp %.4f/%.4f lpq %.4f/%.4f bsif %.4f/%.4f (proposed/baseline)", deer[0][0],
               deer[0][1], deer[1][0], deer[1][1], deer[2][0], deer[2][1]);
    if (strict < 2) {
        return {false, table + format("; only %d/3 strictly better", strict)};
    }
    if (dt >= 1200.0) {
        return {false, table + format("; pipeline took %.0fs (budget 1200s)", dt)};
    }
    return {true, table + format("; %d/3 strictly better; %.0fs", strict, dt)};
}

// --- 6: dataset and split counts ---------------------------------------------

Outcome criterion_count_fidelity(const OrderingArtifacts& artifacts) {
    if (!artifacts.ready) {
        return {false, "skipped: the full pipeline run left no artifacts to inspect"};
    }
    const Manifest manifest = load_manifest(artifacts.manifest_csv);
    if (manifest.entries.size() != 936 ||
        manifest.count_label(PresentationLabel::BonaFide) != 468 ||
        manifest.count_label(PresentationLabel::Attack) != 468) {
        return {false, format("manifest counts %zu total, %zu bona fide, %zu attack",
                              manifest.entries.size(),
                              manifest.count_label(PresentationLabel::BonaFide),
                              manifest.count_label(PresentationLabel::Attack))};
    }

    // 36 train subjects x 2 sessions = 72 features per label per illumination.
    const std::string line = "samples=144 (bonafide=72 attack=72)";
    const std::string proposed_report = slurp(artifacts.proposed_bundle /
                                              "training_report.txt");
    if (count_occurrences(proposed_report, line) != 6) {
        return {false, "proposed training report lacks 72+72 samples on all 6 models"};
    }
    const std::string baseline_report = slurp(artifacts.baseline_bundle /
                                              "training_report.txt");
    if (count_occurrences(baseline_report, line) != 3) {
        return {false, "baseline training report lacks 72+72 samples on all 3 models"};
    }

    // 42 test subjects x 2 sessions = 84 scores per label per illumination.
    for (const char* source : {"normal", "diffuse"}) {
        for (int illum = 1; illum <= 3; ++illum) {
            const fs::path file = artifacts.proposed_eval /
                                  format("scores_%s_i%d.csv", source, illum);
            const ScoreSet set = load_scores(file);
            std::size_t bona = 0;
            for (const auto label : set.labels) {
                if (label == PresentationLabel::BonaFide) ++bona;
            }
            if (set.size() != 168 || bona != 84) {
                return {false, format("%s has %zu scores (%zu bona fide), want 168 (84)",
                                      file.filename().string().c_str(), set.size(), bona)};
            }
        }
    }
    return {true, "manifest 936 = 468 + 468; six models trained on 72 + 72; "
                  "six score files carry 84 + 84"};
}

// --- 7: end-to-end byte determinism -----------------------------------------

Outcome criterion_end_to_end_determinism(const fs::path& work) {
    std::vector<std::string> score_names;
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = work / (run == 0 ? "repro_a" : "repro_b");
        SynthConfig synth;
        synth.n_subjects = 8;
        synth.width = 160;
        synth.height = 120;
        const Manifest manifest = cmd_synth(synth, dir / "data");

        PipelineConfig config;
        config.descriptor = DescriptorKind::LPQ;
        config.use_decomposition = true;
        config.split.n_train_subjects = 3;
        config.split.n_test_subjects = 3;
        cmd_train(manifest, config, dir / "maps", dir / "bundle");
        cmd_eval(dir / "bundle", dir / "maps", dir / "eval");
    }

    const fs::path a = work / "repro_a", b = work / "repro_b";
    std::vector<fs::path> files = {fs::path("bundle") / "training_report.txt",
                                   fs::path("eval") / "report.txt",
                                   fs::path("eval") / "det_fused.csv",
                                   fs::path("eval") / "scores_fused.csv"};
    for (const char* source : {"normal", "diffuse"}) {
        for (int illum = 1; illum <= 3; ++illum) {
            files.push_back(fs::path("bundle") / format("model_%s_i%d.txt", source, illum));
            files.push_back(fs::path("eval") / format("scores_%s_i%d.csv", source, illum));
        }
    }
    for (const auto& rel : files) {
        if (slurp(a / rel) != slurp(b / rel)) {
            return {false, format("%s differs between the two runs",
                                  rel.generic_string().c_str())};
        }
    }
    return {true, format("%zu artifacts byte-identical across independent runs",
                         files.size())};
}

} // namespace

int main() {
    int failures = 0;
    const auto run = [&failures](int index, const char* name, const Outcome& outcome) {
        std::printf("%s criterion %d: %s (%s)\n", outcome.pass ? "PASS" : "FAIL", index, name,
                    outcome.detail.c_str());
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    };
    const auto guarded = [](const auto& fn) -> Outcome {
        try {
            return fn();
        } catch (const std::exception& e) {
            return {false, std::string("exception: ") + e.what()};
        }
    };

    run(1, "descriptor oracle equivalence",
        guarded([] { return criterion_descriptor_oracles(); }));
    run(2, "decomposition fidelity",
        guarded([] { return criterion_decomposition_fidelity(); }));
    run(3, "metric exactness", guarded([] { return criterion_metric_exactness(); }));
    run(4, "classifier correctness",
        guarded([] { return criterion_classifier_correctness(); }));

    veinpad::testing::TempDir work("veinpad_acceptance");
    OrderingArtifacts artifacts;
    run(5, "decomposed maps beat raw baselines",
        guarded([&] { return criterion_paper_ordering(work.path(), &artifacts); }));
    run(6, "dataset and split counts",
        guarded([&] { return criterion_count_fidelity(artifacts); }));
    run(7, "end-to-end determinism",
        guarded([&] { return criterion_end_to_end_determinism(work.path()); }));

    if (failures == 0) {
        std::printf("acceptance: all 7 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d of 7 criteria FAILED\n", failures);
    return 1;
}
