#include "veinpad/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "veinpad/rng.hpp"

namespace veinpad {

GrayImage quantize8(const GrayImage& image) {
    return from_bytes(to_bytes(image), image.width(), image.height());
}

std::string map_cache_stem(const ManifestEntry& entry) {
    return entry.subject_id + "_s" + std::to_string(entry.session) + "_i" +
           std::to_string(entry.illumination) + "_" +
           (entry.label == PresentationLabel::BonaFide ? "bonafide" : "attack");
}

namespace {

const char* kMapSuffix[4] = {"_nx.pgm", "_ny.pgm", "_nz.pgm", "_diffuse.pgm"};

std::string presentation_id(const ManifestEntry& e) {
    return e.subject_id + "_s" + std::to_string(e.session);
}

DecomposedMaps quantize_result(const DecompositionResult& result) {
    DecomposedMaps maps{{}, quantize8(GrayImage(result.diffuse.width(), result.diffuse.height(),
                                                result.diffuse.values()))};
    for (GrayImage& ch : normal_channels(result.normal_map)) {
        maps.normal_channels.push_back(quantize8(ch));
    }
    return maps;
}

} // namespace

DecomposedMaps decomposed_maps(const GrayImage& image, const ManifestEntry& entry,
                               const SolverConfig& solver,
                               const std::filesystem::path& cache_dir) {
    const std::string stem = map_cache_stem(entry);
    if (!cache_dir.empty()) {
        bool cached = true;
        for (const char* suffix : kMapSuffix) {
            if (!std::filesystem::exists(cache_dir / (stem + suffix))) {
                cached = false;
                break;
            }
        }
        if (cached) {
            DecomposedMaps maps{{}, read_image(cache_dir / (stem + kMapSuffix[3]))};
            for (int c = 0; c < 3; ++c) {
                maps.normal_channels.push_back(read_image(cache_dir / (stem + kMapSuffix[c])));
            }
            return maps;
        }
    }
    const DecomposedMaps maps = quantize_result(decompose(image, solver));
    if (!cache_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(cache_dir, ec);
        for (int c = 0; c < 3; ++c) {
            write_image(maps.normal_channels[c], cache_dir / (stem + kMapSuffix[c]));
        }
        write_image(maps.diffuse, cache_dir / (stem + kMapSuffix[3]));
    }
    return maps;
}

FeatureVector entry_feature(const GrayImage& image, const ManifestEntry& entry,
                            SourceKind source, DescriptorKind kind, const FilterBank* bank,
                            const SolverConfig& solver, const std::filesystem::path& cache_dir) {
    if (source == SourceKind::Raw) {
        return extract(image, kind, bank);
    }
    const DecomposedMaps maps = decomposed_maps(image, entry, solver, cache_dir);
    if (source == SourceKind::NormalMap) {
        return extract_channels(maps.normal_channels, kind, bank, SourceKind::NormalMap);
    }
    return extract_channels({maps.diffuse}, kind, bank, SourceKind::DiffuseMap);
}

FilterBank learn_bank_from_manifest(const Manifest& manifest, int k, int s,
                                    std::uint64_t seed) {
    std::vector<const ManifestEntry*> bona;
    for (const auto& e : manifest.entries) {
        if (e.label == PresentationLabel::BonaFide) bona.push_back(&e);
    }
    if (bona.empty()) throw TrainingError("filter learning: no bona fide images");
    // At least 5000 patches total, spread evenly; 24 per image at full scale.
    const std::size_t per_image =
        std::max<std::size_t>(24, (5000 + bona.size() - 1) / bona.size() + 1);
    std::vector<std::vector<double>> patches;
    patches.reserve(per_image * bona.size());
    const Rng root(seed);
    for (std::size_t i = 0; i < bona.size(); ++i) {
        const GrayImage img = read_image(manifest.resolve(*bona[i]));
        if (img.width() < s || img.height() < s) {
            throw TrainingError("filter learning: image smaller than the filter");
        }
        Rng rng = root.derive(0x5A1F0000u + i);
        for (std::size_t p = 0; p < per_image; ++p) {
            const int y0 = static_cast<int>(rng.index(static_cast<std::size_t>(img.height() - s + 1)));
            const int x0 = static_cast<int>(rng.index(static_cast<std::size_t>(img.width() - s + 1)));
            std::vector<double> patch(static_cast<std::size_t>(s) * s);
            for (int y = 0; y < s; ++y) {
                for (int x = 0; x < s; ++x) {
                    patch[static_cast<std::size_t>(y) * s + x] = img.at(y0 + y, x0 + x);
                }
            }
            patches.push_back(std::move(patch));
        }
    }
    return learn_bsif_filters(patches, k, s, seed);
}

Manifest cmd_synth(const SynthConfig& config, const std::filesystem::path& out_dir) {
    return synth_generate(config, out_dir);
}

void cmd_decompose(const Manifest& manifest, const SolverConfig& solver,
                   const std::filesystem::path& maps_dir) {
    if (maps_dir.empty()) throw ContractError("decompose: output directory required");
    for (const auto& e : manifest.entries) {
        decomposed_maps(read_image(manifest.resolve(e)), e, solver, maps_dir);
    }
}

namespace {

std::vector<SourceKind> mode_sources(bool use_decomposition) {
    if (use_decomposition) return {SourceKind::NormalMap, SourceKind::DiffuseMap};
    return {SourceKind::Raw};
}

// One feature per requested source, decomposing at most once.
std::vector<FeatureVector> features_for_entry(const GrayImage& image, const ManifestEntry& entry,
                                              const std::vector<SourceKind>& sources,
                                              DescriptorKind kind, const FilterBank* bank,
                                              const SolverConfig& solver,
                                              const std::filesystem::path& cache_dir) {
    std::vector<FeatureVector> out;
    out.reserve(sources.size());
    std::optional<DecomposedMaps> maps;
    for (const SourceKind source : sources) {
        if (source == SourceKind::Raw) {
            out.push_back(extract(image, kind, bank));
            continue;
        }
        if (!maps) maps = decomposed_maps(image, entry, solver, cache_dir);
        if (source == SourceKind::NormalMap) {
            out.push_back(extract_channels(maps->normal_channels, kind, bank,
                                           SourceKind::NormalMap));
        } else {
            out.push_back(extract_channels({maps->diffuse}, kind, bank, SourceKind::DiffuseMap));
        }
    }
    return out;
}

void write_csv_value(std::ofstream& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
}

} // namespace

void cmd_extract(const Manifest& manifest, const PipelineConfig& config,
                 const std::filesystem::path& maps_dir, const std::filesystem::path& out_file) {
    FilterBank bank(1, 3, {{0, 0, 0, 0, 1, 0, 0, 0, -1}});
    const FilterBank* bank_ptr = nullptr;
    if (config.descriptor == DescriptorKind::BSIF) {
        if (config.bsif_bank_path.empty()) {
            throw ContractError("extract: BSIF needs --bsif-bank (train learns one)");
        }
        bank = load_filter_bank(config.bsif_bank_path);
        bank_ptr = &bank;
    }
    std::ofstream out(out_file, std::ios::binary);
    if (!out) throw IoError("cannot write features " + out_file.string());
    out << "subject_id,session,illumination,label,source,bins\n";
    const std::vector<SourceKind> sources = mode_sources(config.use_decomposition);
    for (const auto& e : manifest.entries) {
        const GrayImage img = read_image(manifest.resolve(e));
        const std::vector<FeatureVector> fvs =
            features_for_entry(img, e, sources, config.descriptor, bank_ptr, config.solver,
                               maps_dir);
        for (std::size_t si = 0; si < sources.size(); ++si) {
            out << e.subject_id << ',' << e.session << ',' << e.illumination << ','
                << (e.label == PresentationLabel::BonaFide ? "bonafide" : "attack") << ','
                << source_name(sources[si]);
            for (const double b : fvs[si].bins) {
                out << ',';
                write_csv_value(out, b);
            }
            out << '\n';
        }
    }
    if (!out) throw IoError("failed writing features " + out_file.string());
}

namespace {

std::string relative_to(const std::filesystem::path& target, const std::filesystem::path& base) {
    std::error_code ec;
    const auto rel = std::filesystem::relative(std::filesystem::weakly_canonical(target),
                                               std::filesystem::weakly_canonical(base), ec);
    if (ec || rel.empty()) return std::filesystem::weakly_canonical(target).generic_string();
    return rel.generic_string();
}

Manifest rebase_manifest(const Manifest& manifest, const std::filesystem::path& new_root) {
    Manifest out;
    out.root = new_root;
    out.entries = manifest.entries;
    for (auto& e : out.entries) {
        e.path = relative_to(manifest.root / e.path, new_root);
    }
    return out;
}

std::string model_file_name(SourceKind source, int illumination) {
    return std::string("model_") + source_name(source) + "_i" + std::to_string(illumination) +
           ".txt";
}

void write_config_snapshot(const PipelineConfig& config, const Manifest& manifest,
                           const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write config " + path.string());
    char buf[64];
    out << "mode=" << (config.use_decomposition ? "proposed" : "baseline") << "\n";
    out << "descriptor=" << descriptor_name(config.descriptor) << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", config.train.c);
    out << "svm_c=" << buf << "\n";
    out << "svm_epochs=" << config.train.epochs << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", config.train.tol);
    out << "svm_tol=" << buf << "\n";
    out << "seed=" << config.train.seed << "\n";
    out << "solver_max_outer=" << config.solver.max_outer_iterations << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", config.solver.convergence_tol);
    out << "solver_tol=" << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", config.solver.smoothness_weight);
    out << "solver_smoothness=" << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", config.solver.shading_floor);
    out << "solver_shading_floor=" << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", config.solver.init_height_gain);
    out << "solver_init_height_gain=" << buf << "\n";
    out << "split_train=" << config.split.n_train_subjects << "\n";
    out << "split_test=" << config.split.n_test_subjects << "\n";
    out << "bsif_k=" << config.bsif_k << "\n";
    out << "bsif_s=" << config.bsif_s << "\n";
    out << "dataset_root=" << std::filesystem::weakly_canonical(manifest.root).generic_string()
        << "\n";
    if (!out) throw IoError("failed writing config " + path.string());
}

std::map<std::string, std::string> read_config_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("bad config line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

const std::string& config_value(const std::map<std::string, std::string>& kv,
                                const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("config snapshot misses key '" + key + "'");
    return it->second;
}

} // namespace

void cmd_train(const Manifest& manifest, const PipelineConfig& config,
               const std::filesystem::path& maps_dir, const std::filesystem::path& bundle_dir) {
    manifest.validate();
    config.train.validate();
    config.solver.validate();
    const bool existed_before = std::filesystem::exists(bundle_dir);
    std::filesystem::create_directories(bundle_dir);
    try {
        const auto [train_m, test_m] = subject_disjoint_split(manifest, config.split);
        save_manifest(rebase_manifest(train_m, bundle_dir), bundle_dir / "train_manifest.csv");
        save_manifest(rebase_manifest(test_m, bundle_dir), bundle_dir / "test_manifest.csv");
        write_config_snapshot(config, manifest, bundle_dir / "config.txt");

        FilterBank bank(1, 3, {{0, 0, 0, 0, 1, 0, 0, 0, -1}});
        const FilterBank* bank_ptr = nullptr;
        if (config.descriptor == DescriptorKind::BSIF) {
            if (!config.bsif_bank_path.empty()) {
                bank = load_filter_bank(config.bsif_bank_path);
            } else {
                bank = learn_bank_from_manifest(train_m, config.bsif_k, config.bsif_s,
                                                config.train.seed);
            }
            save_filter_bank(bank, bundle_dir / "bsif_bank.txt");
            bank_ptr = &bank;
        }

        const std::vector<SourceKind> sources = mode_sources(config.use_decomposition);
        // bucket[source][illumination-1]
        std::vector<std::array<std::vector<FeatureVector>, 3>> features(sources.size());
        std::vector<std::array<std::vector<PresentationLabel>, 3>> labels(sources.size());
        for (const auto& e : train_m.entries) {
            const GrayImage img = read_image(train_m.resolve(e));
            std::vector<FeatureVector> fvs = features_for_entry(
                img, e, sources, config.descriptor, bank_ptr, config.solver, maps_dir);
            for (std::size_t si = 0; si < sources.size(); ++si) {
                features[si][e.illumination - 1].push_back(std::move(fvs[si]));
                labels[si][e.illumination - 1].push_back(e.label);
            }
        }

        std::ofstream report(bundle_dir / "training_report.txt", std::ios::binary);
        if (!report) throw IoError("cannot write training report");
        report << "descriptor=" << descriptor_name(config.descriptor) << " mode="
               << (config.use_decomposition ? "proposed" : "baseline") << "\n";
        if (config.descriptor == DescriptorKind::BSIF) {
            report << "bsif_bank: k=" << bank.k() << " s=" << bank.s()
                   << " ica_converged=" << (bank.ica_converged() ? "yes" : "no") << "\n";
        }
        for (std::size_t si = 0; si < sources.size(); ++si) {
            for (int illum = 1; illum <= 3; ++illum) {
                const auto& f = features[si][illum - 1];
                const auto& lab = labels[si][illum - 1];
                std::size_t n_bona = 0;
                for (const auto l : lab) {
                    if (l == PresentationLabel::BonaFide) ++n_bona;
                }
                TrainMeta meta{config.descriptor, sources[si], illum};
                TrainReport tr;
                const LinearModel model = train(f, lab, config.train, meta, &tr);
                const std::string name = model_file_name(sources[si], illum);
                save_model(model, bundle_dir / name);
                char line[256];
                std::snprintf(line, sizeof(line),
                              "%s: samples=%zu (bonafide=%zu attack=%zu) dim=%zu epochs=%d "
                              "violation=%.6g dual=%.9g primal=%.9g\n",
                              name.c_str(), f.size(), n_bona, f.size() - n_bona,
                              f.empty() ? 0 : f[0].bins.size(), tr.epochs_run,
                              tr.final_violation,
                              tr.dual_objective.empty() ? 0.0 : tr.dual_objective.back(),
                              tr.primal_objective);
                report << line;
            }
        }
        if (!report) throw IoError("failed writing training report");
    } catch (...) {
        std::error_code ec;
        if (existed_before) {
            // Only remove what this run may have produced.
            for (const char* name :
                 {"train_manifest.csv", "test_manifest.csv", "config.txt", "bsif_bank.txt",
                  "training_report.txt"}) {
                std::filesystem::remove(bundle_dir / name, ec);
            }
            for (const SourceKind s : {SourceKind::Raw, SourceKind::NormalMap,
                                       SourceKind::DiffuseMap}) {
                for (int i = 1; i <= 3; ++i) {
                    std::filesystem::remove(bundle_dir / model_file_name(s, i), ec);
                }
            }
        } else {
            std::filesystem::remove_all(bundle_dir, ec);
        }
        throw;
    }
}

namespace {

struct MetricLine {
    double deer = 0.0;
    double deer_threshold = 0.0;
    double bpcer5 = 0.0;
    double bpcer10 = 0.0;
};

MetricLine metric_line(const ScoreSet& set) {
    const EerResult eer = d_eer(set);
    return {eer.eer, eer.threshold, bpcer_at_apcer(set, 0.05), bpcer_at_apcer(set, 0.10)};
}

void report_metrics(std::ofstream& out, const std::string& name, const ScoreSet& set) {
    const MetricLine m = metric_line(set);
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "%s: d_eer=%.6f bpcer_at_apcer5=%.6f bpcer_at_apcer10=%.6f threshold=%.6f\n",
                  name.c_str(), m.deer, m.bpcer5, m.bpcer10, m.deer_threshold);
    out << buf;
}

} // namespace

EvalSummary cmd_eval(const std::filesystem::path& bundle_dir,
                     const std::filesystem::path& maps_dir_in,
                     const std::filesystem::path& out_dir) {
    const auto kv = read_config_snapshot(bundle_dir / "config.txt");
    const bool proposed = config_value(kv, "mode") == "proposed";
    const DescriptorKind descriptor = descriptor_from_name(config_value(kv, "descriptor"));
    SolverConfig solver;
    solver.max_outer_iterations = std::stoi(config_value(kv, "solver_max_outer"));
    solver.convergence_tol = std::stod(config_value(kv, "solver_tol"));
    solver.smoothness_weight = std::stod(config_value(kv, "solver_smoothness"));
    solver.shading_floor = std::stod(config_value(kv, "solver_shading_floor"));
    solver.init_height_gain = std::stod(config_value(kv, "solver_init_height_gain"));
    solver.validate();

    std::filesystem::path maps_dir = maps_dir_in;
    if (maps_dir.empty()) {
        maps_dir = std::filesystem::path(config_value(kv, "dataset_root")) / "maps";
    }

    const Manifest test_m = load_manifest(bundle_dir / "test_manifest.csv");

    FilterBank bank(1, 3, {{0, 0, 0, 0, 1, 0, 0, 0, -1}});
    const FilterBank* bank_ptr = nullptr;
    if (descriptor == DescriptorKind::BSIF) {
        bank = load_filter_bank(bundle_dir / "bsif_bank.txt");
        bank_ptr = &bank;
    }

    const std::vector<SourceKind> sources = mode_sources(proposed);
    std::vector<LinearModel> models;
    for (const SourceKind source : sources) {
        for (int illum = 1; illum <= 3; ++illum) {
            models.push_back(load_model(bundle_dir / model_file_name(source, illum)));
            if (models.back().meta.source_kind != source ||
                models.back().meta.illumination != illum) {
                throw ParseError("model metadata does not match its file name");
            }
        }
    }

    std::filesystem::create_directories(out_dir);

    // One presentation = one (subject, session, label) capture triplet; its
    // fused score is the mean of every model's normalized score across the
    // triplet's three illuminations.
    std::vector<ScoreSet> per_model(models.size());
    std::map<std::tuple<std::string, int, int>, std::pair<double, int>> fused; // (sum, n)
    for (const auto& e : test_m.entries) {
        const GrayImage img = read_image(test_m.resolve(e));
        const std::vector<FeatureVector> fvs =
            features_for_entry(img, e, sources, descriptor, bank_ptr, solver, maps_dir);
        for (std::size_t si = 0; si < sources.size(); ++si) {
            // Models are stored source-major: sources[si] at illuminations 1..3.
            const std::size_t mi = si * 3 + static_cast<std::size_t>(e.illumination - 1);
            const LinearModel& model = models[mi];
            const double raw = score(model, fvs[si]);
            per_model[mi].scores.push_back(raw);
            per_model[mi].labels.push_back(e.label);
            per_model[mi].sample_ids.push_back(presentation_id(e));
            // Degenerate training range only happens when every training
            // score was identical; scores carry no information then.
            const double normalized =
                model.score_max > model.score_min
                    ? minmax_normalize(raw, model.score_min, model.score_max)
                    : 0.5;
            const auto key = std::make_tuple(e.subject_id, e.session,
                                             e.label == PresentationLabel::BonaFide ? 0 : 1);
            fused[key].first += normalized;
            fused[key].second += 1;
        }
    }

    ScoreSet fused_set;
    for (const auto& [key, acc] : fused) {
        fused_set.sample_ids.push_back(std::get<0>(key) + "_s" + std::to_string(std::get<1>(key)));
        fused_set.labels.push_back(std::get<2>(key) == 0 ? PresentationLabel::BonaFide
                                                         : PresentationLabel::Attack);
        fused_set.scores.push_back(acc.first / acc.second);
    }

    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const std::string name = std::string("scores_") + source_name(models[mi].meta.source_kind) +
                                 "_i" + std::to_string(models[mi].meta.illumination) + ".csv";
        save_scores(per_model[mi], out_dir / name);
    }
    save_scores(fused_set, out_dir / "scores_fused.csv");
    save_det_table(det_curve(fused_set), out_dir / "det_fused.csv");

    std::ofstream report(out_dir / "report.txt", std::ios::binary);
    if (!report) throw IoError("cannot write eval report");
    report << "descriptor=" << config_value(kv, "descriptor") << " mode="
           << config_value(kv, "mode") << "\n";
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const std::string name = std::string(source_name(models[mi].meta.source_kind)) + "_i" +
                                 std::to_string(models[mi].meta.illumination);
        report_metrics(report, name, per_model[mi]);
    }
    report_metrics(report, "fused", fused_set);
    if (!report) throw IoError("failed writing eval report");

    const MetricLine fused_line = metric_line(fused_set);
    return {fused_line.deer, fused_line.bpcer5, fused_line.bpcer10};
}

void cmd_det(const std::vector<std::filesystem::path>& score_files,
             const std::filesystem::path& out_dir) {
    if (score_files.empty()) throw ContractError("det: no score files given");
    std::filesystem::create_directories(out_dir);
    std::vector<std::pair<std::string, std::vector<DetPoint>>> curves;
    for (const auto& file : score_files) {
        const ScoreSet set = load_scores(file);
        const std::vector<DetPoint> curve = det_curve(set);
        curves.emplace_back(file.stem().string(), curve);
        save_det_table(curve, out_dir / ("det_" + file.stem().string() + ".csv"));
    }
    write_det_svg(curves, out_dir / "det.svg");
}

} // namespace veinpad
