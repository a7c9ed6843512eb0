#include "veinpad/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "veinpad/decomposition.hpp"
#include "veinpad/rng.hpp"

namespace veinpad {

namespace {

const char* kManifestHeader = "subject_id,session,illumination,label,path";

std::string label_name(PresentationLabel l) {
    return l == PresentationLabel::BonaFide ? "bonafide" : "attack";
}

std::string key_name(const ManifestEntry& e) {
    return e.subject_id + "/s" + std::to_string(e.session) + "/i" +
           std::to_string(e.illumination) + "/" + label_name(e.label);
}

} // namespace

void Manifest::validate() const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (e.session != 1 && e.session != 2) {
            throw ContractError("manifest: session out of range for " + key_name(e));
        }
        if (e.illumination < 1 || e.illumination > 3) {
            throw ContractError("manifest: illumination out of range for " + key_name(e));
        }
        if (e.path.empty()) {
            throw ContractError("manifest: empty path for " + key_name(e));
        }
        if (!seen.insert(key_name(e)).second) {
            throw ContractError("manifest: duplicate key " + key_name(e));
        }
    }
    // Complete 2x3 grid per label per subject, never silently repaired.
    std::map<std::string, std::set<std::string>> per_subject;
    for (const auto& e : entries) {
        per_subject[e.subject_id].insert(key_name(e));
    }
    for (const auto& [subject, keys] : per_subject) {
        std::set<std::string> labels;
        for (const auto& e : entries) {
            if (e.subject_id == subject) labels.insert(label_name(e.label));
        }
        const std::size_t expect = labels.size() * 6;
        if (keys.size() != expect) {
            throw ContractError("manifest: incomplete session/illumination grid for subject " +
                                subject);
        }
    }
}

std::vector<std::string> Manifest::subjects() const {
    std::set<std::string> s;
    for (const auto& e : entries) s.insert(e.subject_id);
    return std::vector<std::string>(s.begin(), s.end());
}

std::size_t Manifest::count_label(PresentationLabel label) const {
    std::size_t n = 0;
    for (const auto& e : entries) {
        if (e.label == label) ++n;
    }
    return n;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty manifest " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kManifestHeader) {
        throw ParseError("manifest header mismatch in " + path.string());
    }
    Manifest m;
    m.root = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 5) {
            throw ParseError("manifest line " + std::to_string(lineno) + ": expected 5 fields");
        }
        ManifestEntry e;
        e.subject_id = fields[0];
        try {
            e.session = std::stoi(fields[1]);
            e.illumination = std::stoi(fields[2]);
        } catch (const std::exception&) {
            throw ParseError("manifest line " + std::to_string(lineno) + ": bad number");
        }
        if (fields[3] == "bonafide") {
            e.label = PresentationLabel::BonaFide;
        } else if (fields[3] == "attack") {
            e.label = PresentationLabel::Attack;
        } else {
            throw ParseError("manifest line " + std::to_string(lineno) + ": unknown label '" +
                             fields[3] + "'");
        }
        e.path = fields[4];
        m.entries.push_back(std::move(e));
    }
    m.validate();
    return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << kManifestHeader << "\n";
    for (const auto& e : manifest.entries) {
        out << e.subject_id << ',' << e.session << ',' << e.illumination << ','
            << label_name(e.label) << ',' << e.path << "\n";
    }
    if (!out) throw IoError("failed writing manifest " + path.string());
}

std::pair<Manifest, Manifest> subject_disjoint_split(const Manifest& manifest,
                                                     const SplitConfig& config) {
    if (config.n_train_subjects < 1 || config.n_test_subjects < 1) {
        throw ContractError("split: subject counts must be positive");
    }
    std::vector<std::string> subj = manifest.subjects();
    if (subj.size() < static_cast<std::size_t>(config.n_train_subjects + config.n_test_subjects)) {
        throw ContractError("split: not enough subjects (" + std::to_string(subj.size()) + ")");
    }
    Rng rng(config.seed);
    rng.shuffle(subj);
    std::set<std::string> train_ids(subj.begin(), subj.begin() + config.n_train_subjects);
    std::set<std::string> test_ids(subj.begin() + config.n_train_subjects,
                                   subj.begin() + config.n_train_subjects + config.n_test_subjects);
    Manifest train, test;
    train.root = manifest.root;
    test.root = manifest.root;
    for (const auto& e : manifest.entries) {
        if (train_ids.count(e.subject_id)) {
            train.entries.push_back(e);
        } else if (test_ids.count(e.subject_id)) {
            test.entries.push_back(e);
        }
    }
    return {std::move(train), std::move(test)};
}

namespace {

// Reads one whitespace-delimited token, skipping '#' comments, as PGM allows.
std::string next_pnm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
        } else if (!std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            while ((c = in.get()) != EOF && !std::isspace(c) && c != '#') {
                tok.push_back(static_cast<char>(c));
            }
            if (c == '#') in.unget();
            return tok;
        }
    }
    return tok;
}

} // namespace

GrayImage read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image " + path.string());
    std::string magic = next_pnm_token(in);
    if (magic != "P5") {
        throw ParseError("unsupported image format in " + path.string() + " (want binary P5)");
    }
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_pnm_token(in));
        h = std::stoi(next_pnm_token(in));
        maxval = std::stoi(next_pnm_token(in));
    } catch (const std::exception&) {
        throw ParseError("bad P5 header in " + path.string());
    }
    if (maxval != 255) {
        throw ParseError("unsupported maxval " + std::to_string(maxval) + " in " + path.string());
    }
    if (w < 1 || h < 1 || w > 65535 || h > 65535) {
        throw ParseError("bad P5 dimensions in " + path.string());
    }
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw ParseError("truncated P5 data in " + path.string());
    }
    return from_bytes(raw, w, h);
}

void write_image(const GrayImage& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image " + path.string());
    out << "P5\n" << image.width() << " " << image.height() << "\n255\n";
    const std::vector<std::uint8_t> raw = to_bytes(image);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("failed writing image " + path.string());
}

namespace {

void write_pfm_payload(const std::filesystem::path& path, const char* magic, int w, int h,
                       int channels, const float* data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write float map " + path.string());
    out << magic << "\n" << w << " " << h << "\n-1.0\n"; // negative scale: little-endian
    for (int y = h - 1; y >= 0; --y) {                   // bottom-up scanlines
        const float* row = data + static_cast<std::size_t>(y) * w * channels;
        out.write(reinterpret_cast<const char*>(row),
                  static_cast<std::streamsize>(sizeof(float) * w * channels));
    }
    if (!out) throw IoError("failed writing float map " + path.string());
}

std::vector<float> read_pfm_payload(const std::filesystem::path& path, const char* want_magic,
                                    int channels, int& w, int& h) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open float map " + path.string());
    const std::string magic = next_pnm_token(in);
    if (magic != want_magic) throw ParseError("float map magic mismatch in " + path.string());
    double scale = 0.0;
    try {
        w = std::stoi(next_pnm_token(in));
        h = std::stoi(next_pnm_token(in));
        scale = std::stod(next_pnm_token(in));
    } catch (const std::exception&) {
        throw ParseError("bad float map header in " + path.string());
    }
    if (scale >= 0.0) throw ParseError("big-endian float map not supported: " + path.string());
    if (w < 1 || h < 1 || w > 65535 || h > 65535) {
        throw ParseError("bad float map dimensions in " + path.string());
    }
    std::vector<float> data(static_cast<std::size_t>(w) * h * channels);
    for (int y = h - 1; y >= 0; --y) {
        float* row = data.data() + static_cast<std::size_t>(y) * w * channels;
        in.read(reinterpret_cast<char*>(row),
                static_cast<std::streamsize>(sizeof(float) * w * channels));
        if (in.gcount() != static_cast<std::streamsize>(sizeof(float) * w * channels)) {
            throw ParseError("truncated float map " + path.string());
        }
    }
    return data;
}

} // namespace

void write_pfm(const ScalarMap& map, const std::filesystem::path& path) {
    std::vector<float> data(map.values().size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = static_cast<float>(map.values()[i]);
    }
    write_pfm_payload(path, "Pf", map.width(), map.height(), 1, data.data());
}

void write_pfm(const NormalMap& map, const std::filesystem::path& path) {
    std::vector<float> data(map.normals().size() * 3);
    for (std::size_t i = 0; i < map.normals().size(); ++i) {
        data[3 * i + 0] = static_cast<float>(map.normals()[i][0]);
        data[3 * i + 1] = static_cast<float>(map.normals()[i][1]);
        data[3 * i + 2] = static_cast<float>(map.normals()[i][2]);
    }
    write_pfm_payload(path, "PF", map.width(), map.height(), 3, data.data());
}

ScalarMap read_pfm_scalar(const std::filesystem::path& path) {
    int w = 0, h = 0;
    const std::vector<float> data = read_pfm_payload(path, "Pf", 1, w, h);
    std::vector<double> values(data.begin(), data.end());
    return ScalarMap(w, h, std::move(values));
}

NormalMap read_pfm_normals(const std::filesystem::path& path) {
    int w = 0, h = 0;
    const std::vector<float> data = read_pfm_payload(path, "PF", 3, w, h);
    std::vector<std::array<double, 3>> normals(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < normals.size(); ++i) {
        normals[i] = {static_cast<double>(data[3 * i]), static_cast<double>(data[3 * i + 1]),
                      static_cast<double>(data[3 * i + 2])};
    }
    return NormalMap(w, h, std::move(normals));
}

void SynthConfig::validate() const {
    if (n_subjects < 1) throw ContractError("SynthConfig: n_subjects < 1");
    if (width < 64 || height < 64) throw ContractError("SynthConfig: image too small");
    if (vein_count_min < 1 || vein_count_max < vein_count_min) {
        throw ContractError("SynthConfig: bad vein count range");
    }
    if (!(vein_width_min > 0.0) || vein_width_max < vein_width_min) {
        throw ContractError("SynthConfig: bad vein width range");
    }
    if (!(vein_contrast_min > 0.0) || vein_contrast_max < vein_contrast_min ||
        vein_contrast_max >= 1.0) {
        throw ContractError("SynthConfig: bad vein contrast range");
    }
    for (double s : illumination_scales) {
        if (!(s > 0.0)) throw ContractError("SynthConfig: nonpositive illumination scale");
    }
    if (!(sensor_noise_sigma >= 0.0)) throw ContractError("SynthConfig: negative noise sigma");
    if (!(halftone_period > 0.0)) throw ContractError("SynthConfig: nonpositive halftone period");
    if (!(paper_grain_amplitude >= 0.0) || !(halftone_amplitude >= 0.0)) {
        throw ContractError("SynthConfig: negative print amplitude");
    }
    if (normal_flattening < 0.0 || normal_flattening > 1.0) {
        throw ContractError("SynthConfig: flattening factor outside [0,1]");
    }
}

namespace {

struct Vein {
    double y0 = 0.0;       // baseline row
    double amp = 0.0;      // meander amplitude, px
    double wavelength = 1.0;
    double phase = 0.0;
    double drift = 0.0;    // rows per column
    double sigma = 1.0;    // gaussian half-width of the dark profile
    double contrast = 0.0;
};

struct Wave { // low-frequency cosine component of a smooth random field
    double fx = 0.0, fy = 0.0, phase = 0.0, amp = 0.0;
};

struct SubjectScene {
    double relief = 0.0;       // cylinder crest height, px
    double radius = 1.0;       // cylinder half-width, px
    std::vector<Wave> bumps;   // height-field perturbations
    std::vector<Wave> mottle;  // albedo texture
    std::vector<Wave> grain;   // paper grain of the print
    std::vector<Vein> veins;
    double albedo_base = 0.8;
    LightingCoeffs light{};
    std::array<std::array<int, 2>, 2> session_shift{}; // (dx, dy) per session
};

double field_at(const std::vector<Wave>& waves, double x, double y) {
    double v = 0.0;
    for (const auto& w : waves) {
        v += w.amp * std::cos(2.0 * 3.14159265358979323846 * (w.fx * x + w.fy * y) + w.phase);
    }
    return v;
}

// Cylinder profile with tapered margins so edge slopes stay finite.
double height_at(const SubjectScene& sc, int width, double x, double y, double cy) {
    (void)width;
    double u = (y - cy) / sc.radius;
    if (u > 0.92) u = 0.92;
    if (u < -0.92) u = -0.92;
    return sc.relief * std::sqrt(1.0 - u * u) + field_at(sc.bumps, x, y);
}

SubjectScene build_scene(const SynthConfig& cfg, Rng& rng_subject) {
    SubjectScene sc;
    sc.relief = rng_subject.uniform(24.0, 40.0);
    sc.radius = 0.46 * cfg.height;
    const int n_bumps = 3;
    for (int i = 0; i < n_bumps; ++i) {
        Wave w;
        w.amp = rng_subject.uniform(1.0, 3.0);
        const double cycles = rng_subject.uniform(1.0, 3.0);
        const double ang = rng_subject.uniform(0.0, 2.0 * 3.14159265358979323846);
        w.fx = cycles * std::cos(ang) / cfg.width;
        w.fy = cycles * std::sin(ang) / cfg.width;
        w.phase = rng_subject.uniform(0.0, 2.0 * 3.14159265358979323846);
        sc.bumps.push_back(w);
    }
    sc.albedo_base = rng_subject.uniform(0.75, 0.88);
    for (int i = 0; i < 3; ++i) {
        Wave w;
        w.amp = rng_subject.uniform(0.015, 0.045);
        const double cycles = rng_subject.uniform(1.5, 4.0);
        const double ang = rng_subject.uniform(0.0, 2.0 * 3.14159265358979323846);
        w.fx = cycles * std::cos(ang) / cfg.width;
        w.fy = cycles * std::sin(ang) / cfg.width;
        w.phase = rng_subject.uniform(0.0, 2.0 * 3.14159265358979323846);
        sc.mottle.push_back(w);
    }
    for (int i = 0; i < 6; ++i) {
        Wave w;
        w.amp = 1.0 / std::sqrt(6.0);
        const double wavelength = rng_subject.uniform(6.0, 20.0);
        const double ang = rng_subject.uniform(0.0, 2.0 * 3.14159265358979323846);
        w.fx = std::cos(ang) / wavelength;
        w.fy = std::sin(ang) / wavelength;
        w.phase = rng_subject.uniform(0.0, 2.0 * 3.14159265358979323846);
        sc.grain.push_back(w);
    }
    const int n_veins = cfg.vein_count_min +
                        static_cast<int>(rng_subject.index(
                            static_cast<std::size_t>(cfg.vein_count_max - cfg.vein_count_min + 1)));
    for (int i = 0; i < n_veins; ++i) {
        Vein v;
        v.y0 = rng_subject.uniform(0.12, 0.88) * cfg.height;
        v.amp = rng_subject.uniform(5.0, 25.0);
        v.wavelength = rng_subject.uniform(0.5, 1.5) * cfg.width;
        v.phase = rng_subject.uniform(0.0, 2.0 * 3.14159265358979323846);
        v.drift = rng_subject.uniform(-0.15, 0.15);
        v.sigma = rng_subject.uniform(cfg.vein_width_min, cfg.vein_width_max) / 2.0;
        v.contrast = rng_subject.uniform(cfg.vein_contrast_min, cfg.vein_contrast_max);
        sc.veins.push_back(v);
    }
    // Lighting: ambient + mostly-frontal directional + mild second order,
    // rescaled below so the brightest pixel stays clear of clipping.
    sc.light.l[0] = rng_subject.uniform(0.9, 1.2);
    sc.light.l[1] = rng_subject.uniform(-0.15, 0.15);
    sc.light.l[2] = rng_subject.uniform(0.7, 1.0);
    sc.light.l[3] = rng_subject.uniform(-0.2, 0.2);
    sc.light.l[4] = rng_subject.uniform(-0.08, 0.08);
    sc.light.l[5] = rng_subject.uniform(-0.08, 0.08);
    sc.light.l[6] = rng_subject.uniform(0.05, 0.25);
    sc.light.l[7] = rng_subject.uniform(-0.08, 0.08);
    sc.light.l[8] = rng_subject.uniform(-0.08, 0.08);
    for (auto& shift : sc.session_shift) {
        shift[0] = static_cast<int>(rng_subject.index(11)) - 5;
        shift[1] = static_cast<int>(rng_subject.index(11)) - 5;
    }
    return sc;
}

std::array<double, 3> scene_normal(const SubjectScene& sc, const SynthConfig& cfg, double x,
                                   double y, double cy) {
    const double hx = (height_at(sc, cfg.width, x + 1.0, y, cy) -
                       height_at(sc, cfg.width, x - 1.0, y, cy)) / 2.0;
    const double hy = (height_at(sc, cfg.width, x, y + 1.0, cy) -
                       height_at(sc, cfg.width, x, y - 1.0, cy)) / 2.0;
    const double len = std::sqrt(hx * hx + hy * hy + 1.0);
    return {-hx / len, -hy / len, 1.0 / len};
}

double scene_albedo(const SubjectScene& sc, double x, double y) {
    double a = sc.albedo_base + field_at(sc.mottle, x, y);
    for (const auto& v : sc.veins) {
        const double yc = v.y0 + v.amp * std::sin(2.0 * 3.14159265358979323846 * x / v.wavelength +
                                                  v.phase) +
                          v.drift * x;
        const double d = y - yc;
        if (std::fabs(d) < 4.0 * v.sigma) {
            a *= 1.0 - v.contrast * std::exp(-0.5 * d * d / (v.sigma * v.sigma));
        }
    }
    return std::clamp(a, 0.05, 1.0);
}

double sh_shade(const LightingCoeffs& l, const std::array<double, 3>& n) {
    const double x = n[0], y = n[1], z = n[2];
    return l.l[0] * 0.282095 +
           0.488603 * (l.l[1] * y + l.l[2] * z + l.l[3] * x) +
           1.092548 * (l.l[4] * x * y + l.l[5] * y * z + l.l[7] * x * z) +
           l.l[6] * 0.315392 * (3.0 * z * z - 1.0) +
           l.l[8] * 0.546274 * (x * x - y * y);
}

} // namespace

Manifest synth_generate(const SynthConfig& config, const std::filesystem::path& out_dir) {
    config.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string());

    const int W = config.width, H = config.height;
    const std::size_t n_px = static_cast<std::size_t>(W) * H;
    const Rng rng_root(config.seed);

    Manifest manifest;
    manifest.root = out_dir;

    std::vector<double> albedo(n_px), shade(n_px), albedo_att(n_px), shade_att(n_px);

    for (int s = 0; s < config.n_subjects; ++s) {
        char sid[16];
        std::snprintf(sid, sizeof(sid), "S%03d", s + 1);
        const std::string subject = sid;
        Rng rng_subject = rng_root.derive(static_cast<std::uint64_t>(s));
        SubjectScene sc = build_scene(config, rng_subject);

        std::filesystem::create_directories(out_dir / subject, ec);
        if (ec) throw IoError("cannot create subject directory " + (out_dir / subject).string());

        // Rescale lighting so the brightest diffuse pixel at the strongest
        // illumination stays just below 1 (keeps clipping from becoming a cue).
        {
            const double cy = H / 2.0;
            double smax = 1e-9;
            for (int y = 0; y < H; y += 4) {
                for (int x = 0; x < W; x += 4) {
                    smax = std::max(smax, sh_shade(sc.light, scene_normal(sc, config, x, y, cy)));
                }
            }
            const double max_scale =
                *std::max_element(config.illumination_scales.begin(),
                                  config.illumination_scales.end());
            const double target = 0.96 / max_scale; // peak albedo is < 1 by construction
            for (double& v : sc.light.l) v *= target / smax;
        }

        for (int session = 1; session <= 2; ++session) {
            // Finger placement shifts a few pixels between sessions: all scene
            // fields (geometry, albedo, print screen) are sampled at the
            // translated coordinates.
            const double dx = sc.session_shift[session - 1][0];
            const double dy = sc.session_shift[session - 1][1];
            const double cy = H / 2.0;

            // Shared per-session fields; the three illumination renders only
            // rescale lighting and redraw sensor noise.
            for (int y = 0; y < H; ++y) {
                for (int x = 0; x < W; ++x) {
                    const double sx = x - dx, sy = y - dy;
                    const std::size_t p = static_cast<std::size_t>(y) * W + x;
                    const auto n = scene_normal(sc, config, sx, sy, cy);
                    albedo[p] = scene_albedo(sc, sx, sy);
                    shade[p] = std::max(0.0, sh_shade(sc.light, n));

                    std::array<double, 3> nf = {
                        (1.0 - config.normal_flattening) * n[0],
                        (1.0 - config.normal_flattening) * n[1],
                        (1.0 - config.normal_flattening) * n[2] + config.normal_flattening};
                    const double len = std::sqrt(nf[0] * nf[0] + nf[1] * nf[1] + nf[2] * nf[2]);
                    nf = {nf[0] / len, nf[1] / len, nf[2] / len};
                    shade_att[p] = std::max(0.0, sh_shade(sc.light, nf));

                    const double tpi = 2.0 * 3.14159265358979323846;
                    const double rot = (sx + sy) / (config.halftone_period * 1.41421356237309505);
                    const double rot2 = (sx - sy) / (config.halftone_period * 1.41421356237309505);
                    const double screen = 0.5 * (1.0 + std::sin(tpi * rot) * std::sin(tpi * rot2));
                    const double grain = field_at(sc.grain, sx, sy);
                    albedo_att[p] = std::clamp(albedo[p] *
                                                   (1.0 - config.halftone_amplitude * screen) *
                                                   (1.0 + config.paper_grain_amplitude * grain),
                                               0.02, 1.2);
                }
            }

            for (int illum = 1; illum <= 3; ++illum) {
                const double scale = config.illumination_scales[illum - 1];
                for (int which = 0; which < 2; ++which) {
                    const bool attack = which == 1;
                    const std::uint64_t stream =
                        1000 + (static_cast<std::uint64_t>(session - 1) * 3 + (illum - 1)) * 2 +
                        (attack ? 1 : 0);
                    Rng rng_img = rng_subject.derive(stream);
                    std::vector<double> px(n_px);
                    const std::vector<double>& a = attack ? albedo_att : albedo;
                    const std::vector<double>& sh = attack ? shade_att : shade;
                    for (std::size_t p = 0; p < n_px; ++p) {
                        double v = a[p] * sh[p] * scale;
                        if (config.sensor_noise_sigma > 0.0) {
                            v += config.sensor_noise_sigma * rng_img.gaussian();
                        }
                        px[p] = std::clamp(v, 0.0, 1.0);
                    }
                    ManifestEntry e;
                    e.subject_id = subject;
                    e.session = session;
                    e.illumination = illum;
                    e.label = attack ? PresentationLabel::Attack : PresentationLabel::BonaFide;
                    e.path = subject + "/s" + std::to_string(session) + "_i" +
                             std::to_string(illum) + "_" + label_name(e.label) + ".pgm";
                    write_image(GrayImage(W, H, std::move(px)), out_dir / e.path);
                    manifest.entries.push_back(std::move(e));
                }
            }
        }
    }

    manifest.validate();
    save_manifest(manifest, out_dir / "manifest.csv");
    return manifest;
}

} // namespace veinpad
