#include "veinpad/descriptors.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "veinpad/rng.hpp"

namespace veinpad {

namespace {

constexpr double kPi = 3.14159265358979323846;

FeatureVector normalize_counts(const std::vector<std::uint64_t>& counts, DescriptorKind kind,
                               SourceKind source) {
    std::uint64_t total = 0;
    for (std::uint64_t c : counts) total += c;
    if (total == 0) throw DimensionError("descriptor: no valid positions");
    FeatureVector fv;
    fv.descriptor_kind = kind;
    fv.source_kind = source;
    fv.bins.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        fv.bins[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    }
    return fv;
}

// ---------------------------------------------------------------- LBP ----

// 59-entry uniform-2 code map: uniform codes (<= 2 circular transitions) get
// indices 0..57 in ascending code order, everything else falls in bin 58.
const std::array<int, 256>& lbp_uniform_map() {
    static const std::array<int, 256> map = [] {
        std::array<int, 256> m{};
        int next = 0;
        for (int code = 0; code < 256; ++code) {
            int transitions = 0;
            for (int b = 0; b < 8; ++b) {
                const int cur = (code >> b) & 1;
                const int nxt = (code >> ((b + 1) & 7)) & 1;
                if (cur != nxt) ++transitions;
            }
            m[code] = transitions <= 2 ? next++ : 58;
        }
        return m;
    }();
    return map;
}

// Circular neighbor offsets (dy, dx) at angles 2*pi*i/8, y pointing down.
// Exact on the axes, +-sqrt(0.5) on the diagonals.
constexpr double kD = 0.70710678118654752440;
constexpr double kLbpOffsets[8][2] = {
    {0.0, 1.0}, {kD, kD}, {1.0, 0.0}, {kD, -kD},
    {0.0, -1.0}, {-kD, -kD}, {-1.0, 0.0}, {-kD, kD},
};

} // namespace

std::vector<std::uint64_t> lbp_counts(const GrayImage& image) {
    const int w = image.width(), h = image.height();
    if (w < 3 || h < 3) throw DimensionError("lbp: image smaller than 3x3");
    const auto& map = lbp_uniform_map();
    const auto& px = image.pixels();
    std::vector<std::uint64_t> counts(59, 0);

    // Per-neighbor integer base offsets and bilinear weights.
    int base_dy[8], base_dx[8];
    double w00[8], w01[8], w10[8], w11[8];
    bool integral[8];
    for (int i = 0; i < 8; ++i) {
        const double dy = kLbpOffsets[i][0], dx = kLbpOffsets[i][1];
        const double fy0 = std::floor(dy), fx0 = std::floor(dx);
        base_dy[i] = static_cast<int>(fy0);
        base_dx[i] = static_cast<int>(fx0);
        const double fy = dy - fy0, fx = dx - fx0;
        integral[i] = fy == 0.0 && fx == 0.0;
        w00[i] = (1.0 - fy) * (1.0 - fx);
        w01[i] = (1.0 - fy) * fx;
        w10[i] = fy * (1.0 - fx);
        w11[i] = fy * fx;
    }

    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            const double c = px[static_cast<std::size_t>(y) * w + x];
            int code = 0;
            for (int i = 0; i < 8; ++i) {
                const int by = y + base_dy[i], bx = x + base_dx[i];
                double v;
                if (integral[i]) {
                    v = px[static_cast<std::size_t>(by) * w + bx];
                } else {
                    const std::size_t p = static_cast<std::size_t>(by) * w + bx;
                    v = c + w00[i] * (px[p] - c) + w01[i] * (px[p + 1] - c) +
                        w10[i] * (px[p + w] - c) + w11[i] * (px[p + w + 1] - c);
                }
                if (v >= c) code |= 1 << i;
            }
            ++counts[static_cast<std::size_t>(map[code])];
        }
    }
    return counts;
}

FeatureVector lbp_histogram(const GrayImage& image) {
    return normalize_counts(lbp_counts(image), DescriptorKind::LBP, SourceKind::Raw);
}

// ---------------------------------------------------------------- LPQ ----

namespace {

struct LpqTables {
    // 49-tap window, row-major (ty outer, tx inner), offsets -3..3.
    // Row order of the 8 basis rows: Re f1, Im f1, Re f2, Im f2, ...
    double basis[8][49];
    double v[8][8]; // decorrelation matrix V, v[row][col]
};

const LpqTables& lpq_tables() {
    static const LpqTables tables = [] {
        LpqTables t{};
        const double a = 1.0 / 7.0;
        const double freqs[4][2] = {{a, 0.0}, {0.0, a}, {a, a}, {a, -a}}; // (fx, fy)
        for (int f = 0; f < 4; ++f) {
            for (int ty = -3; ty <= 3; ++ty) {
                for (int tx = -3; tx <= 3; ++tx) {
                    const int idx = (ty + 3) * 7 + (tx + 3);
                    const double ang = 2.0 * kPi * (freqs[f][0] * tx + freqs[f][1] * ty);
                    t.basis[2 * f][idx] = std::cos(ang);
                    t.basis[2 * f + 1][idx] = -std::sin(ang);
                }
            }
        }
        // Whitening under the exponential correlation model: D = B C B^T with
        // C_ij = 0.9^|pos_i - pos_j|; V's columns are D's eigenvectors with
        // eigenvalues descending, largest-magnitude entry of each positive.
        Eigen::MatrixXd C(49, 49);
        for (int i = 0; i < 49; ++i) {
            const double yi = i / 7 - 3, xi = i % 7 - 3;
            for (int j = 0; j < 49; ++j) {
                const double yj = j / 7 - 3, xj = j % 7 - 3;
                const double d = std::hypot(xi - xj, yi - yj);
                C(i, j) = std::pow(0.9, d);
            }
        }
        Eigen::MatrixXd B(8, 49);
        for (int r = 0; r < 8; ++r) {
            for (int c = 0; c < 49; ++c) B(r, c) = t.basis[r][c];
        }
        const Eigen::MatrixXd D = B * C * B.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
        // Eigen returns eigenvalues ascending; reverse for descending order.
        for (int col = 0; col < 8; ++col) {
            const int src = 7 - col;
            Eigen::VectorXd v = es.eigenvectors().col(src);
            int arg = 0;
            for (int i = 1; i < 8; ++i) {
                if (std::fabs(v(i)) > std::fabs(v(arg))) arg = i;
            }
            if (v(arg) < 0.0) v = -v;
            for (int row = 0; row < 8; ++row) t.v[row][col] = v(row);
        }
        return t;
    }();
    return tables;
}

} // namespace

std::array<double, 64> lpq_decorrelation() {
    const auto& t = lpq_tables();
    std::array<double, 64> out{};
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) out[static_cast<std::size_t>(r) * 8 + c] = t.v[r][c];
    }
    return out;
}

std::vector<std::uint64_t> lpq_counts(const GrayImage& image) {
    const int w = image.width(), h = image.height();
    if (w < 7 || h < 7) throw DimensionError("lpq: image smaller than 7x7");
    const auto& t = lpq_tables();
    const auto& px = image.pixels();
    std::vector<std::uint64_t> counts(256, 0);

    // Tap-major over one output row at a time: each accumulator g[q][x] sums
    // its 49 taps in the same ascending order a per-pixel loop would, so the
    // result is bit-identical, but the x loop vectorizes.
    const int span = w - 6; // valid output columns per row
    std::vector<double> acc(8 * static_cast<std::size_t>(span));
    std::vector<double> diff(span);
    for (int y = 3; y < h - 3; ++y) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const double* center = px.data() + static_cast<std::size_t>(y) * w + 3;
        int idx = 0;
        for (int ty = -3; ty <= 3; ++ty) {
            const double* nrow = px.data() + static_cast<std::size_t>(y + ty) * w + 3;
            for (int tx = -3; tx <= 3; ++tx, ++idx) {
                for (int x = 0; x < span; ++x) diff[x] = nrow[x + tx] - center[x];
                for (int q = 0; q < 8; ++q) {
                    double* a = acc.data() + static_cast<std::size_t>(q) * span;
                    const double bq = t.basis[q][idx];
                    for (int x = 0; x < span; ++x) a[x] += bq * diff[x];
                }
            }
        }
        for (int x = 0; x < span; ++x) {
            int code = 0;
            for (int j = 0; j < 8; ++j) {
                double gp = 0.0;
                for (int i = 0; i < 8; ++i) gp += t.v[i][j] * acc[i * span + x];
                if (gp > 0.0) code |= 1 << j;
            }
            ++counts[static_cast<std::size_t>(code)];
        }
    }
    return counts;
}

FeatureVector lpq_histogram(const GrayImage& image) {
    return normalize_counts(lpq_counts(image), DescriptorKind::LPQ, SourceKind::Raw);
}

// --------------------------------------------------------------- BSIF ----

FilterBank::FilterBank(int k, int s, std::vector<std::vector<double>> filters,
                       bool ica_converged)
    : k_(k), s_(s), filters_(std::move(filters)), ica_converged_(ica_converged) {
    if (k_ < 1 || k_ > 24) throw ContractError("FilterBank: filter count out of range");
    if (s_ < 3 || s_ % 2 == 0) throw ContractError("FilterBank: side must be odd and >= 3");
    if (filters_.size() != static_cast<std::size_t>(k_)) {
        throw DimensionError("FilterBank: wrong filter count");
    }
    const std::size_t d = static_cast<std::size_t>(s_) * s_;
    for (const auto& f : filters_) {
        if (f.size() != d) throw DimensionError("FilterBank: wrong filter size");
        double sum = 0.0;
        for (double v : f) {
            if (!std::isfinite(v)) throw ContractError("FilterBank: non-finite tap");
            sum += v;
        }
        if (std::fabs(sum) > 1e-6) throw ContractError("FilterBank: filter is not zero-mean");
    }
    Eigen::MatrixXd gram(k_, k_);
    for (int i = 0; i < k_; ++i) {
        for (int j = 0; j < k_; ++j) {
            double dot = 0.0;
            for (std::size_t p = 0; p < d; ++p) dot += filters_[i][p] * filters_[j][p];
            gram(i, j) = dot;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(es.eigenvalues().minCoeff() > 1e-9 * std::max(lmax, 1e-30))) {
        throw ContractError("FilterBank: filters are not linearly independent");
    }
}

std::vector<std::uint64_t> bsif_counts(const GrayImage& image, const FilterBank& bank) {
    const int w = image.width(), h = image.height();
    const int s = bank.s(), r = s / 2, k = bank.k();
    if (w < s || h < s) throw DimensionError("bsif: image smaller than filter");
    const auto& px = image.pixels();
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(1) << k, 0);

    std::vector<const double*> taps(k);
    for (int i = 0; i < k; ++i) taps[i] = bank.filter(i).data();

    // Tap-major per output row (see lpq_counts): per-accumulator addition
    // order matches the per-pixel formulation exactly.
    const int span = w - 2 * r;
    std::vector<double> acc(static_cast<std::size_t>(k) * span);
    std::vector<double> diff(span);
    for (int y = r; y < h - r; ++y) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const double* center = px.data() + static_cast<std::size_t>(y) * w + r;
        int idx = 0;
        for (int ty = -r; ty <= r; ++ty) {
            const double* nrow = px.data() + static_cast<std::size_t>(y + ty) * w + r;
            for (int tx = -r; tx <= r; ++tx, ++idx) {
                for (int x = 0; x < span; ++x) diff[x] = nrow[x + tx] - center[x];
                for (int i = 0; i < k; ++i) {
                    double* a = acc.data() + static_cast<std::size_t>(i) * span;
                    const double wi = taps[i][idx];
                    for (int x = 0; x < span; ++x) a[x] += wi * diff[x];
                }
            }
        }
        for (int x = 0; x < span; ++x) {
            int code = 0;
            for (int i = 0; i < k; ++i) {
                if (acc[static_cast<std::size_t>(i) * span + x] > 0.0) code |= 1 << i;
            }
            ++counts[static_cast<std::size_t>(code)];
        }
    }
    return counts;
}

FeatureVector bsif_histogram(const GrayImage& image, const FilterBank& bank) {
    return normalize_counts(bsif_counts(image, bank), DescriptorKind::BSIF, SourceKind::Raw);
}

FilterBank learn_bsif_filters(const std::vector<std::vector<double>>& patches, int k, int s,
                              std::uint64_t seed) {
    const std::size_t n = patches.size();
    const int d = s * s;
    if (n < 5000) throw TrainingError("learn_bsif_filters: needs at least 5000 patches");
    if (k < 1 || k > d - 1) throw ContractError("learn_bsif_filters: k outside [1, s*s-1]");
    for (const auto& p : patches) {
        if (p.size() != static_cast<std::size_t>(d)) {
            throw DimensionError("learn_bsif_filters: patch size mismatch");
        }
    }

    // Each patch first loses its own mean: the DC direction carries brightness,
    // not texture, and would otherwise own the leading eigenvector only to be
    // annihilated by the zero-mean correction at the end, leaving a near-singular
    // bank. Removing it costs one dimension, hence the k <= s*s-1 bound. The
    // per-dimension centering after that keeps the covariance estimate honest.
    Eigen::MatrixXd xc(d, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = patches[i];
        double dc = 0.0;
        for (int j = 0; j < d; ++j) dc += p[j];
        dc /= static_cast<double>(d);
        for (int j = 0; j < d; ++j) xc(j, static_cast<Eigen::Index>(i)) = p[j] - dc;
    }
    const Eigen::VectorXd mu = xc.rowwise().mean();
    xc.colwise() -= mu;

    // PCA whitening to k dimensions.
    const Eigen::MatrixXd cov = xc * xc.transpose() / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    Eigen::MatrixXd wht(k, d);
    for (int i = 0; i < k; ++i) {
        const int src = d - 1 - i; // eigenvalues ascending in Eigen
        const double lambda = es.eigenvalues()(src);
        if (!(lambda > 0.0)) {
            throw TrainingError("learn_bsif_filters: patch covariance is rank-deficient");
        }
        Eigen::VectorXd v = es.eigenvectors().col(src);
        int arg = 0;
        for (int j = 1; j < d; ++j) {
            if (std::fabs(v(j)) > std::fabs(v(arg))) arg = j;
        }
        if (v(arg) < 0.0) v = -v;
        wht.row(i) = v.transpose() / std::sqrt(lambda);
    }
    const Eigen::MatrixXd z = wht * xc; // k x n, identity covariance

    // Symmetric decorrelation: W <- (W W^T)^(-1/2) W.
    const auto decorrelate = [](const Eigen::MatrixXd& m) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> des(m * m.transpose());
        if (!(des.eigenvalues().minCoeff() > 0.0)) {
            throw TrainingError("learn_bsif_filters: degenerate rotation during ICA");
        }
        const Eigen::MatrixXd inv_sqrt =
            des.eigenvectors() *
            des.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
            des.eigenvectors().transpose();
        return Eigen::MatrixXd(inv_sqrt * m);
    };

    Rng rng(seed);
    Eigen::MatrixXd w(k, k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) w(i, j) = rng.gaussian();
    }
    w = decorrelate(w);

    // Fixed-point ICA, cubic nonlinearity: w_i <- E[z (w_i.z)^3] - 3 w_i.
    bool converged = false;
    double best_delta = 1e300;
    Eigen::MatrixXd best_w = w;
    for (int iter = 0; iter < 200; ++iter) {
        const Eigen::MatrixXd y = w * z;                 // k x n
        const Eigen::MatrixXd y3 = y.array().cube();     // g(y)
        Eigen::MatrixXd w_new = y3 * z.transpose() / static_cast<double>(n);
        const Eigen::VectorXd gp = 3.0 * y.array().square().rowwise().mean();
        w_new -= gp.asDiagonal() * w;
        w_new = decorrelate(w_new);
        const double delta =
            1.0 - (w_new * w.transpose()).diagonal().cwiseAbs().minCoeff();
        w = w_new;
        if (delta < best_delta) {
            best_delta = delta;
            best_w = w;
        }
        if (delta < 1e-5) {
            converged = true;
            break;
        }
    }
    if (!converged) w = best_w;

    const Eigen::MatrixXd f = w * wht; // k x d, rows are the filters
    std::vector<std::vector<double>> filters(k, std::vector<double>(d));
    for (int i = 0; i < k; ++i) {
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += f(i, j);
        mean /= d;
        for (int j = 0; j < d; ++j) filters[static_cast<std::size_t>(i)][j] = f(i, j) - mean;
    }
    return FilterBank(k, s, std::move(filters), converged);
}

void save_filter_bank(const FilterBank& bank, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write filter bank " + path.string());
    out << "BSIF " << bank.k() << " " << bank.s() << "\n";
    char buf[32];
    for (int i = 0; i < bank.k(); ++i) {
        const auto& f = bank.filter(i);
        for (std::size_t j = 0; j < f.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", f[j]);
            out << buf << (j + 1 == f.size() ? "\n" : " ");
        }
    }
    if (!out) throw IoError("failed writing filter bank " + path.string());
}

FilterBank load_filter_bank(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open filter bank " + path.string());
    std::string magic;
    int k = 0, s = 0;
    if (!(in >> magic >> k >> s) || magic != "BSIF") {
        throw ParseError("bad filter bank header in " + path.string());
    }
    if (k < 1 || k > 24 || s < 3) throw ParseError("bad filter bank shape in " + path.string());
    std::vector<std::vector<double>> filters(k, std::vector<double>(static_cast<std::size_t>(s) * s));
    for (auto& f : filters) {
        for (double& v : f) {
            if (!(in >> v)) throw ParseError("truncated filter bank " + path.string());
        }
    }
    return FilterBank(k, s, std::move(filters));
}

// ----------------------------------------------------------- dispatch ----

namespace {

FeatureVector single_channel(const GrayImage& img, DescriptorKind kind, const FilterBank* bank,
                             SourceKind source) {
    switch (kind) {
    case DescriptorKind::LBP:
        return normalize_counts(lbp_counts(img), kind, source);
    case DescriptorKind::LPQ:
        return normalize_counts(lpq_counts(img), kind, source);
    case DescriptorKind::BSIF:
        if (bank == nullptr) throw ContractError("extract: BSIF requires a filter bank");
        return normalize_counts(bsif_counts(img, *bank), kind, source);
    }
    throw ContractError("extract: unknown descriptor kind");
}

} // namespace

std::vector<GrayImage> normal_channels(const NormalMap& normals) {
    const std::size_t n = normals.normals().size();
    std::vector<std::vector<double>> ch(3, std::vector<double>(n));
    for (std::size_t p = 0; p < n; ++p) {
        for (int c = 0; c < 3; ++c) {
            // (v+1)/2 maps [-1,1] into [0,1]; clamp shaves the 1e-6 unit-length
            // slack the NormalMap type permits.
            ch[c][p] = std::clamp((normals.normals()[p][c] + 1.0) / 2.0, 0.0, 1.0);
        }
    }
    std::vector<GrayImage> out;
    out.reserve(3);
    for (int c = 0; c < 3; ++c) {
        out.emplace_back(normals.width(), normals.height(), std::move(ch[c]));
    }
    return out;
}

FeatureVector extract_channels(const std::vector<GrayImage>& channels, DescriptorKind kind,
                               const FilterBank* bank, SourceKind source) {
    if (channels.empty()) throw DimensionError("extract: no channels");
    if (channels.size() == 1) return single_channel(channels[0], kind, bank, source);
    FeatureVector fv;
    fv.descriptor_kind = kind;
    fv.source_kind = source;
    for (const auto& ch : channels) {
        const FeatureVector part = single_channel(ch, kind, bank, source);
        fv.bins.insert(fv.bins.end(), part.bins.begin(), part.bins.end());
    }
    double total = 0.0;
    for (double b : fv.bins) total += b;
    for (double& b : fv.bins) b /= total;
    return fv;
}

FeatureVector extract(const GrayImage& raw, DescriptorKind kind, const FilterBank* bank) {
    return single_channel(raw, kind, bank, SourceKind::Raw);
}

FeatureVector extract(const ScalarMap& diffuse, DescriptorKind kind, const FilterBank* bank) {
    std::vector<double> values = diffuse.values();
    for (double v : values) {
        if (v > 1.0) throw ContractError("extract: diffuse map exceeds 1");
    }
    return single_channel(GrayImage(diffuse.width(), diffuse.height(), std::move(values)), kind,
                          bank, SourceKind::DiffuseMap);
}

FeatureVector extract(const NormalMap& normals, DescriptorKind kind, const FilterBank* bank) {
    return extract_channels(normal_channels(normals), kind, bank, SourceKind::NormalMap);
}

} // namespace veinpad
