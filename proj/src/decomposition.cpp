#include "veinpad/decomposition.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace veinpad {

namespace {

// Basri-Jacobs real SH constants.
constexpr double kC0 = 0.282095;
constexpr double kC1 = 0.488603;
constexpr double kC2 = 1.092548;
constexpr double kC3 = 0.315392;
constexpr double kC4 = 0.546274;

inline double sh_dot(const LightingCoeffs& l, double x, double y, double z) {
    return l.l[0] * kC0 +
           kC1 * (l.l[1] * y + l.l[2] * z + l.l[3] * x) +
           kC2 * (l.l[4] * x * y + l.l[5] * y * z + l.l[7] * x * z) +
           l.l[6] * kC3 * (3.0 * z * z - 1.0) +
           l.l[8] * kC4 * (x * x - y * y);
}

// sh_basis without the unit-length check, for solver internals where raw
// (possibly non-unit) vectors are legitimate.
inline std::array<double, 9> sh_basis_raw(const std::array<double, 3>& n) {
    const double x = n[0], y = n[1], z = n[2];
    return {kC0,
            kC1 * y,
            kC1 * z,
            kC1 * x,
            kC2 * x * y,
            kC2 * y * z,
            kC3 * (3.0 * z * z - 1.0),
            kC2 * x * z,
            kC4 * (x * x - y * y)};
}

// Separable Gaussian blur, replicate borders.
std::vector<double> gaussian_blur(const std::vector<double>& src, int w, int h,
                                  double sigma, int radius) {
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    std::vector<double> tmp(src.size()), dst(src.size());
    for (int y = 0; y < h; ++y) {
        const double* row = src.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[i + radius] * row[std::clamp(x + i, 0, w - 1)];
            }
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[i + radius] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
            }
            dst[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    return dst;
}

struct State {
    int w = 0, h = 0;
    std::vector<std::array<double, 3>> n; // unit normals during the solve
    std::vector<double> rho;
    LightingCoeffs l{};
};

double data_term(const GrayImage& img, const State& st) {
    const auto& px = img.pixels();
    double acc = 0.0;
    for (std::size_t p = 0; p < px.size(); ++p) {
        const auto& n = st.n[p];
        const double r = st.rho[p] * sh_dot(st.l, n[0], n[1], n[2]) - px[p];
        acc += r * r;
    }
    return acc;
}

double smooth_term(const State& st, double lambda) {
    if (lambda == 0.0) return 0.0;
    double acc = 0.0;
    for (int y = 0; y < st.h; ++y) {
        for (int x = 0; x < st.w; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * st.w + x;
            if (x + 1 < st.w) {
                const std::size_t q = p + 1;
                for (int c = 0; c < 3; ++c) {
                    const double d = st.n[p][c] - st.n[q][c];
                    acc += d * d;
                }
            }
            if (y + 1 < st.h) {
                const std::size_t q = p + st.w;
                for (int c = 0; c < 3; ++c) {
                    const double d = st.n[p][c] - st.n[q][c];
                    acc += d * d;
                }
            }
        }
    }
    return lambda * acc;
}

double full_objective(const GrayImage& img, const State& st, double lambda) {
    return data_term(img, st) + smooth_term(st, lambda);
}

// Least-squares lighting given normals and albedo, with a tiny ridge scaled
// to the normal matrix so near-degenerate scenes (constant images) stay solvable.
LightingCoeffs solve_lighting(const GrayImage& img, const State& st) {
    Eigen::Matrix<double, 9, 9> A = Eigen::Matrix<double, 9, 9>::Zero();
    Eigen::Matrix<double, 9, 1> b = Eigen::Matrix<double, 9, 1>::Zero();
    const auto& px = img.pixels();
    for (std::size_t p = 0; p < px.size(); ++p) {
        const auto y9 = sh_basis_raw(st.n[p]);
        const double r = st.rho[p];
        const double r2 = r * r;
        for (int i = 0; i < 9; ++i) {
            for (int j = i; j < 9; ++j) {
                A(i, j) += r2 * y9[i] * y9[j];
            }
            b(i) += r * px[p] * y9[i];
        }
    }
    for (int i = 0; i < 9; ++i) {
        for (int j = 0; j < i; ++j) A(i, j) = A(j, i);
    }
    const double ridge = 1e-8 * (A.trace() / 9.0 + 1e-12);
    for (int i = 0; i < 9; ++i) A(i, i) += ridge;
    const Eigen::Matrix<double, 9, 1> sol = A.ldlt().solve(b);
    LightingCoeffs out;
    for (int i = 0; i < 9; ++i) out.l[i] = sol(i);
    return out;
}

} // namespace

std::array<double, 9> sh_basis(const std::array<double, 3>& normal) {
    const double len = std::sqrt(normal[0] * normal[0] + normal[1] * normal[1] +
                                 normal[2] * normal[2]);
    if (!(std::fabs(len - 1.0) <= 1e-6)) {
        throw ContractError("sh_basis: normal is not unit length");
    }
    return sh_basis_raw(normal);
}

ScalarMap render_shading(const NormalMap& normals, const LightingCoeffs& lighting) {
    lighting.validate();
    std::vector<double> out(normals.normals().size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        const auto& n = normals.normals()[p];
        out[p] = std::max(0.0, sh_dot(lighting, n[0], n[1], n[2]));
    }
    return ScalarMap(normals.width(), normals.height(), std::move(out));
}

ScalarMap compose_diffuse(const ScalarMap& albedo, const ScalarMap& shading) {
    if (albedo.width() != shading.width() || albedo.height() != shading.height()) {
        throw DimensionError("compose_diffuse: dimension mismatch");
    }
    std::vector<double> out(albedo.values().size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        out[p] = std::clamp(albedo.values()[p] * shading.values()[p], 0.0, 1.0);
    }
    return ScalarMap(albedo.width(), albedo.height(), std::move(out));
}

void SolverConfig::validate() const {
    if (max_outer_iterations < 1) throw ContractError("SolverConfig: max_outer_iterations < 1");
    if (!(convergence_tol > 0.0) || convergence_tol >= 1.0) {
        throw ContractError("SolverConfig: convergence_tol outside (0,1)");
    }
    if (!(smoothness_weight >= 0.0)) throw ContractError("SolverConfig: negative smoothness_weight");
    if (!(shading_floor > 0.0)) throw ContractError("SolverConfig: shading_floor <= 0");
    if (!(init_height_gain > 0.0)) throw ContractError("SolverConfig: init_height_gain <= 0");
}

namespace solver {

double objective(const GrayImage& image,
                 const std::vector<std::array<double, 3>>& normals,
                 const std::vector<double>& albedo,
                 const LightingCoeffs& lighting,
                 double smoothness_weight) {
    if (normals.size() != image.pixels().size() || albedo.size() != image.pixels().size()) {
        throw DimensionError("solver::objective: field sizes differ from image");
    }
    State st;
    st.w = image.width();
    st.h = image.height();
    st.n = normals;
    st.rho = albedo;
    st.l = lighting;
    return full_objective(image, st, smoothness_weight);
}

std::vector<std::array<double, 3>> normal_gradient(
    const GrayImage& image,
    const std::vector<std::array<double, 3>>& normals,
    const std::vector<double>& albedo,
    const LightingCoeffs& lighting,
    double smoothness_weight) {
    if (normals.size() != image.pixels().size() || albedo.size() != image.pixels().size()) {
        throw DimensionError("solver::normal_gradient: field sizes differ from image");
    }
    const int w = image.width(), h = image.height();
    const auto& px = image.pixels();
    const auto& l = lighting.l;
    std::vector<std::array<double, 3>> g(normals.size(), {0.0, 0.0, 0.0});

    for (std::size_t p = 0; p < normals.size(); ++p) {
        const double x = normals[p][0], y = normals[p][1], z = normals[p][2];
        const double s = sh_dot(lighting, x, y, z);
        const double f = 2.0 * (albedo[p] * s - px[p]) * albedo[p];
        const double dsx = l[3] * kC1 + l[4] * kC2 * y + l[7] * kC2 * z + 2.0 * l[8] * kC4 * x;
        const double dsy = l[1] * kC1 + l[4] * kC2 * x + l[5] * kC2 * z - 2.0 * l[8] * kC4 * y;
        const double dsz = l[2] * kC1 + l[5] * kC2 * y + l[6] * kC3 * 6.0 * z + l[7] * kC2 * x;
        g[p] = {f * dsx, f * dsy, f * dsz};
    }
    if (smoothness_weight != 0.0) {
        const double two_lambda = 2.0 * smoothness_weight;
        for (int yy = 0; yy < h; ++yy) {
            for (int xx = 0; xx < w; ++xx) {
                const std::size_t p = static_cast<std::size_t>(yy) * w + xx;
                for (int c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    if (xx + 1 < w) acc += normals[p][c] - normals[p + 1][c];
                    if (xx > 0) acc += normals[p][c] - normals[p - 1][c];
                    if (yy + 1 < h) acc += normals[p][c] - normals[p + w][c];
                    if (yy > 0) acc += normals[p][c] - normals[p - w][c];
                    g[p][c] += two_lambda * acc;
                }
            }
        }
    }
    return g;
}

} // namespace solver

DecompositionResult decompose(const GrayImage& image, const SolverConfig& config) {
    config.validate();
    if (image.width() < 16 || image.height() < 16) {
        throw ContractError("decompose: image smaller than 16x16");
    }
    for (double p : image.pixels()) {
        if (!std::isfinite(p)) throw ContractError("decompose: non-finite pixel");
    }

    const int w = image.width(), h = image.height();
    const std::size_t n_px = image.pixels().size();
    const auto& px = image.pixels();
    const double lambda = config.smoothness_weight;

    State st;
    st.w = w;
    st.h = h;

    // Height-field initialization: treat the blurred image as elevation and
    // take the camera-facing surface normal of that elevation.
    {
        const std::vector<double> hmap =
            gaussian_blur(px, w, h, 4.0, 12);
        st.n.resize(n_px);
        const double gain = config.init_height_gain;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
                const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
                const double hx = gain * (hmap[static_cast<std::size_t>(y) * w + xp] -
                                          hmap[static_cast<std::size_t>(y) * w + xm]) / 2.0;
                const double hy = gain * (hmap[static_cast<std::size_t>(yp) * w + x] -
                                          hmap[static_cast<std::size_t>(ym) * w + x]) / 2.0;
                const double len = std::sqrt(hx * hx + hy * hy + 1.0);
                st.n[static_cast<std::size_t>(y) * w + x] = {-hx / len, -hy / len, 1.0 / len};
            }
        }
    }
    st.rho = px;
    st.l = solve_lighting(image, st);

    double e_cur = full_objective(image, st, lambda);
    std::vector<double> trace;
    trace.reserve(config.max_outer_iterations + 1);
    trace.push_back(e_cur);

    double eta = 1e-3;
    std::vector<std::array<double, 3>> n_trial(n_px);

    for (int iter = 0; iter < config.max_outer_iterations; ++iter) {
        // (a) lighting: exact linear step, kept only if it does not regress.
        {
            const LightingCoeffs cand = solve_lighting(image, st);
            State probe = st;
            probe.l = cand;
            const double e_new = full_objective(image, probe, lambda);
            if (e_new <= e_cur) {
                st.l = cand;
                e_cur = e_new;
            }
        }

        // (b) albedo: pointwise minimizer within [0,2], per-pixel guarded so
        // floored-shading pixels can never regress.
        {
            for (std::size_t p = 0; p < n_px; ++p) {
                const auto& n = st.n[p];
                const double s = sh_dot(st.l, n[0], n[1], n[2]);
                const double cand =
                    std::clamp(px[p] / std::max(s, config.shading_floor), 0.0, 2.0);
                const double r_old = st.rho[p] * s - px[p];
                const double r_new = cand * s - px[p];
                if (r_new * r_new <= r_old * r_old) st.rho[p] = cand;
            }
            e_cur = full_objective(image, st, lambda);
        }

        // (c) normals: projected gradient with backtracking; the step is
        // skipped entirely if no trial length decreases the objective.
        {
            const auto g = solver::normal_gradient(image, st.n, st.rho, st.l, lambda);
            bool accepted = false;
            double step = eta;
            for (int bt = 0; bt < 20 && !accepted; ++bt) {
                for (std::size_t p = 0; p < n_px; ++p) {
                    double x = st.n[p][0] - step * g[p][0];
                    double y = st.n[p][1] - step * g[p][1];
                    double z = st.n[p][2] - step * g[p][2];
                    const double len2 = x * x + y * y + z * z;
                    if (len2 < 1e-24) {
                        n_trial[p] = st.n[p];
                        continue;
                    }
                    const double inv = 1.0 / std::sqrt(len2);
                    z *= inv;
                    n_trial[p] = {x * inv, y * inv, z < 0.0 ? -z : z};
                }
                State probe = st;
                probe.n = n_trial;
                const double e_new = full_objective(image, probe, lambda);
                if (e_new <= e_cur) {
                    st.n.swap(n_trial);
                    e_cur = e_new;
                    accepted = true;
                } else {
                    step *= 0.5;
                }
            }
            if (accepted) {
                eta = std::min(step * 1.3, 1.0);
            } else {
                eta = std::max(eta * 0.25, 1e-12);
            }
        }

        const double e_prev = trace.back();
        trace.push_back(e_cur);
        if (e_cur < 1e-12) break;
        if (e_prev - e_cur < config.convergence_tol * std::max(e_prev, 1e-12)) break;
    }

    // Materialize through the public forward ops so the reconstruction
    // invariant holds bitwise.
    NormalMap nm = normalize_normals(w, h, st.n);
    ScalarMap albedo(w, h, std::move(st.rho));
    ScalarMap shading = render_shading(nm, st.l);
    ScalarMap diffuse = compose_diffuse(albedo, shading);

    double acc = 0.0;
    for (std::size_t p = 0; p < n_px; ++p) {
        const double d = diffuse.values()[p] - px[p];
        acc += d * d;
    }
    const double rmse = std::sqrt(acc / static_cast<double>(n_px));

    return DecompositionResult{std::move(nm), std::move(albedo), std::move(shading),
                               std::move(diffuse), st.l, rmse, std::move(trace)};
}

std::array<DecompositionResult, 3> decompose_triplet(const CaptureTriplet& triplet,
                                                     const SolverConfig& config) {
    return {decompose(triplet.i1(), config), decompose(triplet.i2(), config),
            decompose(triplet.i3(), config)};
}

} // namespace veinpad
