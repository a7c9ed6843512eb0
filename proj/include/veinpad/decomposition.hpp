#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "veinpad/image.hpp"

namespace veinpad {

// Order-2 real spherical harmonic basis evaluated at a unit normal (x,y,z):
//   [c0, c1*y, c1*z, c1*x, c2*x*y, c2*y*z, c3*(3z^2-1), c2*x*z, c4*(x^2-y^2)]
// Coefficient order matches LightingCoeffs.
std::array<double, 9> sh_basis(const std::array<double, 3>& normal);

// Per-pixel dot product of lighting with sh_basis(normal), clamped below at 0.
ScalarMap render_shading(const NormalMap& normals, const LightingCoeffs& lighting);

// Per-pixel albedo * shading, clamped to [0,1].
ScalarMap compose_diffuse(const ScalarMap& albedo, const ScalarMap& shading);

struct SolverConfig {
    int max_outer_iterations = 50;
    double convergence_tol = 1e-4;   // stop when relative objective decrease falls below this
    double smoothness_weight = 0.1;  // weight of the normal-field smoothness term
    double shading_floor = 1e-3;     // divisor floor in the albedo update
    std::uint64_t seed = 0;          // reserved; the solver draws no random numbers
    double init_height_gain = 40.0;  // intensity-to-height scale of the initializer

    void validate() const;
};

struct DecompositionResult {
    NormalMap normal_map;
    ScalarMap albedo;
    ScalarMap shading;
    ScalarMap diffuse;
    LightingCoeffs lighting;
    double residual_rmse;
    // Objective after initialization, then after each outer iteration.
    std::vector<double> objective_trace;
};

// Single-image intrinsic decomposition under the Lambertian SH model:
// minimizes sum_p (albedo_p * <l, Y(N_p)> - I_p)^2 + lambda * sum |grad N|^2
// by alternating lighting / albedo / projected-gradient normal updates.
// Deterministic: same image and config give a bitwise-identical result.
DecompositionResult decompose(const GrayImage& image, const SolverConfig& config);

// Element-wise decompose of the three intensities, order preserved.
std::array<DecompositionResult, 3> decompose_triplet(const CaptureTriplet& triplet,
                                                     const SolverConfig& config);

// Solver internals, public so the objective and its normal gradient can be
// verified independently (finite differences, monotonicity traces). `normals`
// here are raw 3-vectors, not necessarily unit: the objective is the smooth
// ambient function the projected gradient step differentiates.
namespace solver {

double objective(const GrayImage& image,
                 const std::vector<std::array<double, 3>>& normals,
                 const std::vector<double>& albedo,
                 const LightingCoeffs& lighting,
                 double smoothness_weight);

std::vector<std::array<double, 3>> normal_gradient(
    const GrayImage& image,
    const std::vector<std::array<double, 3>>& normals,
    const std::vector<double>& albedo,
    const LightingCoeffs& lighting,
    double smoothness_weight);

} // namespace solver

} // namespace veinpad
