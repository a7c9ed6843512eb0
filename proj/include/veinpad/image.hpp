#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "veinpad/errors.hpp"

namespace veinpad {

// Intensities live in [0,1] as doubles; 8-bit only at I/O boundaries so the
// decomposition arithmetic never quantizes. Side lengths are capped at 65535.
class GrayImage {
public:
    GrayImage(int width, int height, std::vector<double> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    double at(int y, int x) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    const std::vector<double>& pixels() const { return pixels_; }

private:
    int width_;
    int height_;
    std::vector<double> pixels_;
};

// Nonnegative real field (albedo, shading). Upper range is unconstrained here;
// specific producers clamp as documented.
class ScalarMap {
public:
    ScalarMap(int width, int height, std::vector<double> values);

    int width() const { return width_; }
    int height() const { return height_; }
    double at(int y, int x) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
    const std::vector<double>& values() const { return values_; }

private:
    int width_;
    int height_;
    std::vector<double> values_;
};

// Unit surface normals, camera-facing hemisphere (z >= 0). Unit length is
// enforced within 1e-6 at construction.
class NormalMap {
public:
    NormalMap(int width, int height, std::vector<std::array<double, 3>> normals);

    int width() const { return width_; }
    int height() const { return height_; }
    const std::array<double, 3>& at(int y, int x) const {
        return normals_[static_cast<std::size_t>(y) * width_ + x];
    }
    const std::vector<std::array<double, 3>>& normals() const { return normals_; }

private:
    int width_;
    int height_;
    std::vector<std::array<double, 3>> normals_;
};

// Order-2 spherical harmonic lighting coefficients, ordered
// (0,0), (1,-1), (1,0), (1,1), (2,-2), (2,-1), (2,0), (2,1), (2,2).
struct LightingCoeffs {
    std::array<double, 9> l{};

    void validate() const;
};

// One capture set: the same scene under three illumination intensities,
// intensity-2 being the reference level with one dimmer and one brighter.
class CaptureTriplet {
public:
    CaptureTriplet(GrayImage i1, GrayImage i2, GrayImage i3);

    const GrayImage& i1() const { return i1_; }
    const GrayImage& i2() const { return i2_; }
    const GrayImage& i3() const { return i3_; }

private:
    GrayImage i1_;
    GrayImage i2_;
    GrayImage i3_;
};

enum class PresentationLabel { BonaFide, Attack };

// raw/255 per pixel, exactly.
GrayImage from_bytes(const std::vector<std::uint8_t>& raw, int width, int height);

// lround(p*255) per pixel; inverse of from_bytes on all 256 byte values.
std::vector<std::uint8_t> to_bytes(const GrayImage& img);

// Scales every vector to unit length and reflects z to the camera-facing
// hemisphere. Idempotent bitwise: vectors already unit within 1e-12 (squared)
// are passed through untouched.
NormalMap normalize_normals(int width, int height,
                            const std::vector<std::array<double, 3>>& raw);

} // namespace veinpad
