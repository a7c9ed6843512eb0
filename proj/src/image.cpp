#include "veinpad/image.hpp"

#include <cmath>
#include <string>

namespace veinpad {

namespace {

void check_dims(int width, int height, std::size_t n, const char* what) {
    if (width < 1 || height < 1 || width > 65535 || height > 65535) {
        throw DimensionError(std::string(what) + ": bad dimensions " +
                             std::to_string(width) + "x" + std::to_string(height));
    }
    if (n != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw DimensionError(std::string(what) + ": buffer length " + std::to_string(n) +
                             " != " + std::to_string(width) + "x" + std::to_string(height));
    }
}

} // namespace

GrayImage::GrayImage(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    check_dims(width, height, pixels_.size(), "GrayImage");
    for (double p : pixels_) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
            throw ContractError("GrayImage: intensity outside [0,1]");
        }
    }
}

ScalarMap::ScalarMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    check_dims(width, height, values_.size(), "ScalarMap");
    for (double v : values_) {
        if (!std::isfinite(v) || v < 0.0) {
            throw ContractError("ScalarMap: negative or non-finite value");
        }
    }
}

NormalMap::NormalMap(int width, int height, std::vector<std::array<double, 3>> normals)
    : width_(width), height_(height), normals_(std::move(normals)) {
    check_dims(width, height, normals_.size(), "NormalMap");
    for (const auto& n : normals_) {
        const double len2 = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
        if (!std::isfinite(len2) || std::fabs(std::sqrt(len2) - 1.0) > 1e-6) {
            throw ContractError("NormalMap: non-unit normal");
        }
        if (n[2] < 0.0) {
            throw ContractError("NormalMap: normal points away from camera");
        }
    }
}

void LightingCoeffs::validate() const {
    for (double v : l) {
        if (!std::isfinite(v)) throw ContractError("LightingCoeffs: non-finite entry");
    }
}

CaptureTriplet::CaptureTriplet(GrayImage i1, GrayImage i2, GrayImage i3)
    : i1_(std::move(i1)), i2_(std::move(i2)), i3_(std::move(i3)) {
    if (i1_.width() != i2_.width() || i1_.width() != i3_.width() ||
        i1_.height() != i2_.height() || i1_.height() != i3_.height()) {
        throw DimensionError("CaptureTriplet: member dimensions differ");
    }
}

GrayImage from_bytes(const std::vector<std::uint8_t>& raw, int width, int height) {
    check_dims(width, height, raw.size(), "from_bytes");
    std::vector<double> px(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        px[i] = static_cast<double>(raw[i]) / 255.0;
    }
    return GrayImage(width, height, std::move(px));
}

std::vector<std::uint8_t> to_bytes(const GrayImage& img) {
    std::vector<std::uint8_t> out(img.pixels().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        long v = std::lround(img.pixels()[i] * 255.0);
        if (v < 0) v = 0;
        if (v > 255) v = 255;
        out[i] = static_cast<std::uint8_t>(v);
    }
    return out;
}

NormalMap normalize_normals(int width, int height,
                            const std::vector<std::array<double, 3>>& raw) {
    check_dims(width, height, raw.size(), "normalize_normals");
    std::vector<std::array<double, 3>> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto& n = raw[i];
        const double len2 = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
        if (!std::isfinite(len2) || len2 == 0.0) {
            throw NormalizationError("normalize_normals: degenerate normal");
        }
        std::array<double, 3> u = n;
        // Already unit (to well below the 1e-6 type tolerance): pass through
        // bitwise so the operation is exactly idempotent.
        if (std::fabs(len2 - 1.0) > 1e-12) {
            const double inv = 1.0 / std::sqrt(len2);
            u = {n[0] * inv, n[1] * inv, n[2] * inv};
        }
        if (u[2] < 0.0) u[2] = -u[2];
        out[i] = u;
    }
    return NormalMap(width, height, std::move(out));
}

} // namespace veinpad
