#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hsir {

// Value-range convention of a cube. `raw` carries the signed11 scale but
// places no bound on the values; it is used for noisy observations, which
// leave [-1,1] by construction.
enum class RangeTag { unit01, signed11, raw };

std::string_view to_string(RangeTag tag);
RangeTag parse_range_tag(std::string_view text);

struct CubeDims {
    std::size_t rows = 0;  // I
    std::size_t cols = 0;  // J
    std::size_t bands = 0; // K

    std::size_t pixels() const { return rows * cols; }
    std::size_t size() const { return rows * cols * bands; }
    bool operator==(const CubeDims&) const = default;
};

std::string to_string(const CubeDims& dims);

// Flat position of element (i, j, k): k*I*J + j*I + i. Column-major within
// a band, bands outermost.
std::size_t vec_index(std::size_t i, std::size_t j, std::size_t k, const CubeDims& dims);

// I x J x K tensor of float32 values in vec order. Immutable once built.
class HSICube {
public:
    HSICube() = default;
    HSICube(CubeDims dims, RangeTag tag, std::vector<float> values);

    static HSICube from_doubles(CubeDims dims, RangeTag tag, std::span<const double> values);
    static HSICube filled(CubeDims dims, RangeTag tag, float value);

    const CubeDims& dims() const { return dims_; }
    RangeTag range() const { return range_; }
    std::span<const float> values() const { return values_; }
    std::vector<double> to_doubles() const;

    float at(std::size_t i, std::size_t j, std::size_t k) const {
        return values_[vec_index(i, j, k, dims_)];
    }

    // Band k as an I*J column-major slice.
    std::span<const float> band(std::size_t k) const;

    bool operator==(const HSICube&) const = default;

private:
    CubeDims dims_{};
    RangeTag range_ = RangeTag::unit01;
    std::vector<float> values_;
};

// v -> 2v - 1. Requires unit01.
HSICube scale_to_signed(const HSICube& cube);
// v -> (v + 1) / 2. Requires signed11.
HSICube scale_to_unit(const HSICube& cube);
// (v + 1) / 2 clamped to [0,1]; accepts signed11 or raw.
HSICube signed_to_unit_clamped(const HSICube& cube);

struct CubeHeader {
    CubeDims dims;
    RangeTag range = RangeTag::unit01;
    std::optional<std::string> provenance;
};

CubeHeader parse_cube_header(std::string_view line);
std::string format_cube_header(const CubeHeader& header);

HSICube load_cube(const std::filesystem::path& path);
void save_cube(const HSICube& cube, const std::filesystem::path& path,
               std::optional<std::string> provenance = std::nullopt);

// 8-bit grayscale PNG of band k: pixel = round(255 * clamp(v, 0, 1)),
// image rows follow i, columns follow j.
void export_band_png(const HSICube& cube, std::size_t band, const std::filesystem::path& path);
std::vector<unsigned char> band_to_gray8(const HSICube& cube, std::size_t band);

} // namespace hsir
