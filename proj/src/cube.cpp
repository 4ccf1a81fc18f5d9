#include "hsir/cube.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <png.h>

#include "hsir/errors.hpp"

namespace hsir {

std::string_view to_string(RangeTag tag) {
    switch (tag) {
    case RangeTag::unit01: return "unit01";
    case RangeTag::signed11: return "signed11";
    case RangeTag::raw: return "raw";
    }
    return "?";
}

RangeTag parse_range_tag(std::string_view text) {
    if (text == "unit01") return RangeTag::unit01;
    if (text == "signed11") return RangeTag::signed11;
    if (text == "raw") return RangeTag::raw;
    throw ParseError("unknown range tag '" + std::string(text) + "'");
}

std::string to_string(const CubeDims& dims) {
    return std::to_string(dims.rows) + "x" + std::to_string(dims.cols) + "x" + std::to_string(dims.bands);
}

std::size_t vec_index(std::size_t i, std::size_t j, std::size_t k, const CubeDims& dims) {
    if (i >= dims.rows || j >= dims.cols || k >= dims.bands) {
        throw BoundsError("vec_index: (" + std::to_string(i) + "," + std::to_string(j) + "," +
                          std::to_string(k) + ") outside " + to_string(dims));
    }
    return k * dims.rows * dims.cols + j * dims.rows + i;
}

namespace {

bool in_range(float v, RangeTag tag) {
    switch (tag) {
    case RangeTag::unit01: return v >= 0.0f && v <= 1.0f;
    case RangeTag::signed11: return v >= -1.0f && v <= 1.0f;
    case RangeTag::raw: return std::isfinite(v);
    }
    return false;
}

} // namespace

HSICube::HSICube(CubeDims dims, RangeTag tag, std::vector<float> values)
    : dims_(dims), range_(tag), values_(std::move(values)) {
    if (dims_.rows == 0 || dims_.cols == 0 || dims_.bands == 0) {
        throw ContractError("HSICube: dimensions must be positive, got " + to_string(dims_));
    }
    if (values_.size() != dims_.size()) {
        throw ContractError("HSICube: " + std::to_string(values_.size()) + " values for dims " +
                            to_string(dims_));
    }
    for (std::size_t n = 0; n < values_.size(); ++n) {
        if (!in_range(values_[n], range_)) {
            throw ContractError("HSICube: value " + std::to_string(values_[n]) + " at index " +
                                std::to_string(n) + " violates range " + std::string(to_string(range_)));
        }
    }
}

HSICube HSICube::from_doubles(CubeDims dims, RangeTag tag, std::span<const double> values) {
    std::vector<float> v(values.size());
    std::transform(values.begin(), values.end(), v.begin(), [](double x) { return static_cast<float>(x); });
    return HSICube(dims, tag, std::move(v));
}

HSICube HSICube::filled(CubeDims dims, RangeTag tag, float value) {
    return HSICube(dims, tag, std::vector<float>(dims.size(), value));
}

std::vector<double> HSICube::to_doubles() const {
    return std::vector<double>(values_.begin(), values_.end());
}

std::span<const float> HSICube::band(std::size_t k) const {
    if (k >= dims_.bands) throw BoundsError("band " + std::to_string(k) + " outside " + to_string(dims_));
    return std::span<const float>(values_).subspan(k * dims_.pixels(), dims_.pixels());
}

HSICube scale_to_signed(const HSICube& cube) {
    if (cube.range() != RangeTag::unit01) throw ContractError("scale_to_signed: cube is not unit01");
    std::vector<float> out(cube.values().size());
    std::transform(cube.values().begin(), cube.values().end(), out.begin(),
                   [](float v) { return static_cast<float>(2.0 * v - 1.0); });
    return HSICube(cube.dims(), RangeTag::signed11, std::move(out));
}

HSICube scale_to_unit(const HSICube& cube) {
    if (cube.range() != RangeTag::signed11) throw ContractError("scale_to_unit: cube is not signed11");
    std::vector<float> out(cube.values().size());
    std::transform(cube.values().begin(), cube.values().end(), out.begin(),
                   [](float v) { return static_cast<float>((static_cast<double>(v) + 1.0) / 2.0); });
    return HSICube(cube.dims(), RangeTag::unit01, std::move(out));
}

HSICube signed_to_unit_clamped(const HSICube& cube) {
    if (cube.range() == RangeTag::unit01) throw ContractError("signed_to_unit_clamped: cube is already unit01");
    std::vector<float> out(cube.values().size());
    std::transform(cube.values().begin(), cube.values().end(), out.begin(), [](float v) {
        return static_cast<float>(std::clamp((static_cast<double>(v) + 1.0) / 2.0, 0.0, 1.0));
    });
    return HSICube(cube.dims(), RangeTag::unit01, std::move(out));
}

// ---------------------------------------------------------------------------
// Container format

namespace {

std::size_t parse_dim(std::string_view field, std::string_view value) {
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ParseError("cube header: field " + std::string(field) + " is not an integer: '" +
                         std::string(value) + "'");
    }
    if (out == 0) throw ParseError("cube header: field " + std::string(field) + " must be positive");
    return out;
}

std::string_view expect_key(std::string_view token, std::string_view key) {
    if (token.size() <= key.size() || token.substr(0, key.size()) != key || token[key.size()] != '=') {
        throw ParseError("cube header: expected field " + std::string(key) + ", got '" + std::string(token) + "'");
    }
    return token.substr(key.size() + 1);
}

std::vector<std::string_view> split_spaces(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && line[pos] == ' ') ++pos;
        std::size_t end = line.find(' ', pos);
        if (end == std::string_view::npos) end = line.size();
        if (end > pos) tokens.push_back(line.substr(pos, end - pos));
        pos = end;
    }
    return tokens;
}

} // namespace

CubeHeader parse_cube_header(std::string_view line) {
    const auto tokens = split_spaces(line);
    if (tokens.size() < 7) throw ParseError("cube header: expected 7 fields, got " + std::to_string(tokens.size()));
    if (tokens[0] != "HSICUBE") throw ParseError("cube header: bad magic '" + std::string(tokens[0]) + "'");
    if (tokens[1] != "v1") throw ParseError("cube header: unsupported version '" + std::string(tokens[1]) + "'");

    CubeHeader header;
    header.dims.rows = parse_dim("I", expect_key(tokens[2], "I"));
    header.dims.cols = parse_dim("J", expect_key(tokens[3], "J"));
    header.dims.bands = parse_dim("K", expect_key(tokens[4], "K"));
    const auto dtype = expect_key(tokens[5], "dtype");
    if (dtype != "f32") throw ParseError("cube header: field dtype has unknown marker '" + std::string(dtype) + "'");
    try {
        header.range = parse_range_tag(expect_key(tokens[6], "range"));
    } catch (const ParseError& e) {
        throw ParseError(std::string("cube header: field range: ") + e.what());
    }
    if (tokens.size() > 8) throw ParseError("cube header: unexpected trailing fields");
    if (tokens.size() == 8) header.provenance = std::string(expect_key(tokens[7], "provenance"));
    return header;
}

std::string format_cube_header(const CubeHeader& header) {
    std::string line = "HSICUBE v1 I=" + std::to_string(header.dims.rows) + " J=" + std::to_string(header.dims.cols) +
                       " K=" + std::to_string(header.dims.bands) + " dtype=f32 range=" +
                       std::string(to_string(header.range));
    if (header.provenance) {
        const auto& p = *header.provenance;
        if (p.empty() || p.find_first_of(" \n\r\t") != std::string::npos) {
            throw ContractError("cube header: provenance must be a non-empty token without whitespace");
        }
        line += " provenance=" + p;
    }
    line += '\n';
    return line;
}

namespace {

std::uint32_t byteswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xFF00u) | ((v << 8) & 0xFF0000u) | (v << 24);
}

} // namespace

HSICube load_cube(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open cube file " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ParseError("cube file " + path.string() + ": missing header line");
    if (line.size() > 4096) throw ParseError("cube header: line too long");
    const CubeHeader header = parse_cube_header(line);

    const std::size_t count = header.dims.size();
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < count * 4) {
        throw ParseError("cube payload truncated: header declares " + to_string(header.dims) + " (" +
                         std::to_string(count) + " floats), file holds " + std::to_string(bytes.size() / 4));
    }
    if (bytes.size() > count * 4) {
        throw ParseError("cube payload dimension mismatch: " + std::to_string(bytes.size() - count * 4) +
                         " trailing bytes after " + to_string(header.dims) + " payload");
    }
    std::vector<float> values(count);
    for (std::size_t n = 0; n < count; ++n) {
        std::uint32_t bits;
        std::memcpy(&bits, bytes.data() + 4 * n, 4);
        if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
        values[n] = std::bit_cast<float>(bits);
    }
    try {
        return HSICube(header.dims, header.range, std::move(values));
    } catch (const ContractError& e) {
        throw ParseError(std::string("cube payload: ") + e.what());
    }
}

void save_cube(const HSICube& cube, const std::filesystem::path& path, std::optional<std::string> provenance) {
    CubeHeader header{cube.dims(), cube.range(), std::move(provenance)};
    const std::string line = format_cube_header(header);

    std::vector<char> payload(cube.values().size() * 4);
    for (std::size_t n = 0; n < cube.values().size(); ++n) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(cube.values()[n]);
        if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
        std::memcpy(payload.data() + 4 * n, &bits, 4);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cube file " + path.string());
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// PNG export

std::vector<unsigned char> band_to_gray8(const HSICube& cube, std::size_t band) {
    const auto& d = cube.dims();
    if (band >= d.bands) throw BoundsError("export_band_png: band " + std::to_string(band) + " outside " + to_string(d));
    std::vector<unsigned char> pixels(d.pixels());
    for (std::size_t i = 0; i < d.rows; ++i) {
        for (std::size_t j = 0; j < d.cols; ++j) {
            const double v = std::clamp(static_cast<double>(cube.at(i, j, band)), 0.0, 1.0);
            pixels[i * d.cols + j] = static_cast<unsigned char>(std::floor(255.0 * v + 0.5));
        }
    }
    return pixels;
}

void export_band_png(const HSICube& cube, std::size_t band, const std::filesystem::path& path) {
    if (cube.range() != RangeTag::unit01) throw ContractError("export_band_png: cube must be unit01");
    const auto pixels = band_to_gray8(cube, band);
    const auto& d = cube.dims();

    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("libpng failed writing " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(d.cols), static_cast<png_uint_32>(d.rows), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t i = 0; i < d.rows; ++i) {
        png_write_row(png, const_cast<png_bytep>(pixels.data() + i * d.cols));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

} // namespace hsir
