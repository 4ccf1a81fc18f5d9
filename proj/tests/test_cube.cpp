#include <doctest.h>

#include <png.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "hsir/cube.hpp"
#include "hsir/errors.hpp"
#include "test_util.hpp"

using namespace hsir;
using hsir::testing::TempDir;
using hsir::testing::thrown_message;

namespace {

std::vector<unsigned char> read_png_gray(const std::filesystem::path& path, unsigned& width, unsigned& height) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    REQUIRE(png_image_begin_read_from_file(&image, path.c_str()));
    image.format = PNG_FORMAT_GRAY;
    std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(image));
    REQUIRE(png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr));
    width = image.width;
    height = image.height;
    return pixels;
}

void write_raw(const std::filesystem::path& path, const std::string& header, std::size_t floats) {
    std::ofstream out(path, std::ios::binary);
    out << header;
    const float zero = 0.0f;
    for (std::size_t n = 0; n < floats; ++n) out.write(reinterpret_cast<const char*>(&zero), 4);
}

} // namespace

TEST_CASE("vec_index examples") {
    CHECK(vec_index(0, 0, 0, {2, 2, 2}) == 0);
    CHECK(vec_index(1, 0, 1, {2, 2, 2}) == 5);
    CHECK(vec_index(1, 1, 0, {2, 3, 4}) == 3);
    CHECK_THROWS_AS(vec_index(2, 0, 0, {2, 2, 2}), BoundsError);
    CHECK_THROWS_AS(vec_index(0, 3, 0, {2, 3, 4}), BoundsError);
    CHECK_THROWS_AS(vec_index(0, 0, 4, {2, 3, 4}), BoundsError);
}

TEST_CASE("vec_index is a bijection over the index box") {
    const CubeDims d{3, 5, 4};
    std::set<std::size_t> seen;
    for (std::size_t k = 0; k < d.bands; ++k)
        for (std::size_t j = 0; j < d.cols; ++j)
            for (std::size_t i = 0; i < d.rows; ++i) seen.insert(vec_index(i, j, k, d));
    CHECK(seen.size() == d.size());
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == d.size() - 1);
}

TEST_CASE("cube construction enforces length and range") {
    CHECK_THROWS_AS(HSICube({2, 2, 1}, RangeTag::unit01, std::vector<float>(3, 0.0f)), ContractError);
    CHECK_THROWS_AS(HSICube({0, 2, 1}, RangeTag::unit01, {}), ContractError);
    CHECK_THROWS_AS(HSICube({1, 1, 1}, RangeTag::unit01, {1.5f}), ContractError);
    CHECK_THROWS_AS(HSICube({1, 1, 1}, RangeTag::signed11, {-1.5f}), ContractError);
    CHECK_NOTHROW(HSICube({1, 1, 1}, RangeTag::raw, {-3.0f}));
    CHECK_THROWS_AS(HSICube({1, 1, 1}, RangeTag::raw, {NAN}), ContractError);
    const HSICube c({2, 1, 2}, RangeTag::unit01, {0.1f, 0.2f, 0.3f, 0.4f});
    CHECK(c.at(1, 0, 1) == doctest::Approx(0.4f));
    CHECK(c.band(1)[0] == doctest::Approx(0.3f));
    CHECK_THROWS_AS(c.band(2), BoundsError);
}

TEST_CASE("scaling between unit01 and signed11") {
    const auto u = HSICube({3, 1, 1}, RangeTag::unit01, {0.0f, 0.5f, 1.0f});
    const auto s = scale_to_signed(u);
    CHECK(s.range() == RangeTag::signed11);
    CHECK(s.values()[0] == -1.0f);
    CHECK(s.values()[1] == 0.0f);
    CHECK(s.values()[2] == 1.0f);
    const auto back = scale_to_unit(s);
    CHECK(back.values()[0] == 0.0f);
    CHECK(back.values()[1] == 0.5f);
    CHECK_THROWS_AS(scale_to_unit(u), ContractError);
    CHECK_THROWS_AS(scale_to_signed(s), ContractError);

    const auto r = testing::random_vector(500, 3, 0.0, 1.0);
    const auto cube = HSICube::from_doubles({10, 10, 5}, RangeTag::unit01, r);
    const auto round = scale_to_unit(scale_to_signed(cube));
    for (std::size_t n = 0; n < r.size(); ++n) CHECK(std::abs(round.values()[n] - cube.values()[n]) <= 1e-7);

    const auto raw = HSICube({2, 1, 1}, RangeTag::raw, {-2.0f, 0.5f});
    const auto clamped = signed_to_unit_clamped(raw);
    CHECK(clamped.values()[0] == 0.0f);
    CHECK(clamped.values()[1] == 0.75f);
}

TEST_CASE("header parse and format") {
    const auto h = parse_cube_header("HSICUBE v1 I=4 J=5 K=6 dtype=f32 range=signed11");
    CHECK(h.dims == CubeDims{4, 5, 6});
    CHECK(h.range == RangeTag::signed11);
    CHECK_FALSE(h.provenance.has_value());
    CHECK(format_cube_header(h) == "HSICUBE v1 I=4 J=5 K=6 dtype=f32 range=signed11\n");

    CHECK(thrown_message<ParseError>([] { parse_cube_header("HSICUBE v1 I=4 J=5 K=6 dtype=f64 range=unit01"); })
              .find("dtype") != std::string::npos);
    CHECK(thrown_message<ParseError>([] { parse_cube_header("HSICUBE v1 I=4 J=x K=6 dtype=f32 range=unit01"); })
              .find("J") != std::string::npos);
    CHECK(thrown_message<ParseError>([] { parse_cube_header("HSICUBE v1 I=4 J=5 K=0 dtype=f32 range=unit01"); })
              .find("K") != std::string::npos);
    CHECK(thrown_message<ParseError>([] { parse_cube_header("HSICUBE v1 I=4 J=5 K=6 dtype=f32 range=weird"); })
              .find("range") != std::string::npos);
    CHECK_THROWS_AS(parse_cube_header("NOTCUBE v1 I=4 J=5 K=6 dtype=f32 range=unit01"), ParseError);
    CHECK_THROWS_AS(parse_cube_header("HSICUBE v2 I=4 J=5 K=6 dtype=f32 range=unit01"), ParseError);
}

TEST_CASE("save/load round trip") {
    TempDir dir("cube");
    const auto c = HSICube::filled({2, 2, 2}, RangeTag::unit01, 0.25f);
    save_cube(c, dir / "a.hsic");
    CHECK(load_cube(dir / "a.hsic") == c);

    const auto r = testing::random_vector(3 * 4 * 5, 11);
    const auto s = HSICube::from_doubles({3, 4, 5}, RangeTag::signed11, r);
    save_cube(s, dir / "b.hsic", "unit-test");
    const auto loaded = load_cube(dir / "b.hsic");
    CHECK(loaded == s);
    // bit-exact payload
    for (std::size_t n = 0; n < r.size(); ++n) CHECK(std::bit_cast<std::uint32_t>(loaded.values()[n]) ==
                                                     std::bit_cast<std::uint32_t>(s.values()[n]));

    std::ifstream in(dir / "b.hsic");
    std::string header;
    std::getline(in, header);
    CHECK(header == "HSICUBE v1 I=3 J=4 K=5 dtype=f32 range=signed11 provenance=unit-test");
}

TEST_CASE("load rejects malformed files") {
    TempDir dir("cube_bad");
    write_raw(dir / "short.hsic", "HSICUBE v1 I=2 J=2 K=3 dtype=f32 range=unit01\n", 8);
    CHECK(thrown_message<ParseError>([&] { load_cube(dir / "short.hsic"); }).find("truncated") != std::string::npos);
    write_raw(dir / "long.hsic", "HSICUBE v1 I=2 J=2 K=1 dtype=f32 range=unit01\n", 5);
    CHECK(thrown_message<ParseError>([&] { load_cube(dir / "long.hsic"); }).find("mismatch") != std::string::npos);
    write_raw(dir / "dtype.hsic", "HSICUBE v1 I=1 J=1 K=1 dtype=u8 range=unit01\n", 1);
    CHECK(thrown_message<ParseError>([&] { load_cube(dir / "dtype.hsic"); }).find("dtype") != std::string::npos);
    CHECK_THROWS_AS(load_cube(dir / "missing.hsic"), ParseError);
}

TEST_CASE("band PNG export") {
    TempDir dir("png");
    const CubeDims d{3, 2, 2};
    std::vector<float> v(d.size(), 1.0f);
    for (std::size_t n = 6; n < 12; ++n) v[n] = 0.0f;
    v[vec_index(2, 1, 1, d)] = 0.5f;
    const HSICube c(d, RangeTag::unit01, v);

    CHECK(band_to_gray8(c, 0) == std::vector<unsigned char>(6, 255));
    const auto g = band_to_gray8(c, 1);
    CHECK(g[vec_index(2, 1, 0, d)] == 128);
    CHECK(g[0] == 0);

    export_band_png(c, 1, dir / "b1.png");
    unsigned w = 0, h = 0;
    const auto px = read_png_gray(dir / "b1.png", w, h);
    CHECK(w == 2);
    CHECK(h == 3);
    CHECK(px[2 * w + 1] == 128); // image row i=2, column j=1
    CHECK(px[0] == 0);

    CHECK_THROWS_AS(export_band_png(c, 2, dir / "x.png"), BoundsError);
    CHECK_THROWS_AS(export_band_png(scale_to_signed(c), 0, dir / "y.png"), ContractError);
}
