// SPDX-License-Identifier: Apache-2.0
#include <png.h>

#include <cstdio>
#include <cstring>
#include <random>

#include "doctest.h"
#include "lqpnp/errors.hpp"
#include "lqpnp/image.hpp"
#include "test_support.hpp"

using namespace lqpnp;

namespace {

// Writes 8-bit pixels through libpng's streaming writer, a separate code path
// from the library's encoder.
void write_reference_png(const std::filesystem::path& path, std::size_t h, std::size_t w, int color_type,
                         const std::vector<unsigned char>& bytes) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  REQUIRE(fp != nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  REQUIRE(setjmp(png_jmpbuf(png)) == 0);
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = bytes.size() / h;
  for (std::size_t r = 0; r < h; ++r) png_write_row(png, bytes.data() + r * stride);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

std::vector<unsigned char> read_reference_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  REQUIRE(png_image_begin_read_from_file(&image, path.c_str()) != 0);
  std::vector<unsigned char> out(PNG_IMAGE_SIZE(image));
  REQUIRE(png_image_finish_read(&image, nullptr, out.data(), 0, nullptr) != 0);
  return out;
}

}  // namespace

TEST_SUITE("image") {
  TEST_CASE("load maps extreme bytes to 0 and 1") {
    lqtest::TempDir dir;
    write_reference_png(dir / "white.png", 1, 1, PNG_COLOR_TYPE_GRAY, {255});
    write_reference_png(dir / "black.png", 1, 1, PNG_COLOR_TYPE_GRAY, {0});
    const Image white = load_image(dir / "white.png");
    CHECK(white.shape() == Shape{1, 1, 1});
    CHECK(white.data()[0] == 1.0);
    CHECK(load_image(dir / "black.png").data()[0] == 0.0);
  }

  TEST_CASE("RGB load preserves row-major interleaved order") {
    lqtest::TempDir dir;
    std::vector<unsigned char> bytes(2 * 2 * 3);
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<unsigned char>(17 * i + 3);
    write_reference_png(dir / "rgb.png", 2, 2, PNG_COLOR_TYPE_RGB, bytes);
    const Image img = load_image(dir / "rgb.png");
    REQUIRE(img.shape() == Shape{2, 2, 3});
    for (std::size_t i = 0; i < bytes.size(); ++i) CHECK(img.data()[i] == bytes[i] / 255.0);
    CHECK(img.at(1, 0, 2) == bytes[(1 * 2 + 0) * 3 + 2] / 255.0);
  }

  TEST_CASE("save clamps and rounds half away from zero") {
    CHECK(quantize_intensity(1.0) == 255);
    CHECK(quantize_intensity(-0.2) == 0);
    CHECK(quantize_intensity(1.7) == 255);
    CHECK(quantize_intensity(0.5) == 128);
    CHECK(quantize_intensity(126.5 / 255.0) == 127);

    lqtest::TempDir dir;
    const Image img({1, 4, 1}, {1.0, -0.2, 0.5, 0.25});
    save_image(img, dir / "out.png");
    CHECK(read_reference_png(dir / "out.png") == std::vector<unsigned char>{255, 0, 128, 64});
  }

  TEST_CASE("save-load-save is byte stable and within half a level") {
    lqtest::TempDir dir;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.3, 1.3);
    std::vector<double> v(7 * 5 * 3);
    for (double& x : v) x = u(rng);
    const Image img({7, 5, 3}, v);
    save_image(img, dir / "a.png");
    const Image back = load_image(dir / "a.png");
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(std::abs(back.data()[i] - std::clamp(v[i], 0.0, 1.0)) <= 1.0 / 510.0 + 1e-15);
    }
    save_image(back, dir / "b.png");
    CHECK(read_reference_png(dir / "a.png") == read_reference_png(dir / "b.png"));
  }

  TEST_CASE("vector round trip is exact") {
    const Image c = constant_image(2, 2, 1, 0.3);
    CHECK(as_vector(c) == std::vector<double>(4, 0.3));
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n;
    for (const Shape& s : {Shape{1, 1, 1}, Shape{3, 5, 3}, Shape{8, 2, 1}}) {
      std::vector<double> v(s.size());
      for (double& x : v) x = n(rng);
      const Image img = from_vector(v, s);
      CHECK(from_vector(as_vector(img), img.shape()) == img);
    }
    CHECK_THROWS_AS(from_vector(std::vector<double>(5, 0.0), Shape{2, 2, 1}), DimensionError);
  }

  TEST_CASE("construction rejects bad inputs") {
    CHECK_THROWS_AS(Image({2, 2, 2}, std::vector<double>(8, 0.0)), ArgumentError);
    CHECK_THROWS_AS(Image({0, 2, 1}, {}), DimensionError);
    CHECK_THROWS_AS(Image({1, 1, 1}, {std::nan("")}), ArgumentError);
  }

  TEST_CASE("decode errors name the file") {
    lqtest::TempDir dir;
    std::ofstream(dir / "junk.png") << "not a png";
    try {
      load_image(dir / "junk.png");
      FAIL("expected a decode error");
    } catch (const DecodeError& e) {
      CHECK(std::string(e.what()).find("junk.png") != std::string::npos);
    }
    write_reference_png(dir / "alpha.png", 1, 1, PNG_COLOR_TYPE_GRAY_ALPHA, {10, 20});
    CHECK_THROWS_AS(load_image(dir / "alpha.png"), DecodeError);
    CHECK_THROWS_AS(load_image(dir / "missing.png"), DecodeError);
    CHECK_THROWS_AS(save_image(constant_image(1, 1, 1, 0.0), dir / "no" / "such" / "dir.png"), IoError);
  }

  TEST_CASE("float sidecar keeps full precision") {
    lqtest::TempDir dir;
    const Image img({2, 3, 1}, {0.1, -0.25, 1.0 / 3.0, 7.5, 0.0, 1e-300});
    save_sidecar(img, dir / "y.lqf");
    CHECK(load_sidecar(dir / "y.lqf") == img);

    const std::string bytes = lqtest::read_file(dir / "y.lqf");
    REQUIRE(bytes.size() == 8 * (8 + 6));
    double header[4];
    std::memcpy(header, bytes.data(), sizeof header);
    CHECK(header[0] == static_cast<double>(0x4C51524157ull));
    CHECK(header[1] == 2.0);
    CHECK(header[2] == 3.0);
    CHECK(header[3] == 1.0);

    std::ofstream(dir / "bad.lqf", std::ios::binary) << std::string(64, '\0');
    CHECK_THROWS_AS(load_sidecar(dir / "bad.lqf"), DecodeError);
  }
}
