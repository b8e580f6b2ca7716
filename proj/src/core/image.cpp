// SPDX-License-Identifier: Apache-2.0
#include "lqpnp/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "lqpnp/errors.hpp"

namespace lqpnp {

namespace {

void check_shape(const Shape& shape) {
  if (shape.height == 0 || shape.width == 0) {
    throw DimensionError("image shape must be non-empty");
  }
  if (shape.channels != 1 && shape.channels != 3) {
    throw ArgumentError("image channels must be 1 or 3, got " + std::to_string(shape.channels));
  }
}

std::uint64_t to_little_endian(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) {
      out = (out << 8) | ((bits >> (8 * i)) & 0xffu);
    }
    return out;
  }
  return bits;
}

}  // namespace

Image::Image(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_.size()) {
    throw DimensionError("image data length " + std::to_string(data_.size()) +
                         " does not match shape " + std::to_string(shape_.height) + "x" +
                         std::to_string(shape_.width) + "x" + std::to_string(shape_.channels));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw ArgumentError("image data contains a non-finite value");
    }
  }
}

Image constant_image(std::size_t height, std::size_t width, std::size_t channels, double value) {
  Shape shape{height, width, channels};
  return Image(shape, std::vector<double>(shape.size(), value));
}

std::vector<double> as_vector(const Image& img) {
  return {img.data().begin(), img.data().end()};
}

Image from_vector(std::span<const double> values, const Shape& shape) {
  return Image(shape, std::vector<double>(values.begin(), values.end()));
}

unsigned char quantize_intensity(double value) noexcept {
  const double clamped = std::clamp(value, 0.0, 1.0);
  // std::round rounds halfway cases away from zero.
  return static_cast<unsigned char>(std::round(clamped * 255.0));
}

Image load_image(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  const std::string name = path.string();
  if (!png_image_begin_read_from_file(&png, name.c_str())) {
    throw DecodeError("cannot decode PNG '" + name + "': " + png.message);
  }
  const auto fail = [&](const std::string& why) {
    png_image_free(&png);
    throw DecodeError("unsupported PNG '" + name + "': " + why);
  };
  if (png.format & PNG_FORMAT_FLAG_COLORMAP) fail("palette images are not supported");
  if (png.format & PNG_FORMAT_FLAG_LINEAR) fail("only 8-bit samples are supported");
  if (png.format & PNG_FORMAT_FLAG_ALPHA) fail("alpha channels are not supported");

  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = color ? 3 : 1;
  std::vector<png_byte> bytes(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw DecodeError("cannot decode PNG '" + name + "': " + msg);
  }

  Shape shape{png.height, png.width, channels};
  std::vector<double> data(bytes.size());
  std::transform(bytes.begin(), bytes.end(), data.begin(),
                 [](png_byte b) { return static_cast<double>(b) / 255.0; });
  return Image(shape, std::move(data));
}

void save_image(const Image& img, const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  std::vector<png_byte> bytes(img.size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(), quantize_intensity);
  const std::string name = path.string();
  if (!png_image_write_to_file(&png, name.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError("cannot write PNG '" + name + "': " + png.message);
  }
}

void save_sidecar(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const std::array<double, 8> header{kSidecarMagic,
                                     static_cast<double>(img.height()),
                                     static_cast<double>(img.width()),
                                     static_cast<double>(img.channels()),
                                     0.0, 0.0, 0.0, 0.0};
  auto put = [&out](double v) {
    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
  };
  for (double v : header) put(v);
  for (double v : img.data()) put(v);
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

Image load_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  auto get = [&in, &path]() {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof(bits));
    if (!in) throw DecodeError("truncated float sidecar '" + path.string() + "'");
    return std::bit_cast<double>(to_little_endian(bits));
  };
  std::array<double, 8> header{};
  for (double& v : header) v = get();
  if (header[0] != kSidecarMagic) {
    throw DecodeError("'" + path.string() + "' is not a float sidecar (bad magic)");
  }
  for (int i = 1; i <= 3; ++i) {
    if (!(header[i] >= 1.0) || header[i] != std::floor(header[i]) || header[i] > 1e9) {
      throw DecodeError("float sidecar '" + path.string() + "' has an invalid shape header");
    }
  }
  Shape shape{static_cast<std::size_t>(header[1]), static_cast<std::size_t>(header[2]),
              static_cast<std::size_t>(header[3])};
  std::vector<double> data(shape.size());
  for (double& v : data) v = get();
  return Image(shape, std::move(data));
}

}  // namespace lqpnp
