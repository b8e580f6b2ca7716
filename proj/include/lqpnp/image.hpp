// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace lqpnp {

/// Height, width and channel count of an image-shaped vector.
struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;

  std::size_t pixels() const noexcept { return height * width; }
  std::size_t size() const noexcept { return height * width * channels; }
  bool operator==(const Shape&) const = default;
};

/// H x W x C grid of reals, row-major with interleaved channels. Nominal range
/// is [0,1] but values are not clamped until they are written to disk.
class Image {
 public:
  Image() = default;
  /// Throws DimensionError if data.size() != shape.size() or the shape is
  /// empty, ArgumentError on non-finite values or channels outside {1,3}.
  Image(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  double at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return data_[(row * shape_.width + col) * shape_.channels + ch];
  }

  bool operator==(const Image&) const = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

Image constant_image(std::size_t height, std::size_t width, std::size_t channels, double value);
std::vector<double> as_vector(const Image& img);
Image from_vector(std::span<const double> values, const Shape& shape);

/// Reads an 8-bit grayscale or RGB PNG; intensities become v/255.
Image load_image(const std::filesystem::path& path);
/// Clamps to [0,1], quantizes with round-half-away-from-zero and writes an
/// 8-bit PNG (grayscale for one channel, RGB for three).
void save_image(const Image& img, const std::filesystem::path& path);

/// The byte that save_image stores for an intensity.
unsigned char quantize_intensity(double value) noexcept;

// Float sidecar: little-endian float64 stream with an 8-value header
// [magic, h, w, c, 0, 0, 0, 0] followed by H*W*C samples.
inline constexpr double kSidecarMagic = static_cast<double>(0x4C51524157ull);
void save_sidecar(const Image& img, const std::filesystem::path& path);
Image load_sidecar(const std::filesystem::path& path);

}  // namespace lqpnp
