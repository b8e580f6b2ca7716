// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "lqpnp/image.hpp"

namespace lqpnp {

/// Matrix-free linear map A with its exact transpose. Vectors use the
/// row-major channel-interleaved layout of Image.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual Shape domain_shape() const = 0;
  virtual Shape range_shape() const = 0;

  /// Throws DimensionError unless x has domain size.
  std::vector<double> apply(std::span<const double> x) const;
  /// Throws DimensionError unless u has range size.
  std::vector<double> adjoint(std::span<const double> u) const;

 protected:
  virtual void do_apply(std::span<const double> x, std::span<double> out) const = 0;
  virtual void do_adjoint(std::span<const double> u, std::span<double> out) const = 0;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

/// Retained pixel sites of a random-inpainting mask. A site keeps or drops all
/// of its channels together.
class InpaintMask {
 public:
  /// Throws DimensionError unless kept is strictly increasing and below total.
  InpaintMask(std::vector<std::size_t> kept, std::size_t total);

  const std::vector<std::size_t>& kept() const noexcept { return kept_; }
  std::size_t total() const noexcept { return total_; }

  /// "mask v1 <total>" then one kept index per line.
  void save(const std::filesystem::path& path) const;
  static InpaintMask load(const std::filesystem::path& path);

 private:
  std::vector<std::size_t> kept_;
  std::size_t total_;
};

/// Keeps exactly round((1 - missing_fraction) * total) sites, drawn uniformly
/// without replacement from a generator seeded with `seed`.
InpaintMask make_mask(const Shape& shape, double missing_fraction, std::uint64_t seed);

/// Row-major size x size kernel, normalized to unit sum.
std::vector<double> gaussian_kernel(std::size_t size, double sigma);

inline constexpr std::size_t kDefaultBlurSize = 61;
inline constexpr double kDefaultBlurSigma = 3.0;
inline constexpr std::size_t kDefaultSrFactor = 4;

OperatorPtr identity_op(const Shape& shape);
/// Per-channel Gaussian blur with mirror (no edge repeat) padding. Requires
/// the kernel radius to be smaller than both image dimensions.
OperatorPtr blur_op(const Shape& shape, std::size_t size = kDefaultBlurSize,
                    double sigma = kDefaultBlurSigma);
/// Range shape is 1 x kept x channels.
OperatorPtr inpaint_op(const InpaintMask& mask, const Shape& shape);
/// Block average pooling; range shape is (H/f) x (W/f) x C.
OperatorPtr avgpool_sr_op(const Shape& shape, std::size_t factor = kDefaultSrFactor);

/// Largest |<Ax,u> - <x,A^T u>| / (|Ax| |u| + tiny) over seeded Gaussian trials.
double adjoint_dot_test(const LinearOperator& op, std::size_t trials, std::uint64_t seed);

}  // namespace lqpnp
