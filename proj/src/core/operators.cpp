// SPDX-License-Identifier: Apache-2.0
#include "lqpnp/operators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "lqpnp/errors.hpp"

namespace lqpnp {

std::vector<double> LinearOperator::apply(std::span<const double> x) const {
  const Shape dom = domain_shape();
  if (x.size() != dom.size()) {
    throw DimensionError("operator apply expects " + std::to_string(dom.size()) +
                         " values, got " + std::to_string(x.size()));
  }
  std::vector<double> out(range_shape().size(), 0.0);
  do_apply(x, out);
  return out;
}

std::vector<double> LinearOperator::adjoint(std::span<const double> u) const {
  const Shape ran = range_shape();
  if (u.size() != ran.size()) {
    throw DimensionError("operator adjoint expects " + std::to_string(ran.size()) +
                         " values, got " + std::to_string(u.size()));
  }
  std::vector<double> out(domain_shape().size(), 0.0);
  do_adjoint(u, out);
  return out;
}

// ---------------------------------------------------------------------------
// Masks

InpaintMask::InpaintMask(std::vector<std::size_t> kept, std::size_t total)
    : kept_(std::move(kept)), total_(total) {
  for (std::size_t i = 0; i < kept_.size(); ++i) {
    if (kept_[i] >= total_) {
      throw DimensionError("mask index " + std::to_string(kept_[i]) + " out of range for " +
                           std::to_string(total_) + " sites");
    }
    if (i > 0 && kept_[i] <= kept_[i - 1]) {
      throw DimensionError("mask indices must be strictly increasing");
    }
  }
}

void InpaintMask::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "mask v1 " << total_ << '\n';
  for (std::size_t k : kept_) out << k << '\n';
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

InpaintMask InpaintMask::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mask file '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  std::istringstream header(line);
  std::string tag, version;
  std::size_t total = 0;
  if (!(header >> tag >> version >> total) || tag != "mask" || version != "v1") {
    throw DecodeError("'" + path.string() + "' is not a v1 mask file");
  }
  std::vector<std::size_t> kept;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t pos = 0;
    unsigned long long value = 0;
    try {
      value = std::stoull(line, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != line.size()) {
      throw DecodeError("bad mask index line '" + line + "' in '" + path.string() + "'");
    }
    kept.push_back(static_cast<std::size_t>(value));
  }
  return InpaintMask(std::move(kept), total);
}

InpaintMask make_mask(const Shape& shape, double missing_fraction, std::uint64_t seed) {
  if (!(missing_fraction >= 0.0 && missing_fraction < 1.0)) {
    throw ArgumentError("missing fraction must lie in [0,1)");
  }
  const std::size_t total = shape.pixels();
  const auto keep =
      static_cast<std::size_t>(std::round((1.0 - missing_fraction) * static_cast<double>(total)));
  std::vector<std::size_t> sites(total);
  std::iota(sites.begin(), sites.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `keep` slots end up a uniform sample.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < keep && i + 1 < total; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(sites[i], sites[pick(rng)]);
  }
  sites.resize(keep);
  std::sort(sites.begin(), sites.end());
  return InpaintMask(std::move(sites), total);
}

// ---------------------------------------------------------------------------
// Gaussian kernels

namespace {

std::vector<double> gaussian_1d(std::size_t size, double sigma) {
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  std::vector<double> g(size);
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
  }
  const double sum = std::accumulate(g.begin(), g.end(), 0.0);
  for (double& v : g) v /= sum;
  return g;
}

void check_kernel_args(std::size_t size, double sigma) {
  if (size % 2 == 0) throw ArgumentError("kernel size must be odd, got " + std::to_string(size));
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ArgumentError("kernel sigma must be positive");
}

}  // namespace

std::vector<double> gaussian_kernel(std::size_t size, double sigma) {
  check_kernel_args(size, sigma);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  std::vector<double> k(size * size);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const double di = static_cast<double>(i) - c;
      const double dj = static_cast<double>(j) - c;
      k[i * size + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
    }
  }
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& v : k) v /= sum;
  return k;
}

// ---------------------------------------------------------------------------
// Operators

namespace {

class IdentityOp final : public LinearOperator {
 public:
  explicit IdentityOp(Shape shape) : shape_(shape) {}
  Shape domain_shape() const override { return shape_; }
  Shape range_shape() const override { return shape_; }

 protected:
  void do_apply(std::span<const double> x, std::span<double> out) const override {
    std::copy(x.begin(), x.end(), out.begin());
  }
  void do_adjoint(std::span<const double> u, std::span<double> out) const override {
    std::copy(u.begin(), u.end(), out.begin());
  }

 private:
  Shape shape_;
};

// The 2-D Gaussian is the outer product of the normalized 1-D profile, and
// mirror padding acts on rows and columns independently, so the blur is a
// product of two 1-D padded convolutions. The adjoint scatters through the
// same index map in reverse order.
class BlurOp final : public LinearOperator {
 public:
  BlurOp(Shape shape, std::size_t size, double sigma)
      : shape_(shape), taps_(gaussian_1d(size, sigma)), radius_(size / 2) {
    row_index_ = mirror_table(shape.height);
    col_index_ = mirror_table(shape.width);
  }
  Shape domain_shape() const override { return shape_; }
  Shape range_shape() const override { return shape_; }

 protected:
  void do_apply(std::span<const double> x, std::span<double> out) const override {
    std::vector<double> tmp(x.size(), 0.0);
    const std::size_t h = shape_.height, w = shape_.width, c = shape_.channels;
    const std::size_t n = taps_.size();
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t col = 0; col < w; ++col) {
        const std::size_t* idx = &col_index_[col * n];
        for (std::size_t ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (std::size_t b = 0; b < n; ++b) acc += taps_[b] * x[(r * w + idx[b]) * c + ch];
          tmp[(r * w + col) * c + ch] = acc;
        }
      }
    }
    for (std::size_t r = 0; r < h; ++r) {
      const std::size_t* idx = &row_index_[r * n];
      for (std::size_t col = 0; col < w; ++col) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (std::size_t a = 0; a < n; ++a) acc += taps_[a] * tmp[(idx[a] * w + col) * c + ch];
          out[(r * w + col) * c + ch] = acc;
        }
      }
    }
  }

  void do_adjoint(std::span<const double> u, std::span<double> out) const override {
    std::vector<double> tmp(u.size(), 0.0);
    const std::size_t h = shape_.height, w = shape_.width, c = shape_.channels;
    const std::size_t n = taps_.size();
    for (std::size_t r = 0; r < h; ++r) {
      const std::size_t* idx = &row_index_[r * n];
      for (std::size_t col = 0; col < w; ++col) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double v = u[(r * w + col) * c + ch];
          for (std::size_t a = 0; a < n; ++a) tmp[(idx[a] * w + col) * c + ch] += taps_[a] * v;
        }
      }
    }
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t col = 0; col < w; ++col) {
        const std::size_t* idx = &col_index_[col * n];
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double v = tmp[(r * w + col) * c + ch];
          for (std::size_t b = 0; b < n; ++b) out[(r * w + idx[b]) * c + ch] += taps_[b] * v;
        }
      }
    }
  }

 private:
  // index[i * taps + k] = mirrored source position of tap k at output i.
  std::vector<std::size_t> mirror_table(std::size_t len) const {
    const std::size_t n = taps_.size();
    std::vector<std::size_t> table(len * n);
    const auto last = static_cast<std::ptrdiff_t>(len) - 1;
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        auto p = static_cast<std::ptrdiff_t>(i + k) - static_cast<std::ptrdiff_t>(radius_);
        if (p < 0) p = -p;
        if (p > last) p = 2 * last - p;
        table[i * n + k] = static_cast<std::size_t>(p);
      }
    }
    return table;
  }

  Shape shape_;
  std::vector<double> taps_;
  std::size_t radius_;
  std::vector<std::size_t> row_index_;
  std::vector<std::size_t> col_index_;
};

class InpaintOp final : public LinearOperator {
 public:
  InpaintOp(InpaintMask mask, Shape shape) : mask_(std::move(mask)), shape_(shape) {}
  Shape domain_shape() const override { return shape_; }
  Shape range_shape() const override { return {1, mask_.kept().size(), shape_.channels}; }

 protected:
  void do_apply(std::span<const double> x, std::span<double> out) const override {
    const std::size_t c = shape_.channels;
    std::size_t j = 0;
    for (std::size_t site : mask_.kept()) {
      for (std::size_t ch = 0; ch < c; ++ch) out[j++] = x[site * c + ch];
    }
  }
  void do_adjoint(std::span<const double> u, std::span<double> out) const override {
    const std::size_t c = shape_.channels;
    std::size_t j = 0;
    for (std::size_t site : mask_.kept()) {
      for (std::size_t ch = 0; ch < c; ++ch) out[site * c + ch] = u[j++];
    }
  }

 private:
  InpaintMask mask_;
  Shape shape_;
};

class AvgPoolOp final : public LinearOperator {
 public:
  AvgPoolOp(Shape shape, std::size_t factor) : shape_(shape), factor_(factor) {}
  Shape domain_shape() const override { return shape_; }
  Shape range_shape() const override {
    return {shape_.height / factor_, shape_.width / factor_, shape_.channels};
  }

 protected:
  void do_apply(std::span<const double> x, std::span<double> out) const override {
    const Shape ran = range_shape();
    const std::size_t w = shape_.width, c = shape_.channels, f = factor_;
    const double scale = 1.0 / static_cast<double>(f * f);
    for (std::size_t r = 0; r < ran.height; ++r) {
      for (std::size_t col = 0; col < ran.width; ++col) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (std::size_t a = 0; a < f; ++a) {
            for (std::size_t b = 0; b < f; ++b) acc += x[((r * f + a) * w + col * f + b) * c + ch];
          }
          out[(r * ran.width + col) * c + ch] = acc * scale;
        }
      }
    }
  }
  void do_adjoint(std::span<const double> u, std::span<double> out) const override {
    const Shape ran = range_shape();
    const std::size_t w = shape_.width, c = shape_.channels, f = factor_;
    const double scale = 1.0 / static_cast<double>(f * f);
    for (std::size_t r = 0; r < ran.height; ++r) {
      for (std::size_t col = 0; col < ran.width; ++col) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double v = u[(r * ran.width + col) * c + ch] * scale;
          for (std::size_t a = 0; a < f; ++a) {
            for (std::size_t b = 0; b < f; ++b) out[((r * f + a) * w + col * f + b) * c + ch] = v;
          }
        }
      }
    }
  }

 private:
  Shape shape_;
  std::size_t factor_;
};

void check_shape(const Shape& shape) {
  if (shape.height == 0 || shape.width == 0 || shape.channels == 0) {
    throw DimensionError("operator shape must be non-empty");
  }
}

}  // namespace

OperatorPtr identity_op(const Shape& shape) {
  check_shape(shape);
  return std::make_shared<IdentityOp>(shape);
}

OperatorPtr blur_op(const Shape& shape, std::size_t size, double sigma) {
  check_shape(shape);
  check_kernel_args(size, sigma);
  const std::size_t radius = size / 2;
  if (radius >= shape.height || radius >= shape.width) {
    throw ArgumentError("blur kernel of size " + std::to_string(size) +
                        " needs an image larger than " + std::to_string(radius) +
                        " pixels per side for mirror padding");
  }
  return std::make_shared<BlurOp>(shape, size, sigma);
}

OperatorPtr inpaint_op(const InpaintMask& mask, const Shape& shape) {
  check_shape(shape);
  if (mask.total() != shape.pixels()) {
    throw DimensionError("mask covers " + std::to_string(mask.total()) + " sites but the image has " +
                         std::to_string(shape.pixels()));
  }
  return std::make_shared<InpaintOp>(mask, shape);
}

OperatorPtr avgpool_sr_op(const Shape& shape, std::size_t factor) {
  check_shape(shape);
  if (factor == 0 || shape.height % factor != 0 || shape.width % factor != 0) {
    throw DimensionError("image " + std::to_string(shape.height) + "x" +
                         std::to_string(shape.width) + " is not divisible by factor " +
                         std::to_string(factor));
  }
  return std::make_shared<AvgPoolOp>(shape, factor);
}

double adjoint_dot_test(const LinearOperator& op, std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const std::size_t n = op.domain_shape().size();
  const std::size_t m = op.range_shape().size();
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<double> x(n), u(m);
    for (double& v : x) v = normal(rng);
    for (double& v : u) v = normal(rng);
    const std::vector<double> ax = op.apply(x);
    const std::vector<double> atu = op.adjoint(u);
    const double lhs = std::inner_product(ax.begin(), ax.end(), u.begin(), 0.0);
    const double rhs = std::inner_product(x.begin(), x.end(), atu.begin(), 0.0);
    const double norm_ax = std::sqrt(std::inner_product(ax.begin(), ax.end(), ax.begin(), 0.0));
    const double norm_u = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
    worst = std::max(worst, std::abs(lhs - rhs) / (norm_ax * norm_u + 1e-300));
  }
  return worst;
}

}  // namespace lqpnp
