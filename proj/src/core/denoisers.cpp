// SPDX-License-Identifier: Apache-2.0
#include "lqpnp/denoisers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "lqpnp/errors.hpp"
#include "lqpnp/rng.hpp"

namespace lqpnp {

std::vector<double> Denoiser::diag_jacobian(std::span<const double>, const Shape&, NoiseLevel) const {
  throw ArgumentError("this denoiser does not provide a diagonal Jacobian");
}

namespace {

void check_alpha_closed(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must lie in (0,1]");
}

void check_input(std::span<const double> x, const Shape& shape) {
  if (x.size() != shape.size()) {
    throw DimensionError("denoiser input has " + std::to_string(x.size()) + " values, shape needs " +
                         std::to_string(shape.size()));
  }
}

}  // namespace

std::vector<double> tweedie_from_noise_pred(std::span<const double> x,
                                            std::span<const double> eps_pred, double alpha) {
  if (x.size() != eps_pred.size()) throw DimensionError("noise prediction size mismatch");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0,1)");
  const double sa = std::sqrt(alpha);
  const double sn = std::sqrt(1.0 - alpha);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - sn * eps_pred[i]) / sa;
  return out;
}

std::vector<double> renoise(std::span<const double> x, double alpha, std::uint64_t seed) {
  check_alpha_closed(alpha);
  const double sa = std::sqrt(alpha);
  const double sn = std::sqrt(1.0 - alpha);
  std::vector<double> out = standard_normal(x.size(), seed);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sa * x[i] + sn * out[i];
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian mixture prior

GmmPrior default_gmm_prior() {
  return {{0.5, 0.5}, {0.15, 0.85}, {0.02 * 0.02, 0.02 * 0.02}};
}

void validate(const GmmPrior& prior) {
  const std::size_t k = prior.weights.size();
  if (k == 0 || prior.means.size() != k || prior.variances.size() != k) {
    throw ArgumentError("GMM prior needs equal, non-zero numbers of weights, means and variances");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(prior.weights[i] > 0.0)) throw ArgumentError("GMM weights must be positive");
    if (!(prior.variances[i] > 0.0)) throw ArgumentError("GMM variances must be positive");
    if (!std::isfinite(prior.means[i])) throw ArgumentError("GMM means must be finite");
    total += prior.weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw ArgumentError("GMM weights must sum to 1");
}

namespace {

// Components of the noised marginal N(sqrt(a) mu_k, a var_k + 1 - a), with
// per-entry responsibilities evaluated by log-sum-exp.
class NoisedMixture {
 public:
  NoisedMixture(const GmmPrior& prior, double alpha) {
    check_alpha_closed(alpha);
    const double sa = std::sqrt(alpha);
    const std::size_t k = prior.weights.size();
    mean_.resize(k);
    var_.resize(k);
    log_coef_.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      mean_[i] = sa * prior.means[i];
      var_[i] = alpha * prior.variances[i] + (1.0 - alpha);
      log_coef_[i] = std::log(prior.weights[i]) - 0.5 * std::log(2.0 * std::numbers::pi * var_[i]);
    }
    resp_.resize(k);
  }

  // Fills resp_ and returns log p(v).
  double evaluate(double v) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mean_.size(); ++i) {
      const double d = v - mean_[i];
      resp_[i] = log_coef_[i] - d * d / (2.0 * var_[i]);
      top = std::max(top, resp_[i]);
    }
    double sum = 0.0;
    for (double& r : resp_) {
      r = std::exp(r - top);
      sum += r;
    }
    for (double& r : resp_) r /= sum;
    return top + std::log(sum);
  }

  double score(double v) {
    evaluate(v);
    return mean_gradient(v);
  }

  double score_derivative(double v) {
    evaluate(v);
    const double g_bar = mean_gradient(v);
    double curvature = 0.0;
    double spread = 0.0;
    for (std::size_t i = 0; i < mean_.size(); ++i) {
      const double g = -(v - mean_[i]) / var_[i];
      curvature -= resp_[i] / var_[i];
      spread += resp_[i] * (g - g_bar) * (g - g_bar);
    }
    return curvature + spread;
  }

 private:
  double mean_gradient(double v) const {
    double s = 0.0;
    for (std::size_t i = 0; i < mean_.size(); ++i) s -= resp_[i] * (v - mean_[i]) / var_[i];
    return s;
  }

  std::vector<double> mean_;
  std::vector<double> var_;
  std::vector<double> log_coef_;
  std::vector<double> resp_;
};

class GmmDenoiser final : public Denoiser {
 public:
  explicit GmmDenoiser(GmmPrior prior) : prior_(std::move(prior)) {}

  std::vector<double> denoise(std::span<const double> x, const Shape& shape,
                              NoiseLevel level) override {
    check_input(x, shape);
    NoisedMixture mix(prior_, level.alpha);
    const double noise = 1.0 - level.alpha;
    const double sa = std::sqrt(level.alpha);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] + noise * mix.score(x[i])) / sa;
    return out;
  }

  bool has_diag_jacobian() const override { return true; }

  std::vector<double> diag_jacobian(std::span<const double> x, const Shape& shape,
                                    NoiseLevel level) const override {
    check_input(x, shape);
    NoisedMixture mix(prior_, level.alpha);
    const double noise = 1.0 - level.alpha;
    const double sa = std::sqrt(level.alpha);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      out[i] = (1.0 + noise * mix.score_derivative(x[i])) / sa;
    }
    return out;
  }

  std::unique_ptr<Denoiser> clone() const override { return std::make_unique<GmmDenoiser>(prior_); }

 private:
  GmmPrior prior_;
};

// ---------------------------------------------------------------------------
// Classical baselines

std::size_t mirror_index(std::ptrdiff_t i, std::size_t len) {
  if (len == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (len - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(len)) i = period - i;
  return static_cast<std::size_t>(i);
}

class TvDenoiser final : public Denoiser {
 public:
  TvDenoiser(double strength, std::size_t iterations) : strength_(strength), iterations_(iterations) {}

  std::vector<double> denoise(std::span<const double> x, const Shape& shape,
                              NoiseLevel level) override {
    check_input(x, shape);
    check_alpha_closed(level.alpha);
    const double weight = strength_ * (1.0 - level.alpha) / level.alpha;
    std::vector<double> out(x.begin(), x.end());
    if (weight == 0.0 || iterations_ == 0) return out;
    std::vector<double> plane(shape.pixels());
    for (std::size_t ch = 0; ch < shape.channels; ++ch) {
      for (std::size_t p = 0; p < plane.size(); ++p) plane[p] = x[p * shape.channels + ch];
      const std::vector<double> u = solve_plane(plane, shape.height, shape.width, weight);
      for (std::size_t p = 0; p < plane.size(); ++p) out[p * shape.channels + ch] = u[p];
    }
    return out;
  }

  bool expects_renoised_input() const override { return false; }
  std::unique_ptr<Denoiser> clone() const override {
    return std::make_unique<TvDenoiser>(strength_, iterations_);
  }

 private:
  // Chambolle's projection iteration on the dual field p = (px, py).
  std::vector<double> solve_plane(const std::vector<double>& f, std::size_t h, std::size_t w,
                                  double weight) const {
    constexpr double tau = 0.125;
    const std::size_t n = f.size();
    std::vector<double> px(n, 0.0), py(n, 0.0), div(n, 0.0), term(n);
    auto divergence = [&] {
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
          const std::size_t i = r * w + c;
          double d = 0.0;
          d += (c + 1 < w ? px[i] : 0.0) - (c > 0 ? px[i - 1] : 0.0);
          d += (r + 1 < h ? py[i] : 0.0) - (r > 0 ? py[i - w] : 0.0);
          div[i] = d;
        }
      }
    };
    for (std::size_t it = 0; it < iterations_; ++it) {
      divergence();
      for (std::size_t i = 0; i < n; ++i) term[i] = div[i] - f[i] / weight;
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
          const std::size_t i = r * w + c;
          const double gx = c + 1 < w ? term[i + 1] - term[i] : 0.0;
          const double gy = r + 1 < h ? term[i + w] - term[i] : 0.0;
          const double denom = 1.0 + tau * std::sqrt(gx * gx + gy * gy);
          px[i] = (px[i] + tau * gx) / denom;
          py[i] = (py[i] + tau * gy) / denom;
        }
      }
    }
    divergence();
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = f[i] - weight * div[i];
    return u;
  }

  double strength_;
  std::size_t iterations_;
};

class MedianDenoiser final : public Denoiser {
 public:
  explicit MedianDenoiser(std::size_t window) : window_(window) {}

  std::vector<double> denoise(std::span<const double> x, const Shape& shape, NoiseLevel) override {
    check_input(x, shape);
    std::vector<double> out(x.size());
    const auto radius = static_cast<std::ptrdiff_t>(window_ / 2);
    std::vector<double> buf;
    buf.reserve(window_ * window_);
    for (std::size_t r = 0; r < shape.height; ++r) {
      for (std::size_t c = 0; c < shape.width; ++c) {
        for (std::size_t ch = 0; ch < shape.channels; ++ch) {
          buf.clear();
          for (std::ptrdiff_t dr = -radius; dr <= radius; ++dr) {
            const std::size_t rr = mirror_index(static_cast<std::ptrdiff_t>(r) + dr, shape.height);
            for (std::ptrdiff_t dc = -radius; dc <= radius; ++dc) {
              const std::size_t cc = mirror_index(static_cast<std::ptrdiff_t>(c) + dc, shape.width);
              buf.push_back(x[(rr * shape.width + cc) * shape.channels + ch]);
            }
          }
          auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
          std::nth_element(buf.begin(), mid, buf.end());
          out[(r * shape.width + c) * shape.channels + ch] = *mid;
        }
      }
    }
    return out;
  }

  bool expects_renoised_input() const override { return false; }
  std::unique_ptr<Denoiser> clone() const override { return std::make_unique<MedianDenoiser>(window_); }

 private:
  std::size_t window_;
};

}  // namespace

double gmm_marginal_log_density(double v, const GmmPrior& prior, double alpha) {
  validate(prior);
  return NoisedMixture(prior, alpha).evaluate(v);
}

double gmm_marginal_score(double v, const GmmPrior& prior, double alpha) {
  validate(prior);
  return NoisedMixture(prior, alpha).score(v);
}

double gmm_marginal_score_derivative(double v, const GmmPrior& prior, double alpha) {
  validate(prior);
  return NoisedMixture(prior, alpha).score_derivative(v);
}

DenoiserPtr gmm_denoiser(GmmPrior prior) {
  validate(prior);
  return std::make_unique<GmmDenoiser>(std::move(prior));
}

DenoiserPtr tv_denoiser(double strength, std::size_t iterations) {
  if (!(strength >= 0.0) || !std::isfinite(strength)) {
    throw ArgumentError("TV strength must be non-negative");
  }
  return std::make_unique<TvDenoiser>(strength, iterations);
}

DenoiserPtr median_denoiser(std::size_t window) {
  if (window % 2 == 0) throw ArgumentError("median window must be odd, got " + std::to_string(window));
  return std::make_unique<MedianDenoiser>(window);
}

}  // namespace lqpnp
