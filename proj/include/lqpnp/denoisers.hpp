// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lqpnp/image.hpp"

namespace lqpnp {

/// Schedule position a denoiser is asked to operate at.
struct NoiseLevel {
  std::size_t t = 0;
  double alpha = 1.0;  ///< cumulative signal retention at t, in (0,1]
};

/// Posterior-mean estimator E[x0 | x_t] used as the proximal step.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  /// Output has the same size as x and is finite for finite input.
  virtual std::vector<double> denoise(std::span<const double> x, const Shape& shape,
                                      NoiseLevel level) = 0;

  /// Analytic denoisers expose d denoise_i / d x_i.
  virtual bool has_diag_jacobian() const { return false; }
  virtual std::vector<double> diag_jacobian(std::span<const double> x, const Shape& shape,
                                            NoiseLevel level) const;

  /// Diffusion-style denoisers expect x = sqrt(alpha) x0 + sqrt(1-alpha) z.
  /// Classical baselines take the iterate directly and return false.
  virtual bool expects_renoised_input() const { return true; }

  /// Independent instance for another worker thread (a new connection for
  /// external denoisers).
  virtual std::unique_ptr<Denoiser> clone() const = 0;
};

using DenoiserPtr = std::unique_ptr<Denoiser>;

/// (x - sqrt(1-alpha) eps) / sqrt(alpha), elementwise. alpha must lie in (0,1).
std::vector<double> tweedie_from_noise_pred(std::span<const double> x,
                                            std::span<const double> eps_pred, double alpha);

/// sqrt(alpha) x + sqrt(1-alpha) z with z seeded standard normal.
std::vector<double> renoise(std::span<const double> x, double alpha, std::uint64_t seed);

/// Scalar Gaussian mixture applied independently to every entry.
struct GmmPrior {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;
};

/// Two-level world: weights (0.5,0.5), means (0.15,0.85), variances 0.02^2.
GmmPrior default_gmm_prior();
/// Throws ArgumentError on mismatched lengths, non-positive weights or
/// variances, or weights not summing to 1 within 1e-12.
void validate(const GmmPrior& prior);

/// log p_t(v) for v = sqrt(alpha) x0 + sqrt(1-alpha) z, x0 ~ prior.
double gmm_marginal_log_density(double v, const GmmPrior& prior, double alpha);
/// d/dv log p_t(v).
double gmm_marginal_score(double v, const GmmPrior& prior, double alpha);
/// d^2/dv^2 log p_t(v).
double gmm_marginal_score_derivative(double v, const GmmPrior& prior, double alpha);

DenoiserPtr gmm_denoiser(GmmPrior prior);

inline constexpr std::size_t kDefaultTvIterations = 30;
/// Chambolle dual projection for min 0.5|u - x|^2 + strength * eta_t * TV(u),
/// isotropic TV per channel, eta_t = (1 - alpha)/alpha.
DenoiserPtr tv_denoiser(double strength, std::size_t iterations = kDefaultTvIterations);

/// Per-channel sliding median with mirror boundary.
DenoiserPtr median_denoiser(std::size_t window = 3);

struct ExternalEndpoint {
  enum class Transport { stdio, tcp };
  Transport transport = Transport::tcp;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  /// argv of the server process for the stdio transport.
  std::vector<std::string> command;
  int timeout_ms = 30000;
};

/// Connects on construction; throws TransportError if the endpoint is dead.
DenoiserPtr external_denoiser(const ExternalEndpoint& endpoint);

}  // namespace lqpnp
