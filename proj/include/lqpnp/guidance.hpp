// SPDX-License-Identifier: Apache-2.0
#pragma once

// Guided ancestral DDPM sampling with an lq measurement term.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lqpnp/denoisers.hpp"
#include "lqpnp/image.hpp"
#include "lqpnp/operators.hpp"
#include "lqpnp/schedule.hpp"
#include "lqpnp/solver.hpp"

namespace lqpnp {

enum class GuidanceVariant { naive_lq, irls_weighted };
enum class JacobianMode { exact_diag, scaled_identity };

struct GuidanceConfig {
  GuidanceVariant variant = GuidanceVariant::irls_weighted;
  double rho = 1.0;  ///< constant guidance scale; 0 gives unconditional sampling
  double q = 0.5;
  PerturbationSchedule perturbation{};
  DiffusionSchedule schedule = linear_beta_schedule();
  std::size_t steps = kDefaultSteps;  ///< sampling steps drawn from the schedule
  std::uint64_t seed = 0;
  JacobianMode jacobian_mode = JacobianMode::scaled_identity;
  bool record_trace = true;
};

/// Throws ArgumentError on negative rho, q outside (0,2] or a bad step count.
void validate(const GuidanceConfig& config);

/// Posterior q(x_prev | x_t, x0): mean = x0_coef * x0 + xt_coef * x_t.
struct PosteriorCoefficients {
  double x0_coef = 0.0;
  double xt_coef = 0.0;
  double variance = 0.0;
};

/// Closed form from cumulative alphas and the transition beta.
PosteriorCoefficients ddpm_posterior_coefficients(double alpha_prev, double alpha_t, double beta_t);

/// Coefficients for the transition t -> prev. `prev` empty means the final
/// transition to the clean image (alpha_prev = 1). A skipped transition uses
/// beta = 1 - alpha_t / alpha_prev.
PosteriorCoefficients ddpm_posterior_coefficients(const DiffusionSchedule& schedule, std::size_t t,
                                                  std::optional<std::size_t> prev);

/// Ancestral step from t to prev: mean + sqrt(variance) z with seeded z. The
/// final transition (prev empty) is deterministic.
std::vector<double> ddpm_posterior_step(std::span<const double> x_t, std::span<const double> x0_hat,
                                        const DiffusionSchedule& schedule, std::size_t t,
                                        std::optional<std::size_t> prev, std::uint64_t seed);

/// Single-step form: t >= 1 moves to t - 1, t = 0 finishes at the clean image.
std::vector<double> ddpm_posterior_step(std::span<const double> x_t, std::span<const double> x0_hat,
                                        std::size_t t, const DiffusionSchedule& schedule,
                                        std::uint64_t seed);

/// Derivative of the measurement penalty with respect to the residual.
/// naive_lq: q|r|^(q-1) sign(r), smoothed as q(r^2+eps)^((q-1)/2) sign(r) for
/// q < 1. irls_weighted: 2 w r with w = (r^2+eps)^((q-2)/2). Both give 2r at q = 2.
std::vector<double> residual_gradient(std::span<const double> residual, GuidanceVariant variant,
                                      double q, double eps);

struct GuidanceGradient {
  std::vector<double> x0_hat;
  std::vector<double> residual;  ///< A x0_hat - y
  std::vector<double> grad;      ///< gradient with respect to x_t
};

/// Denoises x_t, forms the residual and chains the residual gradient through
/// A^T and the denoiser Jacobian.
GuidanceGradient guidance_gradient(std::span<const double> x_t, std::span<const double> y,
                                   const LinearOperator& op, Denoiser& denoiser, NoiseLevel level,
                                   GuidanceVariant variant, double q, double eps, JacobianMode mode);

struct DpsResult {
  Image image;  ///< clamped to [0,1]
  RestoreTrace trace;
};

DpsResult dps_sample(std::span<const double> y, const LinearOperator& op, Denoiser& denoiser,
                     const GuidanceConfig& config);

}  // namespace lqpnp
