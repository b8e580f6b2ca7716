// SPDX-License-Identifier: Apache-2.0
#include "lqpnp/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lqpnp/errors.hpp"
#include "lqpnp/rng.hpp"

namespace lqpnp {

namespace {

constexpr std::uint64_t kInitStream = 0x11;
constexpr std::uint64_t kStepStream = 0x12;

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

void validate(const GuidanceConfig& config) {
  if (!(config.rho >= 0.0) || !std::isfinite(config.rho)) throw ArgumentError("rho must be non-negative");
  if (!(config.q > 0.0 && config.q <= 2.0)) throw ArgumentError("q must lie in (0,2]");
  if (config.steps == 0 || config.steps > config.schedule.size()) {
    throw ArgumentError("sampling steps must lie in [1, " + std::to_string(config.schedule.size()) + "]");
  }
  validate(config.perturbation);
}

PosteriorCoefficients ddpm_posterior_coefficients(double alpha_prev, double alpha_t, double beta_t) {
  if (!(alpha_t > 0.0 && alpha_t < 1.0)) throw ArgumentError("alpha_t must lie in (0,1)");
  if (!(alpha_prev > 0.0 && alpha_prev <= 1.0)) throw ArgumentError("alpha_prev must lie in (0,1]");
  if (!(beta_t >= 0.0 && beta_t < 1.0)) throw ArgumentError("beta_t must lie in [0,1)");
  const double denom = 1.0 - alpha_t;
  PosteriorCoefficients c;
  c.x0_coef = std::sqrt(alpha_prev) * beta_t / denom;
  c.xt_coef = std::sqrt(1.0 - beta_t) * (1.0 - alpha_prev) / denom;
  c.variance = (1.0 - alpha_prev) / denom * beta_t;
  return c;
}

PosteriorCoefficients ddpm_posterior_coefficients(const DiffusionSchedule& schedule, std::size_t t,
                                                  std::optional<std::size_t> prev) {
  const double alpha_t = schedule.alpha(t);
  if (!prev) return ddpm_posterior_coefficients(1.0, alpha_t, 1.0 - alpha_t);
  if (*prev >= t) throw ArgumentError("posterior step must move to an earlier index");
  const double alpha_prev = schedule.alpha(*prev);
  const double beta = *prev + 1 == t ? schedule.beta(t) : 1.0 - alpha_t / alpha_prev;
  return ddpm_posterior_coefficients(alpha_prev, alpha_t, beta);
}

std::vector<double> ddpm_posterior_step(std::span<const double> x_t, std::span<const double> x0_hat,
                                        const DiffusionSchedule& schedule, std::size_t t,
                                        std::optional<std::size_t> prev, std::uint64_t seed) {
  if (x_t.size() != x0_hat.size()) throw DimensionError("posterior step inputs differ in size");
  const PosteriorCoefficients c = ddpm_posterior_coefficients(schedule, t, prev);
  std::vector<double> out(x_t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c.x0_coef * x0_hat[i] + c.xt_coef * x_t[i];
  if (prev && c.variance > 0.0) {
    const std::vector<double> z = standard_normal(out.size(), seed);
    const double sigma = std::sqrt(c.variance);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * z[i];
  }
  return out;
}

std::vector<double> ddpm_posterior_step(std::span<const double> x_t, std::span<const double> x0_hat,
                                        std::size_t t, const DiffusionSchedule& schedule,
                                        std::uint64_t seed) {
  const std::optional<std::size_t> prev = t == 0 ? std::nullopt : std::optional<std::size_t>(t - 1);
  return ddpm_posterior_step(x_t, x0_hat, schedule, t, prev, seed);
}

std::vector<double> residual_gradient(std::span<const double> residual, GuidanceVariant variant,
                                      double q, double eps) {
  if (!(q > 0.0 && q <= 2.0)) throw ArgumentError("q must lie in (0,2]");
  if (!(eps >= 0.0)) throw ArgumentError("perturbation must be non-negative");
  std::vector<double> g(residual.size());
  if (q == 2.0) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * residual[i];
    return g;
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = residual[i];
    if (variant == GuidanceVariant::irls_weighted) {
      g[i] = 2.0 * std::pow(r * r + eps, (q - 2.0) / 2.0) * r;
    } else if (q < 1.0) {
      g[i] = q * std::pow(r * r + eps, (q - 1.0) / 2.0) * sign_of(r);
    } else {
      g[i] = r == 0.0 ? 0.0 : q * std::pow(std::abs(r), q - 1.0) * sign_of(r);
    }
  }
  return g;
}

GuidanceGradient guidance_gradient(std::span<const double> x_t, std::span<const double> y,
                                   const LinearOperator& op, Denoiser& denoiser, NoiseLevel level,
                                   GuidanceVariant variant, double q, double eps, JacobianMode mode) {
  const Shape shape = op.domain_shape();
  GuidanceGradient out;
  out.x0_hat = denoiser.denoise(x_t, shape, level);
  out.residual = op.apply(out.x0_hat);
  if (out.residual.size() != y.size()) throw DimensionError("measurement size does not match the operator range");
  for (std::size_t i = 0; i < y.size(); ++i) out.residual[i] -= y[i];
  out.grad = op.adjoint(residual_gradient(out.residual, variant, q, eps));
  if (mode == JacobianMode::exact_diag) {
    if (!denoiser.has_diag_jacobian()) {
      throw ArgumentError("exact_diag guidance needs a denoiser with a diagonal Jacobian");
    }
    const std::vector<double> jac = denoiser.diag_jacobian(x_t, shape, level);
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] *= jac[i];
  } else {
    const double scale = 1.0 / std::sqrt(level.alpha);
    for (double& g : out.grad) g *= scale;
  }
  return out;
}

DpsResult dps_sample(std::span<const double> y, const LinearOperator& op, Denoiser& denoiser,
                     const GuidanceConfig& config) {
  validate(config);
  if (y.size() != op.range_shape().size()) throw DimensionError("measurement size does not match the operator range");
  const Shape domain = op.domain_shape();
  const std::vector<std::size_t> timesteps = subsample_timesteps(config.schedule.size(), config.steps);

  std::vector<double> x = standard_normal(domain.size(), derive_seed(config.seed, {kInitStream}));
  DpsResult result;
  for (std::size_t k = 0; k < timesteps.size(); ++k) {
    const std::size_t t = timesteps[k];
    const std::optional<std::size_t> prev =
        k + 1 < timesteps.size() ? std::optional<std::size_t>(timesteps[k + 1]) : std::nullopt;
    const double eps = epsilon_at(config.perturbation, k);
    const NoiseLevel level{t, config.schedule.alpha(t)};

    GuidanceGradient gg;
    try {
      gg = guidance_gradient(x, y, op, denoiser, level, config.variant, config.q, eps, config.jacobian_mode);
    } catch (const TransportError& e) {
      throw TransportError(std::string(e.what()) + " (sampling step " + std::to_string(k) + ")");
    }
    std::vector<double> next =
        ddpm_posterior_step(x, gg.x0_hat, config.schedule, t, prev, derive_seed(config.seed, {kStepStream, k}));
    double grad_norm = 0.0;
    if (config.rho > 0.0) {
      for (std::size_t i = 0; i < next.size(); ++i) next[i] -= config.rho * gg.grad[i];
      grad_norm = std::sqrt(std::inner_product(gg.grad.begin(), gg.grad.end(), gg.grad.begin(), 0.0));
    }
    if (!std::all_of(next.begin(), next.end(), [](double v) { return std::isfinite(v); })) {
      throw NumericError("non-finite sample at sampling step " + std::to_string(k));
    }
    x = std::move(next);

    if (config.record_trace) {
      const double surrogate = config.variant == GuidanceVariant::irls_weighted
                                   ? majorizer_value(gg.residual, gg.residual, eps, config.q, 1.0)
                                   : smoothed_fidelity(gg.residual, eps, config.q, 1.0);
      const double l2 = std::sqrt(std::inner_product(gg.residual.begin(), gg.residual.end(),
                                                     gg.residual.begin(), 0.0));
      result.trace.push_back({k, t, eps, config.rho * grad_norm, lq_fidelity(gg.residual, config.q, 1.0),
                              surrogate, l2});
    }
  }
  for (double& v : x) v = std::clamp(v, 0.0, 1.0);
  result.image = Image(domain, std::move(x));
  return result;
}

}  // namespace lqpnp
