// SPDX-License-Identifier: Apache-2.0
#include "lqpnp/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lqpnp/errors.hpp"

namespace lqpnp {

DiffusionSchedule::DiffusionSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw ArgumentError("diffusion schedule needs at least one step");
  alphas_.resize(betas_.size());
  double running = 1.0;
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    if (!(betas_[i] > 0.0 && betas_[i] < 1.0)) {
      throw ArgumentError("beta[" + std::to_string(i) + "] must lie in (0,1)");
    }
    running *= 1.0 - betas_[i];
    alphas_[i] = running;
  }
}

double DiffusionSchedule::beta(std::size_t t) const {
  if (t >= betas_.size()) throw ArgumentError("schedule index " + std::to_string(t) + " out of range");
  return betas_[t];
}

double DiffusionSchedule::alpha(std::size_t t) const {
  if (t >= alphas_.size()) throw ArgumentError("schedule index " + std::to_string(t) + " out of range");
  return alphas_[t];
}

double DiffusionSchedule::eta(std::size_t t) const {
  const double a = alpha(t);
  return (1.0 - a) / a;
}

DiffusionSchedule linear_beta_schedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps == 0) throw ArgumentError("schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ArgumentError("beta range must satisfy 0 < start <= end < 1");
  }
  std::vector<double> betas(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[i] = beta_start + (beta_end - beta_start) * frac;
  }
  betas.back() = beta_end;
  return DiffusionSchedule(std::move(betas));
}

std::vector<std::size_t> subsample_timesteps(std::size_t steps, std::size_t count) {
  if (count == 0 || count > steps) {
    throw ArgumentError("timestep count must lie in [1, " + std::to_string(steps) + "]");
  }
  std::vector<std::size_t> out(count);
  const double top = static_cast<double>(steps - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    out[i] = static_cast<std::size_t>(std::round(top * (1.0 - frac)));
  }
  return out;
}

void validate(const PerturbationSchedule& ps) {
  if (!(ps.eps_min > 0.0 && ps.eps_min <= ps.eps0 && std::isfinite(ps.eps0))) {
    throw ArgumentError("perturbation schedule needs 0 < eps_min <= eps0");
  }
  if (!(ps.decay > 0.0 && ps.decay <= 1.0)) {
    throw ArgumentError("perturbation decay must lie in (0,1]");
  }
}

double epsilon_at(const PerturbationSchedule& ps, std::size_t k) {
  return std::max(ps.eps_min, ps.eps0 * std::pow(ps.decay, static_cast<double>(k)));
}

}  // namespace lqpnp
