// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

namespace lqpnp {

/// DDPM variance schedule. Indices are 0-based: alphas[i] is the cumulative
/// product of (1 - betas[j]) for j <= i.
class DiffusionSchedule {
 public:
  /// Throws ArgumentError unless every beta lies in (0,1).
  explicit DiffusionSchedule(std::vector<double> betas);

  std::size_t size() const noexcept { return betas_.size(); }
  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& alphas() const noexcept { return alphas_; }

  double beta(std::size_t t) const;
  double alpha(std::size_t t) const;
  /// (1 - alpha_t) / alpha_t, the gradient-step noise level of the solver.
  double eta(std::size_t t) const;

 private:
  std::vector<double> betas_;
  std::vector<double> alphas_;
};

inline constexpr std::size_t kDefaultSteps = 1000;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;

/// Linearly spaced betas, both endpoints included.
DiffusionSchedule linear_beta_schedule(std::size_t steps = kDefaultSteps,
                                       double beta_start = kDefaultBetaStart,
                                       double beta_end = kDefaultBetaEnd);

/// T indices evenly spaced from steps-1 down to 0, rounded, strictly decreasing.
std::vector<std::size_t> subsample_timesteps(std::size_t steps, std::size_t count);

/// eps_k = max(eps_min, eps0 * decay^k).
struct PerturbationSchedule {
  double eps0 = 1e-2;
  double eps_min = 1e-8;
  double decay = 0.8;
};

/// Throws ArgumentError unless 0 < eps_min <= eps0 and 0 < decay <= 1.
void validate(const PerturbationSchedule& ps);
double epsilon_at(const PerturbationSchedule& ps, std::size_t k);

}  // namespace lqpnp
