// SPDX-License-Identifier: Apache-2.0
#pragma once

// lq-fidelity restoration: IRLS majorization of (1/lambda)|Ax - y|_q^q and a
// forward-backward inner loop whose proximal step is a plug-in denoiser.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lqpnp/denoisers.hpp"
#include "lqpnp/image.hpp"
#include "lqpnp/operators.hpp"
#include "lqpnp/schedule.hpp"

namespace lqpnp {

/// Per-entry IRLS weights anchored at a residual.
struct WeightVector {
  std::vector<double> w;
  double eps_used = 0.0;
  std::vector<double> anchor_residual;
};

/// w_i = (r_i^2 + eps)^((q-2)/2); w == 1 exactly when q == 2. These are the
/// squared entries of the Hadamard reweighting, so sum w_i r_i^2 is the
/// quadratic part of the majorizer.
WeightVector irls_weights(std::span<const double> residual, double eps, double q);

/// (1/lambda) sum |r_i|^q.
double lq_fidelity(std::span<const double> residual, double q, double lambda);
/// (1/lambda) sum (r_i^2 + eps)^(q/2).
double smoothed_fidelity(std::span<const double> residual, double eps, double q, double lambda);

/// (1/lambda) [ (q/2) sum w_i r_i^2 + ((2-q)/2) sum (a_i^2 + eps)^(q/2) ] with
/// w anchored at a. Upper-bounds lq_fidelity(r) and touches it at r = a when
/// eps = 0.
double majorizer_value(std::span<const double> residual, std::span<const double> anchor_residual,
                       double eps, double q, double lambda);

struct StepRule {
  enum class Kind { normalized, fixed };
  Kind kind = Kind::normalized;
  double size = 1.0;  ///< only used by the fixed rule

  static StepRule normalized() { return {Kind::normalized, 1.0}; }
  static StepRule fixed(double s) { return {Kind::fixed, s}; }
};

struct StepResult {
  std::vector<double> x;
  double step = 0.0;  ///< s * eta actually applied (0 when the gradient vanished)
};

/// x - s * eta * A^T (w o (Ax - y)). The normalized rule uses s = 1/|g| and
/// skips the step when g = 0. Throws NumericError on a non-finite gradient.
StepResult gradient_step(std::span<const double> x, const LinearOperator& op,
                         std::span<const double> y, const WeightVector& weights, double eta,
                         StepRule rule, std::size_t outer_step = 0);

struct RestoreConfig {
  double q = 0.5;
  double lambda = 1.0;
  std::size_t outer_iterations = 100;  ///< T
  std::size_t inner_iterations = 1;    ///< T_inter
  DiffusionSchedule schedule = linear_beta_schedule();
  PerturbationSchedule perturbation{};
  StepRule step_rule = StepRule::normalized();
  std::uint64_t seed = 0;
  bool record_trace = true;
  bool warm_start = false;  ///< start from A^T y instead of pure noise
};

/// Throws ArgumentError on q outside (0,2], non-positive lambda, zero
/// iteration counts, T larger than the schedule or a bad step rule.
void validate(const RestoreConfig& config);

struct TraceRecord {
  std::size_t k = 0;  ///< outer ordinal
  std::size_t t = 0;  ///< schedule index
  double eps = 0.0;
  double step = 0.0;
  double fidelity_lq = 0.0;
  double surrogate = 0.0;
  double residual_l2 = 0.0;
};
using RestoreTrace = std::vector<TraceRecord>;

/// One JSON object per line; `variant` is added when non-empty.
std::string trace_to_jsonl(const RestoreTrace& trace, std::string_view variant = {});

/// T_inter rounds of gradient step, renoise at alpha_t (for denoisers that
/// expect it) and denoise at t, with the weights held fixed. `last_step`
/// receives the step of the final round.
std::vector<double> fbs_inner(std::span<const double> x, const LinearOperator& op,
                              std::span<const double> y, const WeightVector& weights,
                              std::size_t t, std::size_t inner_iterations, Denoiser& denoiser,
                              const DiffusionSchedule& schedule, StepRule rule, std::uint64_t seed,
                              double* last_step = nullptr, std::size_t outer_step = 0);

struct RestoreResult {
  Image image;  ///< clamped to [0,1], shaped like the operator domain
  RestoreTrace trace;
};

/// The full plug-and-play lq restoration loop.
RestoreResult restore(std::span<const double> y, const LinearOperator& op,
                      const RestoreConfig& config, Denoiser& denoiser);

struct IrlsResult {
  std::vector<double> x;
  /// objective[0] at the start point, then one value per sweep, each the
  /// smoothed objective F_eps(x) = (1/lambda) sum (r^2+eps)^(q/2) + |x - z|^2
  /// at the eps used by that sweep.
  std::vector<double> objective;
};

/// Reference MM solver for min (1/lambda)|Ax - y|_q^q + |x - z|^2 with exact
/// dense inner solves. For q < 2 it runs from z along the eps sequence and
/// from the least-squares data fit at eps_min, then returns the run with the
/// lower exact objective. Limited to 1000 unknowns.
IrlsResult irls_lq_regression(const LinearOperator& op, std::span<const double> y,
                              std::span<const double> z_anchor, double q, double lambda,
                              std::size_t iterations, const PerturbationSchedule& perturbation);

}  // namespace lqpnp
