// SPDX-License-Identifier: Apache-2.0
#include "lqpnp/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "json.hpp"
#include "lqpnp/errors.hpp"
#include "lqpnp/rng.hpp"

namespace lqpnp {

namespace {

void check_q(double q) {
  if (!(q > 0.0 && q <= 2.0)) throw ArgumentError("q must lie in (0,2]");
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be positive");
}

double norm2(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

std::vector<double> residual_of(const LinearOperator& op, std::span<const double> x,
                                std::span<const double> y) {
  std::vector<double> r = op.apply(x);
  if (r.size() != y.size()) {
    throw DimensionError("measurement has " + std::to_string(y.size()) +
                         " values but the operator range has " + std::to_string(r.size()));
  }
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  return r;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

// Stream ids for derive_seed.
constexpr std::uint64_t kInitStream = 0x1;
constexpr std::uint64_t kOuterStream = 0x2;

}  // namespace

WeightVector irls_weights(std::span<const double> residual, double eps, double q) {
  check_q(q);
  if (!(eps >= 0.0)) throw ArgumentError("IRLS perturbation must be non-negative");
  WeightVector out;
  out.eps_used = eps;
  out.anchor_residual.assign(residual.begin(), residual.end());
  out.w.resize(residual.size());
  if (q == 2.0) {
    std::fill(out.w.begin(), out.w.end(), 1.0);
    return out;
  }
  const double exponent = (q - 2.0) / 2.0;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    out.w[i] = std::pow(residual[i] * residual[i] + eps, exponent);
  }
  return out;
}

double lq_fidelity(std::span<const double> residual, double q, double lambda) {
  check_q(q);
  check_lambda(lambda);
  double sum = 0.0;
  for (double r : residual) sum += std::pow(std::abs(r), q);
  return sum / lambda;
}

double smoothed_fidelity(std::span<const double> residual, double eps, double q, double lambda) {
  check_q(q);
  check_lambda(lambda);
  double sum = 0.0;
  for (double r : residual) sum += std::pow(r * r + eps, q / 2.0);
  return sum / lambda;
}

double majorizer_value(std::span<const double> residual, std::span<const double> anchor_residual,
                       double eps, double q, double lambda) {
  if (residual.size() != anchor_residual.size()) throw DimensionError("majorizer residual size mismatch");
  check_lambda(lambda);
  const WeightVector weights = irls_weights(anchor_residual, eps, q);
  double quadratic = 0.0;
  double constant = 0.0;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    const double a = anchor_residual[i];
    quadratic += weights.w[i] * residual[i] * residual[i];
    constant += std::pow(a * a + eps, q / 2.0);
  }
  return (q / 2.0 * quadratic + (2.0 - q) / 2.0 * constant) / lambda;
}

StepResult gradient_step(std::span<const double> x, const LinearOperator& op,
                         std::span<const double> y, const WeightVector& weights, double eta,
                         StepRule rule, std::size_t outer_step) {
  std::vector<double> r = residual_of(op, x, y);
  if (weights.w.size() != r.size()) throw DimensionError("weight vector does not match the measurement");
  for (std::size_t i = 0; i < r.size(); ++i) r[i] *= weights.w[i];
  const std::vector<double> g = op.adjoint(r);
  if (!all_finite(g)) {
    throw NumericError("non-finite gradient at outer step " + std::to_string(outer_step));
  }
  StepResult out{std::vector<double>(x.begin(), x.end()), 0.0};
  double s = rule.size;
  if (rule.kind == StepRule::Kind::normalized) {
    const double gnorm = norm2(g);
    if (gnorm == 0.0) return out;
    s = 1.0 / gnorm;
  }
  out.step = s * eta;
  for (std::size_t i = 0; i < g.size(); ++i) out.x[i] -= out.step * g[i];
  return out;
}

void validate(const RestoreConfig& config) {
  check_q(config.q);
  check_lambda(config.lambda);
  if (config.outer_iterations == 0) throw ArgumentError("outer iteration count T must be at least 1");
  if (config.inner_iterations == 0) throw ArgumentError("inner iteration count must be at least 1");
  if (config.outer_iterations > config.schedule.size()) {
    throw ArgumentError("T = " + std::to_string(config.outer_iterations) +
                        " exceeds the schedule length " + std::to_string(config.schedule.size()));
  }
  if (config.step_rule.kind == StepRule::Kind::fixed &&
      (!(config.step_rule.size > 0.0) || !std::isfinite(config.step_rule.size))) {
    throw ArgumentError("fixed step size must be positive");
  }
  validate(config.perturbation);
}

std::string trace_to_jsonl(const RestoreTrace& trace, std::string_view variant) {
  std::string out;
  for (const TraceRecord& rec : trace) {
    nlohmann::ordered_json j;
    j["k"] = rec.k;
    j["t"] = rec.t;
    j["eps"] = rec.eps;
    j["step"] = rec.step;
    j["fidelity_lq"] = rec.fidelity_lq;
    j["surrogate"] = rec.surrogate;
    j["residual_l2"] = rec.residual_l2;
    if (!variant.empty()) j["variant"] = variant;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<double> fbs_inner(std::span<const double> x, const LinearOperator& op,
                              std::span<const double> y, const WeightVector& weights,
                              std::size_t t, std::size_t inner_iterations, Denoiser& denoiser,
                              const DiffusionSchedule& schedule, StepRule rule, std::uint64_t seed,
                              double* last_step, std::size_t outer_step) {
  const Shape shape = op.domain_shape();
  const NoiseLevel level{t, schedule.alpha(t)};
  const double eta = schedule.eta(t);
  std::vector<double> current(x.begin(), x.end());
  for (std::size_t i = 0; i < inner_iterations; ++i) {
    StepResult stepped = gradient_step(current, op, y, weights, eta, rule, outer_step);
    if (last_step != nullptr) *last_step = stepped.step;
    if (denoiser.expects_renoised_input()) {
      stepped.x = renoise(stepped.x, level.alpha, derive_seed(seed, {i}));
    }
    current = denoiser.denoise(stepped.x, shape, level);
    if (current.size() != shape.size()) throw DimensionError("denoiser changed the image size");
  }
  return current;
}

RestoreResult restore(std::span<const double> y, const LinearOperator& op,
                      const RestoreConfig& config, Denoiser& denoiser) {
  validate(config);
  const Shape domain = op.domain_shape();
  if (y.size() != op.range_shape().size()) {
    throw DimensionError("measurement size does not match the operator range");
  }
  if (!all_finite(y)) throw ArgumentError("measurement contains non-finite values");

  std::vector<double> x = config.warm_start
                              ? op.adjoint(y)
                              : standard_normal(domain.size(), derive_seed(config.seed, {kInitStream}));
  const std::vector<std::size_t> timesteps =
      subsample_timesteps(config.schedule.size(), config.outer_iterations);

  RestoreResult result;
  for (std::size_t k = 0; k < timesteps.size(); ++k) {
    const std::size_t t = timesteps[k];
    const double eps = epsilon_at(config.perturbation, k);
    const WeightVector weights = irls_weights(residual_of(op, x, y), eps, config.q);
    double step = 0.0;
    try {
      x = fbs_inner(x, op, y, weights, t, config.inner_iterations, denoiser, config.schedule,
                    config.step_rule, derive_seed(config.seed, {kOuterStream, k}), &step, k);
    } catch (const TransportError& e) {
      throw TransportError(std::string(e.what()) + " (outer step " + std::to_string(k) + ")");
    }
    if (!all_finite(x)) {
      throw NumericError("non-finite iterate at outer step " + std::to_string(k));
    }
    if (config.record_trace) {
      const std::vector<double> r = residual_of(op, x, y);
      result.trace.push_back({k, t, eps, step, lq_fidelity(r, config.q, config.lambda),
                              majorizer_value(r, weights.anchor_residual, eps, config.q, config.lambda),
                              norm2(r)});
    }
  }
  for (double& v : x) v = std::clamp(v, 0.0, 1.0);
  result.image = Image(domain, std::move(x));
  return result;
}

IrlsResult irls_lq_regression(const LinearOperator& op, std::span<const double> y,
                              std::span<const double> z_anchor, double q, double lambda,
                              std::size_t iterations, const PerturbationSchedule& perturbation) {
  check_q(q);
  check_lambda(lambda);
  validate(perturbation);
  const std::size_t n = op.domain_shape().size();
  const std::size_t m = op.range_shape().size();
  if (n > 1000) throw ArgumentError("irls_lq_regression is limited to 1000 unknowns");
  if (y.size() != m || z_anchor.size() != n) throw DimensionError("irls_lq_regression size mismatch");

  Eigen::MatrixXd a(m, n);
  std::vector<double> unit(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    unit[j] = 1.0;
    const std::vector<double> col = op.apply(unit);
    for (std::size_t i = 0; i < m; ++i) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    unit[j] = 0.0;
  }
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(m));
  const Eigen::Map<const Eigen::VectorXd> zv(z_anchor.data(), static_cast<Eigen::Index>(n));

  auto objective = [&](const Eigen::VectorXd& x, double eps) {
    const Eigen::VectorXd r = a * x - yv;
    return smoothed_fidelity(std::span(r.data(), m), eps, q, lambda) + (x - zv).squaredNorm();
  };

  const double scale = q / (2.0 * lambda);
  auto run = [&](Eigen::VectorXd x, bool continuation) {
    auto eps_of = [&](std::size_t k) { return continuation ? epsilon_at(perturbation, k) : perturbation.eps_min; };
    IrlsResult out;
    out.objective.push_back(objective(x, eps_of(0)));
    for (std::size_t k = 0; k < iterations; ++k) {
      const double eps = eps_of(k);
      const Eigen::VectorXd r = a * x - yv;
      const WeightVector weights = irls_weights(std::span(r.data(), m), eps, q);
      const Eigen::Map<const Eigen::VectorXd> w(weights.w.data(), static_cast<Eigen::Index>(m));
      Eigen::MatrixXd system = scale * a.transpose() * w.asDiagonal() * a;
      system += Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      const Eigen::VectorXd rhs = scale * a.transpose() * (w.asDiagonal() * yv) + zv;
      const Eigen::LLT<Eigen::MatrixXd> llt(system);
      if (llt.info() != Eigen::Success) throw NumericError("IRLS normal equations are not positive definite");
      x = llt.solve(rhs);
      if (!x.allFinite()) throw NumericError("IRLS sweep " + std::to_string(k) + " produced non-finite values");
      out.objective.push_back(objective(x, eps));
    }
    out.x.assign(x.data(), x.data() + n);
    return out;
  };

  // For q < 2 the problem is non-convex, so MM runs from the prior anchor z
  // with the decreasing eps sequence and from a data-consistent point at the
  // eps floor, which keeps that point inside the basin of the cusp at r = 0.
  // The lower exact objective wins.
  IrlsResult from_anchor = run(zv, true);
  if (q == 2.0) return from_anchor;
  constexpr double kTikhonov = 1e-6;
  Eigen::MatrixXd fit_system = a.transpose() * a;
  fit_system += kTikhonov * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const Eigen::VectorXd fit = Eigen::LLT<Eigen::MatrixXd>(fit_system).solve(a.transpose() * yv + kTikhonov * zv);
  IrlsResult from_data = run(fit, false);
  auto exact = [&](const IrlsResult& r) {
    return objective(Eigen::Map<const Eigen::VectorXd>(r.x.data(), static_cast<Eigen::Index>(n)), 0.0);
  };
  return exact(from_data) < exact(from_anchor) ? from_data : from_anchor;
}

}  // namespace lqpnp
