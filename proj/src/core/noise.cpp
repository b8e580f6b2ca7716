// SPDX-License-Identifier: Apache-2.0
#include "lqpnp/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "json.hpp"
#include "lqpnp/errors.hpp"

namespace lqpnp {

namespace {

void require_samples(std::span<const double> samples, const char* who) {
  if (samples.empty()) throw ArgumentError(std::string(who) + ": samples must be non-empty");
}

double finite_or_lowest(double v) {
  return std::isfinite(v) ? v : -std::numeric_limits<double>::max();
}

}  // namespace

void validate(const GgsmParams& params) {
  if (!(params.delta > 0.0) || !std::isfinite(params.delta)) {
    throw ArgumentError("gGSM delta must be positive");
  }
  if (!(params.q > 0.0 && params.q <= 2.0)) {
    throw ArgumentError("gGSM q must lie in (0,2]");
  }
}

namespace {

double ggsm_log_norm(const GgsmParams& params) {
  return std::log(params.q) - std::log(2.0 * params.delta) - std::lgamma(1.0 / params.q);
}

// |s|^q / delta^q evaluated in the log domain.
double ggsm_tail(double s, const GgsmParams& params) {
  const double a = std::abs(s);
  return a == 0.0 ? 0.0 : std::exp(params.q * (std::log(a) - std::log(params.delta)));
}

}  // namespace

double ggsm_log_pdf(double s, const GgsmParams& params) {
  validate(params);
  return ggsm_log_norm(params) - ggsm_tail(s, params);
}

double ggsm_pdf(double s, const GgsmParams& params) {
  return std::exp(ggsm_log_pdf(s, params));
}

double ggsm_log_likelihood(std::span<const double> samples, const GgsmParams& params) {
  require_samples(samples, "ggsm_log_likelihood");
  validate(params);
  double tail = 0.0;
  for (double s : samples) tail += ggsm_tail(s, params);
  return finite_or_lowest(static_cast<double>(samples.size()) * ggsm_log_norm(params) - tail);
}

DeltaEstimate mle_delta_given_q(std::span<const double> samples, double q) {
  require_samples(samples, "mle_delta_given_q");
  if (!(q > 0.0 && q <= 2.0)) throw ArgumentError("q must lie in (0,2]");
  double sum = 0.0;
  for (double s : samples) sum += std::pow(std::abs(s), q);
  if (sum == 0.0) return {kScaleFloor, true};
  const double delta = std::pow(q / static_cast<double>(samples.size()) * sum, 1.0 / q);
  if (!(delta > kScaleFloor)) return {kScaleFloor, true};
  return {delta, false};
}

std::vector<double> default_q_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 38; ++i) grid.push_back(0.10 + 0.05 * i);
  return grid;
}

GgsmParams fit_ggsm(std::span<const double> samples, std::span<const double> q_grid) {
  if (samples.size() < 100) {
    throw ArgumentError("fit_ggsm needs at least 100 samples, got " + std::to_string(samples.size()));
  }
  if (q_grid.empty()) throw ArgumentError("fit_ggsm: empty q grid");
  GgsmParams best{};
  double best_ll = -std::numeric_limits<double>::infinity();
  for (double q : q_grid) {
    const GgsmParams candidate{mle_delta_given_q(samples, q).delta, q};
    const double ll = ggsm_log_likelihood(samples, candidate);
    if (ll > best_ll) {
      best_ll = ll;
      best = candidate;
    }
  }
  return best;
}

GgsmParams fit_ggsm(std::span<const double> samples) {
  const std::vector<double> grid = default_q_grid();
  return fit_ggsm(samples, grid);
}

LaplaceParams fit_laplace(std::span<const double> samples) {
  require_samples(samples, "fit_laplace");
  double sum = 0.0;
  for (double s : samples) sum += std::abs(s);
  return {std::max(sum / static_cast<double>(samples.size()), kScaleFloor)};
}

double laplace_log_likelihood(std::span<const double> samples, const LaplaceParams& params) {
  require_samples(samples, "laplace_log_likelihood");
  if (!(params.theta > 0.0)) throw ArgumentError("Laplace theta must be positive");
  double total = 0.0;
  for (double s : samples) total += -std::log(2.0 * params.theta) - std::abs(s) / params.theta;
  return finite_or_lowest(total);
}

double fit_gaussian_sigma(std::span<const double> samples) {
  require_samples(samples, "fit_gaussian_sigma");
  double sum = 0.0;
  for (double s : samples) sum += s * s;
  return std::max(std::sqrt(sum / static_cast<double>(samples.size())), kScaleFloor);
}

double gaussian_log_likelihood(std::span<const double> samples, double sigma) {
  require_samples(samples, "gaussian_log_likelihood");
  if (!(sigma > 0.0)) throw ArgumentError("Gaussian sigma must be positive");
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * sigma * sigma);
  double total = 0.0;
  for (double s : samples) total += log_norm - s * s / (2.0 * sigma * sigma);
  return finite_or_lowest(total);
}

Histogram make_histogram(std::span<const double> samples, std::size_t bins) {
  require_samples(samples, "make_histogram");
  if (bins == 0) throw ArgumentError("histogram needs at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  double lo = *lo_it, hi = *hi_it;
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double s : samples) {
    auto bin = static_cast<std::size_t>((s - lo) / width);
    h.counts[std::min(bin, bins - 1)] += 1;
  }
  return h;
}

NoiseFitReport fit_noise(std::span<const double> residuals) {
  NoiseFitReport report;
  report.ggsm = fit_ggsm(residuals);
  report.degenerate = mle_delta_given_q(residuals, report.ggsm.q).floored;
  report.laplace = fit_laplace(residuals);
  report.gaussian_sigma = fit_gaussian_sigma(residuals);
  report.log_likelihoods["ggsm"] = ggsm_log_likelihood(residuals, report.ggsm);
  report.log_likelihoods["laplace"] = laplace_log_likelihood(residuals, report.laplace);
  report.log_likelihoods["gaussian"] = gaussian_log_likelihood(residuals, report.gaussian_sigma);
  report.histogram = make_histogram(residuals);
  return report;
}

std::string to_json(const NoiseFitReport& report) {
  nlohmann::ordered_json j;
  j["ggsm"] = {{"delta", report.ggsm.delta}, {"q", report.ggsm.q}};
  j["laplace"] = {{"theta", report.laplace.theta}};
  j["gaussian_sigma"] = report.gaussian_sigma;
  j["log_likelihoods"] = report.log_likelihoods;
  j["histogram"] = {{"edges", report.histogram.edges}, {"counts", report.histogram.counts}};
  j["degenerate"] = report.degenerate;
  return j.dump(2) + "\n";
}

double lambda_of(const GgsmParams& params) {
  validate(params);
  return std::pow(params.delta, params.q);
}

std::vector<double> apply_salt_pepper(std::span<const double> y, const SaltPepperSpec& spec) {
  if (!(spec.level >= 0.0 && spec.level <= 1.0)) {
    throw ArgumentError("salt-and-pepper level must lie in [0,1]");
  }
  std::vector<double> out(y.begin(), y.end());
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : out) {
    const double u = unit(rng);
    const double coin = unit(rng);
    if (u < spec.level) v = coin < 0.5 ? spec.lo : spec.hi;
  }
  return out;
}

std::vector<double> sample_ggsm(const GgsmParams& params, std::size_t n, std::uint64_t seed) {
  validate(params);
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(1.0 / params.q, 1.0);
  std::bernoulli_distribution sign;
  std::vector<double> out(n);
  for (double& v : out) {
    const double magnitude = params.delta * std::pow(gamma(rng), 1.0 / params.q);
    v = sign(rng) ? magnitude : -magnitude;
  }
  return out;
}

}  // namespace lqpnp
