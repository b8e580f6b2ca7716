// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace lqpnp {

/// Generalized Gaussian density q/(2 delta Gamma(1/q)) exp(-|s|^q / delta^q).
struct GgsmParams {
  double delta = 1.0;
  double q = 2.0;
};

struct LaplaceParams {
  double theta = 1.0;
};

struct SaltPepperSpec {
  double level = 0.0;  ///< probability that an entry is corrupted
  double lo = 0.0;
  double hi = 1.0;
  std::uint64_t seed = 0;
};

struct Histogram {
  std::vector<double> edges;          ///< bins + 1 ascending edges
  std::vector<std::uint64_t> counts;  ///< one count per bin
};

struct NoiseFitReport {
  GgsmParams ggsm;
  LaplaceParams laplace;
  double gaussian_sigma = 0.0;
  std::map<std::string, double> log_likelihoods;  ///< keys: ggsm, laplace, gaussian
  Histogram histogram;
  bool degenerate = false;  ///< all residuals were zero; scales were floored
};

inline constexpr double kScaleFloor = 1e-8;

/// Throws ArgumentError unless delta > 0 and 0 < q <= 2.
void validate(const GgsmParams& params);

double ggsm_pdf(double s, const GgsmParams& params);
double ggsm_log_pdf(double s, const GgsmParams& params);
double ggsm_log_likelihood(std::span<const double> samples, const GgsmParams& params);

struct DeltaEstimate {
  double delta;
  bool floored;  ///< every sample was zero; delta is kScaleFloor
};
/// Closed-form profile MLE delta = ((q/n) sum |s_i|^q)^(1/q).
DeltaEstimate mle_delta_given_q(std::span<const double> samples, double q);

/// Ascending q grid 0.10, 0.15, ..., 2.00.
std::vector<double> default_q_grid();
/// Profile-likelihood grid search; ties go to the smaller q. Needs >= 100 samples.
GgsmParams fit_ggsm(std::span<const double> samples, std::span<const double> q_grid);
GgsmParams fit_ggsm(std::span<const double> samples);

LaplaceParams fit_laplace(std::span<const double> samples);
double laplace_log_likelihood(std::span<const double> samples, const LaplaceParams& params);

/// Zero-mean Gaussian MLE sigma = sqrt(mean s^2), floored at kScaleFloor.
double fit_gaussian_sigma(std::span<const double> samples);
double gaussian_log_likelihood(std::span<const double> samples, double sigma);

/// Bins residuals evenly over [min, max].
Histogram make_histogram(std::span<const double> samples, std::size_t bins = 64);

/// Fits all three models and builds the histogram.
NoiseFitReport fit_noise(std::span<const double> residuals);
std::string to_json(const NoiseFitReport& report);

/// lambda = delta^q, the fidelity weight matched to a fitted noise model.
double lambda_of(const GgsmParams& params);

/// Each entry independently replaced with probability spec.level by lo or hi
/// (equal odds).
std::vector<double> apply_salt_pepper(std::span<const double> y, const SaltPepperSpec& spec);

/// Exact draws: |s| = delta * G^(1/q) with G ~ Gamma(1/q, 1) and a random sign.
std::vector<double> sample_ggsm(const GgsmParams& params, std::size_t n, std::uint64_t seed);

}  // namespace lqpnp
