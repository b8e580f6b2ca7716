// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails. All tolerances and time limits are fixed below.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lqpnp/denoisers.hpp"
#include "lqpnp/guidance.hpp"
#include "lqpnp/image.hpp"
#include "lqpnp/metrics.hpp"
#include "lqpnp/noise.hpp"
#include "lqpnp/operators.hpp"
#include "lqpnp/solver.hpp"

using namespace lqpnp;
namespace fs = std::filesystem;

namespace {

namespace tol {
constexpr double kMajorizerSlack = 1e-12;
constexpr double kAdjoint = 1e-10;
constexpr double kSrGram = 1e-12;
constexpr double kBlurConstant = 1e-12;
constexpr double kIrlsOracle = 1e-3;
constexpr double kQuadraticClosedForm = 1e-10;
constexpr double kMonotone = 1e-10;
constexpr double kScoreRelative = 1e-5;
constexpr double kTweedie = 1e-10;
constexpr double kJacobianRelative = 1e-5;
constexpr double kPdfMass = 1e-6;
constexpr double kRecoverQ = 0.1;
constexpr double kRecoverDeltaRelative = 0.10;
constexpr double kGaussianQMin = 1.8;
constexpr double kBinomialSigmas = 4.0;
constexpr double kTrendGapDb = 2.0;
constexpr double kPsnrOffset = 1e-9;
constexpr double kSsimIdentity = 1e-12;
constexpr double kSsimConstant = 1e-6;
}  // namespace tol

namespace limit {
constexpr double kMajorizerSeconds = 5.0;
constexpr double kAdjointSeconds = 30.0;
constexpr double kIrlsSeconds = 10.0;
constexpr double kTrendSeconds = 300.0;
}  // namespace limit

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// Piecewise-constant test image: background plus four rectangles at levels
// 0.15 / 0.85 with N(0, 0.02^2) texture.
Image two_level(std::uint64_t seed, std::size_t h = 32, std::size_t w = 32) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> texture(0.0, 0.02);
  std::vector<int> label(h * w, unit(rng) < 0.5 ? 1 : 0);
  for (int s = 0; s < 4; ++s) {
    const auto r0 = static_cast<std::size_t>(unit(rng) * static_cast<double>(h * 3 / 4));
    const auto c0 = static_cast<std::size_t>(unit(rng) * static_cast<double>(w * 3 / 4));
    const auto rh = static_cast<std::size_t>(static_cast<double>(h) / 8 + unit(rng) * static_cast<double>(h) / 2.5);
    const auto rw = static_cast<std::size_t>(static_cast<double>(w) / 8 + unit(rng) * static_cast<double>(w) / 2.5);
    const int level = unit(rng) < 0.5 ? 1 : 0;
    for (std::size_t r = r0; r < std::min(h, r0 + rh); ++r) {
      for (std::size_t c = c0; c < std::min(w, c0 + rw); ++c) label[r * w + c] = level;
    }
  }
  std::vector<double> data(h * w);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = (label[i] ? 0.85 : 0.15) + texture(rng);
  return Image({h, w, 1}, std::move(data));
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// 1 ----------------------------------------------------------------------
Outcome majorization() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uq(1e-3, 2.0);
  std::uniform_real_distribution<double> ulog(-4.0, 4.0);
  std::bernoulli_distribution sign(0.5);
  std::size_t bound_violations = 0;
  std::size_t touch_violations = 0;
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double q = uq(rng);
    const double x = (sign(rng) ? -1 : 1) * std::pow(10.0, ulog(rng));
    const double y = (sign(rng) ? -1 : 1) * std::pow(10.0, ulog(rng));
    auto bound = [&](double v) {
      return q / 2.0 * std::pow(std::abs(y), q - 2.0) * v * v + (2.0 - q) / 2.0 * std::pow(std::abs(y), q);
    };
    const double lhs = std::pow(std::abs(x), q);
    const double rhs = bound(x);
    worst = std::max(worst, (lhs - rhs) / std::max(lhs, rhs));
    if (lhs > rhs + tol::kMajorizerSlack * std::max(lhs, rhs)) ++bound_violations;
    const double py = std::pow(std::abs(y), q);
    for (double at : {y, -y}) {
      if (std::abs(bound(at) - py) > tol::kMajorizerSlack * py) ++touch_violations;
    }
  }
  return {bound_violations == 0 && touch_violations == 0,
          "1e5 triples, bound violations " + std::to_string(bound_violations) + ", equality violations " +
              std::to_string(touch_violations) + ", worst relative excess " + fmt(worst)};
}

// 2 ----------------------------------------------------------------------
Outcome adjoints() {
  const Shape s{64, 64, 1};
  struct Named {
    const char* name;
    OperatorPtr op;
  };
  const std::vector<Named> ops{{"identity", identity_op(s)},
                               {"blur", blur_op(s, 61, 3.0)},
                               {"inpaint", inpaint_op(make_mask(s, 0.7, 5), s)},
                               {"sr", avgpool_sr_op(s, 4)}};
  bool pass = true;
  std::string detail;
  for (const auto& n : ops) {
    const double e = adjoint_dot_test(*n.op, 20, 17);
    pass = pass && e <= tol::kAdjoint;
    detail += std::string(detail.empty() ? "" : ", ") + n.name + " " + fmt(e);
  }
  return {pass, "max relative dot-product error: " + detail};
}

// 3 ----------------------------------------------------------------------
Outcome operator_algebra() {
  const Shape s{64, 64, 1};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;

  const auto inp = inpaint_op(make_mask(s, 0.7, 9), s);
  std::vector<double> u(inp->range_shape().size());
  for (auto& v : u) v = normal(rng);
  const bool inpaint_exact = inp->apply(inp->adjoint(u)) == u;

  const auto sr = avgpool_sr_op(s, 4);
  std::vector<double> w(sr->range_shape().size());
  for (auto& v : w) v = normal(rng);
  std::vector<double> expect(w);
  for (auto& v : expect) v /= 16.0;
  const double sr_err = max_abs_diff(sr->apply(sr->adjoint(w)), expect);

  const auto blur = blur_op(s, 61, 3.0);
  double blur_err = 0.0;
  for (double c : {0.0, 0.37, 1.0}) {
    blur_err = std::max(blur_err, max_abs_diff(blur->apply(std::vector<double>(s.size(), c)),
                                                std::vector<double>(s.size(), c)));
  }
  return {inpaint_exact && sr_err <= tol::kSrGram && blur_err <= tol::kBlurConstant,
          std::string("inpaint A A^T = I ") + (inpaint_exact ? "exact" : "inexact") + ", SR Gram error " +
              fmt(sr_err) + ", blur constant error " + fmt(blur_err)};
}

// 4 ----------------------------------------------------------------------
double scalar_objective(double x, double y, double z, double q, double lambda) {
  return std::pow(std::abs(x - y), q) / lambda + (x - z) * (x - z);
}

double brute_force(double y, double z, double q, double lambda) {
  const double lo = std::min(y, z) - 1.0;
  const double hi = std::max(y, z) + 1.0;
  const double h = 1e-4;
  double best = lo;
  double best_f = scalar_objective(lo, y, z, q, lambda);
  for (double x = lo; x <= hi; x += h) {
    const double f = scalar_objective(x, y, z, q, lambda);
    if (f < best_f) {
      best_f = f;
      best = x;
    }
  }
  if (scalar_objective(y, y, z, q, lambda) < best_f) return y;
  double a = best - h;
  double b = best + h;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < 80; ++i) {
    const double c = b - g * (b - a);
    const double d = a + g * (b - a);
    if (scalar_objective(c, y, z, q, lambda) < scalar_objective(d, y, z, q, lambda)) {
      b = d;
    } else {
      a = c;
    }
  }
  return 0.5 * (a + b);
}

Outcome irls_oracle() {
  const auto one = identity_op({1, 1, 1});
  const PerturbationSchedule ps{};
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uy(-2.0, 2.0);
  std::uniform_real_distribution<double> ul(0.2, 5.0);
  double worst = 0.0;
  for (double q : {0.5, 1.0, 1.5}) {
    for (int i = 0; i < 20; ++i) {
      const double y = uy(rng);
      const double z = uy(rng);
      const double lambda = ul(rng);
      const auto res = irls_lq_regression(*one, std::vector<double>{y}, std::vector<double>{z}, q, lambda, 200, ps);
      worst = std::max(worst, std::abs(res.x[0] - brute_force(y, z, q, lambda)));
    }
  }
  double worst_q2 = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double y = uy(rng);
    const double z = uy(rng);
    const double lambda = ul(rng);
    const auto res = irls_lq_regression(*one, std::vector<double>{y}, std::vector<double>{z}, 2.0, lambda, 5, ps);
    worst_q2 = std::max(worst_q2, std::abs(res.x[0] - (y + lambda * z) / (1.0 + lambda)));
  }
  return {worst <= tol::kIrlsOracle && worst_q2 <= tol::kQuadraticClosedForm,
          "60 scalar instances, worst gap to grid oracle " + fmt(worst) + ", q=2 closed-form error " + fmt(worst_q2)};
}

// 5 ----------------------------------------------------------------------
Outcome monotonicity() {
  const auto op = blur_op({4, 8, 1}, 3, 1.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uq(0.2, 1.9);
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t violations = 0;
  std::size_t sweeps = 0;
  for (int inst = 0; inst < 10; ++inst) {
    std::vector<double> y(32);
    std::vector<double> z(32);
    for (auto& v : y) v = normal(rng);
    for (auto& v : z) v = normal(rng);
    const double q = uq(rng);
    const double eps = 1e-3;
    const auto res = irls_lq_regression(*op, y, z, q, 1.0, 50, {eps, eps, 1.0});
    for (std::size_t s = 1; s < res.objective.size(); ++s) {
      const double rise = res.objective[s] - res.objective[s - 1];
      worst = std::max(worst, rise);
      if (rise > tol::kMonotone) ++violations;
      ++sweeps;
    }
  }
  return {violations == 0 && sweeps == 500,
          std::to_string(sweeps) + " sweeps, violations " + std::to_string(violations) + ", largest increase " +
              fmt(worst)};
}

// 6 ----------------------------------------------------------------------
Outcome analytic_denoiser() {
  const GmmPrior prior = default_gmm_prior();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> uv(-0.5, 1.5);
  std::uniform_real_distribution<double> ua(0.01, 0.999);
  double score_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double v = uv(rng);
    const double a = ua(rng);
    const double h = 1e-5;
    const double fd = (gmm_marginal_log_density(v + h, prior, a) - gmm_marginal_log_density(v - h, prior, a)) / (2 * h);
    const double s = gmm_marginal_score(v, prior, a);
    score_err = std::max(score_err, std::abs(s - fd) / std::max(1.0, std::abs(s)));
  }

  const double m = 0.4;
  const double var = 0.03;
  auto single = gmm_denoiser({{1.0}, {m}, {var}});
  double tweedie_err = 0.0;
  for (double alpha : {0.02, 0.3, 0.9, 0.9999}) {
    std::vector<double> x(64);
    for (auto& v : x) v = uv(rng);
    const auto out = single->denoise(x, {8, 8, 1}, {0, alpha});
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double closed = m + std::sqrt(alpha) * var * (x[i] - std::sqrt(alpha) * m) / (alpha * var + 1.0 - alpha);
      tweedie_err = std::max(tweedie_err, std::abs(out[i] - closed));
    }
  }

  auto den = gmm_denoiser(prior);
  double jac_err = 0.0;
  for (double alpha : {0.05, 0.5, 0.95}) {
    std::vector<double> x(100);
    for (auto& v : x) v = uv(rng);
    const Shape shape{10, 10, 1};
    const auto jac = den->diag_jacobian(x, shape, {0, alpha});
    const double h = 1e-5;
    std::vector<double> xp(x);
    std::vector<double> xm(x);
    for (auto& v : xp) v += h;
    for (auto& v : xm) v -= h;
    const auto dp = den->denoise(xp, shape, {0, alpha});
    const auto dm = den->denoise(xm, shape, {0, alpha});
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double fd = (dp[i] - dm[i]) / (2 * h);
      jac_err = std::max(jac_err, std::abs(jac[i] - fd) / std::max(1.0, std::abs(jac[i])));
    }
  }
  return {score_err <= tol::kScoreRelative && tweedie_err <= tol::kTweedie && jac_err <= tol::kJacobianRelative,
          "score vs central differences " + fmt(score_err) + ", single-Gaussian posterior mean " + fmt(tweedie_err) +
              ", diagonal Jacobian vs finite differences " + fmt(jac_err)};
}

// 7 ----------------------------------------------------------------------
double pdf_mass(double delta, double q) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  const GgsmParams p{delta, q};
  // Geometric panels from the cusp out to where the tail mass is negligible.
  const double end = delta * std::pow(60.0, 1.0 / q);
  double a = 0.0;
  double b = delta * 1e-6;
  double half = 0.0;
  while (a < end) {
    half += integrator.integrate([&](double s) { return ggsm_pdf(s, p); }, a, std::min(b, end));
    a = b;
    b *= 10.0;
  }
  return 2.0 * half;
}

Outcome noise_model() {
  double mass_err = 0.0;
  for (double delta : {0.1, 0.5, 1.0, 2.0}) {
    for (double q : default_q_grid()) mass_err = std::max(mass_err, std::abs(pdf_mass(delta, q) - 1.0));
  }

  bool recover = true;
  std::string rec;
  for (GgsmParams truth : {GgsmParams{0.5, 0.7}, GgsmParams{0.7, 0.5}}) {
    const auto fit = fit_ggsm(sample_ggsm(truth, 100000, 7));
    recover = recover && std::abs(fit.q - truth.q) <= tol::kRecoverQ &&
              std::abs(fit.delta - truth.delta) <= tol::kRecoverDeltaRelative * truth.delta;
    rec += " (q " + fmt(truth.q) + ", delta " + fmt(truth.delta) + ") -> (" + fmt(fit.q) + ", " + fmt(fit.delta) + ")";
  }
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  std::vector<double> gauss(100000);
  for (auto& v : gauss) v = normal(rng);
  const double gq = fit_ggsm(gauss).q;

  const std::size_t n = 1000000;
  std::vector<double> y(n, 0.5);
  const double r = 0.5;
  const auto z = apply_salt_pepper(y, {r, 0.0, 1.0, 7});
  const auto zeros = static_cast<double>(std::count(z.begin(), z.end(), 0.0));
  const auto ones = static_cast<double>(std::count(z.begin(), z.end(), 1.0));
  const double nn = static_cast<double>(n);
  const double p = r / 2.0;
  const double sd = std::sqrt(nn * p * (1 - p));
  const double sd_all = std::sqrt(nn * r * (1 - r));
  const bool counts = std::abs(zeros - nn * p) <= tol::kBinomialSigmas * sd &&
                      std::abs(ones - nn * p) <= tol::kBinomialSigmas * sd &&
                      std::abs(zeros + ones - nn * r) <= tol::kBinomialSigmas * sd_all;

  return {mass_err <= tol::kPdfMass && recover && gq >= tol::kGaussianQMin && counts,
          "mass error " + fmt(mass_err) + ", recovery" + rec + ", Gaussian q " + fmt(gq) + ", impulse counts " +
              fmt(zeros) + "/" + fmt(ones) + " of " + fmt(nn)};
}

// 8 and 9 ----------------------------------------------------------------
struct Scene {
  Image clean;
  std::vector<double> y;
};

constexpr double kImpulseRate = 0.5;
constexpr std::size_t kSuiteSize = 16;
constexpr std::size_t kOuterSteps = 50;

Scene make_scene(std::uint64_t seed) {
  Image clean = two_level(seed);
  auto y = apply_salt_pepper(clean.data(), {kImpulseRate, 0.0, 1.0, seed + 7000});
  return {std::move(clean), std::move(y)};
}

std::vector<Scene> suite() {
  std::vector<Scene> out;
  for (std::size_t i = 0; i < kSuiteSize; ++i) out.push_back(make_scene(100 + i));
  return out;
}

double restore_psnr(const Scene& s, double q, std::uint64_t seed) {
  const auto op = identity_op(s.clean.shape());
  auto den = gmm_denoiser(default_gmm_prior());
  RestoreConfig cfg;
  cfg.q = q;
  cfg.outer_iterations = kOuterSteps;
  cfg.inner_iterations = 1;
  cfg.seed = seed;
  cfg.record_trace = false;
  return psnr(s.clean, restore(s.y, *op, cfg, *den).image);
}

double dps_psnr(const Scene& s, GuidanceVariant variant, double rho, std::uint64_t seed) {
  const auto op = identity_op(s.clean.shape());
  auto den = gmm_denoiser(default_gmm_prior());
  GuidanceConfig cfg;
  cfg.variant = variant;
  cfg.rho = rho;
  cfg.q = 0.5;
  cfg.steps = kOuterSteps;
  cfg.seed = seed;
  cfg.record_trace = false;
  return psnr(s.clean, dps_sample(s.y, *op, *den, cfg).image);
}

template <typename F>
double suite_mean(const std::vector<Scene>& scenes, F&& f) {
  double sum = 0.0;
  for (std::size_t i = 0; i < scenes.size(); ++i) sum += f(scenes[i], static_cast<std::uint64_t>(i));
  return sum / static_cast<double>(scenes.size());
}

Outcome end_to_end_trend() {
  const auto scenes = suite();
  const double p05 = suite_mean(scenes, [](const Scene& s, std::uint64_t i) { return restore_psnr(s, 0.5, i); });
  const double p09 = suite_mean(scenes, [](const Scene& s, std::uint64_t i) { return restore_psnr(s, 0.9, i); });
  const double p20 = suite_mean(scenes, [](const Scene& s, std::uint64_t i) { return restore_psnr(s, 2.0, i); });
  return {p05 - p20 >= tol::kTrendGapDb && p05 >= p09,
          "mean PSNR q=0.5 " + fmt(p05) + " dB, q=0.9 " + fmt(p09) + " dB, q=2.0 " + fmt(p20) + " dB, gap " +
              fmt(p05 - p20) + " dB"};
}

double tune_rho(GuidanceVariant variant) {
  const Scene held_out = make_scene(999);
  double best_rho = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (double rho : {0.001, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0}) {
    const double p = dps_psnr(held_out, variant, rho, 0);
    if (p > best) {
      best = p;
      best_rho = rho;
    }
  }
  return best_rho;
}

Outcome guidance_comparison() {
  const auto scenes = suite();
  const double rho_irls = tune_rho(GuidanceVariant::irls_weighted);
  const double rho_naive = tune_rho(GuidanceVariant::naive_lq);
  const double alg1 = suite_mean(scenes, [](const Scene& s, std::uint64_t i) { return restore_psnr(s, 0.5, i); });
  const double irls = suite_mean(scenes, [&](const Scene& s, std::uint64_t i) {
    return dps_psnr(s, GuidanceVariant::irls_weighted, rho_irls, i);
  });
  const double naive = suite_mean(scenes, [&](const Scene& s, std::uint64_t i) {
    return dps_psnr(s, GuidanceVariant::naive_lq, rho_naive, i);
  });
  return {alg1 >= irls && irls >= naive, "mean PSNR restore " + fmt(alg1) + " dB, IRLS-weighted guidance " +
                                             fmt(irls) + " dB (rho " + fmt(rho_irls) + "), naive guidance " +
                                             fmt(naive) + " dB (rho " + fmt(rho_naive) + ")"};
}

// 10 ---------------------------------------------------------------------
Outcome metrics_checks() {
  const Image x = two_level(10);
  std::vector<double> shifted(x.data().begin(), x.data().end());
  for (auto& v : shifted) v += 0.1;
  const double p = psnr(x, Image(x.shape(), shifted));
  const double self = ssim(x, x);
  const Image lo({16, 16, 1}, std::vector<double>(256, 0.25));
  const Image hi({16, 16, 1}, std::vector<double>(256, 0.75));
  // Constant images: only the luminance term differs from one.
  const double closed = (2 * 0.25 * 0.75 + 1e-4) / (0.25 * 0.25 + 0.75 * 0.75 + 1e-4);
  const double c = ssim(lo, hi);
  return {std::abs(p - 20.0) <= tol::kPsnrOffset && std::abs(self - 1.0) <= tol::kSsimIdentity &&
              std::abs(c - closed) <= tol::kSsimConstant,
          "offset PSNR " + fmt(p) + " dB, SSIM(x,x) - 1 = " + fmt(self - 1.0) + ", constant SSIM " + fmt(c) +
              " vs " + fmt(closed)};
}

// 11 ---------------------------------------------------------------------
int run(const std::string& command) {
  const int status = std::system(command.c_str());
  return status != -1 && WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("lqpnp-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string cli = LQPNP_CLI;
  save_image(two_level(11), dir / "clean.png");
  if (run(cli + " degrade --sp-level 0.5 --input '" + (dir / "clean.png").string() + "' --output-dir '" +
          (dir / "m").string() + "' > /dev/null") != 0) {
    fs::remove_all(dir);
    return {false, "degrade failed"};
  }
  std::ofstream(dir / "run.json") << "{\"solver\": {\"q\": 0.5, \"T\": 20}, \"seed\": 3, \"input\": {\"measurement\": \""
                                  << (dir / "m" / "measurement.lqf").string() << "\"}}\n";
  std::string png[2];
  std::string trace[2];
  bool ok = true;
  for (int i = 0; i < 2; ++i) {
    const fs::path img = dir / ("r" + std::to_string(i) + ".png");
    const fs::path tr = dir / ("r" + std::to_string(i) + ".jsonl");
    ok = ok && run(cli + " restore --config '" + (dir / "run.json").string() + "' --output-image '" + img.string() +
                   "' --output-trace '" + tr.string() + "' --output-config '" + (dir / "cfg.json").string() +
                   "' > /dev/null") == 0;
    png[i] = slurp(img);
    trace[i] = slurp(tr);
  }
  fs::remove_all(dir);
  const bool same = ok && !png[0].empty() && !trace[0].empty() && png[0] == png[1] && trace[0] == trace[1];
  return {same, std::string("two restore runs: PNG ") + (png[0] == png[1] ? "identical" : "differs") + " (" +
                    std::to_string(png[0].size()) + " bytes), trace " + (trace[0] == trace[1] ? "identical" : "differs") +
                    " (" + std::to_string(trace[0].size()) + " bytes)"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> check;
  double seconds_limit;
};

}  // namespace

int main() {
  const double none = std::numeric_limits<double>::infinity();
  const std::vector<Criterion> criteria{
      {1, "majorization bound", majorization, limit::kMajorizerSeconds},
      {2, "adjoint dot-product test", adjoints, limit::kAdjointSeconds},
      {3, "operator algebra", operator_algebra, none},
      {4, "IRLS against scalar oracle", irls_oracle, limit::kIrlsSeconds},
      {5, "MM monotonicity", monotonicity, none},
      {6, "analytic denoiser", analytic_denoiser, none},
      {7, "noise model", noise_model, none},
      {8, "end-to-end q trend", end_to_end_trend, limit::kTrendSeconds},
      {9, "guidance comparison", guidance_comparison, none},
      {10, "metrics", metrics_checks, none},
      {11, "restore determinism", determinism, none},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double took = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (took > c.seconds_limit) {
      o.pass = false;
      o.detail += "; runtime limit " + fmt(c.seconds_limit) + " s exceeded";
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d %s  %-28s %s (%.2f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                took);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
