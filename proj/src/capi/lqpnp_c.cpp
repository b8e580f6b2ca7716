// SPDX-License-Identifier: Apache-2.0
#include "lqpnp/lqpnp.h"

#include <cstdlib>
#include <cstring>
#include <limits>
#include <new>
#include <string>

#include "lqpnp/denoisers.hpp"
#include "lqpnp/errors.hpp"
#include "lqpnp/guidance.hpp"
#include "lqpnp/image.hpp"
#include "lqpnp/metrics.hpp"
#include "lqpnp/noise.hpp"
#include "lqpnp/operators.hpp"
#include "lqpnp/solver.hpp"

#ifndef LQPNP_VERSION
#define LQPNP_VERSION "0.0.0"
#endif

struct lq_image {
  lqpnp::Image value;
};
struct lq_mask {
  lqpnp::InpaintMask value;
};
struct lq_operator {
  lqpnp::OperatorPtr value;
};
struct lq_denoiser {
  lqpnp::DenoiserPtr value;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
lq_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return LQ_OK;
  } catch (const lqpnp::Error& e) {
    g_last_error = e.what();
    return static_cast<lq_status>(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LQ_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LQ_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr) throw lqpnp::ArgumentError(std::string(name) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

lqpnp::Shape make_shape(size_t h, size_t w, size_t c) { return {h, w, c}; }

void write_shape(const lqpnp::Shape& s, size_t shape[3]) {
  shape[0] = s.height;
  shape[1] = s.width;
  shape[2] = s.channels;
}

lq_image* wrap(lqpnp::Image img) { return new lq_image{std::move(img)}; }

lqpnp::DiffusionSchedule to_schedule(const lq_schedule_config& s) {
  return lqpnp::linear_beta_schedule(s.steps, s.beta_start, s.beta_end);
}

lqpnp::PerturbationSchedule to_perturbation(const lq_perturbation_config& p) {
  return {p.eps0, p.eps_min, p.decay};
}

void fill_defaults(lq_schedule_config& s, lq_perturbation_config& p) {
  s.steps = lqpnp::kDefaultSteps;
  s.beta_start = lqpnp::kDefaultBetaStart;
  s.beta_end = lqpnp::kDefaultBetaEnd;
  const lqpnp::PerturbationSchedule d{};
  p.eps0 = d.eps0;
  p.eps_min = d.eps_min;
  p.decay = d.decay;
}

}  // namespace

extern "C" {

const char* lq_version(void) { return LQPNP_VERSION; }

const char* lq_last_error(void) { return g_last_error.c_str(); }

void lq_string_free(char* s) { std::free(s); }

lq_status lq_image_create(size_t height, size_t width, size_t channels, const double* data, lq_image** out) {
  return guarded([&] {
    require(data, "data");
    require(out, "out");
    const lqpnp::Shape shape = make_shape(height, width, channels);
    *out = wrap(lqpnp::Image(shape, std::vector<double>(data, data + shape.size())));
  });
}

lq_status lq_image_constant(size_t height, size_t width, size_t channels, double value, lq_image** out) {
  return guarded([&] {
    require(out, "out");
    *out = wrap(lqpnp::constant_image(height, width, channels, value));
  });
}

lq_status lq_image_load_png(const char* path, lq_image** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = wrap(lqpnp::load_image(path));
  });
}

lq_status lq_image_save_png(const lq_image* image, const char* path) {
  return guarded([&] {
    require(image, "image");
    require(path, "path");
    lqpnp::save_image(image->value, path);
  });
}

lq_status lq_image_load_sidecar(const char* path, lq_image** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = wrap(lqpnp::load_sidecar(path));
  });
}

lq_status lq_image_save_sidecar(const lq_image* image, const char* path) {
  return guarded([&] {
    require(image, "image");
    require(path, "path");
    lqpnp::save_sidecar(image->value, path);
  });
}

void lq_image_shape(const lq_image* image, size_t* height, size_t* width, size_t* channels) {
  if (image == nullptr) return;
  if (height) *height = image->value.height();
  if (width) *width = image->value.width();
  if (channels) *channels = image->value.channels();
}

size_t lq_image_size(const lq_image* image) { return image ? image->value.size() : 0; }

const double* lq_image_data(const lq_image* image) { return image ? image->value.data().data() : nullptr; }

void lq_image_free(lq_image* image) { delete image; }

lq_status lq_mask_create(size_t height, size_t width, double missing_fraction, uint64_t seed, lq_mask** out) {
  return guarded([&] {
    require(out, "out");
    *out = new lq_mask{lqpnp::make_mask(make_shape(height, width, 1), missing_fraction, seed)};
  });
}

lq_status lq_mask_load(const char* path, lq_mask** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new lq_mask{lqpnp::InpaintMask::load(path)};
  });
}

lq_status lq_mask_save(const lq_mask* mask, const char* path) {
  return guarded([&] {
    require(mask, "mask");
    require(path, "path");
    mask->value.save(path);
  });
}

size_t lq_mask_kept(const lq_mask* mask) { return mask ? mask->value.kept().size() : 0; }

void lq_mask_free(lq_mask* mask) { delete mask; }

lq_status lq_operator_identity(size_t height, size_t width, size_t channels, lq_operator** out) {
  return guarded([&] {
    require(out, "out");
    *out = new lq_operator{lqpnp::identity_op(make_shape(height, width, channels))};
  });
}

lq_status lq_operator_blur(size_t height, size_t width, size_t channels, size_t size, double sigma,
                           lq_operator** out) {
  return guarded([&] {
    require(out, "out");
    *out = new lq_operator{lqpnp::blur_op(make_shape(height, width, channels), size, sigma)};
  });
}

lq_status lq_operator_inpaint(const lq_mask* mask, size_t height, size_t width, size_t channels,
                              lq_operator** out) {
  return guarded([&] {
    require(mask, "mask");
    require(out, "out");
    *out = new lq_operator{lqpnp::inpaint_op(mask->value, make_shape(height, width, channels))};
  });
}

lq_status lq_operator_sr(size_t height, size_t width, size_t channels, size_t factor, lq_operator** out) {
  return guarded([&] {
    require(out, "out");
    *out = new lq_operator{lqpnp::avgpool_sr_op(make_shape(height, width, channels), factor)};
  });
}

void lq_operator_domain_shape(const lq_operator* op, size_t shape[3]) {
  if (op && shape) write_shape(op->value->domain_shape(), shape);
}

void lq_operator_range_shape(const lq_operator* op, size_t shape[3]) {
  if (op && shape) write_shape(op->value->range_shape(), shape);
}

lq_status lq_operator_apply(const lq_operator* op, const lq_image* x, lq_image** out) {
  return guarded([&] {
    require(op, "op");
    require(x, "x");
    require(out, "out");
    *out = wrap(lqpnp::Image(op->value->range_shape(), op->value->apply(x->value.data())));
  });
}

lq_status lq_operator_adjoint(const lq_operator* op, const lq_image* u, lq_image** out) {
  return guarded([&] {
    require(op, "op");
    require(u, "u");
    require(out, "out");
    *out = wrap(lqpnp::Image(op->value->domain_shape(), op->value->adjoint(u->value.data())));
  });
}

lq_status lq_operator_dot_test(const lq_operator* op, size_t trials, uint64_t seed, double* worst) {
  return guarded([&] {
    require(op, "op");
    require(worst, "worst");
    *worst = lqpnp::adjoint_dot_test(*op->value, trials, seed);
  });
}

void lq_operator_free(lq_operator* op) { delete op; }

lq_status lq_salt_pepper(const lq_image* image, double level, uint64_t seed, lq_image** out) {
  return guarded([&] {
    require(image, "image");
    require(out, "out");
    lqpnp::SaltPepperSpec spec;
    spec.level = level;
    spec.seed = seed;
    *out = wrap(lqpnp::Image(image->value.shape(), lqpnp::apply_salt_pepper(image->value.data(), spec)));
  });
}

lq_status lq_fit_noise(const lq_image* clean, const lq_image* noisy, char** json) {
  return guarded([&] {
    require(clean, "clean");
    require(noisy, "noisy");
    require(json, "json");
    if (!(clean->value.shape() == noisy->value.shape())) throw lqpnp::DimensionError("clean and noisy images differ in shape");
    const auto a = clean->value.data();
    const auto b = noisy->value.data();
    std::vector<double> residual(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) residual[i] = b[i] - a[i];
    *json = dup_string(lqpnp::to_json(lqpnp::fit_noise(residual)));
  });
}

lq_status lq_denoiser_gmm(const double* weights, const double* means, const double* variances, size_t count,
                          lq_denoiser** out) {
  return guarded([&] {
    require(out, "out");
    lqpnp::GmmPrior prior = lqpnp::default_gmm_prior();
    if (count > 0) {
      require(weights, "weights");
      require(means, "means");
      require(variances, "variances");
      prior.weights.assign(weights, weights + count);
      prior.means.assign(means, means + count);
      prior.variances.assign(variances, variances + count);
    }
    *out = new lq_denoiser{lqpnp::gmm_denoiser(std::move(prior))};
  });
}

lq_status lq_denoiser_tv(double strength, size_t iterations, lq_denoiser** out) {
  return guarded([&] {
    require(out, "out");
    *out = new lq_denoiser{lqpnp::tv_denoiser(strength, iterations)};
  });
}

lq_status lq_denoiser_median(size_t window, lq_denoiser** out) {
  return guarded([&] {
    require(out, "out");
    *out = new lq_denoiser{lqpnp::median_denoiser(window)};
  });
}

lq_status lq_denoiser_external_tcp(const char* host, uint16_t port, int timeout_ms, lq_denoiser** out) {
  return guarded([&] {
    require(host, "host");
    require(out, "out");
    lqpnp::ExternalEndpoint endpoint;
    endpoint.transport = lqpnp::ExternalEndpoint::Transport::tcp;
    endpoint.host = host;
    endpoint.port = port;
    endpoint.timeout_ms = timeout_ms;
    *out = new lq_denoiser{lqpnp::external_denoiser(endpoint)};
  });
}

lq_status lq_denoiser_external_stdio(const char* const* argv, size_t argc, int timeout_ms, lq_denoiser** out) {
  return guarded([&] {
    require(argv, "argv");
    require(out, "out");
    lqpnp::ExternalEndpoint endpoint;
    endpoint.transport = lqpnp::ExternalEndpoint::Transport::stdio;
    for (size_t i = 0; i < argc; ++i) {
      require(argv[i], "argv entry");
      endpoint.command.emplace_back(argv[i]);
    }
    endpoint.timeout_ms = timeout_ms;
    *out = new lq_denoiser{lqpnp::external_denoiser(endpoint)};
  });
}

lq_status lq_denoiser_clone(const lq_denoiser* denoiser, lq_denoiser** out) {
  return guarded([&] {
    require(denoiser, "denoiser");
    require(out, "out");
    *out = new lq_denoiser{denoiser->value->clone()};
  });
}

lq_status lq_denoiser_apply(lq_denoiser* denoiser, const lq_image* x, size_t t, double alpha, lq_image** out) {
  return guarded([&] {
    require(denoiser, "denoiser");
    require(x, "x");
    require(out, "out");
    const lqpnp::Shape& shape = x->value.shape();
    *out = wrap(lqpnp::Image(shape, denoiser->value->denoise(x->value.data(), shape, {t, alpha})));
  });
}

void lq_denoiser_free(lq_denoiser* denoiser) { delete denoiser; }

void lq_restore_config_default(lq_restore_config* config) {
  if (config == nullptr) return;
  const lqpnp::RestoreConfig d;
  config->q = d.q;
  config->lambda = d.lambda;
  config->outer_iterations = d.outer_iterations;
  config->inner_iterations = d.inner_iterations;
  fill_defaults(config->schedule, config->perturbation);
  config->step_rule = LQ_STEP_NORMALIZED;
  config->step_size = 1.0;
  config->seed = d.seed;
  config->record_trace = d.record_trace ? 1 : 0;
  config->warm_start = d.warm_start ? 1 : 0;
}

lq_status lq_restore(const lq_image* y, const lq_operator* op, const lq_restore_config* config,
                     lq_denoiser* denoiser, lq_image** out, char** trace_jsonl) {
  return guarded([&] {
    require(y, "y");
    require(op, "op");
    require(config, "config");
    require(denoiser, "denoiser");
    require(out, "out");
    lqpnp::RestoreConfig cfg;
    cfg.q = config->q;
    cfg.lambda = config->lambda;
    cfg.outer_iterations = config->outer_iterations;
    cfg.inner_iterations = config->inner_iterations;
    cfg.schedule = to_schedule(config->schedule);
    cfg.perturbation = to_perturbation(config->perturbation);
    switch (config->step_rule) {
      case LQ_STEP_NORMALIZED: cfg.step_rule = lqpnp::StepRule::normalized(); break;
      case LQ_STEP_FIXED: cfg.step_rule = lqpnp::StepRule::fixed(config->step_size); break;
      default: throw lqpnp::ArgumentError("unknown step rule");
    }
    cfg.seed = config->seed;
    cfg.record_trace = config->record_trace != 0 || trace_jsonl != nullptr;
    cfg.warm_start = config->warm_start != 0;
    lqpnp::RestoreResult result = lqpnp::restore(y->value.data(), *op->value, cfg, *denoiser->value);
    char* trace = trace_jsonl ? dup_string(lqpnp::trace_to_jsonl(result.trace)) : nullptr;
    *out = wrap(std::move(result.image));
    if (trace_jsonl) *trace_jsonl = trace;
  });
}

void lq_guidance_config_default(lq_guidance_config* config) {
  if (config == nullptr) return;
  const lqpnp::GuidanceConfig d;
  config->variant = LQ_GUIDANCE_IRLS_WEIGHTED;
  config->rho = d.rho;
  config->q = d.q;
  fill_defaults(config->schedule, config->perturbation);
  config->steps = d.steps;
  config->seed = d.seed;
  config->jacobian_mode = LQ_JACOBIAN_SCALED_IDENTITY;
  config->record_trace = d.record_trace ? 1 : 0;
}

lq_status lq_dps_sample(const lq_image* y, const lq_operator* op, const lq_guidance_config* config,
                        lq_denoiser* denoiser, lq_image** out, char** trace_jsonl) {
  return guarded([&] {
    require(y, "y");
    require(op, "op");
    require(config, "config");
    require(denoiser, "denoiser");
    require(out, "out");
    lqpnp::GuidanceConfig cfg;
    switch (config->variant) {
      case LQ_GUIDANCE_NAIVE_LQ: cfg.variant = lqpnp::GuidanceVariant::naive_lq; break;
      case LQ_GUIDANCE_IRLS_WEIGHTED: cfg.variant = lqpnp::GuidanceVariant::irls_weighted; break;
      default: throw lqpnp::ArgumentError("unknown guidance variant");
    }
    switch (config->jacobian_mode) {
      case LQ_JACOBIAN_SCALED_IDENTITY: cfg.jacobian_mode = lqpnp::JacobianMode::scaled_identity; break;
      case LQ_JACOBIAN_EXACT_DIAG: cfg.jacobian_mode = lqpnp::JacobianMode::exact_diag; break;
      default: throw lqpnp::ArgumentError("unknown Jacobian mode");
    }
    cfg.rho = config->rho;
    cfg.q = config->q;
    cfg.schedule = to_schedule(config->schedule);
    cfg.perturbation = to_perturbation(config->perturbation);
    cfg.steps = config->steps;
    cfg.seed = config->seed;
    cfg.record_trace = config->record_trace != 0 || trace_jsonl != nullptr;
    lqpnp::DpsResult result = lqpnp::dps_sample(y->value.data(), *op->value, *denoiser->value, cfg);
    const char* variant = cfg.variant == lqpnp::GuidanceVariant::naive_lq ? "naive_lq" : "irls_weighted";
    char* trace = trace_jsonl ? dup_string(lqpnp::trace_to_jsonl(result.trace, variant)) : nullptr;
    *out = wrap(std::move(result.image));
    if (trace_jsonl) *trace_jsonl = trace;
  });
}

lq_status lq_psnr(const lq_image* ref, const lq_image* test, double* db) {
  return guarded([&] {
    require(ref, "ref");
    require(test, "test");
    require(db, "db");
    *db = lqpnp::psnr(ref->value, test->value);
  });
}

lq_status lq_ssim(const lq_image* ref, const lq_image* test, double* value) {
  return guarded([&] {
    require(ref, "ref");
    require(test, "test");
    require(value, "value");
    *value = lqpnp::ssim(ref->value, test->value);
  });
}

lq_status lq_evaluate(const lq_image* ref, const lq_image* test, char** json) {
  return guarded([&] {
    require(ref, "ref");
    require(test, "test");
    require(json, "json");
    *json = dup_string(lqpnp::to_json(lqpnp::evaluate(ref->value, test->value)));
  });
}

}  // extern "C"
