/* SPDX-License-Identifier: Apache-2.0 */
#ifndef LQPNP_LQPNP_H
#define LQPNP_LQPNP_H

/*
 * C interface of the lq plug-and-play restoration library.
 *
 * Every object is an opaque handle released with its *_free function. Calls
 * that can fail return an lq_status; on failure lq_last_error() describes the
 * problem for the calling thread. Strings returned through char** must be
 * released with lq_string_free.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LQ_API __declspec(dllexport)
#else
#define LQ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lq_status {
  LQ_OK = 0,
  LQ_ERR_ARGUMENT = 1,
  LQ_ERR_DIMENSION = 2,
  LQ_ERR_DECODE = 3,
  LQ_ERR_IO = 4,
  LQ_ERR_NUMERIC = 5,
  LQ_ERR_TRANSPORT = 6,
  LQ_ERR_INTERNAL = 7
} lq_status;

typedef struct lq_image lq_image;
typedef struct lq_mask lq_mask;
typedef struct lq_operator lq_operator;
typedef struct lq_denoiser lq_denoiser;

LQ_API const char* lq_version(void);
LQ_API const char* lq_last_error(void);
LQ_API void lq_string_free(char* s);

/* Images: row-major, channel-interleaved float64, channels 1 or 3. */
LQ_API lq_status lq_image_create(size_t height, size_t width, size_t channels, const double* data,
                                 lq_image** out);
LQ_API lq_status lq_image_constant(size_t height, size_t width, size_t channels, double value,
                                   lq_image** out);
LQ_API lq_status lq_image_load_png(const char* path, lq_image** out);
LQ_API lq_status lq_image_save_png(const lq_image* image, const char* path);
LQ_API lq_status lq_image_load_sidecar(const char* path, lq_image** out);
LQ_API lq_status lq_image_save_sidecar(const lq_image* image, const char* path);
LQ_API void lq_image_shape(const lq_image* image, size_t* height, size_t* width, size_t* channels);
LQ_API size_t lq_image_size(const lq_image* image);
LQ_API const double* lq_image_data(const lq_image* image);
LQ_API void lq_image_free(lq_image* image);

/* Random inpainting masks over the pixel sites of an image shape. */
LQ_API lq_status lq_mask_create(size_t height, size_t width, double missing_fraction, uint64_t seed,
                                lq_mask** out);
LQ_API lq_status lq_mask_load(const char* path, lq_mask** out);
LQ_API lq_status lq_mask_save(const lq_mask* mask, const char* path);
LQ_API size_t lq_mask_kept(const lq_mask* mask);
LQ_API void lq_mask_free(lq_mask* mask);

/* Degradation operators. */
LQ_API lq_status lq_operator_identity(size_t height, size_t width, size_t channels, lq_operator** out);
LQ_API lq_status lq_operator_blur(size_t height, size_t width, size_t channels, size_t size, double sigma,
                                  lq_operator** out);
LQ_API lq_status lq_operator_inpaint(const lq_mask* mask, size_t height, size_t width, size_t channels,
                                     lq_operator** out);
LQ_API lq_status lq_operator_sr(size_t height, size_t width, size_t channels, size_t factor,
                                lq_operator** out);
/* shape receives {height, width, channels}. */
LQ_API void lq_operator_domain_shape(const lq_operator* op, size_t shape[3]);
LQ_API void lq_operator_range_shape(const lq_operator* op, size_t shape[3]);
LQ_API lq_status lq_operator_apply(const lq_operator* op, const lq_image* x, lq_image** out);
LQ_API lq_status lq_operator_adjoint(const lq_operator* op, const lq_image* u, lq_image** out);
LQ_API lq_status lq_operator_dot_test(const lq_operator* op, size_t trials, uint64_t seed, double* worst);
LQ_API void lq_operator_free(lq_operator* op);

/* Noise. */
LQ_API lq_status lq_salt_pepper(const lq_image* image, double level, uint64_t seed, lq_image** out);
/* Fits the residual noisy - clean; writes a JSON report. */
LQ_API lq_status lq_fit_noise(const lq_image* clean, const lq_image* noisy, char** json);

/* Denoisers. A denoiser handle is used by one call at a time. */
/* count == 0 selects the default two-level prior. */
LQ_API lq_status lq_denoiser_gmm(const double* weights, const double* means, const double* variances,
                                 size_t count, lq_denoiser** out);
LQ_API lq_status lq_denoiser_tv(double strength, size_t iterations, lq_denoiser** out);
LQ_API lq_status lq_denoiser_median(size_t window, lq_denoiser** out);
LQ_API lq_status lq_denoiser_external_tcp(const char* host, uint16_t port, int timeout_ms,
                                          lq_denoiser** out);
/* argv holds argc strings; the server is started as a child process. */
LQ_API lq_status lq_denoiser_external_stdio(const char* const* argv, size_t argc, int timeout_ms,
                                            lq_denoiser** out);
LQ_API lq_status lq_denoiser_clone(const lq_denoiser* denoiser, lq_denoiser** out);
LQ_API lq_status lq_denoiser_apply(lq_denoiser* denoiser, const lq_image* x, size_t t, double alpha,
                                   lq_image** out);
LQ_API void lq_denoiser_free(lq_denoiser* denoiser);

typedef enum lq_step_rule { LQ_STEP_NORMALIZED = 0, LQ_STEP_FIXED = 1 } lq_step_rule;

typedef struct lq_schedule_config {
  size_t steps;
  double beta_start;
  double beta_end;
} lq_schedule_config;

typedef struct lq_perturbation_config {
  double eps0;
  double eps_min;
  double decay;
} lq_perturbation_config;

typedef struct lq_restore_config {
  double q;
  double lambda;
  size_t outer_iterations;
  size_t inner_iterations;
  lq_schedule_config schedule;
  lq_perturbation_config perturbation;
  lq_step_rule step_rule;
  double step_size;
  uint64_t seed;
  int record_trace;
  int warm_start;
} lq_restore_config;

LQ_API void lq_restore_config_default(lq_restore_config* config);

/* y lives in the operator range. trace_jsonl may be NULL. */
LQ_API lq_status lq_restore(const lq_image* y, const lq_operator* op, const lq_restore_config* config,
                            lq_denoiser* denoiser, lq_image** out, char** trace_jsonl);

typedef enum lq_guidance_variant { LQ_GUIDANCE_NAIVE_LQ = 0, LQ_GUIDANCE_IRLS_WEIGHTED = 1 } lq_guidance_variant;
typedef enum lq_jacobian_mode { LQ_JACOBIAN_SCALED_IDENTITY = 0, LQ_JACOBIAN_EXACT_DIAG = 1 } lq_jacobian_mode;

typedef struct lq_guidance_config {
  lq_guidance_variant variant;
  double rho;
  double q;
  lq_schedule_config schedule;
  lq_perturbation_config perturbation;
  size_t steps;
  uint64_t seed;
  lq_jacobian_mode jacobian_mode;
  int record_trace;
} lq_guidance_config;

LQ_API void lq_guidance_config_default(lq_guidance_config* config);
LQ_API lq_status lq_dps_sample(const lq_image* y, const lq_operator* op, const lq_guidance_config* config,
                               lq_denoiser* denoiser, lq_image** out, char** trace_jsonl);

/* Metrics. An infinite PSNR is reported as +INFINITY. */
LQ_API lq_status lq_psnr(const lq_image* ref, const lq_image* test, double* db);
LQ_API lq_status lq_ssim(const lq_image* ref, const lq_image* test, double* value);
LQ_API lq_status lq_evaluate(const lq_image* ref, const lq_image* test, char** json);

#ifdef __cplusplus
}
#endif

#endif /* LQPNP_LQPNP_H */
