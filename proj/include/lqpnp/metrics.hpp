// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "lqpnp/image.hpp"

namespace lqpnp {

/// 10 log10(peak^2 / MSE); +infinity for identical images.
double psnr(const Image& ref, const Image& test, double peak = 1.0);

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;
};

/// Mean of the Gaussian-weighted SSIM map over pixels and channels, with
/// half-sample symmetric (reflect) boundary handling.
double ssim(const Image& ref, const Image& test, const SsimParams& params = {});

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::vector<double> psnr_per_channel;
  std::vector<double> ssim_per_channel;
};

MetricReport evaluate(const Image& ref, const Image& test, const SsimParams& params = {});

/// JSON object; infinite PSNR values are written as the string "inf".
std::string to_json(const MetricReport& report);

}  // namespace lqpnp
