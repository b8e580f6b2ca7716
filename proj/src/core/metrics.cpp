// SPDX-License-Identifier: Apache-2.0
#include "lqpnp/metrics.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"
#include "lqpnp/errors.hpp"

namespace lqpnp {

namespace {

void check_pair(const Image& ref, const Image& test) {
  if (!(ref.shape() == test.shape())) throw DimensionError("images differ in shape");
  if (ref.size() == 0) throw DimensionError("images are empty");
}

double psnr_from_mse(double mse, double peak) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

std::vector<double> channel_plane(const Image& img, std::size_t ch) {
  std::vector<double> out(img.shape().pixels());
  const auto data = img.data();
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = data[p * img.channels() + ch];
  return out;
}

// scipy-style "reflect": d c b a | a b c d | d c b a
std::size_t reflect(std::ptrdiff_t i, std::size_t len) {
  const auto n = static_cast<std::ptrdiff_t>(len);
  const std::ptrdiff_t period = 2 * n;
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < n ? m : period - 1 - m);
}

class GaussianFilter {
 public:
  GaussianFilter(std::size_t size, double sigma, std::size_t height, std::size_t width)
      : height_(height), width_(width), taps_(size) {
    const double centre = (static_cast<double>(size) - 1.0) / 2.0;
    double total = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
      const double d = static_cast<double>(i) - centre;
      taps_[i] = std::exp(-d * d / (2.0 * sigma * sigma));
      total += taps_[i];
    }
    for (double& t : taps_) t /= total;
  }

  std::vector<double> operator()(const std::vector<double>& plane) const {
    const auto radius = static_cast<std::ptrdiff_t>(taps_.size() / 2);
    std::vector<double> rows(plane.size(), 0.0);
    for (std::size_t r = 0; r < height_; ++r) {
      for (std::size_t c = 0; c < width_; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < taps_.size(); ++k) {
          const auto cc = reflect(static_cast<std::ptrdiff_t>(c) + static_cast<std::ptrdiff_t>(k) - radius, width_);
          acc += taps_[k] * plane[r * width_ + cc];
        }
        rows[r * width_ + c] = acc;
      }
    }
    std::vector<double> out(plane.size(), 0.0);
    for (std::size_t r = 0; r < height_; ++r) {
      for (std::size_t c = 0; c < width_; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < taps_.size(); ++k) {
          const auto rr = reflect(static_cast<std::ptrdiff_t>(r) + static_cast<std::ptrdiff_t>(k) - radius, height_);
          acc += taps_[k] * rows[rr * width_ + c];
        }
        out[r * width_ + c] = acc;
      }
    }
    return out;
  }

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<double> taps_;
};

std::vector<double> product(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b,
                  const GaussianFilter& filter, double c1, double c2) {
  const std::vector<double> mu_a = filter(a);
  const std::vector<double> mu_b = filter(b);
  const std::vector<double> e_aa = filter(product(a, a));
  const std::vector<double> e_bb = filter(product(b, b));
  const std::vector<double> e_ab = filter(product(a, b));
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double mab = mu_a[i] * mu_b[i];
    const double maa = mu_a[i] * mu_a[i];
    const double mbb = mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mab;
    const double var_sum = (e_aa[i] - maa) + (e_bb[i] - mbb);
    total += ((2.0 * mab + c1) * (2.0 * cov + c2)) / ((maa + mbb + c1) * (var_sum + c2));
  }
  return total / static_cast<double>(a.size());
}

void check_ssim(const Image& ref, const SsimParams& p) {
  if (p.window == 0 || p.window % 2 == 0) throw ArgumentError("SSIM window must be odd");
  if (!(p.sigma > 0.0) || !(p.range > 0.0)) throw ArgumentError("SSIM sigma and range must be positive");
  if (ref.height() < p.window || ref.width() < p.window) {
    throw DimensionError("image " + std::to_string(ref.height()) + "x" + std::to_string(ref.width()) +
                         " is smaller than the SSIM window " + std::to_string(p.window));
  }
}

std::vector<double> ssim_channels(const Image& ref, const Image& test, const SsimParams& p) {
  check_pair(ref, test);
  check_ssim(ref, p);
  const GaussianFilter filter(p.window, p.sigma, ref.height(), ref.width());
  const double c1 = (p.k1 * p.range) * (p.k1 * p.range);
  const double c2 = (p.k2 * p.range) * (p.k2 * p.range);
  std::vector<double> out;
  for (std::size_t ch = 0; ch < ref.channels(); ++ch) {
    out.push_back(ssim_plane(channel_plane(ref, ch), channel_plane(test, ch), filter, c1, c2));
  }
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

nlohmann::ordered_json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

double psnr(const Image& ref, const Image& test, double peak) {
  check_pair(ref, test);
  if (!(peak > 0.0)) throw ArgumentError("PSNR peak must be positive");
  const auto a = ref.data();
  const auto b = test.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return psnr_from_mse(sum / static_cast<double>(a.size()), peak);
}

double ssim(const Image& ref, const Image& test, const SsimParams& params) {
  return mean(ssim_channels(ref, test, params));
}

MetricReport evaluate(const Image& ref, const Image& test, const SsimParams& params) {
  MetricReport report;
  report.psnr_db = psnr(ref, test);
  report.ssim_per_channel = ssim_channels(ref, test, params);
  report.ssim = mean(report.ssim_per_channel);
  const std::size_t channels = ref.channels();
  const auto a = ref.data();
  const auto b = test.data();
  for (std::size_t ch = 0; ch < channels; ++ch) {
    double sum = 0.0;
    for (std::size_t i = ch; i < a.size(); i += channels) sum += (a[i] - b[i]) * (a[i] - b[i]);
    report.psnr_per_channel.push_back(psnr_from_mse(sum / static_cast<double>(ref.shape().pixels()), 1.0));
  }
  return report;
}

std::string to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["psnr_db"] = number_or_inf(report.psnr_db);
  j["ssim"] = report.ssim;
  nlohmann::ordered_json channels = nlohmann::ordered_json::array();
  for (std::size_t ch = 0; ch < report.ssim_per_channel.size(); ++ch) {
    channels.push_back({{"channel", ch},
                        {"psnr_db", number_or_inf(report.psnr_per_channel[ch])},
                        {"ssim", report.ssim_per_channel[ch]}});
  }
  j["per_channel"] = channels;
  return j.dump();
}

}  // namespace lqpnp
