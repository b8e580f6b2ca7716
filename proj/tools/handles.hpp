// SPDX-License-Identifier: Apache-2.0
#pragma once

// RAII wrappers over the C API handles.

#include <memory>
#include <stdexcept>
#include <string>

#include "lqpnp/lqpnp.h"

namespace lqcli {

struct ImageDeleter {
  void operator()(lq_image* p) const { lq_image_free(p); }
};
struct MaskDeleter {
  void operator()(lq_mask* p) const { lq_mask_free(p); }
};
struct OperatorDeleter {
  void operator()(lq_operator* p) const { lq_operator_free(p); }
};
struct DenoiserDeleter {
  void operator()(lq_denoiser* p) const { lq_denoiser_free(p); }
};
struct StringDeleter {
  void operator()(char* p) const { lq_string_free(p); }
};

using ImagePtr = std::unique_ptr<lq_image, ImageDeleter>;
using MaskPtr = std::unique_ptr<lq_mask, MaskDeleter>;
using OperatorPtr = std::unique_ptr<lq_operator, OperatorDeleter>;
using DenoiserPtr = std::unique_ptr<lq_denoiser, DenoiserDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

/// A failed library call, carrying its status code.
class LibraryError : public std::runtime_error {
 public:
  LibraryError(lq_status status, const std::string& what) : std::runtime_error(what), status_(status) {}
  lq_status status() const noexcept { return status_; }

 private:
  lq_status status_;
};

inline void check(lq_status status) {
  if (status != LQ_OK) throw LibraryError(status, lq_last_error());
}

inline std::string take_string(char* s) {
  StringPtr owner(s);
  return s ? std::string(s) : std::string();
}

struct ImageShape {
  size_t height = 0;
  size_t width = 0;
  size_t channels = 0;
};

inline ImageShape shape_of(const lq_image* img) {
  ImageShape s;
  lq_image_shape(img, &s.height, &s.width, &s.channels);
  return s;
}

}  // namespace lqcli
