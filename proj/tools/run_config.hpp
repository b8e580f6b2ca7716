// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "handles.hpp"
#include "json.hpp"

namespace lqcli {

using Json = nlohmann::ordered_json;

/// Malformed configuration or command line; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every key a run config may carry, with its default.
Json default_run_config();

/// Copies `patch` onto `base` key by key. Unknown keys and values whose type
/// differs from the default are rejected with a message naming the key.
void overlay(Json& base, const Json& patch, const std::string& where = "");

/// Defaults overlaid with the JSON document at `path`.
Json load_run_config(const std::string& path);

/// A command-line flag that overrides one config key.
struct Override {
  std::string flag;     ///< e.g. "--sp-level"
  std::string pointer;  ///< JSON pointer into the config, e.g. "/noise/sp_level"
  std::string help;
};
const std::vector<Override>& overrides();

/// Parses `text` according to the type of the current value at `pointer`
/// and stores it.
void apply_override(Json& config, const std::string& pointer, const std::string& text);

/// Checks enumerated fields and integer ranges.
void validate_run_config(const Json& config);

lq_restore_config restore_config_of(const Json& config);
lq_guidance_config guidance_config_of(const Json& config);
DenoiserPtr make_denoiser(const Json& config);

struct Degradation {
  OperatorPtr op;
  MaskPtr mask;  ///< set for inpainting only
};

/// Builds the task operator on a clean-image shape. Inpainting draws a fresh
/// mask from `mask_seed` unless `mask` is supplied.
Degradation make_degradation(const Json& config, const ImageShape& domain, std::uint64_t mask_seed,
                             MaskPtr mask = nullptr);

/// Domain shape implied by a stored measurement for the configured task.
ImageShape domain_shape_of(const Json& config, const ImageShape& stored);

}  // namespace lqcli
