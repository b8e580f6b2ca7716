// SPDX-License-Identifier: Apache-2.0
#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace lqcli {

namespace {

const char* type_label(const Json& j) {
  if (j.is_boolean()) return "a boolean";
  if (j.is_number_unsigned()) return "a non-negative integer";
  if (j.is_number()) return "a number";
  if (j.is_string()) return "a string";
  if (j.is_array()) return "an array";
  if (j.is_object()) return "an object";
  return "null";
}

bool compatible(const Json& def, const Json& value) {
  if (def.is_boolean()) return value.is_boolean();
  if (def.is_number_unsigned()) return value.is_number_unsigned() ||
                                       (value.is_number_integer() && value.get<std::int64_t>() >= 0);
  if (def.is_number()) return value.is_number();
  if (def.is_string()) return value.is_string();
  if (def.is_array()) return value.is_array();
  if (def.is_object()) return value.is_object();
  return false;
}

void check_one_of(const Json& config, const char* pointer, std::initializer_list<const char*> allowed) {
  const std::string value = config.at(Json::json_pointer(pointer)).get<std::string>();
  for (const char* a : allowed) {
    if (value == a) return;
  }
  std::string list;
  for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
  throw ConfigError(std::string(pointer).substr(1) + " must be one of {" + list + "}, got \"" + value + "\"");
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& text, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + " expects a number, got \"" + text + "\"");
  }
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& key) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError(key + " expects a non-negative integer, got \"" + text + "\"");
  }
  return v;
}

std::uint64_t u64(const Json& config, const char* pointer) {
  return config.at(Json::json_pointer(pointer)).get<std::uint64_t>();
}

double f64(const Json& config, const char* pointer) {
  return config.at(Json::json_pointer(pointer)).get<double>();
}

std::string str(const Json& config, const char* pointer) {
  return config.at(Json::json_pointer(pointer)).get<std::string>();
}

lq_schedule_config schedule_of(const Json& config) {
  return {u64(config, "/schedule/N"), f64(config, "/schedule/beta_start"), f64(config, "/schedule/beta_end")};
}

lq_perturbation_config perturbation_of(const Json& config) {
  return {f64(config, "/solver/eps0"), f64(config, "/solver/eps_min"), f64(config, "/solver/decay")};
}

}  // namespace

Json default_run_config() {
  return Json{
      {"task", "denoise"},
      {"operator",
       {{"blur_size", 61u}, {"blur_sigma", 3.0}, {"mask_fraction", 0.7}, {"mask_seed", 0u}, {"sr_factor", 4u}}},
      {"noise", {{"sp_level", 0.5}, {"seed", 0u}}},
      {"solver",
       {{"variant", "algorithm1"},
        {"q", 0.5},
        {"lambda", 1.0},
        {"T", 100u},
        {"T_inter", 1u},
        {"step_rule", "normalized"},
        {"step_size", 1.0},
        {"eps0", 1e-2},
        {"decay", 0.8},
        {"eps_min", 1e-8},
        {"warm_start", false},
        {"rho", 1.0},
        {"jacobian_mode", "scaled_identity"}}},
      {"schedule", {{"N", 1000u}, {"beta_start", 1e-4}, {"beta_end", 0.02}}},
      {"denoiser",
       {{"kind", "gmm"},
        {"params",
         {{"weights", {0.5, 0.5}},
          {"means", {0.15, 0.85}},
          {"variances", {0.0004, 0.0004}},
          {"tv_strength", 1.0},
          {"tv_iterations", 30u},
          {"median_window", 3u}}},
        {"endpoint",
         {{"transport", "tcp"},
          {"host", "127.0.0.1"},
          {"port", 0u},
          {"command", Json::array()},
          {"timeout_ms", 30000u}}}}},
      {"input", {{"clean", ""}, {"measurement", ""}, {"mask", ""}}},
      {"output", {{"image", "restored.png"}, {"trace", "trace.jsonl"}, {"config", "resolved_config.json"}}},
      {"seed", 0u},
  };
}

void overlay(Json& base, const Json& patch, const std::string& where) {
  if (!patch.is_object()) throw ConfigError((where.empty() ? "config" : where) + " must be a JSON object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key \"" + path + "\"");
    Json& slot = base[key];
    if (!compatible(slot, value)) {
      throw ConfigError("config key \"" + path + "\" must be " + type_label(slot));
    }
    if (slot.is_object()) {
      overlay(slot, value, path);
    } else if (slot.is_number_unsigned()) {
      slot = value.get<std::uint64_t>();
    } else if (slot.is_number_float()) {
      slot = value.get<double>();
    } else {
      slot = value;
    }
  }
}

Json load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  Json parsed;
  try {
    parsed = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  Json config = default_run_config();
  overlay(config, parsed);
  return config;
}

const std::vector<Override>& overrides() {
  static const std::vector<Override> table = {
      {"--task", "/task", "denoise | deblur | inpaint | sr"},
      {"--blur-size", "/operator/blur_size", "blur kernel width (odd)"},
      {"--blur-sigma", "/operator/blur_sigma", "blur kernel standard deviation"},
      {"--mask-fraction", "/operator/mask_fraction", "fraction of missing pixels"},
      {"--mask-seed", "/operator/mask_seed", "seed of the inpainting mask"},
      {"--sr-factor", "/operator/sr_factor", "average-pooling factor"},
      {"--sp-level", "/noise/sp_level", "salt-and-pepper corruption rate"},
      {"--noise-seed", "/noise/seed", "seed of the impulse noise"},
      {"--variant", "/solver/variant", "algorithm1 | naive_lq | irls_weighted"},
      {"--q", "/solver/q", "fidelity exponent in (0,2]"},
      {"--lambda", "/solver/lambda", "fidelity weight"},
      {"--outer-iters", "/solver/T", "outer iterations T"},
      {"--inner-iters", "/solver/T_inter", "inner iterations"},
      {"--step-rule", "/solver/step_rule", "normalized | fixed"},
      {"--step-size", "/solver/step_size", "step of the fixed rule"},
      {"--eps0", "/solver/eps0", "initial IRLS perturbation"},
      {"--decay", "/solver/decay", "perturbation decay per outer step"},
      {"--eps-min", "/solver/eps_min", "perturbation floor"},
      {"--warm-start", "/solver/warm_start", "start from A^T y (true | false)"},
      {"--rho", "/solver/rho", "guidance scale of the sampling variants"},
      {"--jacobian-mode", "/solver/jacobian_mode", "scaled_identity | exact_diag"},
      {"--schedule-n", "/schedule/N", "diffusion schedule length"},
      {"--beta-start", "/schedule/beta_start", "first beta"},
      {"--beta-end", "/schedule/beta_end", "last beta"},
      {"--denoiser", "/denoiser/kind", "gmm | tv | median | external"},
      {"--gmm-weights", "/denoiser/params/weights", "comma-separated mixture weights"},
      {"--gmm-means", "/denoiser/params/means", "comma-separated mixture means"},
      {"--gmm-variances", "/denoiser/params/variances", "comma-separated mixture variances"},
      {"--tv-strength", "/denoiser/params/tv_strength", "TV weight multiplier"},
      {"--tv-iterations", "/denoiser/params/tv_iterations", "TV dual iterations"},
      {"--median-window", "/denoiser/params/median_window", "median window (odd)"},
      {"--endpoint-transport", "/denoiser/endpoint/transport", "tcp | stdio"},
      {"--endpoint-host", "/denoiser/endpoint/host", "external denoiser host"},
      {"--endpoint-port", "/denoiser/endpoint/port", "external denoiser port"},
      {"--endpoint-command", "/denoiser/endpoint/command", "space-separated server command"},
      {"--timeout-ms", "/denoiser/endpoint/timeout_ms", "external denoiser timeout"},
      {"--clean", "/input/clean", "clean reference image"},
      {"--measurement", "/input/measurement", "measurement (.lqf sidecar or PNG)"},
      {"--mask", "/input/mask", "inpainting mask file"},
      {"--output-image", "/output/image", "restored PNG path"},
      {"--output-trace", "/output/trace", "trace JSON-lines path"},
      {"--output-config", "/output/config", "resolved config path"},
      {"--seed", "/seed", "master seed"},
  };
  return table;
}

void apply_override(Json& config, const std::string& pointer, const std::string& text) {
  Json& slot = config.at(Json::json_pointer(pointer));
  const std::string key = pointer.substr(1);
  if (slot.is_boolean()) {
    if (text == "true" || text == "1") {
      slot = true;
    } else if (text == "false" || text == "0") {
      slot = false;
    } else {
      throw ConfigError(key + " expects true or false, got \"" + text + "\"");
    }
  } else if (slot.is_number_unsigned()) {
    slot = parse_unsigned(text, key);
  } else if (slot.is_number()) {
    slot = parse_double(text, key);
  } else if (slot.is_string()) {
    slot = text;
  } else if (slot.is_array()) {
    Json values = Json::array();
    if (pointer == "/denoiser/endpoint/command") {
      for (const std::string& word : split(text, ' ')) values.push_back(word);
    } else {
      for (const std::string& item : split(text, ',')) values.push_back(parse_double(item, key));
    }
    slot = values;
  }
}

void validate_run_config(const Json& config) {
  check_one_of(config, "/task", {"denoise", "deblur", "inpaint", "sr"});
  check_one_of(config, "/solver/variant", {"algorithm1", "naive_lq", "irls_weighted"});
  check_one_of(config, "/solver/step_rule", {"normalized", "fixed"});
  check_one_of(config, "/solver/jacobian_mode", {"scaled_identity", "exact_diag"});
  check_one_of(config, "/denoiser/kind", {"gmm", "tv", "median", "external"});
  check_one_of(config, "/denoiser/endpoint/transport", {"tcp", "stdio"});
  const double q = f64(config, "/solver/q");
  if (!(q > 0.0 && q <= 2.0)) throw ConfigError("solver.q must lie in (0,2]");
  if (u64(config, "/denoiser/endpoint/port") > 65535) throw ConfigError("denoiser.endpoint.port exceeds 65535");
  if (u64(config, "/denoiser/endpoint/timeout_ms") > 86400000u) {
    throw ConfigError("denoiser.endpoint.timeout_ms is too large");
  }
  for (const char* key : {"/denoiser/params/weights", "/denoiser/params/means", "/denoiser/params/variances"}) {
    for (const Json& v : config.at(Json::json_pointer(key))) {
      if (!v.is_number()) throw ConfigError(std::string(key).substr(1) + " must hold numbers");
    }
  }
  for (const Json& v : config.at(Json::json_pointer("/denoiser/endpoint/command"))) {
    if (!v.is_string()) throw ConfigError("denoiser.endpoint.command must hold strings");
  }
}

lq_restore_config restore_config_of(const Json& config) {
  lq_restore_config c;
  lq_restore_config_default(&c);
  c.q = f64(config, "/solver/q");
  c.lambda = f64(config, "/solver/lambda");
  c.outer_iterations = u64(config, "/solver/T");
  c.inner_iterations = u64(config, "/solver/T_inter");
  c.schedule = schedule_of(config);
  c.perturbation = perturbation_of(config);
  c.step_rule = str(config, "/solver/step_rule") == "fixed" ? LQ_STEP_FIXED : LQ_STEP_NORMALIZED;
  c.step_size = f64(config, "/solver/step_size");
  c.seed = u64(config, "/seed");
  c.record_trace = 1;
  c.warm_start = config.at(Json::json_pointer("/solver/warm_start")).get<bool>() ? 1 : 0;
  return c;
}

lq_guidance_config guidance_config_of(const Json& config) {
  lq_guidance_config c;
  lq_guidance_config_default(&c);
  c.variant = str(config, "/solver/variant") == "naive_lq" ? LQ_GUIDANCE_NAIVE_LQ : LQ_GUIDANCE_IRLS_WEIGHTED;
  c.rho = f64(config, "/solver/rho");
  c.q = f64(config, "/solver/q");
  c.schedule = schedule_of(config);
  c.perturbation = perturbation_of(config);
  c.steps = u64(config, "/solver/T");
  c.seed = u64(config, "/seed");
  c.jacobian_mode =
      str(config, "/solver/jacobian_mode") == "exact_diag" ? LQ_JACOBIAN_EXACT_DIAG : LQ_JACOBIAN_SCALED_IDENTITY;
  c.record_trace = 1;
  return c;
}

DenoiserPtr make_denoiser(const Json& config) {
  const std::string kind = str(config, "/denoiser/kind");
  lq_denoiser* raw = nullptr;
  if (kind == "gmm") {
    const auto weights = config.at(Json::json_pointer("/denoiser/params/weights")).get<std::vector<double>>();
    const auto means = config.at(Json::json_pointer("/denoiser/params/means")).get<std::vector<double>>();
    const auto variances = config.at(Json::json_pointer("/denoiser/params/variances")).get<std::vector<double>>();
    if (weights.size() != means.size() || weights.size() != variances.size() || weights.empty()) {
      throw ConfigError("denoiser.params weights, means and variances must be non-empty and equally long");
    }
    check(lq_denoiser_gmm(weights.data(), means.data(), variances.data(), weights.size(), &raw));
  } else if (kind == "tv") {
    check(lq_denoiser_tv(f64(config, "/denoiser/params/tv_strength"), u64(config, "/denoiser/params/tv_iterations"),
                         &raw));
  } else if (kind == "median") {
    check(lq_denoiser_median(u64(config, "/denoiser/params/median_window"), &raw));
  } else {
    const int timeout = static_cast<int>(u64(config, "/denoiser/endpoint/timeout_ms"));
    if (str(config, "/denoiser/endpoint/transport") == "tcp") {
      const std::string host = str(config, "/denoiser/endpoint/host");
      check(lq_denoiser_external_tcp(host.c_str(), static_cast<uint16_t>(u64(config, "/denoiser/endpoint/port")),
                                     timeout, &raw));
    } else {
      const auto command = config.at(Json::json_pointer("/denoiser/endpoint/command")).get<std::vector<std::string>>();
      if (command.empty()) throw ConfigError("denoiser.endpoint.command is required for the stdio transport");
      std::vector<const char*> argv;
      for (const std::string& arg : command) argv.push_back(arg.c_str());
      check(lq_denoiser_external_stdio(argv.data(), argv.size(), timeout, &raw));
    }
  }
  return DenoiserPtr(raw);
}

Degradation make_degradation(const Json& config, const ImageShape& domain, std::uint64_t mask_seed, MaskPtr mask) {
  const std::string task = str(config, "/task");
  Degradation d;
  lq_operator* raw = nullptr;
  if (task == "denoise") {
    check(lq_operator_identity(domain.height, domain.width, domain.channels, &raw));
  } else if (task == "deblur") {
    check(lq_operator_blur(domain.height, domain.width, domain.channels, u64(config, "/operator/blur_size"),
                           f64(config, "/operator/blur_sigma"), &raw));
  } else if (task == "inpaint") {
    if (!mask) {
      lq_mask* m = nullptr;
      check(lq_mask_create(domain.height, domain.width, f64(config, "/operator/mask_fraction"), mask_seed, &m));
      mask.reset(m);
    }
    check(lq_operator_inpaint(mask.get(), domain.height, domain.width, domain.channels, &raw));
    d.mask = std::move(mask);
  } else {
    check(lq_operator_sr(domain.height, domain.width, domain.channels, u64(config, "/operator/sr_factor"), &raw));
  }
  d.op.reset(raw);
  return d;
}

ImageShape domain_shape_of(const Json& config, const ImageShape& stored) {
  if (str(config, "/task") != "sr") return stored;
  const std::size_t f = u64(config, "/operator/sr_factor");
  return {stored.height * f, stored.width * f, stored.channels};
}

}  // namespace lqcli
