// SPDX-License-Identifier: Apache-2.0
// lqpnp command-line front end: degrade, fit-noise, restore, evaluate, benchmark.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "handles.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace lqcli;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitTransport = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitInternal = 1;

int exit_code_for(lq_status status) {
  switch (status) {
    case LQ_ERR_TRANSPORT: return kExitTransport;
    case LQ_ERR_NUMERIC: return kExitNumeric;
    case LQ_ERR_INTERNAL: return kExitInternal;
    default: return kExitConfig;
  }
}

bool is_sidecar(const std::string& path) { return fs::path(path).extension() == ".lqf"; }

ImagePtr read_image(const std::string& path) {
  if (path.empty()) throw ConfigError("an input image path is required");
  lq_image* raw = nullptr;
  check(is_sidecar(path) ? lq_image_load_sidecar(path.c_str(), &raw) : lq_image_load_png(path.c_str(), &raw));
  return ImagePtr(raw);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw LibraryError(LQ_ERR_IO, "cannot write " + path.string());
}

void write_png(const lq_image* img, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  check(lq_image_save_png(img, path.string().c_str()));
}

void emit(const Json& report, const std::string& output) {
  const std::string text = report.dump(2) + "\n";
  if (output.empty()) {
    std::cout << text;
  } else {
    write_text(output, text);
  }
}

Json metrics_json(const lq_image* ref, const lq_image* test) {
  char* raw = nullptr;
  check(lq_evaluate(ref, test, &raw));
  return Json::parse(take_string(raw));
}

double json_number(const Json& v) {
  if (v.is_string()) return v.get<std::string>() == "inf" ? INFINITY : -INFINITY;
  return v.get<double>();
}

Json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

ImagePtr apply_op(const lq_operator* op, const lq_image* x) {
  lq_image* raw = nullptr;
  check(lq_operator_apply(op, x, &raw));
  return ImagePtr(raw);
}

ImagePtr apply_adjoint(const lq_operator* op, const lq_image* u) {
  lq_image* raw = nullptr;
  check(lq_operator_adjoint(op, u, &raw));
  return ImagePtr(raw);
}

ImagePtr corrupt(const lq_image* y, double level, uint64_t seed) {
  lq_image* raw = nullptr;
  check(lq_salt_pepper(y, level, seed, &raw));
  return ImagePtr(raw);
}

struct RunOutput {
  ImagePtr image;
  std::string trace;
};

RunOutput run_solver(const Json& config, const lq_image* y, const lq_operator* op, lq_denoiser* denoiser) {
  lq_image* raw = nullptr;
  char* trace = nullptr;
  if (config.at("solver").at("variant").get<std::string>() == "algorithm1") {
    const lq_restore_config rc = restore_config_of(config);
    check(lq_restore(y, op, &rc, denoiser, &raw, &trace));
  } else {
    const lq_guidance_config gc = guidance_config_of(config);
    check(lq_dps_sample(y, op, &gc, denoiser, &raw, &trace));
  }
  RunOutput out{ImagePtr(raw), take_string(trace)};
  return out;
}

/// Registers every config override on a subcommand.
class OverrideSet {
 public:
  void attach(CLI::App* app) {
    for (const Override& o : overrides()) {
      app->add_option(o.flag, values_[o.pointer], o.help);
    }
  }

  void apply(Json& config) const {
    for (const Override& o : overrides()) {
      const auto it = values_.find(o.pointer);
      if (it != values_.end() && !it->second.empty()) apply_override(config, o.pointer, it->second);
    }
  }

 private:
  std::map<std::string, std::string> values_;
};

Json resolve(const std::string& config_path, const OverrideSet& set) {
  Json config = config_path.empty() ? default_run_config() : load_run_config(config_path);
  set.apply(config);
  validate_run_config(config);
  return config;
}

int cmd_degrade(const std::string& config_path, const OverrideSet& set, const std::string& input,
                const std::string& out_dir) {
  const Json config = resolve(config_path, set);
  const ImagePtr clean = read_image(input);
  const Degradation d =
      make_degradation(config, shape_of(clean.get()), config.at("operator").at("mask_seed").get<uint64_t>());
  const ImagePtr y = apply_op(d.op.get(), clean.get());
  const ImagePtr noisy =
      corrupt(y.get(), config.at("noise").at("sp_level").get<double>(), config.at("noise").at("seed").get<uint64_t>());

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  Json report;
  report["task"] = config.at("task");
  ImagePtr stored;
  const lq_image* to_store = noisy.get();
  if (d.mask) {
    stored = apply_adjoint(d.op.get(), noisy.get());
    to_store = stored.get();
    const fs::path mask_path = dir / "mask.txt";
    check(lq_mask_save(d.mask.get(), mask_path.string().c_str()));
    report["mask"] = mask_path.string();
  }
  const fs::path png = dir / "measurement.png";
  const fs::path sidecar = dir / "measurement.lqf";
  write_png(to_store, png);
  check(lq_image_save_sidecar(to_store, sidecar.string().c_str()));
  const ImageShape s = shape_of(to_store);
  report["measurement_png"] = png.string();
  report["measurement"] = sidecar.string();
  report["shape"] = {s.height, s.width, s.channels};
  report["resolved_config"] = config;
  emit(report, "");
  return 0;
}

int cmd_fit_noise(const std::string& clean_path, const std::string& noisy_path, const std::string& output) {
  const ImagePtr clean = read_image(clean_path);
  const ImagePtr noisy = read_image(noisy_path);
  char* raw = nullptr;
  check(lq_fit_noise(clean.get(), noisy.get(), &raw));
  Json report = Json::parse(take_string(raw));
  const double q = report.at("ggsm").at("q").get<double>();
  const double delta = report.at("ggsm").at("delta").get<double>();
  report["suggested"] = {{"q", q}, {"lambda", std::pow(delta, q)}};
  emit(report, output);
  return 0;
}

int cmd_restore(const std::string& config_path, const OverrideSet& set) {
  const Json config = resolve(config_path, set);
  const ImagePtr stored = read_image(config.at("input").at("measurement").get<std::string>());
  const ImageShape domain = domain_shape_of(config, shape_of(stored.get()));

  MaskPtr mask;
  if (config.at("task") == "inpaint") {
    const std::string mask_path = config.at("input").at("mask").get<std::string>();
    if (mask_path.empty()) throw ConfigError("input.mask is required for inpainting");
    lq_mask* raw = nullptr;
    check(lq_mask_load(mask_path.c_str(), &raw));
    mask.reset(raw);
  }
  const Degradation d = make_degradation(config, domain, 0, std::move(mask));
  ImagePtr reduced;
  const lq_image* y = stored.get();
  if (d.mask) {
    reduced = apply_op(d.op.get(), stored.get());
    y = reduced.get();
  }

  const DenoiserPtr denoiser = make_denoiser(config);
  const RunOutput result = run_solver(config, y, d.op.get(), denoiser.get());

  const Json& out = config.at("output");
  write_png(result.image.get(), out.at("image").get<std::string>());
  write_text(out.at("trace").get<std::string>(), result.trace);
  write_text(out.at("config").get<std::string>(), config.dump(2) + "\n");

  Json report;
  report["image"] = out.at("image");
  report["trace"] = out.at("trace");
  report["config"] = out.at("config");
  const std::string clean_path = config.at("input").at("clean").get<std::string>();
  if (!clean_path.empty()) {
    const ImagePtr clean = read_image(clean_path);
    report["metrics"] = metrics_json(clean.get(), result.image.get());
  }
  emit(report, "");
  return 0;
}

int cmd_evaluate(const std::string& ref_path, const std::string& test_path, const std::string& output) {
  const ImagePtr ref = read_image(ref_path);
  const ImagePtr test = read_image(test_path);
  emit(metrics_json(ref.get(), test.get()), output);
  return 0;
}

struct BenchmarkRow {
  std::string file;
  double q = 0.0;
  Json metrics;
  double seconds = 0.0;
};

std::vector<double> parse_sweep(const std::string& text, double fallback) {
  if (text.empty()) return {fallback};
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("--q-sweep expects comma-separated numbers, got \"" + item + "\"");
    }
  }
  if (out.empty()) throw ConfigError("--q-sweep is empty");
  return out;
}

int cmd_benchmark(const std::string& config_path, const OverrideSet& set, const std::string& dir,
                  const std::string& sweep_text, std::size_t jobs, bool timing, const std::string& output) {
  const Json config = resolve(config_path, set);
  if (!fs::is_directory(dir)) throw ConfigError("benchmark directory " + dir + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no PNG images found in " + dir);
  const std::vector<double> qs = parse_sweep(sweep_text, config.at("solver").at("q").get<double>());
  for (double q : qs) {
    if (!(q > 0.0 && q <= 2.0)) throw ConfigError("--q-sweep values must lie in (0,2]");
  }

  const uint64_t master = config.at("seed").get<uint64_t>();
  const double level = config.at("noise").at("sp_level").get<double>();
  std::vector<BenchmarkRow> rows(files.size() * qs.size());
  const DenoiserPtr prototype = make_denoiser(config);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&](lq_denoiser* denoiser) {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      try {
        const uint64_t seed = master + i;
        const ImagePtr clean = read_image(files[i].string());
        const Degradation d = make_degradation(config, shape_of(clean.get()), seed);
        const ImagePtr y = corrupt(apply_op(d.op.get(), clean.get()).get(), level, seed);
        for (std::size_t j = 0; j < qs.size(); ++j) {
          Json run = config;
          run["solver"]["q"] = qs[j];
          run["seed"] = seed;
          const auto start = std::chrono::steady_clock::now();
          const RunOutput result = run_solver(run, y.get(), d.op.get(), denoiser);
          const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
          rows[i * qs.size() + j] = {files[i].filename().string(), qs[j], metrics_json(clean.get(), result.image.get()),
                                     took.count()};
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = files.size();
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, files.size()));
  if (workers == 1) {
    worker(prototype.get());
  } else {
    std::vector<DenoiserPtr> clones;
    for (std::size_t w = 0; w < workers; ++w) {
      lq_denoiser* raw = nullptr;
      check(lq_denoiser_clone(prototype.get(), &raw));
      clones.emplace_back(raw);
    }
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker, clones[w].get());
    for (std::thread& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  Json report;
  report["tool"] = "lqpnp";
  report["version"] = lq_version();
  report["resolved_config"] = config;
  Json images = Json::array();
  std::map<double, std::vector<const BenchmarkRow*>> by_q;
  for (const BenchmarkRow& row : rows) {
    Json r{{"file", row.file}, {"q", row.q}, {"seed", master + static_cast<uint64_t>(&row - rows.data()) / qs.size()},
           {"metrics", row.metrics}};
    if (timing) r["seconds"] = row.seconds;
    images.push_back(r);
    by_q[row.q].push_back(&row);
  }
  report["images"] = images;
  Json aggregate = Json::array();
  for (const auto& [q, group] : by_q) {
    auto stats = [&](const char* key) {
      double sum = 0.0;
      for (const BenchmarkRow* r : group) sum += json_number(r->metrics.at(key));
      const double mean = sum / static_cast<double>(group.size());
      double ss = 0.0;
      for (const BenchmarkRow* r : group) {
        const double d = json_number(r->metrics.at(key)) - mean;
        ss += d * d;
      }
      const double sd = group.size() > 1 ? std::sqrt(ss / static_cast<double>(group.size() - 1)) : 0.0;
      return Json{{"mean", number_or_inf(mean)}, {"std", std::isfinite(sd) ? Json(sd) : Json("nan")}};
    };
    aggregate.push_back({{"task", config.at("task")},
                         {"q", q},
                         {"count", group.size()},
                         {"psnr_db", stats("psnr_db")},
                         {"ssim", stats("ssim")}});
  }
  report["aggregate"] = aggregate;
  emit(report, output);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lq-fidelity plug-and-play image restoration"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lq_version()));

  std::string config_path, input, out_dir, clean, noisy, output, ref, test, bench_dir, sweep;
  std::size_t jobs = 1;
  bool no_timing = false;

  OverrideSet degrade_overrides, restore_overrides, bench_overrides;

  CLI::App* degrade = app.add_subcommand("degrade", "simulate a degraded measurement");
  degrade->add_option("--config", config_path, "run config JSON");
  degrade->add_option("--input", input, "clean PNG")->required();
  degrade->add_option("--output-dir", out_dir, "directory for measurement files")->required();
  degrade_overrides.attach(degrade);

  CLI::App* fit = app.add_subcommand("fit-noise", "fit noise models to noisy - clean");
  fit->add_option("--clean", clean, "clean image")->required();
  fit->add_option("--noisy", noisy, "noisy image")->required();
  fit->add_option("--output", output, "report path (stdout when omitted)");

  CLI::App* restore = app.add_subcommand("restore", "restore a measurement");
  restore->add_option("--config", config_path, "run config JSON");
  restore_overrides.attach(restore);

  CLI::App* evaluate = app.add_subcommand("evaluate", "PSNR and SSIM of a test image");
  evaluate->add_option("--ref", ref, "reference image")->required();
  evaluate->add_option("--test", test, "test image")->required();
  evaluate->add_option("--output", output, "report path (stdout when omitted)");

  CLI::App* bench = app.add_subcommand("benchmark", "degrade, restore and evaluate a directory of images");
  bench->add_option("--config", config_path, "run config JSON");
  bench->add_option("--dir", bench_dir, "directory of clean PNG images")->required();
  bench->add_option("--q-sweep", sweep, "comma-separated q values");
  bench->add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);
  bench->add_flag("--no-timing", no_timing, "omit wall-clock timings");
  bench->add_option("--output", output, "report path (stdout when omitted)");
  bench_overrides.attach(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*degrade) return cmd_degrade(config_path, degrade_overrides, input, out_dir);
    if (*fit) return cmd_fit_noise(clean, noisy, output);
    if (*restore) return cmd_restore(config_path, restore_overrides);
    if (*evaluate) return cmd_evaluate(ref, test, output);
    return cmd_benchmark(config_path, bench_overrides, bench_dir, sweep, jobs, !no_timing, output);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const LibraryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.status());
  } catch (const Json::exception& e) {
    std::cerr << "error: malformed JSON value: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}
