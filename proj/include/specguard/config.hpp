#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "specguard/imaging.hpp"
#include "specguard/spectra.hpp"
#include "specguard/svm.hpp"

namespace specguard {

struct RepresentationConfig {
  std::string kind = "dwt";  ///< dwt, stft or pool
  /// Use all three magnitude scales; otherwise only `primary_scale`.
  bool multi_scale = true;
  MagnitudeScale primary_scale = MagnitudeScale::Logarithmic;
  std::size_t dwt_scales = 32;
  double octaves = 6.0;
  double morlet_factor = 0.8431;
  std::size_t image_rows = 32;
  std::size_t image_cols = 32;
  double stft_frame_ms = 50.0;

  bool operator==(const RepresentationConfig&) const = default;
};

struct ColorConfig {
  bool enabled = true;
  std::vector<Palette> palettes{Palette::BBG, Palette::PG, Palette::WB};
  std::vector<double> c{0.57, 0.74, 0.46};

  bool operator==(const ColorConfig&) const = default;
};

struct HighboostConfig {
  bool enabled = true;
  double c = 1.0;

  bool operator==(const HighboostConfig&) const = default;
};

struct SvdConfig {
  bool enabled = true;
  double n_prime = 2.0;

  bool operator==(const SvdConfig&) const = default;
};

struct CdaSettings {
  bool enabled = true;
  std::vector<std::size_t> filters{8, 16, 16};
  double dropout = 0.5;
  double corruption = 0.2;
  std::size_t epochs = 12;
  std::size_t batch_size = 8;
  double learning_rate = 0.1;
  std::size_t patience = 3;
  std::size_t train_images = 144;

  bool operator==(const CdaSettings&) const = default;
};

struct FeatureConfig {
  std::vector<std::size_t> zone_sizes{16, 32};
  std::vector<std::size_t> strides{1, 2};
  std::size_t codebook_k = 200;
  std::size_t codebook_samples = 4000;
  std::size_t kmeans_n_init = 1;

  bool operator==(const FeatureConfig&) const = default;
};

struct SvmConfig {
  KernelKind kernel = KernelKind::Poly;
  int degree = 2;
  double offset = 1.0;
  double gamma = 1.0;
  double sigma = 1.0;
  double cost = 1.0;
  double linear_cost = 1.0;

  KernelSpec kernel_spec() const;
  bool operator==(const SvmConfig&) const = default;
};

struct CnnConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 8;
  double learning_rate = 0.02;
  std::size_t patience = 8;

  bool operator==(const CnnConfig&) const = default;
};

struct AttackSettings {
  std::vector<std::string> attacks{"FGSM", "BIM-a", "BIM-b", "CWA", "EA", "LFA"};
  double epsilon = 0.1;
  double step = 0.02;
  std::size_t max_iters = 10;
  /// Gradient attacks aim at a random wrong label instead of any wrong label.
  bool targeted = false;
  double cwa_c_lo = 1e-3;
  double cwa_c_hi = 10.0;
  std::size_t cwa_binary_steps = 6;
  std::size_t cwa_steps = 100;
  double cwa_lr = 0.01;
  /// L2 step of the closed-form evasion attack in pixel space.
  double ea_epsilon = 4.0;
  /// LFA budget as a fraction of the training-set size (unit flip costs).
  double lfa_budget_fraction = 0.1;
  double lfa_gamma = 1.0;

  bool operator==(const AttackSettings&) const = default;
};

struct DatasetConfig {
  std::size_t classes = 3;
  std::size_t clips_per_class = 30;
  int sample_rate = 8000;
  double duration = 0.5;
  double noise = 0.05;
  bool augment = false;
  std::vector<double> pitch_scales{0.5, 0.75, 0.9, 1.1, 1.25, 1.5, 1.75};

  bool operator==(const DatasetConfig&) const = default;
};

struct EvalConfig {
  std::size_t folds = 5;
  /// Fold used as the held-out split by train/attack/report.
  std::size_t test_fold = 0;
  std::vector<std::size_t> lid_k{50, 75, 100, 125};

  bool operator==(const EvalConfig&) const = default;
};

struct PipelineConfig {
  RepresentationConfig representation;
  ColorConfig color;
  HighboostConfig highboost;
  SvdConfig svd;
  CdaSettings cda;
  FeatureConfig features;
  SvmConfig svm;
  CnnConfig cnn;
  AttackSettings attack;
  DatasetConfig dataset;
  EvalConfig eval;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  /// Checks every value against its module's invariants; throws Config.
  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

/// TOML-like text: [section] headers, key = value lines, # comments.
/// Values are numbers, true/false, "strings" or [lists] of those.
PipelineConfig parse_config(const std::string& text);
std::string serialize_config(const PipelineConfig& cfg);

PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const PipelineConfig& cfg);

}  // namespace specguard
