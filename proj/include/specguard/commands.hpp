#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "specguard/config.hpp"
#include "specguard/evaluation.hpp"

namespace specguard {

struct CommandOptions {
  PipelineConfig cfg;
  std::filesystem::path out = "out";
  std::size_t jobs = 1;
  /// Progress messages; null silences them.
  std::ostream* log = nullptr;
};

/// Representation cache directory: $SPECGUARD_CACHE, else <out>/cache.
std::filesystem::path cache_dir(const CommandOptions& opts);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ull);

/// Writes the synthetic dataset as WAVs plus manifest.csv and classes.json
/// under <out>/data.
int cmd_synth(const CommandOptions& opts);

struct BuildResult {
  std::size_t clips = 0;
  std::size_t skipped = 0;
  std::size_t cache_hits = 0;
  std::size_t images = 0;  ///< color spectrogram PNGs written
};

/// Reads the manifest (class names default to classes.json next to it),
/// optionally pitch-augments it, caches one pixel stack per clip and writes
/// one PNG per (clip, magnitude scale, palette) plus one SPG1 per (clip,
/// magnitude scale) under <out>/build. Returns 3 when more than 10% of the
/// clips could not be read.
int cmd_build(const CommandOptions& opts, const std::filesystem::path& manifest,
              const std::filesystem::path& class_names = {}, BuildResult* result = nullptr);

/// Trains CNN, linear SVM and the proposed model on the training folds;
/// writes <out>/models.
int cmd_train(const CommandOptions& opts);

/// Crafts the requested attacks (default: config list) on the held-out fold.
/// Writes <out>/attacks/reports.csv, ADV1 dumps and, for LFA, poisoned labels
/// and retrained models. Returns 4 when every sample failed.
int cmd_attack(const CommandOptions& opts, const std::vector<std::string>& attacks = {});

/// Scores every model on the clean test split and on every crafted attack;
/// writes accuracy, fooling, tradeoff and ranking CSVs plus tradeoff.svg
/// under <out>/report.
int cmd_report(const CommandOptions& opts);

/// LID detectability of FGSM examples against clean and noise-perturbed
/// stacks; writes <out>/lid/lid.csv.
int cmd_lid(const CommandOptions& opts);

/// k-fold evaluation with every toggle removed in turn; writes
/// <out>/ablation. Empty `folds` runs all folds.
int cmd_ablate(const CommandOptions& opts, const std::vector<std::string>& toggles = {},
               const std::vector<std::size_t>& folds = {});

/// k-fold evaluation without ablation; writes <out>/evaluation.
int cmd_evaluate(const CommandOptions& opts, const std::vector<std::size_t>& folds = {});

/// CSV tables and SVG for an evaluation report.
void write_eval_tables(const std::filesystem::path& dir, const EvalReport& report);

/// Error-vs-fooling scatter with one point and distance label per model.
std::string tradeoff_svg(const std::vector<ModelEval>& models);

}  // namespace specguard
