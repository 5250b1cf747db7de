#pragma once

// Small but complete configuration for end-to-end tests that must run in
// seconds.

#include "specguard/config.hpp"

namespace specguard::testing {

inline PipelineConfig tiny_config() {
  PipelineConfig cfg;
  cfg.dataset.clips_per_class = 6;
  cfg.dataset.duration = 0.2;
  cfg.dataset.pitch_scales = {0.75, 0.9, 1.1, 1.25, 1.5, 1.75};
  cfg.representation.dwt_scales = 16;
  cfg.representation.image_rows = 16;
  cfg.representation.image_cols = 16;
  cfg.features.zone_sizes = {16};
  cfg.features.strides = {4};
  cfg.features.codebook_k = 6;
  cfg.features.codebook_samples = 300;
  cfg.cda.filters = {2, 3, 3};
  cfg.cda.epochs = 2;
  cfg.cda.train_images = 12;
  cfg.cnn.epochs = 3;
  cfg.attack.cwa_binary_steps = 2;
  cfg.attack.cwa_steps = 5;
  cfg.eval.folds = 3;
  cfg.eval.lid_k = {5, 8};
  return cfg;
}

}  // namespace specguard::testing
