#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specguard/audio_io.hpp"
#include "specguard/config.hpp"
#include "specguard/features.hpp"
#include "specguard/imaging.hpp"
#include "specguard/neural.hpp"
#include "specguard/svm.hpp"

namespace specguard {

/// Linear, logarithmic and logarithmic_real, in stack channel order.
const std::vector<MagnitudeScale>& stack_scales();

/// Grayscale base image in [0, 1] at the configured image size for one
/// magnitude scale (DWT) or for the STFT/POOL representation.
Matrix base_image(const AudioClip& clip, const RepresentationConfig& cfg, MagnitudeScale scale);

/// Pixel-space input shared by every model: one channel per magnitude scale
/// for DWT (3 channels), a single channel for STFT and POOL.
Tensor clip_stack(const AudioClip& clip, const RepresentationConfig& cfg);

Matrix stack_channel(const Tensor& stack, std::size_t channel);

/// One preprocessed view of a sample: a stack channel under one palette.
struct VariantSpec {
  std::size_t channel = 0;
  Palette palette = Palette::Gray;
  double c = 1.0;
};

/// Channel x palette combinations enabled by the config (9 for the full DWT
/// config).
std::vector<VariantSpec> variant_specs(const PipelineConfig& cfg, std::size_t channels);

/// Color compensation then highboost (each when enabled).
ColorSpectrogram enhance(const Matrix& image, const VariantSpec& spec, const PipelineConfig& cfg);

/// Full per-variant chain: enhance, SVD smoothing, CDA smoothing (each when
/// enabled), then luminance.
Matrix preprocess(const Matrix& image, const VariantSpec& spec, const PipelineConfig& cfg, const NeuralNet* cda);

/// Trains the denoiser on (corrupted, clean) pairs built from the training
/// stacks: the clean target is the enhanced image and the input is either its
/// SVD reduction or a masking-noise corruption, alternating.
TrainResult fit_cda(std::span<const Tensor> stacks, const PipelineConfig& cfg, std::uint64_t seed);

/// Bag-of-features classifier over preprocessed spectrogram variants.
struct ProposedModel {
  PipelineConfig cfg;
  std::optional<NeuralNet> cda;
  Codebook codebook;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  MulticlassSvm svm;
  std::size_t channels = 0;
};

/// Encoded (un-standardized) features for each variant of one sample.
std::vector<std::vector<double>> variant_features(const Tensor& stack, const PipelineConfig& cfg, const NeuralNet* cda,
                                                  const Codebook& book);

struct ProposedFitOptions {
  /// Reuse a trained denoiser instead of fitting one.
  const NeuralNet* cda = nullptr;
  std::size_t jobs = 1;
};

/// Fits CDA (if enabled and not supplied), the codebook and the SVM.
ProposedModel fit_proposed(std::span<const Tensor> stacks, std::span<const int> labels, std::size_t n_classes,
                           const PipelineConfig& cfg, std::uint64_t seed, const ProposedFitOptions& opts = {});

/// Encoded features of every training sample, cached so the SVM can be
/// retrained on other labels without re-extracting descriptors.
struct EncodedSet {
  std::vector<std::vector<std::vector<double>>> per_sample;  ///< sample -> variant -> features
};

EncodedSet encode_set(std::span<const Tensor> stacks, const ProposedModel& model, std::size_t jobs = 1);

/// Refits standardization and SVM on `labels`, keeping CDA and codebook.
void refit_classifier(ProposedModel& model, const EncodedSet& encoded, std::span<const int> labels,
                      std::size_t n_classes);

/// Decision values averaged over variants.
std::vector<double> proposed_decisions(const ProposedModel& model, const Tensor& stack);
int proposed_predict(const ProposedModel& model, const Tensor& stack);
/// Same, from precomputed variant features.
int proposed_predict_encoded(const ProposedModel& model, const std::vector<std::vector<double>>& variants);

/// Writes cda.nnc (when present), codebook.kmb, svm.msv and scaler.bin
/// ("SCL1", u32 dim, mean then scale as f64) into `dir`.
void save_proposed(const std::filesystem::path& dir, const ProposedModel& model);
/// Inverse of save_proposed; `cfg` must match the one used for training.
ProposedModel load_proposed(const std::filesystem::path& dir, const PipelineConfig& cfg, std::size_t channels);

struct LabeledClip {
  AudioClip clip;
  int label = 0;
  std::string source_id;
};

/// Synthetic classes that differ in temporal texture: steady tone, gated
/// tone, linear chirp, two-tone chord and noise burst (first `classes` of
/// these), each with random pitch and additive noise.
std::vector<LabeledClip> synth_clips(const DatasetConfig& cfg, std::uint64_t seed);
std::vector<std::string> synth_class_names(std::size_t classes);

}  // namespace specguard
