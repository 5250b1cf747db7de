#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "specguard/imaging.hpp"

namespace specguard {

struct Shape {
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t size() const noexcept { return c * h * w; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

/// Channel-major (C, H, W) tensor.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}
  Tensor(Shape s, std::vector<double> values);

  double& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * shape.h + y) * shape.w + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * shape.h + y) * shape.w + x]; }
};

enum class LayerKind : std::uint32_t {
  Conv = 1,
  Dense = 2,
  Relu = 3,
  Sigmoid = 4,
  MaxPool2 = 5,
  Dropout = 6,
  Upsample2 = 7,
  Softmax = 8,
};

std::string to_string(LayerKind kind);

struct Layer {
  LayerKind kind = LayerKind::Relu;
  Shape in;
  Shape out;
  std::size_t kernel = 0;  ///< conv only, odd
  std::size_t stride = 1;  ///< conv only
  double rate = 0.0;       ///< dropout only
  /// Conv: [out][in][ky][kx]. Dense: [out][in].
  std::vector<double> weights;
  std::vector<double> bias;
};

enum class Loss { CrossEntropy, Mse };

/// Cross-entropy is taken on softmax(logits) where logits are the outputs of
/// the layer before a trailing softmax (or the raw outputs if there is none).
/// MSE is the mean of squared differences on the network output.
struct LossTarget {
  Loss loss = Loss::CrossEntropy;
  Tensor target;

  static LossTarget label(std::size_t cls, std::size_t n_classes);
  static LossTarget mse(Tensor target);
};

class NeuralNet {
 public:
  NeuralNet() = default;
  explicit NeuralNet(Shape input, std::uint64_t rng_seed = 0);

  /// 'same' padding; output spatial size is ceil(in / stride).
  NeuralNet& conv(std::size_t filters, std::size_t kernel = 5, std::size_t stride = 1);
  NeuralNet& dense(std::size_t outputs);
  NeuralNet& relu();
  NeuralNet& sigmoid();
  NeuralNet& maxpool();
  /// Non-inverted dropout: training zeroes units with probability `rate`,
  /// evaluation scales by (1 - rate).
  NeuralNet& dropout(double rate);
  NeuralNet& upsample();
  NeuralNet& softmax();

  Shape input_shape() const noexcept { return input_; }
  Shape output_shape() const noexcept { return layers_.empty() ? input_ : layers_.back().out; }
  std::uint64_t rng_seed() const noexcept { return seed_; }
  bool trained() const noexcept { return trained_; }
  void set_trained(bool value) noexcept { trained_ = value; }

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& mutable_layers() noexcept { return layers_; }
  std::size_t parameter_count() const;

  /// Train mode draws dropout masks from `mask_seed`.
  Tensor forward(const Tensor& input, bool train_mode = false, std::uint64_t mask_seed = 0) const;
  /// Output before a trailing softmax.
  Tensor logits(const Tensor& input) const;
  std::size_t predict(const Tensor& input) const;

  double loss(const Tensor& input, const LossTarget& target) const;
  /// Eval-mode d loss / d input.
  Tensor gradient_input(const Tensor& input, const LossTarget& target) const;
  /// Eval-mode d (sum_j coeffs_j * logits_j) / d input.
  Tensor logit_gradient(const Tensor& input, std::span<const double> coeffs) const;

  struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> bias;
    Tensor input;
    double loss = 0.0;
  };
  Gradients backprop(const Tensor& input, const LossTarget& target, bool train_mode = false,
                     std::uint64_t mask_seed = 0) const;

  void validate() const;

  /// NNC1 checkpoint.
  void save(const std::filesystem::path& path) const;
  static NeuralNet load(const std::filesystem::path& path);

 private:
  struct Trace;
  Tensor run(const Tensor& input, bool train_mode, std::uint64_t mask_seed, Trace* trace,
             std::size_t stop) const;
  Tensor back(const Trace& trace, Tensor grad, std::size_t from, Gradients* grads) const;
  void push(Layer layer);
  std::size_t softmax_tail() const;

  Shape input_;
  std::vector<Layer> layers_;
  std::uint64_t seed_ = 0;
  std::mt19937_64 init_rng_;
  bool trained_ = false;
};

std::size_t argmax(std::span<const double> values);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 0.01;
  Loss loss = Loss::CrossEntropy;
  std::size_t early_stop_patience = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainSample {
  Tensor input;
  LossTarget target;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;  ///< NaN for MSE
};

struct TrainResult {
  NeuralNet net;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

/// Mini-batch SGD. Keeps the parameters of the epoch with the lowest
/// validation loss (training loss when `validation` is empty) and stops after
/// `early_stop_patience` epochs without improvement.
TrainResult train(NeuralNet net, std::span<const TrainSample> data, std::span<const TrainSample> validation,
                  const TrainConfig& cfg);

struct CdaConfig {
  Shape input{3, 32, 32};
  std::size_t filters1 = 8;
  std::size_t filters2 = 16;
  std::size_t filters3 = 16;
  double dropout = 0.5;
};

/// Encoder conv-relu-pool, conv-relu-pool, conv-relu(-dropout); decoder
/// upsample-conv-relu, upsample-conv-sigmoid back to the input channels.
NeuralNet make_cda(const CdaConfig& cfg, std::uint64_t seed);

/// conv(5x5, 8)-relu-pool-conv(5x5, 16)-relu-pool-dense(64)-relu-dense(classes)-softmax.
NeuralNet make_surrogate_cnn(Shape input, std::size_t classes, std::uint64_t seed);

/// Masking noise: each value is zeroed with probability `rate`.
Tensor mask_corrupt(const Tensor& clean, double rate, std::mt19937_64& rng);

Tensor to_tensor(const ColorSpectrogram& img);
ColorSpectrogram to_color(const Tensor& t, Palette palette, double scale_c);

/// Resizes to the net input, denoises, clips to [0, 1] and resizes back.
ColorSpectrogram cda_smooth(const NeuralNet& net, const ColorSpectrogram& img);

/// Peak signal-to-noise ratio in dB for signals in [0, 1].
double psnr(std::span<const double> reference, std::span<const double> test);

}  // namespace specguard
