#include "specguard/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "specguard/binary_io.hpp"
#include "specguard/error.hpp"
#include "specguard/parallel.hpp"
#include "specguard/random.hpp"
#include "specguard/spectra.hpp"

namespace specguard {

namespace {

Matrix fit_image(const Matrix& m, const RepresentationConfig& cfg) {
  return resize_bilinear(minmax_normalize(m), cfg.image_rows, cfg.image_cols);
}

std::size_t channel_of(MagnitudeScale scale) {
  const auto& scales = stack_scales();
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (scales[i] == scale) return i;
  }
  fail(ErrorKind::Config, "magnitude scale " + to_string(scale) + " is not part of the stack");
}

std::vector<std::vector<double>> standardized(const ProposedModel& model,
                                              const std::vector<std::vector<double>>& variants) {
  std::vector<std::vector<double>> out = variants;
  for (auto& f : out) {
    require(f.size() == model.feature_mean.size(), ErrorKind::Shape, "feature size does not match the model");
    for (std::size_t j = 0; j < f.size(); ++j) f[j] = (f[j] - model.feature_mean[j]) / model.feature_scale[j];
  }
  return out;
}

std::vector<double> averaged_decisions(const ProposedModel& model,
                                       const std::vector<std::vector<double>>& variants) {
  require(!variants.empty(), ErrorKind::State, "no preprocessing variants");
  std::vector<double> sum(model.svm.n_classes(), 0.0);
  for (const auto& f : standardized(model, variants)) {
    const auto d = multiclass_decisions(model.svm, f);
    for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += d[c];
  }
  for (auto& v : sum) v /= static_cast<double>(variants.size());
  return sum;
}

/// Luminance image of every enabled variant of one sample.
std::vector<Matrix> prepared_images(const Tensor& stack, const PipelineConfig& cfg, const NeuralNet* cda) {
  std::vector<Matrix> out;
  for (const auto& spec : variant_specs(cfg, stack.shape.c)) {
    out.push_back(preprocess(stack_channel(stack, spec.channel), spec, cfg, cda));
  }
  return out;
}

ZoningPlan zoning(const PipelineConfig& cfg) {
  return ZoningPlan{cfg.features.zone_sizes, cfg.features.strides};
}

std::vector<std::vector<double>> descriptor_vectors(const Matrix& img, const ZoningPlan& plan) {
  std::vector<std::vector<double>> out;
  for (const auto& d : extract_descriptors(img, plan)) out.emplace_back(d.values.begin(), d.values.end());
  return out;
}

}  // namespace

const std::vector<MagnitudeScale>& stack_scales() {
  static const std::vector<MagnitudeScale> scales{MagnitudeScale::Linear, MagnitudeScale::Logarithmic,
                                                  MagnitudeScale::LogarithmicReal};
  return scales;
}

Matrix base_image(const AudioClip& clip, const RepresentationConfig& cfg, MagnitudeScale scale) {
  validate(clip);
  if (cfg.kind == "dwt") {
    DwtParams p;
    p.n_scales = cfg.dwt_scales;
    p.morlet_factor = cfg.morlet_factor;
    p.octaves = cfg.octaves;
    p.hop = std::max<std::size_t>(1, clip.samples.size() / cfg.image_cols);
    return fit_image(dwt_spectrogram(clip, p, scale).data, cfg);
  }
  const auto framing = StftParams::from_ms(cfg.stft_frame_ms, clip.sample_rate);
  const auto s = stft(clip, framing);
  if (cfg.kind == "stft") return fit_image(s.data, cfg);
  if (cfg.kind == "pool") {
    MfccParams mp;
    mp.framing = framing;
    return fit_image(pool(s, mfcc(clip, mp), crp(clip)).data, cfg);
  }
  fail(ErrorKind::Config, "unknown representation kind '" + cfg.kind + "'");
}

Tensor clip_stack(const AudioClip& clip, const RepresentationConfig& cfg) {
  std::vector<Matrix> channels;
  if (cfg.kind == "dwt") {
    for (auto scale : stack_scales()) channels.push_back(base_image(clip, cfg, scale));
  } else {
    channels.push_back(base_image(clip, cfg, MagnitudeScale::None));
  }
  Tensor t;
  t.shape = Shape{channels.size(), cfg.image_rows, cfg.image_cols};
  t.data.reserve(t.shape.size());
  for (const auto& m : channels) t.data.insert(t.data.end(), m.data().begin(), m.data().end());
  return t;
}

Matrix stack_channel(const Tensor& stack, std::size_t channel) {
  require(channel < stack.shape.c, ErrorKind::Shape, "stack channel out of range");
  require(stack.data.size() == stack.shape.size(), ErrorKind::Shape, "stack data does not match its shape");
  Matrix m(stack.shape.h, stack.shape.w);
  const std::size_t plane = stack.shape.h * stack.shape.w;
  std::copy_n(stack.data.begin() + static_cast<std::ptrdiff_t>(channel * plane), plane, m.data().begin());
  return m;
}

std::vector<VariantSpec> variant_specs(const PipelineConfig& cfg, std::size_t channels) {
  require(channels > 0, ErrorKind::Shape, "stack has no channels");
  std::vector<std::size_t> used;
  if (channels == stack_scales().size()) {
    if (cfg.representation.multi_scale) {
      for (std::size_t c = 0; c < channels; ++c) used.push_back(c);
    } else {
      used.push_back(channel_of(cfg.representation.primary_scale));
    }
  } else {
    used.push_back(0);
  }
  std::vector<VariantSpec> out;
  for (auto ch : used) {
    if (cfg.color.enabled) {
      for (std::size_t p = 0; p < cfg.color.palettes.size(); ++p) {
        out.push_back(VariantSpec{ch, cfg.color.palettes[p], cfg.color.c[p]});
      }
    } else {
      out.push_back(VariantSpec{ch, Palette::Gray, 1.0});
    }
  }
  return out;
}

ColorSpectrogram enhance(const Matrix& image, const VariantSpec& spec, const PipelineConfig& cfg) {
  auto img = colorize(image, spec.palette, spec.c);
  if (cfg.highboost.enabled) img = highboost(img, cfg.highboost.c);
  return img;
}

Matrix preprocess(const Matrix& image, const VariantSpec& spec, const PipelineConfig& cfg, const NeuralNet* cda) {
  auto img = enhance(image, spec, cfg);
  if (cfg.svd.enabled) img = svd_smooth(img, cfg.svd.n_prime);
  if (cfg.cda.enabled) {
    require(cda != nullptr, ErrorKind::State, "denoiser enabled but not trained");
    img = cda_smooth(*cda, img);
  }
  return luminance(img);
}

TrainResult fit_cda(std::span<const Tensor> stacks, const PipelineConfig& cfg, std::uint64_t seed) {
  require(!stacks.empty(), ErrorKind::Size, "no images to train the denoiser");
  struct Source {
    std::size_t sample;
    VariantSpec spec;
  };
  std::vector<Source> pool_items;
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    for (const auto& spec : variant_specs(cfg, stacks[i].shape.c)) pool_items.push_back(Source{i, spec});
  }
  std::mt19937_64 rng(derive_seed(seed, {0x434441}));
  std::shuffle(pool_items.begin(), pool_items.end(), rng);
  pool_items.resize(std::min(pool_items.size(), cfg.cda.train_images));

  std::vector<TrainSample> data;
  data.reserve(pool_items.size());
  for (std::size_t i = 0; i < pool_items.size(); ++i) {
    const auto& item = pool_items[i];
    const auto clean = enhance(stack_channel(stacks[item.sample], item.spec.channel), item.spec, cfg);
    Tensor target = to_tensor(clean);
    Tensor input;
    if (cfg.svd.enabled && i % 2 == 0) {
      input = to_tensor(svd_smooth(clean, cfg.svd.n_prime));
    } else {
      input = mask_corrupt(target, cfg.cda.corruption, rng);
    }
    data.push_back(TrainSample{std::move(input), LossTarget::mse(std::move(target))});
  }

  CdaConfig net_cfg;
  net_cfg.input = Shape{3, cfg.representation.image_rows, cfg.representation.image_cols};
  net_cfg.filters1 = cfg.cda.filters.at(0);
  net_cfg.filters2 = cfg.cda.filters.at(1);
  net_cfg.filters3 = cfg.cda.filters.at(2);
  net_cfg.dropout = cfg.cda.dropout;
  TrainConfig tc;
  tc.epochs = cfg.cda.epochs;
  tc.batch_size = cfg.cda.batch_size;
  tc.learning_rate = cfg.cda.learning_rate;
  tc.loss = Loss::Mse;
  tc.early_stop_patience = cfg.cda.patience;
  tc.seed = derive_seed(seed, {0x434441, 1});
  return train(make_cda(net_cfg, derive_seed(seed, {0x434441, 2})), data, {}, tc);
}

std::vector<std::vector<double>> variant_features(const Tensor& stack, const PipelineConfig& cfg, const NeuralNet* cda,
                                                  const Codebook& book) {
  const auto plan = zoning(cfg);
  std::vector<std::vector<double>> out;
  for (const auto& img : prepared_images(stack, cfg, cda)) out.push_back(encode(descriptor_vectors(img, plan), book));
  return out;
}

EncodedSet encode_set(std::span<const Tensor> stacks, const ProposedModel& model, std::size_t jobs) {
  EncodedSet set;
  set.per_sample.resize(stacks.size());
  const NeuralNet* cda = model.cda ? &*model.cda : nullptr;
  parallel_for(stacks.size(), jobs, [&](std::size_t i) {
    set.per_sample[i] = variant_features(stacks[i], model.cfg, cda, model.codebook);
  });
  return set;
}

void refit_classifier(ProposedModel& model, const EncodedSet& encoded, std::span<const int> labels,
                      std::size_t n_classes) {
  require(encoded.per_sample.size() == labels.size(), ErrorKind::Size, "encoded set and labels differ in length");
  std::vector<std::vector<double>> rows;
  std::vector<int> row_labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (const auto& f : encoded.per_sample[i]) {
      rows.push_back(f);
      row_labels.push_back(labels[i]);
    }
  }
  require(!rows.empty(), ErrorKind::Size, "no training features");
  const std::size_t dim = rows.front().size();
  model.feature_mean.assign(dim, 0.0);
  model.feature_scale.assign(dim, 0.0);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < dim; ++j) model.feature_mean[j] += r[j];
  }
  for (auto& m : model.feature_mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = r[j] - model.feature_mean[j];
      model.feature_scale[j] += d * d;
    }
  }
  for (auto& s : model.feature_scale) {
    s = std::sqrt(s / static_cast<double>(rows.size()));
    if (s < 1e-8) s = 1.0;
  }
  for (auto& r : rows) {
    for (std::size_t j = 0; j < dim; ++j) r[j] = (r[j] - model.feature_mean[j]) / model.feature_scale[j];
  }
  model.svm = multiclass_train(rows, row_labels, n_classes, model.cfg.svm.kernel_spec(), model.cfg.svm.cost);
}

ProposedModel fit_proposed(std::span<const Tensor> stacks, std::span<const int> labels, std::size_t n_classes,
                           const PipelineConfig& cfg, std::uint64_t seed, const ProposedFitOptions& opts) {
  require(stacks.size() == labels.size(), ErrorKind::Size, "stacks and labels differ in length");
  require(!stacks.empty(), ErrorKind::Size, "empty training set");
  ProposedModel model;
  model.cfg = cfg;
  model.channels = stacks.front().shape.c;
  if (cfg.cda.enabled) {
    model.cda = opts.cda ? *opts.cda : fit_cda(stacks, cfg, seed).net;
  }
  const NeuralNet* cda = model.cda ? &*model.cda : nullptr;

  std::vector<std::vector<Matrix>> images(stacks.size());
  parallel_for(stacks.size(), opts.jobs, [&](std::size_t i) { images[i] = prepared_images(stacks[i], cfg, cda); });

  const auto plan = zoning(cfg);
  std::size_t n_images = 0;
  for (const auto& v : images) n_images += v.size();
  const std::size_t per_image =
      std::max<std::size_t>(1, (cfg.features.codebook_samples + n_images - 1) / std::max<std::size_t>(1, n_images));
  std::vector<std::vector<std::vector<double>>> sampled(stacks.size());
  parallel_for(stacks.size(), opts.jobs, [&](std::size_t i) {
    for (std::size_t v = 0; v < images[i].size(); ++v) {
      auto desc = descriptor_vectors(images[i][v], plan);
      std::mt19937_64 rng(derive_seed(seed, {0x4b4d, i, v}));
      std::shuffle(desc.begin(), desc.end(), rng);
      if (desc.size() > per_image) desc.resize(per_image);
      for (auto& d : desc) sampled[i].push_back(std::move(d));
    }
  });
  std::vector<std::vector<double>> pool_desc;
  for (auto& s : sampled) {
    for (auto& d : s) pool_desc.push_back(std::move(d));
  }
  if (pool_desc.size() > cfg.features.codebook_samples) {
    std::mt19937_64 rng(derive_seed(seed, {0x4b4d}));
    std::shuffle(pool_desc.begin(), pool_desc.end(), rng);
    pool_desc.resize(cfg.features.codebook_samples);
  }
  KMeansOptions km;
  km.n_init = cfg.features.kmeans_n_init;
  model.codebook = kmeanspp_fit(pool_desc, cfg.features.codebook_k, derive_seed(seed, {0x4b4d, 1}), km);

  EncodedSet encoded;
  encoded.per_sample.resize(stacks.size());
  parallel_for(stacks.size(), opts.jobs, [&](std::size_t i) {
    for (const auto& img : images[i]) encoded.per_sample[i].push_back(encode(descriptor_vectors(img, plan), model.codebook));
  });
  refit_classifier(model, encoded, labels, n_classes);
  return model;
}

std::vector<double> proposed_decisions(const ProposedModel& model, const Tensor& stack) {
  const NeuralNet* cda = model.cda ? &*model.cda : nullptr;
  return averaged_decisions(model, variant_features(stack, model.cfg, cda, model.codebook));
}

int proposed_predict(const ProposedModel& model, const Tensor& stack) {
  return static_cast<int>(argmax(proposed_decisions(model, stack)));
}

int proposed_predict_encoded(const ProposedModel& model, const std::vector<std::vector<double>>& variants) {
  return static_cast<int>(argmax(averaged_decisions(model, variants)));
}

void save_proposed(const std::filesystem::path& dir, const ProposedModel& model) {
  std::filesystem::create_directories(dir);
  if (model.cda) model.cda->save(dir / "cda.nnc");
  write_codebook(dir / "codebook.kmb", model.codebook);
  save_multiclass(dir / "svm.msv", model.svm);
  std::ofstream out(dir / "scaler.bin", std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + (dir / "scaler.bin").string());
  binio::write_magic(out, "SCL1");
  binio::write_u32(out, static_cast<std::uint32_t>(model.feature_mean.size()));
  for (double v : model.feature_mean) binio::write_f64(out, v);
  for (double v : model.feature_scale) binio::write_f64(out, v);
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + (dir / "scaler.bin").string());
}

ProposedModel load_proposed(const std::filesystem::path& dir, const PipelineConfig& cfg, std::size_t channels) {
  ProposedModel model;
  model.cfg = cfg;
  model.channels = channels;
  if (cfg.cda.enabled) model.cda = NeuralNet::load(dir / "cda.nnc");
  model.codebook = read_codebook(dir / "codebook.kmb");
  model.svm = load_multiclass(dir / "svm.msv");
  const auto path = dir / "scaler.bin";
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  binio::expect_magic(in, "SCL1");
  const std::uint32_t dim = binio::read_u32(in);
  require(dim == model.codebook.k(), ErrorKind::Format, "scaler size does not match the codebook");
  model.feature_mean.resize(dim);
  model.feature_scale.resize(dim);
  for (auto& v : model.feature_mean) v = binio::read_f64(in);
  for (auto& v : model.feature_scale) v = binio::read_f64(in);
  require(static_cast<bool>(in), ErrorKind::Format, "truncated scaler file " + path.string());
  for (double v : model.feature_scale) require(v > 0.0, ErrorKind::Format, "scaler has a non-positive scale");
  return model;
}

std::vector<std::string> synth_class_names(std::size_t classes) {
  static const std::vector<std::string> names{"steady", "pulsed", "chirp", "chord", "burst"};
  require(classes >= 2 && classes <= names.size(), ErrorKind::Config, "synthetic classes must be in [2, 5]");
  return {names.begin(), names.begin() + static_cast<std::ptrdiff_t>(classes)};
}

std::vector<LabeledClip> synth_clips(const DatasetConfig& cfg, std::uint64_t seed) {
  const auto names = synth_class_names(cfg.classes);
  require(cfg.sample_rate > 0 && cfg.duration > 0.0, ErrorKind::Config, "invalid synthetic clip format");
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration * cfg.sample_rate));
  require(n >= 64, ErrorKind::Config, "synthetic clips are too short");
  const double rate = cfg.sample_rate;
  const double two_pi = 2.0 * std::numbers::pi;
  const double f_max = std::min(2000.0, 0.4 * rate);
  std::vector<LabeledClip> out;
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    for (std::size_t i = 0; i < cfg.clips_per_class; ++i) {
      std::mt19937_64 rng(derive_seed(seed, {0x53594e, k, i}));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      const double f = 400.0 + unit(rng) * (f_max - 400.0);
      const double phase = unit(rng) * two_pi;
      const double amp = 0.4 + 0.2 * unit(rng);
      const double gate_hz = 6.0 + 6.0 * unit(rng);
      const double sweep = unit(rng) < 0.5 ? 0.5 : 2.0;
      std::vector<double> x(n);
      for (std::size_t t = 0; t < n; ++t) {
        const double s = static_cast<double>(t) / rate;
        double v = 0.0;
        switch (k) {
          case 0:
            v = std::sin(two_pi * f * s + phase);
            break;
          case 1:
            v = std::fmod(s * gate_hz, 1.0) < 0.5 ? std::sin(two_pi * f * s + phase) : 0.0;
            break;
          case 2: {
            const double f1 = std::clamp(f * sweep, 200.0, f_max);
            v = std::sin(two_pi * (f * s + (f1 - f) * s * s / (2.0 * cfg.duration)) + phase);
            break;
          }
          case 3:
            v = 0.5 * (std::sin(two_pi * f * s + phase) + std::sin(two_pi * std::min(1.5 * f, f_max) * s));
            break;
          default:
            v = gauss(rng) * std::exp(-6.0 * std::fmod(s * gate_hz * 0.5, 1.0));
            break;
        }
        x[t] = std::clamp(amp * v + cfg.noise * gauss(rng), -1.0, 1.0);
      }
      LabeledClip lc;
      lc.clip.samples = std::move(x);
      lc.clip.sample_rate = cfg.sample_rate;
      lc.clip.label = static_cast<int>(k);
      lc.label = static_cast<int>(k);
      lc.source_id = names[k] + "-" + std::to_string(i);
      lc.clip.source_id = lc.source_id;
      out.push_back(std::move(lc));
    }
  }
  return out;
}

}  // namespace specguard
