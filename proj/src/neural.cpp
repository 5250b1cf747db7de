#include "specguard/neural.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "specguard/binary_io.hpp"
#include "specguard/error.hpp"
#include "specguard/kernels.hpp"
#include "specguard/random.hpp"
#include "specguard/spectra.hpp"

namespace specguard {

namespace fs = std::filesystem;

std::string to_string(const Shape& shape) {
  return std::to_string(shape.c) + "x" + std::to_string(shape.h) + "x" + std::to_string(shape.w);
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(s), data(std::move(values)) {
  require(data.size() == shape.size(), ErrorKind::Shape, "tensor data does not match shape " + to_string(shape));
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Dense: return "dense";
    case LayerKind::Relu: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::MaxPool2: return "maxpool";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Upsample2: return "upsample";
    case LayerKind::Softmax: return "softmax";
  }
  return "unknown";
}

LossTarget LossTarget::label(std::size_t cls, std::size_t n_classes) {
  require(cls < n_classes, ErrorKind::Domain, "label out of range");
  Tensor t(Shape{n_classes, 1, 1});
  t.data[cls] = 1.0;
  return LossTarget{Loss::CrossEntropy, std::move(t)};
}

LossTarget LossTarget::mse(Tensor target) { return LossTarget{Loss::Mse, std::move(target)}; }

std::size_t argmax(std::span<const double> values) {
  require(!values.empty(), ErrorKind::Size, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

NeuralNet::NeuralNet(Shape input, std::uint64_t rng_seed) : input_(input), seed_(rng_seed), init_rng_(rng_seed) {
  require(input.size() > 0, ErrorKind::Shape, "network input must be non-empty");
}

namespace {
Layer make_layer(LayerKind kind) {
  Layer l;
  l.kind = kind;
  return l;
}
}  // namespace

void NeuralNet::push(Layer layer) {
  layer.in = output_shape();
  switch (layer.kind) {
    case LayerKind::Conv: {
      layer.out = Shape{layer.out.c, (layer.in.h + layer.stride - 1) / layer.stride,
                        (layer.in.w + layer.stride - 1) / layer.stride};
      const std::size_t fan_in = layer.in.c * layer.kernel * layer.kernel;
      layer.weights.resize(layer.out.c * fan_in);
      layer.bias.assign(layer.out.c, 0.0);
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (double& w : layer.weights) w = dist(init_rng_);
      break;
    }
    case LayerKind::Dense: {
      const std::size_t fan_in = layer.in.size();
      layer.weights.resize(layer.out.c * fan_in);
      layer.bias.assign(layer.out.c, 0.0);
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (double& w : layer.weights) w = dist(init_rng_);
      break;
    }
    case LayerKind::MaxPool2:
      require(layer.in.h >= 2 && layer.in.w >= 2, ErrorKind::Shape, "maxpool input smaller than 2x2");
      layer.out = Shape{layer.in.c, layer.in.h / 2, layer.in.w / 2};
      break;
    case LayerKind::Upsample2:
      layer.out = Shape{layer.in.c, layer.in.h * 2, layer.in.w * 2};
      break;
    default:
      layer.out = layer.in;
      break;
  }
  layers_.push_back(std::move(layer));
}

NeuralNet& NeuralNet::conv(std::size_t filters, std::size_t kernel, std::size_t stride) {
  require(filters > 0, ErrorKind::Shape, "conv needs at least one filter");
  require(kernel % 2 == 1, ErrorKind::Shape, "conv kernel size must be odd");
  require(stride >= 1, ErrorKind::Shape, "conv stride must be positive");
  Layer l;
  l.kind = LayerKind::Conv;
  l.kernel = kernel;
  l.stride = stride;
  l.out.c = filters;
  push(std::move(l));
  return *this;
}

NeuralNet& NeuralNet::dense(std::size_t outputs) {
  require(outputs > 0, ErrorKind::Shape, "dense layer needs outputs");
  Layer l;
  l.kind = LayerKind::Dense;
  l.out = Shape{outputs, 1, 1};
  push(std::move(l));
  return *this;
}

NeuralNet& NeuralNet::relu() {
  push(make_layer(LayerKind::Relu));
  return *this;
}

NeuralNet& NeuralNet::sigmoid() {
  push(make_layer(LayerKind::Sigmoid));
  return *this;
}

NeuralNet& NeuralNet::maxpool() {
  push(make_layer(LayerKind::MaxPool2));
  return *this;
}

NeuralNet& NeuralNet::dropout(double rate) {
  require(rate >= 0.0 && rate < 1.0, ErrorKind::Domain, "dropout rate must lie in [0, 1)");
  Layer l;
  l.kind = LayerKind::Dropout;
  l.rate = rate;
  push(std::move(l));
  return *this;
}

NeuralNet& NeuralNet::upsample() {
  push(make_layer(LayerKind::Upsample2));
  return *this;
}

NeuralNet& NeuralNet::softmax() {
  push(make_layer(LayerKind::Softmax));
  return *this;
}

std::size_t NeuralNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

void NeuralNet::validate() const {
  Shape cur = input_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    require(l.in == cur, ErrorKind::Shape, "layer " + std::to_string(i) + " shape does not compose");
    require(all_finite(l.weights) && all_finite(l.bias), ErrorKind::Domain,
            "layer " + std::to_string(i) + " has non-finite parameters");
    if (l.kind == LayerKind::Dropout)
      require(l.rate >= 0.0 && l.rate < 1.0, ErrorKind::Domain, "dropout rate must lie in [0, 1)");
    cur = l.out;
  }
}

struct NeuralNet::Trace {
  std::vector<Tensor> inputs;
  std::vector<std::vector<std::uint32_t>> argmax;
  std::vector<std::vector<std::uint8_t>> masks;
};

namespace {

double sigmoid_fn(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void softmax_inplace(std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

/// d CE / d logits. For a one-hot target the true-class entry is computed as
/// minus the mass of the other classes so it does not round to zero when the
/// prediction saturates.
Tensor ce_logit_gradient(const Tensor& z, const std::vector<double>& t) {
  std::vector<double> p = z.data;
  softmax_inplace(p);
  const double tsum = std::accumulate(t.begin(), t.end(), 0.0);
  Tensor grad(z.shape);
  for (std::size_t i = 0; i < p.size(); ++i) grad.data[i] = tsum * p[i] - t[i];
  std::size_t hot = t.size();
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != 0.0) {
      hot = i;
      ++nonzero;
    }
  }
  if (nonzero == 1 && t[hot] == 1.0) {
    double rest = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (i != hot) rest += p[i];
    }
    grad.data[hot] = -rest;
  }
  return grad;
}

void conv_forward(const Layer& l, const Tensor& in, Tensor& out) {
  const std::size_t k = l.kernel, pad = k / 2, s = l.stride;
  const std::size_t H = in.shape.h, W = in.shape.w, OH = l.out.h, OW = l.out.w;
  for (std::size_t o = 0; o < l.out.c; ++o) {
    double* dst = &out.data[o * OH * OW];
    std::fill(dst, dst + OH * OW, l.bias[o]);
    for (std::size_t i = 0; i < l.in.c; ++i) {
      const double* src = &in.data[i * H * W];
      const double* wk = &l.weights[((o * l.in.c) + i) * k * k];
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double w = wk[ky * k + kx];
          if (w == 0.0) continue;
          if (s == 1) {
            const std::size_t x0 = kx < pad ? pad - kx : 0;
            const std::size_t x1 = std::min(W, W + pad - kx);
            if (x1 <= x0) continue;
            for (std::size_t oy = 0; oy < OH; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
              kernels::axpy(w, std::span<const double>(src + iy * W + x0 + kx - pad, x1 - x0),
                            std::span<double>(dst + oy * OW + x0, x1 - x0));
            }
          } else {
            for (std::size_t oy = 0; oy < OH; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) - static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
              for (std::size_t ox = 0; ox < OW; ++ox) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kx) - static_cast<std::ptrdiff_t>(pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                dst[oy * OW + ox] += w * src[iy * W + ix];
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward(const Layer& l, const Tensor& in, const Tensor& gout, Tensor& gin, std::vector<double>* gw,
                   std::vector<double>* gb) {
  const std::size_t k = l.kernel, pad = k / 2, s = l.stride;
  const std::size_t H = in.shape.h, W = in.shape.w, OH = l.out.h, OW = l.out.w;
  for (std::size_t o = 0; o < l.out.c; ++o) {
    const double* g = &gout.data[o * OH * OW];
    if (gb) (*gb)[o] += std::accumulate(g, g + OH * OW, 0.0);
    for (std::size_t i = 0; i < l.in.c; ++i) {
      const double* src = &in.data[i * H * W];
      double* gsrc = &gin.data[i * H * W];
      const std::size_t widx = ((o * l.in.c) + i) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double w = l.weights[widx + ky * k + kx];
          double acc = 0.0;
          if (s == 1) {
            const std::size_t x0 = kx < pad ? pad - kx : 0;
            const std::size_t x1 = std::min(W, W + pad - kx);
            if (x1 <= x0) continue;
            for (std::size_t oy = 0; oy < OH; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
              std::span<const double> gseg(g + oy * OW + x0, x1 - x0);
              const std::size_t off = iy * W + x0 + kx - pad;
              if (gw) acc += kernels::dot(gseg, std::span<const double>(src + off, x1 - x0));
              if (w != 0.0) kernels::axpy(w, gseg, std::span<double>(gsrc + off, x1 - x0));
            }
          } else {
            for (std::size_t oy = 0; oy < OH; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) - static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
              for (std::size_t ox = 0; ox < OW; ++ox) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kx) - static_cast<std::ptrdiff_t>(pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                acc += g[oy * OW + ox] * src[iy * W + ix];
                gsrc[iy * W + ix] += w * g[oy * OW + ox];
              }
            }
          }
          if (gw) (*gw)[widx + ky * k + kx] += acc;
        }
      }
    }
  }
}

}  // namespace

Tensor NeuralNet::run(const Tensor& input, bool train_mode, std::uint64_t mask_seed, Trace* trace,
                      std::size_t stop) const {
  require(input.shape == input_ && input.data.size() == input_.size(), ErrorKind::Shape,
          "input shape " + to_string(input.shape) + " does not match network input " + to_string(input_));
  std::mt19937_64 rng(mask_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (trace) {
    trace->inputs.assign(stop, Tensor{});
    trace->argmax.assign(stop, {});
    trace->masks.assign(stop, {});
  }
  Tensor cur = input;
  for (std::size_t li = 0; li < stop; ++li) {
    const Layer& l = layers_[li];
    Tensor next(l.out);
    switch (l.kind) {
      case LayerKind::Conv:
        conv_forward(l, cur, next);
        break;
      case LayerKind::Dense: {
        const std::size_t n_in = l.in.size();
        for (std::size_t o = 0; o < l.out.c; ++o) {
          next.data[o] = l.bias[o] + kernels::dot(std::span<const double>(&l.weights[o * n_in], n_in), cur.data);
        }
        break;
      }
      case LayerKind::Relu:
        for (std::size_t i = 0; i < cur.data.size(); ++i) next.data[i] = cur.data[i] > 0.0 ? cur.data[i] : 0.0;
        break;
      case LayerKind::Sigmoid:
        for (std::size_t i = 0; i < cur.data.size(); ++i) next.data[i] = sigmoid_fn(cur.data[i]);
        break;
      case LayerKind::MaxPool2: {
        std::vector<std::uint32_t> arg(next.data.size());
        const std::size_t H = l.in.h, W = l.in.w;
        for (std::size_t c = 0; c < l.out.c; ++c) {
          for (std::size_t y = 0; y < l.out.h; ++y) {
            for (std::size_t x = 0; x < l.out.w; ++x) {
              std::size_t best = (c * H + 2 * y) * W + 2 * x;
              for (std::size_t dy = 0; dy < 2; ++dy)
                for (std::size_t dx = 0; dx < 2; ++dx) {
                  const std::size_t idx = (c * H + 2 * y + dy) * W + 2 * x + dx;
                  if (cur.data[idx] > cur.data[best]) best = idx;
                }
              const std::size_t o = (c * l.out.h + y) * l.out.w + x;
              next.data[o] = cur.data[best];
              arg[o] = static_cast<std::uint32_t>(best);
            }
          }
        }
        if (trace) trace->argmax[li] = std::move(arg);
        break;
      }
      case LayerKind::Dropout:
        if (train_mode) {
          std::vector<std::uint8_t> mask(cur.data.size());
          for (std::size_t i = 0; i < mask.size(); ++i) {
            mask[i] = unit(rng) >= l.rate ? 1 : 0;
            next.data[i] = mask[i] ? cur.data[i] : 0.0;
          }
          if (trace) trace->masks[li] = std::move(mask);
        } else {
          for (std::size_t i = 0; i < cur.data.size(); ++i) next.data[i] = cur.data[i] * (1.0 - l.rate);
        }
        break;
      case LayerKind::Upsample2:
        for (std::size_t c = 0; c < l.out.c; ++c)
          for (std::size_t y = 0; y < l.out.h; ++y)
            for (std::size_t x = 0; x < l.out.w; ++x) next.at(c, y, x) = cur.at(c, y / 2, x / 2);
        break;
      case LayerKind::Softmax:
        next.data = cur.data;
        softmax_inplace(next.data);
        break;
    }
    if (trace) trace->inputs[li] = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

Tensor NeuralNet::back(const Trace& trace, Tensor grad, std::size_t from, Gradients* grads) const {
  for (std::size_t li = from; li-- > 0;) {
    const Layer& l = layers_[li];
    const Tensor& in = trace.inputs[li];
    Tensor gin(l.in);
    switch (l.kind) {
      case LayerKind::Conv:
        conv_backward(l, in, grad, gin, grads ? &grads->weights[li] : nullptr, grads ? &grads->bias[li] : nullptr);
        break;
      case LayerKind::Dense: {
        const std::size_t n_in = l.in.size();
        for (std::size_t o = 0; o < l.out.c; ++o) {
          const double g = grad.data[o];
          if (g == 0.0) continue;
          kernels::axpy(g, std::span<const double>(&l.weights[o * n_in], n_in), gin.data);
          if (grads) {
            kernels::axpy(g, in.data, std::span<double>(&grads->weights[li][o * n_in], n_in));
            grads->bias[li][o] += g;
          }
        }
        break;
      }
      case LayerKind::Relu:
        for (std::size_t i = 0; i < gin.data.size(); ++i) gin.data[i] = in.data[i] > 0.0 ? grad.data[i] : 0.0;
        break;
      case LayerKind::Sigmoid:
        for (std::size_t i = 0; i < gin.data.size(); ++i) {
          const double s = sigmoid_fn(in.data[i]);
          gin.data[i] = grad.data[i] * s * (1.0 - s);
        }
        break;
      case LayerKind::MaxPool2: {
        const auto& arg = trace.argmax[li];
        for (std::size_t o = 0; o < arg.size(); ++o) gin.data[arg[o]] += grad.data[o];
        break;
      }
      case LayerKind::Dropout: {
        const auto& mask = trace.masks[li];
        for (std::size_t i = 0; i < gin.data.size(); ++i)
          gin.data[i] = mask.empty() ? grad.data[i] * (1.0 - l.rate) : (mask[i] ? grad.data[i] : 0.0);
        break;
      }
      case LayerKind::Upsample2:
        for (std::size_t c = 0; c < l.out.c; ++c)
          for (std::size_t y = 0; y < l.out.h; ++y)
            for (std::size_t x = 0; x < l.out.w; ++x) gin.at(c, y / 2, x / 2) += grad.at(c, y, x);
        break;
      case LayerKind::Softmax: {
        std::vector<double> p = in.data;
        softmax_inplace(p);
        const double gp = kernels::dot(grad.data, p);
        for (std::size_t i = 0; i < p.size(); ++i) gin.data[i] = p[i] * (grad.data[i] - gp);
        break;
      }
    }
    grad = std::move(gin);
  }
  return grad;
}

std::size_t NeuralNet::softmax_tail() const {
  if (!layers_.empty() && layers_.back().kind == LayerKind::Softmax) return layers_.size() - 1;
  return layers_.size();
}

Tensor NeuralNet::forward(const Tensor& input, bool train_mode, std::uint64_t mask_seed) const {
  return run(input, train_mode, mask_seed, nullptr, layers_.size());
}

Tensor NeuralNet::logits(const Tensor& input) const { return run(input, false, 0, nullptr, softmax_tail()); }

std::size_t NeuralNet::predict(const Tensor& input) const { return argmax(logits(input).data); }

NeuralNet::Gradients NeuralNet::backprop(const Tensor& input, const LossTarget& target, bool train_mode,
                                         std::uint64_t mask_seed) const {
  Gradients g;
  g.weights.resize(layers_.size());
  g.bias.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    g.weights[i].assign(layers_[i].weights.size(), 0.0);
    g.bias[i].assign(layers_[i].bias.size(), 0.0);
  }
  Trace trace;
  if (target.loss == Loss::CrossEntropy) {
    const std::size_t stop = softmax_tail();
    Tensor z = run(input, train_mode, mask_seed, &trace, stop);
    require(target.target.data.size() == z.data.size(), ErrorKind::Shape, "cross-entropy target size mismatch");
    const double m = *std::max_element(z.data.begin(), z.data.end());
    double lse = 0.0;
    for (double v : z.data) lse += std::exp(v - m);
    lse = m + std::log(lse);
    double tsum = 0.0, tz = 0.0;
    for (std::size_t i = 0; i < z.data.size(); ++i) {
      tsum += target.target.data[i];
      tz += target.target.data[i] * z.data[i];
    }
    g.loss = tsum * lse - tz;
    g.input = back(trace, ce_logit_gradient(z, target.target.data), stop, &g);
  } else {
    Tensor y = run(input, train_mode, mask_seed, &trace, layers_.size());
    require(target.target.data.size() == y.data.size(), ErrorKind::Shape, "mse target size mismatch");
    const double n = static_cast<double>(y.data.size());
    Tensor grad(y.shape);
    double loss = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      const double d = y.data[i] - target.target.data[i];
      loss += d * d;
      grad.data[i] = 2.0 * d / n;
    }
    g.loss = loss / n;
    g.input = back(trace, std::move(grad), layers_.size(), &g);
  }
  return g;
}

double NeuralNet::loss(const Tensor& input, const LossTarget& target) const {
  if (target.loss == Loss::CrossEntropy) {
    Tensor z = logits(input);
    require(target.target.data.size() == z.data.size(), ErrorKind::Shape, "cross-entropy target size mismatch");
    const double m = *std::max_element(z.data.begin(), z.data.end());
    double lse = 0.0;
    for (double v : z.data) lse += std::exp(v - m);
    lse = m + std::log(lse);
    double tsum = 0.0, tz = 0.0;
    for (std::size_t i = 0; i < z.data.size(); ++i) {
      tsum += target.target.data[i];
      tz += target.target.data[i] * z.data[i];
    }
    return tsum * lse - tz;
  }
  Tensor y = forward(input);
  require(target.target.data.size() == y.data.size(), ErrorKind::Shape, "mse target size mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    const double d = y.data[i] - target.target.data[i];
    loss += d * d;
  }
  return loss / static_cast<double>(y.data.size());
}

Tensor NeuralNet::gradient_input(const Tensor& input, const LossTarget& target) const {
  Trace trace;
  if (target.loss == Loss::CrossEntropy) {
    const std::size_t stop = softmax_tail();
    Tensor z = run(input, false, 0, &trace, stop);
    require(target.target.data.size() == z.data.size(), ErrorKind::Shape, "cross-entropy target size mismatch");
    return back(trace, ce_logit_gradient(z, target.target.data), stop, nullptr);
  }
  Tensor y = run(input, false, 0, &trace, layers_.size());
  require(target.target.data.size() == y.data.size(), ErrorKind::Shape, "mse target size mismatch");
  Tensor grad(y.shape);
  for (std::size_t i = 0; i < y.data.size(); ++i)
    grad.data[i] = 2.0 * (y.data[i] - target.target.data[i]) / static_cast<double>(y.data.size());
  return back(trace, std::move(grad), layers_.size(), nullptr);
}

Tensor NeuralNet::logit_gradient(const Tensor& input, std::span<const double> coeffs) const {
  Trace trace;
  const std::size_t stop = softmax_tail();
  Tensor z = run(input, false, 0, &trace, stop);
  require(coeffs.size() == z.data.size(), ErrorKind::Shape, "logit coefficient count mismatch");
  Tensor grad(z.shape, std::vector<double>(coeffs.begin(), coeffs.end()));
  return back(trace, std::move(grad), stop, nullptr);
}

namespace {
constexpr std::string_view kNncMagic = "NNC1";
}

void NeuralNet::save(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  binio::write_magic(out, kNncMagic);
  binio::write_u32(out, static_cast<std::uint32_t>(layers_.size()));
  binio::write_u32(out, static_cast<std::uint32_t>(input_.c));
  binio::write_u32(out, static_cast<std::uint32_t>(input_.h));
  binio::write_u32(out, static_cast<std::uint32_t>(input_.w));
  binio::write_pod<std::uint64_t>(out, seed_);
  binio::write_u32(out, trained_ ? 1u : 0u);
  for (const Layer& l : layers_) {
    binio::write_u32(out, static_cast<std::uint32_t>(l.kind));
    binio::write_u32(out, static_cast<std::uint32_t>(l.out.c));
    binio::write_u32(out, static_cast<std::uint32_t>(l.kernel));
    binio::write_u32(out, static_cast<std::uint32_t>(l.stride));
    binio::write_f64(out, l.rate);
    binio::write_u32(out, static_cast<std::uint32_t>(l.weights.size()));
    binio::write_u32(out, static_cast<std::uint32_t>(l.bias.size()));
    for (double w : l.weights) binio::write_f64(out, w);
    for (double b : l.bias) binio::write_f64(out, b);
  }
  require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path.string());
}

NeuralNet NeuralNet::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  binio::expect_magic(in, kNncMagic);
  const std::uint32_t count = binio::read_u32(in);
  Shape shape;
  shape.c = binio::read_u32(in);
  shape.h = binio::read_u32(in);
  shape.w = binio::read_u32(in);
  require(shape.size() > 0, ErrorKind::Format, "NNC1 input shape is empty");
  const auto seed = binio::read_pod<std::uint64_t>(in);
  const bool trained = binio::read_u32(in) != 0;
  NeuralNet net(shape, seed);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto tag = binio::read_u32(in);
    const std::size_t out_c = binio::read_u32(in);
    const std::size_t kernel = binio::read_u32(in);
    const std::size_t stride = binio::read_u32(in);
    const double rate = binio::read_f64(in);
    const std::size_t nw = binio::read_u32(in);
    const std::size_t nb = binio::read_u32(in);
    switch (static_cast<LayerKind>(tag)) {
      case LayerKind::Conv: net.conv(out_c, kernel, stride); break;
      case LayerKind::Dense: net.dense(out_c); break;
      case LayerKind::Relu: net.relu(); break;
      case LayerKind::Sigmoid: net.sigmoid(); break;
      case LayerKind::MaxPool2: net.maxpool(); break;
      case LayerKind::Dropout: net.dropout(rate); break;
      case LayerKind::Upsample2: net.upsample(); break;
      case LayerKind::Softmax: net.softmax(); break;
      default: fail(ErrorKind::Format, "unknown layer tag " + std::to_string(tag));
    }
    Layer& l = net.layers_.back();
    require(nw == l.weights.size() && nb == l.bias.size(), ErrorKind::Format,
            "NNC1 parameter count mismatch in layer " + std::to_string(i));
    for (double& w : l.weights) w = binio::read_f64(in);
    for (double& b : l.bias) b = binio::read_f64(in);
  }
  net.trained_ = trained;
  net.validate();
  return net;
}

void TrainConfig::validate() const {
  require(epochs > 0, ErrorKind::Config, "epochs must be positive");
  require(batch_size > 0, ErrorKind::Config, "batch_size must be positive");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorKind::Config, "learning_rate must be positive");
  require(early_stop_patience >= 1, ErrorKind::Config, "early_stop_patience must be at least 1");
}

namespace {

struct EvalStats {
  double loss = 0.0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
};

EvalStats evaluate(const NeuralNet& net, std::span<const TrainSample> data) {
  EvalStats s;
  if (data.empty()) return s;
  std::size_t correct = 0;
  bool classification = true;
  for (const auto& sample : data) {
    s.loss += net.loss(sample.input, sample.target);
    if (sample.target.loss == Loss::CrossEntropy) {
      if (net.predict(sample.input) == argmax(sample.target.target.data)) ++correct;
    } else {
      classification = false;
    }
  }
  s.loss /= static_cast<double>(data.size());
  if (classification) s.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return s;
}

}  // namespace

TrainResult train(NeuralNet net, std::span<const TrainSample> data, std::span<const TrainSample> validation,
                  const TrainConfig& cfg) {
  cfg.validate();
  require(!data.empty(), ErrorKind::Size, "training data is empty");
  for (const auto& s : data) {
    require(s.input.shape == net.input_shape(), ErrorKind::Shape, "training sample shape mismatch");
    require(s.target.loss == cfg.loss, ErrorKind::Config, "sample loss does not match the training config");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(cfg.seed, {0x5348u}));

  TrainResult result;
  std::vector<Layer> best_layers = net.layers();
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::vector<double>> gw, gb;
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t idx = order[j];
        auto g = net.backprop(data[idx].input, data[idx].target, true, derive_seed(cfg.seed, {epoch, idx}));
        if (!std::isfinite(g.loss)) {
          fail(ErrorKind::Training, "training diverged at epoch " + std::to_string(epoch));
        }
        epoch_loss += g.loss;
        if (gw.empty()) {
          gw = std::move(g.weights);
          gb = std::move(g.bias);
        } else {
          for (std::size_t l = 0; l < gw.size(); ++l) {
            kernels::axpy(1.0, g.weights[l], gw[l]);
            kernels::axpy(1.0, g.bias[l], gb[l]);
          }
        }
      }
      const double step = -cfg.learning_rate / static_cast<double>(end - start);
      auto& layers = net.mutable_layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        kernels::axpy(step, gw[l], layers[l].weights);
        kernels::axpy(step, gb[l], layers[l].bias);
      }
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss)) fail(ErrorKind::Training, "training diverged at epoch " + std::to_string(epoch));
    for (const auto& l : net.layers()) {
      if (!all_finite(l.weights) || !all_finite(l.bias))
        fail(ErrorKind::Training, "training diverged at epoch " + std::to_string(epoch));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss;
    if (validation.empty()) {
      rec.val_loss = evaluate(net, data).loss;
      rec.val_accuracy = evaluate(net, data).accuracy;
    } else {
      const EvalStats v = evaluate(net, validation);
      rec.val_loss = v.loss;
      rec.val_accuracy = v.accuracy;
    }
    if (!std::isfinite(rec.val_loss))
      fail(ErrorKind::Training, "training diverged at epoch " + std::to_string(epoch));
    result.history.push_back(rec);

    if (rec.val_loss < best_loss) {
      best_loss = rec.val_loss;
      best_layers = net.layers();
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  net.mutable_layers() = std::move(best_layers);
  net.set_trained(true);
  result.net = std::move(net);
  return result;
}

NeuralNet make_cda(const CdaConfig& cfg, std::uint64_t seed) {
  require(cfg.input.h % 4 == 0 && cfg.input.w % 4 == 0, ErrorKind::Shape,
          "CDA input height and width must be multiples of 4");
  NeuralNet net(cfg.input, seed);
  net.conv(cfg.filters1).relu().maxpool();
  net.conv(cfg.filters2).relu().maxpool();
  net.conv(cfg.filters3).relu();
  if (cfg.dropout > 0.0) net.dropout(cfg.dropout);
  net.upsample().conv(cfg.filters1).relu();
  net.upsample().conv(cfg.input.c).sigmoid();
  return net;
}

NeuralNet make_surrogate_cnn(Shape input, std::size_t classes, std::uint64_t seed) {
  require(classes >= 2, ErrorKind::Domain, "classifier needs at least two classes");
  NeuralNet net(input, seed);
  net.conv(8).relu().maxpool();
  net.conv(16).relu().maxpool();
  net.dense(64).relu();
  net.dense(classes).softmax();
  return net;
}

Tensor mask_corrupt(const Tensor& clean, double rate, std::mt19937_64& rng) {
  require(rate >= 0.0 && rate < 1.0, ErrorKind::Domain, "corruption rate must lie in [0, 1)");
  Tensor out = clean;
  if (rate == 0.0) return out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : out.data)
    if (unit(rng) < rate) v = 0.0;
  return out;
}

Tensor to_tensor(const ColorSpectrogram& img) {
  Tensor t(Shape{3, img.rows(), img.cols()});
  for (std::size_t c = 0; c < 3; ++c)
    std::copy(img.channels[c].data().begin(), img.channels[c].data().end(), t.data.begin() + c * img.rows() * img.cols());
  return t;
}

ColorSpectrogram to_color(const Tensor& t, Palette palette, double scale_c) {
  require(t.shape.c == 3, ErrorKind::Shape, "color tensor needs 3 channels");
  ColorSpectrogram img;
  img.palette = palette;
  img.scale_c = scale_c;
  const std::size_t plane = t.shape.h * t.shape.w;
  for (std::size_t c = 0; c < 3; ++c) {
    img.channels[c] = Matrix(t.shape.h, t.shape.w,
                             std::vector<double>(t.data.begin() + c * plane, t.data.begin() + (c + 1) * plane));
  }
  return img;
}

ColorSpectrogram cda_smooth(const NeuralNet& net, const ColorSpectrogram& img) {
  require(net.trained(), ErrorKind::State, "CDA network has not been trained");
  const Shape in = net.input_shape();
  require(in.c == 3 && net.output_shape() == in, ErrorKind::State, "CDA network shape does not fit color images");
  ColorSpectrogram resized = img;
  const bool resize = img.rows() != in.h || img.cols() != in.w;
  if (resize)
    for (auto& ch : resized.channels) ch = resize_bilinear(ch, in.h, in.w);
  Tensor out = net.forward(to_tensor(resized));
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  ColorSpectrogram result = to_color(out, img.palette, img.scale_c);
  if (resize) {
    for (auto& ch : result.channels) {
      ch = resize_bilinear(ch, img.rows(), img.cols());
      for (double& v : ch.data()) v = std::clamp(v, 0.0, 1.0);
    }
  }
  return result;
}

double psnr(std::span<const double> reference, std::span<const double> test) {
  require(reference.size() == test.size() && !reference.empty(), ErrorKind::Shape, "PSNR inputs differ in size");
  const double mse = kernels::squared_distance(reference, test) / static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace specguard
