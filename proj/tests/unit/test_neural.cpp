#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "specguard/error.hpp"
#include "specguard/neural.hpp"

using namespace specguard;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng) {
  return Tensor(s, oracle::random_vector(s.size(), rng, 0.0, 1.0));
}

NeuralNet small_cnn(std::uint64_t seed) {
  NeuralNet net(Shape{2, 8, 8}, seed);
  net.conv(3, 3).relu().maxpool().conv(4, 3, 2).sigmoid().dense(5).relu().dense(3).softmax();
  return net;
}

}  // namespace

TEST_CASE("layer shapes") {
  const NeuralNet net = small_cnn(1);
  const auto& l = net.layers();
  CHECK(l[0].out == Shape{3, 8, 8});
  CHECK(l[2].out == Shape{3, 4, 4});
  CHECK(l[3].out == Shape{4, 2, 2});
  CHECK(net.output_shape() == Shape{3, 1, 1});
  CHECK(net.parameter_count() == (3 * 2 * 9 + 3) + (4 * 3 * 9 + 4) + (5 * 16 + 5) + (3 * 5 + 3));
}

TEST_CASE("softmax output is a distribution and predict is its argmax") {
  std::mt19937_64 rng(41);
  const NeuralNet net = small_cnn(2);
  const Tensor x = random_tensor(net.input_shape(), rng);
  const Tensor p = net.forward(x);
  double s = 0.0;
  for (double v : p.data) {
    CHECK(v >= 0.0);
    s += v;
  }
  CHECK(s == doctest::Approx(1.0));
  CHECK(net.predict(x) == argmax(p.data));
  CHECK(argmax(net.logits(x).data) == argmax(p.data));
}

TEST_CASE("input and weight gradients match finite differences") {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 5; ++t) {
    const NeuralNet net = small_cnn(100 + t);
    const Tensor x = random_tensor(net.input_shape(), rng);
    const auto target = LossTarget::label(t % 3, 3);
    const auto grads = net.backprop(x, target);
    const auto num_in = oracle::numeric_gradient(
        [&](std::span<const double> p) { return net.loss(Tensor(x.shape, {p.begin(), p.end()}), target); }, x.data);
    CHECK(oracle::relative_norm_error(grads.input.data, num_in) < 1e-5);
    CHECK(oracle::relative_norm_error(net.gradient_input(x, target).data, num_in) < 1e-5);

    for (std::size_t li = 0; li < net.layers().size(); ++li) {
      if (net.layers()[li].weights.empty()) continue;
      NeuralNet probe = net;
      auto& w = probe.mutable_layers()[li].weights;
      const std::vector<double> w0 = w;
      const auto num_w = oracle::numeric_gradient(
          [&](std::span<const double> p) {
            w.assign(p.begin(), p.end());
            return probe.loss(x, target);
          },
          w0);
      w = w0;
      CHECK(oracle::relative_norm_error(grads.weights[li], num_w) < 1e-5);
    }
  }
}

TEST_CASE("logit gradient matches finite differences") {
  std::mt19937_64 rng(43);
  const NeuralNet net = small_cnn(7);
  const Tensor x = random_tensor(net.input_shape(), rng);
  const std::vector<double> coeffs{0.5, -1.0, 2.0};
  auto f = [&](std::span<const double> p) {
    const auto z = net.logits(Tensor(x.shape, {p.begin(), p.end()}));
    return 0.5 * z.data[0] - z.data[1] + 2.0 * z.data[2];
  };
  CHECK(oracle::relative_norm_error(net.logit_gradient(x, coeffs).data, oracle::numeric_gradient(f, x.data)) < 1e-5);
}

TEST_CASE("autoencoder MSE gradient matches finite differences") {
  std::mt19937_64 rng(44);
  CdaConfig c;
  c.input = Shape{3, 8, 8};
  c.filters1 = 2;
  c.filters2 = 3;
  c.filters3 = 3;
  const NeuralNet net = make_cda(c, 5);
  CHECK(net.output_shape() == c.input);
  const Tensor x = random_tensor(c.input, rng);
  const auto target = LossTarget::mse(random_tensor(c.input, rng));
  const auto num = oracle::numeric_gradient(
      [&](std::span<const double> p) { return net.loss(Tensor(x.shape, {p.begin(), p.end()}), target); }, x.data);
  CHECK(oracle::relative_norm_error(net.gradient_input(x, target).data, num) < 1e-5);
}

TEST_CASE("cross-entropy gradient stays finite under saturated softmax") {
  NeuralNet net(Shape{1, 1, 2}, 1);
  net.dense(2).softmax();
  auto& d = net.mutable_layers()[0];
  d.weights = {400.0, 0.0, -400.0, 0.0};
  d.bias = {0.0, 0.0};
  const Tensor x(Shape{1, 1, 2}, std::vector<double>{1.0, 0.0});
  const auto g = net.gradient_input(x, LossTarget::label(1, 2));
  CHECK(all_finite(g.data));
  CHECK(std::abs(g.data[0]) > 1.0);
}

TEST_CASE("dropout is stochastic in training and scaled in evaluation") {
  NeuralNet net(Shape{1, 1, 200}, 3);
  net.dropout(0.25);
  const Tensor x(Shape{1, 1, 200}, 1.0);
  for (double v : net.forward(x).data) CHECK(v == doctest::Approx(0.75));
  const Tensor t = net.forward(x, true, 9);
  std::size_t zeros = 0;
  for (double v : t.data) zeros += v == 0.0 ? 1 : 0;
  CHECK(zeros > 25);
  CHECK(zeros < 75);
  CHECK(net.forward(x, true, 9).data == t.data);
}

TEST_CASE("training fits a linearly separable problem") {
  std::mt19937_64 rng(45);
  std::vector<TrainSample> data;
  for (int i = 0; i < 40; ++i) {
    const std::size_t c = i % 2;
    Tensor x(Shape{1, 1, 4}, oracle::random_vector(4, rng, 0.0, 0.5));
    x.data[c] += 1.0;
    data.push_back(TrainSample{x, LossTarget::label(c, 2)});
  }
  NeuralNet net(Shape{1, 1, 4}, 11);
  net.dense(8).relu().dense(2).softmax();
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.1;
  cfg.early_stop_patience = 60;
  cfg.seed = 3;
  const auto r = train(net, data, {}, cfg);
  CHECK(r.history.back().train_loss < r.history.front().train_loss);
  std::size_t hits = 0;
  for (const auto& s : data) hits += r.net.predict(s.input) == argmax(s.target.target.data) ? 1 : 0;
  CHECK(hits == data.size());
  CHECK(r.net.trained());
}

TEST_CASE("training is deterministic for a fixed seed") {
  std::mt19937_64 rng(46);
  std::vector<TrainSample> data;
  for (int i = 0; i < 12; ++i) data.push_back(TrainSample{Tensor(Shape{1, 4, 4}, oracle::random_vector(16, rng)), LossTarget::label(i % 2, 2)});
  NeuralNet net(Shape{1, 4, 4}, 12);
  net.conv(2, 3).relu().dense(2).softmax();
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 8;
  const auto a = train(net, data, {}, cfg);
  const auto b = train(net, data, {}, cfg);
  for (std::size_t i = 0; i < a.net.layers().size(); ++i) CHECK(a.net.layers()[i].weights == b.net.layers()[i].weights);
}

TEST_CASE("NNC1 checkpoint round trip") {
  std::mt19937_64 rng(47);
  const NeuralNet net = small_cnn(13);
  const auto path = std::filesystem::temp_directory_path() / "specguard_unit.nnc";
  net.save(path);
  const NeuralNet back = NeuralNet::load(path);
  const Tensor x = random_tensor(net.input_shape(), rng);
  CHECK(back.forward(x).data == net.forward(x).data);
  CHECK(back.layers().size() == net.layers().size());
  std::filesystem::remove(path);
}

TEST_CASE("mask corruption, psnr and color conversion") {
  std::mt19937_64 rng(48);
  const Tensor clean(Shape{1, 50, 50}, 0.5);
  const Tensor noisy = mask_corrupt(clean, 0.2, rng);
  std::size_t zeros = 0;
  for (double v : noisy.data) zeros += v == 0.0 ? 1 : 0;
  CHECK(zeros > 400);
  CHECK(zeros < 600);
  CHECK(std::isinf(psnr(clean.data, clean.data)));
  std::vector<double> off(clean.data.size(), 0.6);
  CHECK(psnr(clean.data, off) == doctest::Approx(20.0));

  ColorSpectrogram img;
  for (auto& ch : img.channels) ch = oracle::random_matrix(4, 5, rng, 0.0, 1.0);
  const auto back = to_color(to_tensor(img), Palette::WB, 0.9);
  for (int c = 0; c < 3; ++c) CHECK(back.channels[c] == img.channels[c]);
}

TEST_CASE("surrogate CNN shape") {
  const NeuralNet net = make_surrogate_cnn(Shape{3, 32, 32}, 4, 1);
  CHECK(net.output_shape() == Shape{4, 1, 1});
  CHECK(net.layers().back().kind == LayerKind::Softmax);
}
