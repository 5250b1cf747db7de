#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "specguard/attacks.hpp"
#include "specguard/error.hpp"

using namespace specguard;

namespace {

LinearModel toy_model() {
  Matrix w(3, 4, std::vector<double>{1.0, -0.5, 0.2, 0.0, -0.3, 0.8, 0.0, 0.4, 0.1, 0.1, -0.9, 0.6});
  return LinearModel(w, {0.1, -0.2, 0.05});
}

/// W^T (softmax(Wx + b) - onehot(y)), written out by hand.
std::vector<double> linear_ce_gradient(const Matrix& w, const std::vector<double>& b, std::span<const double> x,
                                       std::size_t y) {
  std::vector<double> z(w.rows());
  for (std::size_t c = 0; c < w.rows(); ++c) {
    z[c] = b[c];
    for (std::size_t j = 0; j < w.cols(); ++j) z[c] += w(c, j) * x[j];
  }
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (auto& v : z) s += (v = std::exp(v - m));
  std::vector<double> g(w.cols(), 0.0);
  for (std::size_t c = 0; c < w.rows(); ++c) {
    const double d = z[c] / s - (c == y ? 1.0 : 0.0);
    for (std::size_t j = 0; j < w.cols(); ++j) g[j] += d * w(c, j);
  }
  return g;
}

double sgn(double v) { return (v > 0) - (v < 0); }

}  // namespace

TEST_CASE("attack names round trip") {
  for (AttackKind k : all_attacks()) CHECK(parse_attack(to_string(k)) == k);
  CHECK(is_deep_attack(AttackKind::Cwa));
  CHECK_FALSE(is_deep_attack(AttackKind::Evasion));
  CHECK_THROWS_AS(parse_attack("PGD"), Error);
}

TEST_CASE("linear model loss gradient matches the closed form") {
  const auto m = toy_model();
  Matrix w(3, 4, std::vector<double>{1.0, -0.5, 0.2, 0.0, -0.3, 0.8, 0.0, 0.4, 0.1, 0.1, -0.9, 0.6});
  const std::vector<double> x{0.2, 0.7, 0.4, 0.9};
  const auto g = m.loss_gradient(x, 1);
  const auto ref = linear_ce_gradient(w, {0.1, -0.2, 0.05}, x, 1);
  for (std::size_t j = 0; j < 4; ++j) CHECK(g[j] == doctest::Approx(ref[j]).epsilon(1e-12));
}

TEST_CASE("FGSM takes one signed step and clips to the box") {
  const auto m = toy_model();
  Matrix w(3, 4, std::vector<double>{1.0, -0.5, 0.2, 0.0, -0.3, 0.8, 0.0, 0.4, 0.1, 0.1, -0.9, 0.6});
  const std::vector<double> x{0.05, 0.7, 0.4, 0.98};
  AttackConfig cfg;
  cfg.epsilon = 0.1;
  const auto r = fgsm(m, x, 1, cfg);
  const auto g = linear_ce_gradient(w, {0.1, -0.2, 0.05}, x, 1);
  for (std::size_t j = 0; j < 4; ++j) CHECK(r.adversarial[j] == doctest::Approx(std::clamp(x[j] + 0.1 * sgn(g[j]), 0.0, 1.0)));
  CHECK(r.linf_norm <= 0.1 + 1e-12);
  CHECK(r.label_before == m.predict(x));
  CHECK(r.label_after == m.predict(r.adversarial));
}

TEST_CASE("zero budget leaves the input untouched") {
  const auto m = toy_model();
  const std::vector<double> x{0.3, 0.3, 0.3, 0.3};
  AttackConfig cfg;
  cfg.epsilon = 0.0;
  const auto y = static_cast<std::size_t>(m.predict(x));
  for (auto r : {fgsm(m, x, y, cfg), bim(m, x, y, cfg, BimVariant::A), bim(m, x, y, cfg, BimVariant::B)}) {
    CHECK(r.adversarial == x);
    CHECK_FALSE(r.success);
  }
}

TEST_CASE("BIM stays in the epsilon ball and the box; BIM-a stops early") {
  std::mt19937_64 rng(51);
  const auto m = toy_model();
  AttackConfig cfg;
  cfg.epsilon = 0.3;
  cfg.step = 0.05;
  cfg.max_iters = 20;
  for (int t = 0; t < 20; ++t) {
    const auto x = oracle::random_vector(4, rng, 0.0, 1.0);
    const auto y = static_cast<std::size_t>(m.predict(x));
    const auto a = bim(m, x, y, cfg, BimVariant::A);
    const auto b = bim(m, x, y, cfg, BimVariant::B);
    for (const auto* r : {&a, &b}) {
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(r->adversarial[j] - x[j]) <= cfg.epsilon + 1e-12);
        CHECK(r->adversarial[j] >= 0.0);
        CHECK(r->adversarial[j] <= 1.0);
      }
    }
    CHECK(b.iterations == cfg.max_iters);
    CHECK(a.iterations <= cfg.max_iters);
    if (a.success) CHECK(m.predict(a.adversarial) != static_cast<int>(y));
  }
}

TEST_CASE("CWA finds a small in-box perturbation on a linear model") {
  const auto m = toy_model();
  const std::vector<double> x{0.5, 0.5, 0.5, 0.5};
  const auto y = static_cast<std::size_t>(m.predict(x));
  AttackConfig cfg;
  const auto r = cwa(m, x, y, cfg);
  for (double v : r.adversarial) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(r.success);
  CHECK(m.predict(r.adversarial) != static_cast<int>(y));
  CHECK(r.l2_norm < 1.0);
}

TEST_CASE("targeted attacks aim at the requested label") {
  const auto m = toy_model();
  const std::vector<double> x{0.5, 0.5, 0.5, 0.5};
  const auto y = static_cast<std::size_t>(m.predict(x));
  AttackConfig cfg;
  cfg.targeted = true;
  cfg.target_label = (y + 1) % 3;
  cfg.epsilon = 1.0;
  cfg.step = 0.1;
  cfg.max_iters = 30;
  const auto r = bim(m, x, y, cfg, BimVariant::A);
  CHECK(r.label_after == static_cast<int>(*cfg.target_label));
  CHECK(r.success);
}

TEST_CASE("random wrong labels never equal the true label and are deterministic") {
  for (std::size_t i = 0; i < 100; ++i) {
    const std::size_t t = random_wrong_label(i % 4, 4, 5, i);
    CHECK(t != i % 4);
    CHECK(t < 4);
    CHECK(t == random_wrong_label(i % 4, 4, 5, i));
  }
}

TEST_CASE("closed-form evasion moves epsilon along -sign(f) w / |w|") {
  std::mt19937_64 rng(52);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::normal_distribution<double> g(0.0, 0.5);
  for (int i = 0; i < 20; ++i) {
    const int l = i % 2 ? 1 : -1;
    x.push_back({l * 1.0 + g(rng), g(rng), g(rng)});
    y.push_back(l);
  }
  const auto model = svm_train(x, y, KernelSpec::linear(), 1.0);
  const auto w = linear_weights(model);
  const double wn = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
  AttackConfig cfg;
  cfg.epsilon = 0.4;
  cfg.clip_lo = -10.0;
  cfg.clip_hi = 10.0;
  const auto r = evasion(model, x[3], cfg);
  const double f = svm_decision(model, x[3]);
  for (std::size_t j = 0; j < 3; ++j) CHECK(r.adversarial[j] == doctest::Approx(x[3][j] - cfg.epsilon * sgn(f) * w[j] / wn));
  CHECK(svm_decision(model, r.adversarial) == doctest::Approx(f - sgn(f) * cfg.epsilon * wn));
  CHECK(r.l2_norm == doctest::Approx(cfg.epsilon));

  cfg.epsilon = std::abs(f) / wn * 1.01;
  CHECK(evasion(model, x[3], cfg).success);
}

TEST_CASE("closed-form evasion rejects non-linear kernels") {
  const std::vector<std::vector<double>> x{{0.0}, {1.0}, {2.0}, {3.0}};
  const std::vector<int> y{-1, -1, 1, 1};
  const auto model = svm_train(x, y, KernelSpec::rbf(1.0), 1.0);
  CHECK_THROWS_AS(evasion(model, x[0], AttackConfig{}), Error);
  AttackConfig cfg;
  cfg.evasion_mode = EvasionMode::Gradient;
  CHECK_NOTHROW(evasion(model, x[0], cfg));
}

TEST_CASE("first greedy label flip equals the brute-force best single flip") {
  std::mt19937_64 rng(53);
  std::normal_distribution<double> g(0.0, 0.7);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 14; ++i) {
      const int l = i % 2 ? 1 : -1;
      x.push_back({l * 1.0 + g(rng), g(rng)});
      y.push_back(l);
    }
    const auto kernel = KernelSpec::linear();
    double best = -1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto trial_y = y;
      trial_y[i] = -trial_y[i];
      const auto m = svm_train(x, trial_y, kernel, 1.0);
      double loss = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) loss += hinge_loss(y[j], svm_decision(m, x[j]));
      best = std::max(best, loss);
    }
    AttackConfig cfg;
    cfg.lfa_budget = 1.0;
    const auto r = label_flip_attack(x, y, kernel, 1.0, cfg);
    REQUIRE(r.order.size() == 1);
    const auto m = svm_train(x, r.labels, kernel, 1.0);
    double loss = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) loss += hinge_loss(y[j], svm_decision(m, x[j]));
    CHECK(loss == doctest::Approx(best).epsilon(1e-6));
  }
}

TEST_CASE("label flipping respects the budget and per-sample costs") {
  std::mt19937_64 rng(54);
  std::vector<std::vector<double>> x;
  std::vector<int> labels;
  for (int i = 0; i < 18; ++i) {
    x.push_back(oracle::random_vector(3, rng));
    x.back()[i % 3] += 2.0;
    labels.push_back(i % 3);
  }
  AttackConfig cfg;
  cfg.lfa_budget = 3.0;
  auto r = label_flip_attack(x, labels, 3, KernelSpec::linear(), 1.0, cfg);
  CHECK(r.order.size() == 3);
  CHECK(r.spent == 3.0);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    changed += r.labels[i] != labels[i] ? 1 : 0;
    CHECK(r.flipped[i] == (r.labels[i] != labels[i]));
  }
  CHECK(changed == 3);

  cfg.lfa_costs.assign(labels.size(), 2.0);
  r = label_flip_attack(x, labels, 3, KernelSpec::linear(), 1.0, cfg);
  CHECK(r.order.size() == 1);
}

TEST_CASE("attack_batch records one report per sample in order") {
  const auto m = toy_model();
  std::vector<LabeledSample> data;
  for (int i = 0; i < 6; ++i) data.push_back(LabeledSample{"s" + std::to_string(i), {0.1 * i, 0.5, 0.2, 0.9}, i % 3});
  AttackConfig cfg;
  const auto serial = attack_batch(m, data, AttackKind::BimB, cfg, 1);
  const auto threaded = attack_batch(m, data, AttackKind::BimB, cfg, 3);
  REQUIRE(serial.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(serial[i].source_id == data[i].source_id);
    CHECK(serial[i].adversarial == threaded[i].adversarial);
    CHECK(serial[i].attack == AttackKind::BimB);
  }
}
