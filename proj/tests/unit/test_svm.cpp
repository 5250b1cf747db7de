#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "specguard/error.hpp"
#include "specguard/svm.hpp"

using namespace specguard;

namespace {

struct Problem {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

Problem blobs(std::size_t n, std::size_t d, double gap, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Problem p;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i % 2 == 0 ? 1 : -1;
    std::vector<double> v(d);
    for (auto& e : v) e = g(rng);
    v[0] += label * gap;
    p.x.push_back(v);
    p.y.push_back(label);
  }
  return p;
}

}  // namespace

TEST_CASE("kernel gradients match finite differences") {
  std::mt19937_64 rng(31);
  for (const auto& k : {KernelSpec::linear(), KernelSpec::poly(2, 1.0, 0.5), KernelSpec::poly(3, 0.5, 1.0),
                        KernelSpec::rbf(0.8)}) {
    for (int t = 0; t < 10; ++t) {
      const auto x = oracle::random_vector(6, rng);
      const auto xi = oracle::random_vector(6, rng);
      const auto g = kernel_gradient(k, x, xi);
      const auto num = oracle::numeric_gradient([&](std::span<const double> p) { return kernel_value(k, p, xi); }, x);
      CHECK(oracle::max_relative_error(g, num) < 1e-6);
    }
  }
}

TEST_CASE("kernel values") {
  const std::vector<double> a{1.0, 2.0}, b{3.0, -1.0};
  CHECK(kernel_value(KernelSpec::linear(), a, b) == doctest::Approx(1.0));
  CHECK(kernel_value(KernelSpec::poly(2, 1.0, 1.0), a, b) == doctest::Approx(4.0));
  CHECK(kernel_value(KernelSpec::rbf(1.0), a, b) == doctest::Approx(std::exp(-0.5 * 13.0)));
  CHECK_THROWS_AS(KernelSpec::rbf(0.0).validate(), Error);
}

TEST_CASE("smo solution satisfies the dual constraints and KKT conditions") {
  std::mt19937_64 rng(32);
  const auto p = blobs(40, 3, 1.0, rng);
  const auto k = KernelSpec::rbf(1.5);
  const double cost = 2.0;
  const Matrix gram = gram_matrix(k, p.x);
  const auto sol = smo_solve(gram, p.y, cost);
  REQUIRE(sol.converged);
  double balance = 0.0;
  for (std::size_t i = 0; i < p.y.size(); ++i) {
    CHECK(sol.alpha[i] >= 0.0);
    CHECK(sol.alpha[i] <= cost);
    balance += sol.alpha[i] * p.y[i];
  }
  CHECK(std::abs(balance) < 1e-9);
  for (std::size_t i = 0; i < p.y.size(); ++i) {
    double f = sol.bias;
    for (std::size_t j = 0; j < p.y.size(); ++j) f += sol.alpha[j] * p.y[j] * gram(i, j);
    const double m = p.y[i] * f;
    if (sol.alpha[i] < 1e-8) CHECK(m >= 1.0 - 1e-2);
    else if (sol.alpha[i] > cost - 1e-8) CHECK(m <= 1.0 + 1e-2);
    else CHECK(m == doctest::Approx(1.0).epsilon(1e-2));
  }
}

TEST_CASE("separable data is classified perfectly with a positive margin") {
  std::mt19937_64 rng(33);
  const auto p = blobs(30, 2, 6.0, rng);
  const auto m = svm_train(p.x, p.y, KernelSpec::linear(), 10.0);
  for (std::size_t i = 0; i < p.x.size(); ++i) CHECK(svm_label(m, p.x[i]) == p.y[i]);
  const auto w = linear_weights(m);
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    double f = m.bias;
    for (std::size_t j = 0; j < w.size(); ++j) f += w[j] * p.x[i][j];
    CHECK(f == doctest::Approx(svm_decision(m, p.x[i])).epsilon(1e-10));
  }
}

TEST_CASE("decision gradient matches finite differences") {
  std::mt19937_64 rng(34);
  const auto p = blobs(24, 4, 1.0, rng);
  for (const auto& k : {KernelSpec::linear(), KernelSpec::poly(2), KernelSpec::rbf(1.0)}) {
    const auto m = svm_train(p.x, p.y, k, 1.0);
    const auto x = oracle::random_vector(4, rng);
    const auto g = decision_gradient(m, x);
    const auto num = oracle::numeric_gradient([&](std::span<const double> q) { return svm_decision(m, q); }, x);
    CHECK(oracle::max_relative_error(g, num) < 1e-6);
  }
}

TEST_CASE("svm training rejects a single class") {
  const std::vector<std::vector<double>> x{{0.0}, {1.0}};
  const std::vector<int> y{1, 1};
  CHECK_THROWS_AS(svm_train(x, y, KernelSpec::linear(), 1.0), Error);
}

TEST_CASE("hinge loss") {
  CHECK(hinge_loss(1, 2.0) == 0.0);
  CHECK(hinge_loss(-1, 0.5) == doctest::Approx(1.5));
}

TEST_CASE("one-vs-rest recovers three separated blobs and round-trips through MSV1") {
  std::mt19937_64 rng(35);
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<std::vector<double>> x;
  std::vector<int> labels;
  const double centers[3][2] = {{0, 0}, {3, 0}, {0, 3}};
  for (int i = 0; i < 60; ++i) {
    const int c = i % 3;
    x.push_back({centers[c][0] + g(rng), centers[c][1] + g(rng)});
    labels.push_back(c);
  }
  auto m = multiclass_train(x, labels, 3, KernelSpec::poly(2), 1.0);
  m.class_names = {"a", "b", "c"};
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(multiclass_predict(m, x[i]) == labels[i]);

  const auto path = std::filesystem::temp_directory_path() / "specguard_unit.msv";
  save_multiclass(path, m);
  const auto back = load_multiclass(path);
  CHECK(back.class_names == m.class_names);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(multiclass_decisions(back, x[i]) == multiclass_decisions(m, x[i]));
  std::filesystem::remove(path);
}

TEST_CASE("multiclass training requires every class") {
  const std::vector<std::vector<double>> x{{0.0}, {1.0}, {2.0}};
  const std::vector<int> y{0, 1, 1};
  CHECK_THROWS_AS(multiclass_train(x, y, 3, KernelSpec::linear(), 1.0), Error);
}
