#include <algorithm>
#include <cmath>
#include <random>
#include <map>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "specguard/error.hpp"
#include "specguard/robustness.hpp"

using namespace specguard;

namespace {

std::vector<std::vector<double>> uniform_cloud(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::vector<std::vector<double>> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(oracle::random_vector(dim, rng, 0.0, 1.0));
  return pts;
}

}  // namespace

TEST_CASE("lid_from_distances matches the MLE formula") {
  const std::vector<double> d{0.5, 1.0, 2.0, 0.25};
  // k = 3 smallest: 0.25, 0.5, 1.0 -> -3 / (ln .25 + ln .5 + 0)
  CHECK(lid_from_distances(d, 3) == doctest::Approx(-3.0 / (std::log(0.25) + std::log(0.5))));
  CHECK(std::isinf(lid_from_distances(std::vector<double>{1.0, 1.0, 1.0}, 3)));
  CHECK(lid_from_distances(std::vector<double>{0.0, 0.5, 1.0}, 2) == doctest::Approx(-2.0 / std::log(0.5)));
  CHECK_THROWS_AS(lid_from_distances(std::vector<double>{0.0, 1.0}, 2), Error);
}

TEST_CASE("lid_score agrees with a direct reference and is scale invariant") {
  std::mt19937_64 rng(61);
  const auto ref = uniform_cloud(300, 4, rng);
  const auto q = oracle::random_vector(4, rng, 0.0, 1.0);
  const double lid = lid_score(q, ref, 20);
  CHECK(lid == doctest::Approx(oracle::reference_lid(q, ref, 20)).epsilon(1e-12));

  auto scaled_ref = ref;
  for (auto& r : scaled_ref)
    for (auto& v : r) v *= 7.5;
  auto scaled_q = q;
  for (auto& v : scaled_q) v *= 7.5;
  CHECK(lid_score(scaled_q, scaled_ref, 20) == doctest::Approx(lid).epsilon(1e-9));
}

TEST_CASE("lid tracks intrinsic dimension") {
  std::mt19937_64 rng(62);
  auto mean_lid = [&](std::size_t dim) {
    const auto ref = uniform_cloud(2000, dim, rng);
    double s = 0.0;
    for (int i = 0; i < 30; ++i) s += lid_score(oracle::random_vector(dim, rng, 0.25, 0.75), ref, 20);
    return s / 30;
  };
  const double one = mean_lid(1);
  const double three = mean_lid(3);
  CHECK(one > 0.7);
  CHECK(one < 1.3);
  CHECK(three > 2.4);
  CHECK(three < 3.6);
}

TEST_CASE("lid batch scores have one entry per vector") {
  std::mt19937_64 rng(63);
  const auto normal = uniform_cloud(60, 3, rng);
  const auto noisy = uniform_cloud(60, 3, rng);
  const auto adv = uniform_cloud(60, 3, rng);
  const auto s = lid_batch_scores(normal, noisy, adv, 10, 20);
  CHECK(s.normal.size() == 60);
  CHECK(s.noisy.size() == 60);
  CHECK(s.adversarial.size() == 60);
  for (double v : s.normal) CHECK(v > 0.0);
}

TEST_CASE("lid detector separates low- and high-dimensional sets") {
  std::mt19937_64 rng(64);
  std::vector<std::vector<double>> normal, noisy, adv;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const double t = u(rng);
    normal.push_back({t, 2 * t, 0.0, 0.0, 0.0, 0.0});
    const double s = u(rng);
    noisy.push_back({s, 2 * s + 1e-3 * u(rng), 0.0, 0.0, 0.0, 0.0});
    adv.push_back(oracle::random_vector(6, rng, 0.0, 1.0));
  }
  const std::vector<std::size_t> ks{10, 20};
  LidOptions o;
  o.seed = 4;
  const auto rows = lid_detectability(normal, noisy, adv, ks, o);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.mean_difference > 0.0);
    CHECK(r.accuracy > 80.0);
  }
  CHECK(lid_detectability(normal, noisy, adv, ks, o)[0].accuracy == rows[0].accuracy);
}

TEST_CASE("tradeoff distance") {
  CHECK(tradeoff_distance(3, 4) == 5.0);
  CHECK(tradeoff_distance(0, 0) == 0.0);
  CHECK(tradeoff_distance(24.92, 53.38) == doctest::Approx(58.91).epsilon(1e-4));
  CHECK_THROWS_AS(tradeoff_distance(-1, 5), Error);
  CHECK_THROWS_AS(tradeoff_distance(5, 101), Error);
}

TEST_CASE("fooling rate counts misclassified adversarial inputs") {
  std::vector<AttackReport> reports(4);
  for (int i = 0; i < 4; ++i) {
    reports[i].true_label = i % 2;
    reports[i].adversarial = {static_cast<double>(i)};
  }
  reports[3].adversarial.clear();
  reports[3].original = {1.0};
  const Classifier always_zero = [](std::span<const double>) { return 0; };
  CHECK(fooling_rate(reports, always_zero) == 50.0);
  const Classifier echo = [](std::span<const double> x) { return static_cast<int>(x[0]) % 2; };
  CHECK(fooling_rate(reports, echo) == 0.0);
}

TEST_CASE("ranks use midranks for ties and conserve the rank sum") {
  Matrix t(3, 2, std::vector<double>{0.9, 0.1, 0.8, 0.1, 0.9, 0.5});
  const Matrix r = rank_columns(t, true);
  CHECK(r(0, 0) == 1.5);
  CHECK(r(2, 0) == 1.5);
  CHECK(r(1, 0) == 3.0);
  CHECK(r(2, 1) == 1.0);
  CHECK(r(0, 1) == 2.5);
  const auto mean = average_rank(t, true);
  CHECK(mean[0] == doctest::Approx(2.0));
  CHECK(mean[2] == doctest::Approx(1.25));

  std::mt19937_64 rng(65);
  const Matrix big = oracle::random_matrix(6, 9, rng);
  const Matrix low = rank_columns(big, false);
  const Matrix high = rank_columns(big, true);
  for (std::size_t c = 0; c < 9; ++c) {
    double s = 0.0;
    for (std::size_t m = 0; m < 6; ++m) {
      s += low(m, c);
      CHECK(low(m, c) + high(m, c) == doctest::Approx(7.0));
    }
    CHECK(s == doctest::Approx(21.0));
  }
}

TEST_CASE("fold assignment keeps sources together and balances classes") {
  std::vector<std::string> sources;
  std::vector<int> labels;
  for (int s = 0; s < 30; ++s) {
    for (int v = 0; v < 3; ++v) {
      sources.push_back("src" + std::to_string(s));
      labels.push_back(s % 3);
    }
  }
  const auto folds = assign_folds(sources, labels, 5, 17);
  std::map<std::string, std::size_t> fold_of;
  std::vector<std::vector<int>> per_fold(5, std::vector<int>(3, 0));
  for (std::size_t i = 0; i < sources.size(); ++i) {
    CHECK(folds[i] < 5);
    auto [it, inserted] = fold_of.emplace(sources[i], folds[i]);
    if (!inserted) CHECK(it->second == folds[i]);
    ++per_fold[folds[i]][labels[i]];
  }
  for (const auto& f : per_fold)
    for (int c : f) CHECK(c == 6);
  CHECK(assign_folds(sources, labels, 5, 17) == folds);
}

TEST_CASE("fold assignment fails when a class has too few sources") {
  const std::vector<std::string> sources{"a", "b", "c"};
  const std::vector<int> labels{0, 0, 1};
  CHECK_THROWS_AS(assign_folds(sources, labels, 2, 1), Error);
}
