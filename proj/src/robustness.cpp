#include "specguard/robustness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "specguard/error.hpp"
#include "specguard/kernels.hpp"
#include "specguard/random.hpp"

namespace specguard {

double lid_from_distances(std::span<const double> distances, std::size_t k) {
  require(k >= 2, ErrorKind::Domain, "LID needs k >= 2");
  std::vector<double> d;
  d.reserve(distances.size());
  for (double v : distances) {
    require(std::isfinite(v) && v >= 0.0, ErrorKind::Domain, "LID distances must be finite and non-negative");
    if (v > 0.0) d.push_back(v);
  }
  require(d.size() >= k, ErrorKind::Size,
          "LID needs " + std::to_string(k) + " distinct neighbours, got " + std::to_string(d.size()));
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  const double rk = d[k - 1];
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::log(d[i] / rk);
  if (sum == 0.0) return std::numeric_limits<double>::infinity();
  return -static_cast<double>(k) / sum;
}

double lid_score(std::span<const double> query, std::span<const std::vector<double>> reference, std::size_t k) {
  std::vector<double> d;
  d.reserve(reference.size());
  for (const auto& r : reference) {
    require(r.size() == query.size(), ErrorKind::Shape, "LID reference dimension mismatch");
    d.push_back(std::sqrt(kernels::squared_distance(query, r)));
  }
  return lid_from_distances(d, k);
}

LidScores lid_batch_scores(std::span<const std::vector<double>> normal, std::span<const std::vector<double>> noisy,
                           std::span<const std::vector<double>> adversarial, std::size_t k, std::size_t batch_size) {
  require(!normal.empty() && !noisy.empty() && !adversarial.empty(), ErrorKind::Size,
          "LID detectability needs three non-empty sets");
  const std::size_t batch = std::max(batch_size, k + 1);
  require(normal.size() >= batch, ErrorKind::Size,
          "LID needs at least " + std::to_string(batch) + " normal vectors, got " + std::to_string(normal.size()));
  const std::size_t n_batches = normal.size() / batch;

  auto batch_ref = [&](std::size_t b) { return normal.subspan(b * batch, batch); };
  LidScores out;
  for (std::size_t i = 0; i < normal.size(); ++i) {
    const std::size_t b = std::min(i / batch, n_batches - 1);
    std::vector<std::vector<double>> ref;
    for (std::size_t j = b * batch; j < b * batch + batch; ++j) {
      if (j != i) ref.push_back(normal[j]);
    }
    if (i >= n_batches * batch) ref.pop_back();
    out.normal.push_back(lid_score(normal[i], ref, k));
  }
  for (std::size_t i = 0; i < noisy.size(); ++i) out.noisy.push_back(lid_score(noisy[i], batch_ref(i % n_batches), k));
  for (std::size_t i = 0; i < adversarial.size(); ++i) {
    out.adversarial.push_back(lid_score(adversarial[i], batch_ref(i % n_batches), k));
  }
  return out;
}

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<LidRow> lid_detectability(std::span<const std::vector<double>> normal,
                                      std::span<const std::vector<double>> noisy,
                                      std::span<const std::vector<double>> adversarial,
                                      std::span<const std::size_t> k_values, const LidOptions& opts) {
  require(opts.train_fraction > 0.0 && opts.train_fraction < 1.0, ErrorKind::Config,
          "LID train fraction must be in (0, 1)");
  require(opts.learning_rate > 0.0 && opts.epochs > 0, ErrorKind::Config, "invalid LID detector schedule");
  std::vector<LidRow> rows;
  for (std::size_t k : k_values) {
    const auto s = lid_batch_scores(normal, noisy, adversarial, k, opts.batch_size);
    std::vector<double> x;
    std::vector<int> y;
    for (double v : s.normal) x.push_back(v), y.push_back(0);
    for (double v : s.noisy) x.push_back(v), y.push_back(0);
    for (double v : s.adversarial) x.push_back(v), y.push_back(1);

    double finite_max = 0.0;
    for (double v : x) {
      if (std::isfinite(v)) finite_max = std::max(finite_max, std::abs(v));
    }
    for (auto& v : x) {
      if (!std::isfinite(v)) v = 2.0 * finite_max + 1.0;
    }

    std::vector<double> negatives(s.normal);
    negatives.insert(negatives.end(), s.noisy.begin(), s.noisy.end());
    std::vector<double> neg_capped(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(negatives.size()));
    std::vector<double> pos_capped(x.begin() + static_cast<std::ptrdiff_t>(negatives.size()), x.end());
    LidRow row;
    row.k = k;
    row.mean_difference = mean_of(pos_capped) - mean_of(neg_capped);

    std::mt19937_64 rng(derive_seed(opts.seed, {0x4c4944, k}));
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (int cls = 0; cls < 2; ++cls) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == cls) idx.push_back(i);
      }
      std::shuffle(idx.begin(), idx.end(), rng);
      auto n_train = static_cast<std::size_t>(std::llround(opts.train_fraction * static_cast<double>(idx.size())));
      n_train = std::clamp<std::size_t>(n_train, 1, idx.size() > 1 ? idx.size() - 1 : 1);
      train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
      test_idx.insert(test_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    }
    require(!test_idx.empty(), ErrorKind::Size, "LID detector has no held-out samples");

    double mu = 0.0;
    for (auto i : train_idx) mu += x[i];
    mu /= static_cast<double>(train_idx.size());
    double sd = 0.0;
    for (auto i : train_idx) sd += (x[i] - mu) * (x[i] - mu);
    sd = std::sqrt(sd / static_cast<double>(train_idx.size()));
    if (sd < 1e-12) sd = 1.0;

    std::array<double, 2> class_count{0.0, 0.0};
    for (auto i : train_idx) class_count[static_cast<std::size_t>(y[i])] += 1.0;
    double w = 0.0;
    double b = 0.0;
    for (std::size_t e = 0; e < opts.epochs; ++e) {
      double gw = 0.0;
      double gb = 0.0;
      for (auto i : train_idx) {
        const double z = (x[i] - mu) / sd;
        const double p = 1.0 / (1.0 + std::exp(-(w * z + b)));
        const double weight = class_count[static_cast<std::size_t>(y[i])] > 0.0
                                  ? 0.5 / class_count[static_cast<std::size_t>(y[i])]
                                  : 0.0;
        gw += weight * (p - y[i]) * z;
        gb += weight * (p - y[i]);
      }
      w -= opts.learning_rate * gw;
      b -= opts.learning_rate * gb;
    }

    std::array<double, 2> correct{0.0, 0.0};
    std::array<double, 2> total{0.0, 0.0};
    for (auto i : test_idx) {
      const double z = (x[i] - mu) / sd;
      const int pred = w * z + b > 0.0 ? 1 : 0;
      total[static_cast<std::size_t>(y[i])] += 1.0;
      if (pred == y[i]) correct[static_cast<std::size_t>(y[i])] += 1.0;
    }
    double acc = 0.0;
    int present = 0;
    for (std::size_t c = 0; c < 2; ++c) {
      if (total[c] > 0.0) {
        acc += correct[c] / total[c];
        ++present;
      }
    }
    row.accuracy = 100.0 * acc / present;
    rows.push_back(row);
  }
  return rows;
}

double fooling_rate(std::span<const AttackReport> reports, const Classifier& classify) {
  require(!reports.empty(), ErrorKind::Size, "fooling rate of an empty report set");
  std::size_t fooled = 0;
  for (const auto& r : reports) {
    const auto& x = r.adversarial.empty() ? r.original : r.adversarial;
    if (classify(x) != r.true_label) ++fooled;
  }
  return 100.0 * static_cast<double>(fooled) / static_cast<double>(reports.size());
}

double tradeoff_distance(double error_pct, double fooling_pct) {
  require(error_pct >= 0.0 && error_pct <= 100.0 && fooling_pct >= 0.0 && fooling_pct <= 100.0, ErrorKind::Domain,
          "tradeoff arguments must be percentages in [0, 100]");
  return std::hypot(error_pct, fooling_pct);
}

Matrix rank_columns(const Matrix& table, bool higher_is_better) {
  Matrix ranks(table.rows(), table.cols());
  for (std::size_t c = 0; c < table.cols(); ++c) {
    std::vector<std::size_t> order(table.rows());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t r = 0; r < table.rows(); ++r) {
      require(std::isfinite(table(r, c)), ErrorKind::Domain, "rank table has a missing or non-finite cell");
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return higher_is_better ? table(a, c) > table(b, c) : table(a, c) < table(b, c);
    });
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() && table(order[j + 1], c) == table(order[i], c)) ++j;
      const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
      for (std::size_t t = i; t <= j; ++t) ranks(order[t], c) = mid;
      i = j + 1;
    }
  }
  return ranks;
}

std::vector<double> average_rank(const Matrix& table, bool higher_is_better) {
  require(table.rows() > 0 && table.cols() > 0, ErrorKind::Size, "rank table is empty");
  const auto ranks = rank_columns(table, higher_is_better);
  std::vector<double> out(table.rows(), 0.0);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.cols(); ++c) out[r] += ranks(r, c);
    out[r] /= static_cast<double>(table.cols());
  }
  return out;
}

std::vector<std::size_t> assign_folds(std::span<const std::string> source_ids, std::span<const int> labels,
                                      std::size_t folds, std::uint64_t seed) {
  require(folds >= 2, ErrorKind::Config, "folds must be >= 2");
  require(source_ids.size() == labels.size(), ErrorKind::Size, "source ids and labels differ in length");
  std::map<std::string, int> source_label;
  std::vector<std::string> sources;
  for (std::size_t i = 0; i < source_ids.size(); ++i) {
    auto [it, inserted] = source_label.emplace(source_ids[i], labels[i]);
    if (inserted) sources.push_back(source_ids[i]);
  }
  require(sources.size() >= folds, ErrorKind::Size,
          "need at least " + std::to_string(folds) + " sources, got " + std::to_string(sources.size()));
  std::map<int, std::vector<std::string>> by_class;
  for (const auto& s : sources) by_class[source_label[s]].push_back(s);

  constexpr int kAttempts = 10;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    std::mt19937_64 rng(derive_seed(seed, {0x464f4c44, static_cast<std::uint64_t>(attempt)}));
    std::map<std::string, std::size_t> fold_of;
    std::size_t next = 0;
    for (auto& [cls, list] : by_class) {
      auto shuffled = list;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      for (const auto& s : shuffled) fold_of[s] = next++ % folds;
    }
    bool ok = true;
    for (std::size_t f = 0; f < folds && ok; ++f) {
      for (const auto& [cls, list] : by_class) {
        const bool all_in_fold =
            std::all_of(list.begin(), list.end(), [&](const std::string& s) { return fold_of[s] == f; });
        if (all_in_fold) ok = false;
      }
    }
    if (!ok) continue;
    std::vector<std::size_t> out(source_ids.size());
    for (std::size_t i = 0; i < source_ids.size(); ++i) out[i] = fold_of[source_ids[i]];
    return out;
  }
  fail(ErrorKind::Size, "could not find a fold assignment with every class in every training split");
}

}  // namespace specguard
