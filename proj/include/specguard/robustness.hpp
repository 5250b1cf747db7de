#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "specguard/attacks.hpp"
#include "specguard/matrix.hpp"

namespace specguard {

/// MLE of local intrinsic dimensionality from neighbour distances:
/// -(1/k sum_i ln(r_i / r_k))^-1 over the k smallest non-zero distances.
/// Zero distances (duplicates) are dropped; fewer than k remaining throws
/// Size. All k distances equal returns +infinity.
double lid_from_distances(std::span<const double> distances, std::size_t k);

/// LID of `query` against `reference` (which must not contain the query).
double lid_score(std::span<const double> query, std::span<const std::vector<double>> reference, std::size_t k);

struct LidRow {
  std::size_t k = 0;
  /// Mean adversarial LID minus mean normal/noisy LID.
  double mean_difference = 0.0;
  /// Balanced accuracy (%) of the logistic detector on the held-out split.
  double accuracy = 0.0;
};

struct LidOptions {
  /// Vectors per mini-batch; raised to k + 1 when smaller.
  std::size_t batch_size = 100;
  std::size_t epochs = 500;
  double learning_rate = 0.1;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
};

/// LID of every vector of each set against the normal vectors of its
/// mini-batch. Returns one score list per set.
struct LidScores {
  std::vector<double> normal;
  std::vector<double> noisy;
  std::vector<double> adversarial;
};
LidScores lid_batch_scores(std::span<const std::vector<double>> normal, std::span<const std::vector<double>> noisy,
                           std::span<const std::vector<double>> adversarial, std::size_t k, std::size_t batch_size);

/// Normal and noisy scores form the negative class, adversarial the
/// positive class; a one-feature logistic regression is trained per k.
std::vector<LidRow> lid_detectability(std::span<const std::vector<double>> normal,
                                      std::span<const std::vector<double>> noisy,
                                      std::span<const std::vector<double>> adversarial,
                                      std::span<const std::size_t> k_values, const LidOptions& opts = {});

using Classifier = std::function<int(std::span<const double>)>;

/// Percentage of reports whose adversarial input `classify` assigns to a
/// label other than the true label.
double fooling_rate(std::span<const AttackReport> reports, const Classifier& classify);

/// sqrt(error^2 + fooling^2); both arguments in [0, 100].
double tradeoff_distance(double error_pct, double fooling_pct);

/// Rows are models, columns conditions. Rank 1 is the best value in a column
/// (highest if `higher_is_better`); ties share the mean rank. Returns the
/// mean rank per model.
std::vector<double> average_rank(const Matrix& table, bool higher_is_better);

/// Per-column ranks (same convention as average_rank).
Matrix rank_columns(const Matrix& table, bool higher_is_better);

/// Assigns each sample a fold in [0, folds) so that all samples sharing a
/// source id share a fold, with sources of each class dealt evenly. Retries
/// with derived seeds until every training split contains every class, then
/// throws Size.
std::vector<std::size_t> assign_folds(std::span<const std::string> source_ids, std::span<const int> labels,
                                      std::size_t folds, std::uint64_t seed);

}  // namespace specguard
