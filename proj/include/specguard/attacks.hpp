#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specguard/matrix.hpp"
#include "specguard/neural.hpp"
#include "specguard/svm.hpp"

namespace specguard {

/// Classifier over flat input vectors that exposes input gradients.
class GradientModel {
 public:
  virtual ~GradientModel() = default;

  virtual std::size_t n_classes() const = 0;
  virtual std::size_t input_size() const = 0;
  /// Class scores (logits or decision values).
  virtual std::vector<double> scores(std::span<const double> x) const = 0;
  /// d CE(softmax(scores), label) / dx.
  virtual std::vector<double> loss_gradient(std::span<const double> x, std::size_t label) const = 0;
  /// d (sum_j coeffs_j * scores_j) / dx.
  virtual std::vector<double> score_gradient(std::span<const double> x, std::span<const double> coeffs) const = 0;

  int predict(std::span<const double> x) const;
};

/// Wraps a network; flat inputs are reshaped to the network input shape.
class NetModel final : public GradientModel {
 public:
  explicit NetModel(const NeuralNet& net);

  std::size_t n_classes() const override;
  std::size_t input_size() const override;
  std::vector<double> scores(std::span<const double> x) const override;
  std::vector<double> loss_gradient(std::span<const double> x, std::size_t label) const override;
  std::vector<double> score_gradient(std::span<const double> x, std::span<const double> coeffs) const override;

 private:
  Tensor shaped(std::span<const double> x) const;
  const NeuralNet& net_;
};

/// Multiclass SVM with decision values as scores.
class SvmGradientModel final : public GradientModel {
 public:
  explicit SvmGradientModel(const MulticlassSvm& svm);

  std::size_t n_classes() const override;
  std::size_t input_size() const override;
  std::vector<double> scores(std::span<const double> x) const override;
  std::vector<double> loss_gradient(std::span<const double> x, std::size_t label) const override;
  std::vector<double> score_gradient(std::span<const double> x, std::span<const double> coeffs) const override;

 private:
  const MulticlassSvm& svm_;
};

/// Affine scores W x + b (rows of W are classes).
class LinearModel final : public GradientModel {
 public:
  LinearModel(Matrix weights, std::vector<double> bias);

  std::size_t n_classes() const override;
  std::size_t input_size() const override;
  std::vector<double> scores(std::span<const double> x) const override;
  std::vector<double> loss_gradient(std::span<const double> x, std::size_t label) const override;
  std::vector<double> score_gradient(std::span<const double> x, std::span<const double> coeffs) const override;

 private:
  Matrix w_;
  std::vector<double> b_;
};

enum class AttackKind { Fgsm, BimA, BimB, Cwa, Evasion, LabelFlip };

std::string to_string(AttackKind kind);
AttackKind parse_attack(const std::string& text);
/// FGSM, BIM-a, BIM-b, CWA, EA, LFA.
const std::vector<AttackKind>& all_attacks();
bool is_deep_attack(AttackKind kind);

enum class EvasionMode { ClosedForm, Gradient };

struct AttackConfig {
  double epsilon = 0.1;
  std::size_t max_iters = 10;
  double step = 0.02;
  double clip_lo = 0.0;
  double clip_hi = 1.0;
  bool targeted = false;
  std::optional<std::size_t> target_label;
  double cwa_c_lo = 1e-3;
  double cwa_c_hi = 10.0;
  std::size_t cwa_binary_steps = 6;
  std::size_t cwa_steps = 100;
  double cwa_lr = 0.01;
  /// Evasion step size for the gradient mode.
  double eta = 0.05;
  EvasionMode evasion_mode = EvasionMode::ClosedForm;
  double lfa_budget = 0.0;
  /// Per-sample flip costs; empty means unit cost.
  std::vector<double> lfa_costs;
  double lfa_gamma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AttackReport {
  std::string source_id;
  AttackKind attack = AttackKind::Fgsm;
  std::vector<double> original;
  std::vector<double> adversarial;
  int true_label = 0;
  std::optional<std::size_t> target;
  int label_before = 0;
  int label_after = 0;
  bool success = false;
  double l2_norm = 0.0;
  double linf_norm = 0.0;
  std::size_t iterations = 0;
  std::string error;
};

/// Fills label_after, success and norms from the current adversarial vector.
void finalize_report(AttackReport& r, const GradientModel& model);

AttackReport fgsm(const GradientModel& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg);

enum class BimVariant { A, B };
AttackReport bim(const GradientModel& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg,
                 BimVariant variant);

/// Carlini-Wagner with the tanh box; see AttackConfig for the schedule.
AttackReport cwa(const GradientModel& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg);

/// Binary SVM evasion. Closed form moves by epsilon along -sign(f(x)) w/|w|
/// (linear kernels only); gradient mode descends sign(f(x)) f.
AttackReport evasion(const SvmModel& model, std::span<const double> x, const AttackConfig& cfg);

/// Evasion against the one-vs-rest model of the true class.
AttackReport evasion(const MulticlassSvm& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg);

struct LabelFlipResult {
  std::vector<int> labels;      ///< contaminated labels
  std::vector<bool> flipped;    ///< q_i
  double spent = 0.0;
  std::vector<std::size_t> order;  ///< flip order
};

/// Greedy label flipping on a binary problem (labels in {-1, +1}). Each step
/// retrains on every candidate flip and takes the one with the largest
/// gamma * (clean-label hinge under the retrained model - current hinge) / c_i,
/// as long as the budget allows.
LabelFlipResult label_flip_attack(std::span<const std::vector<double>> x, std::span<const int> y,
                                  const KernelSpec& kernel, double cost, const AttackConfig& cfg);

/// Multiclass variant: a flip moves a sample to any other class; the hinge is
/// summed over the one-vs-rest models.
LabelFlipResult label_flip_attack(std::span<const std::vector<double>> x, std::span<const int> labels,
                                  std::size_t n_classes, const KernelSpec& kernel, double cost,
                                  const AttackConfig& cfg);

struct LabeledSample {
  std::string source_id;
  std::vector<double> x;
  int label = 0;
};

/// One report per sample. Targeted attacks draw a uniformly random wrong
/// label per sample from a seeded stream. Per-sample failures are recorded in
/// the report instead of thrown. Supports FGSM, BIM-a, BIM-b and CWA.
std::vector<AttackReport> attack_batch(const GradientModel& model, std::span<const LabeledSample> data,
                                       AttackKind attack, const AttackConfig& cfg, std::size_t jobs = 1);

/// Evasion for every sample against a multiclass SVM.
std::vector<AttackReport> evasion_batch(const MulticlassSvm& model, std::span<const LabeledSample> data,
                                        const AttackConfig& cfg, std::size_t jobs = 1);

/// Target label for sample `index`: uniform over the wrong labels.
std::size_t random_wrong_label(std::size_t true_label, std::size_t n_classes, std::uint64_t seed, std::size_t index);

/// CSV: source_id,attack,label_before,label_after,success,l2,linf,iterations.
void write_reports_csv(const std::filesystem::path& path, std::span<const AttackReport> reports);

}  // namespace specguard
