#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "specguard/attacks.hpp"
#include "specguard/config.hpp"
#include "specguard/neural.hpp"
#include "specguard/pipeline.hpp"

namespace specguard {

/// Modules that can be removed from the proposed pipeline.
enum class AblationToggle { VisScales, Color, Highboost, Svd, Cda };

std::string to_string(AblationToggle toggle);
AblationToggle parse_toggle(const std::string& text);
const std::vector<AblationToggle>& all_toggles();

/// Copy of `cfg` with the module disabled.
PipelineConfig without(const PipelineConfig& cfg, AblationToggle toggle);

/// Pixel stacks of a labeled clip set.
struct Dataset {
  std::vector<Tensor> stacks;
  std::vector<int> labels;
  std::vector<std::string> source_ids;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return stacks.size(); }
};

Dataset build_dataset(std::span<const LabeledClip> clips, const RepresentationConfig& rep,
                      std::vector<std::string> class_names, std::size_t jobs = 1);

inline const std::string kCnnName = "CNN";
inline const std::string kLinearSvmName = "LinearSVM";
inline const std::string kProposedName = "Proposed";

struct ModelEval {
  std::string name;
  double accuracy = 0.0;                 ///< clean test accuracy, %
  std::map<std::string, double> fooling;  ///< attack name -> fooling %, %
  double mean_fooling = 0.0;             ///< unweighted mean over the evaluated attacks
  double deep_fooling = 0.0;             ///< mean over FGSM, BIM-a, BIM-b, CWA
  double svm_fooling = 0.0;              ///< mean over EA, LFA
  double distance = 0.0;                 ///< tradeoff_distance(100 - accuracy, mean_fooling)
};

struct AblationEval {
  AblationToggle toggle = AblationToggle::Cda;
  /// Removed minus full; robustness is 100 - fooling.
  double accuracy_delta = 0.0;
  double deep_robustness_delta = 0.0;
  double svm_robustness_delta = 0.0;
  ModelEval removed;
};

struct FoldEval {
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::vector<ModelEval> models;  ///< CNN, LinearSVM, Proposed
  /// White-box fooling of the CNN on its correctly classified test samples.
  std::map<std::string, double> cnn_potency;
  /// Same with epsilon = 0 (FGSM and BIM-b).
  std::map<std::string, double> cnn_potency_zero;
  std::size_t cnn_correct = 0;
  std::vector<AblationEval> ablation;
  std::vector<AttackReport> reports;
};

/// Base seed of every model fitted for one test fold.
std::uint64_t fold_seed(const PipelineConfig& cfg, std::size_t test_fold);
/// Seed handed to fit_proposed for one test fold.
std::uint64_t proposed_seed(std::uint64_t fold_seed);

TrainResult fit_cnn(const PipelineConfig& cfg, std::span<const Tensor> stacks, std::span<const int> labels,
                    std::size_t n_classes, std::uint64_t seed);
/// Linear SVM on flattened pixel stacks.
MulticlassSvm fit_linear_svm(const PipelineConfig& cfg, std::span<const Tensor> stacks, std::span<const int> labels,
                             std::size_t n_classes);

/// Attack settings for one attack kind: gradient attacks use the pixel-space
/// epsilon schedule, EA the closed form with ea_epsilon, LFA a unit-cost budget
/// of lfa_budget_fraction * n_train flips.
AttackConfig attack_config(const PipelineConfig& cfg, AttackKind kind, std::size_t n_train, std::uint64_t seed);

/// Greedy label flips against the linear SVM.
std::vector<int> poison_labels(const PipelineConfig& cfg, std::span<const Tensor> stacks, std::span<const int> labels,
                               std::size_t n_classes);

/// Fills mean/deep/svm fooling and the tradeoff distance from accuracy and
/// the per-attack fooling rates.
void summarize(ModelEval& m);

struct EvalOptions {
  /// Folds to evaluate; empty means all.
  std::vector<std::size_t> folds;
  std::vector<AblationToggle> toggles;
  std::size_t jobs = 1;
  bool keep_reports = false;
};

struct EvalReport {
  std::vector<std::string> attacks;
  std::vector<FoldEval> folds;
  std::vector<ModelEval> models;  ///< means over folds
  std::vector<AblationEval> ablation;  ///< means over folds
  std::vector<double> accuracy_rank;  ///< average rank per model over folds
  std::vector<double> fooling_rank;   ///< average rank per model over attacks
};

/// Trains the three models on every fold but `test_fold`, crafts every
/// configured attack and scores each model (transfer included) on them.
FoldEval run_fold(const PipelineConfig& cfg, const Dataset& data, std::span<const std::size_t> fold_of,
                  std::size_t test_fold, const EvalOptions& opts);

/// Stratified source-level folds, run_fold on each, mean reduction.
EvalReport kfold_evaluate(const PipelineConfig& cfg, const Dataset& data, const EvalOptions& opts = {});

/// kfold_evaluate with every toggle in `toggles`.
EvalReport ablation(const PipelineConfig& cfg, const Dataset& data, std::span<const AblationToggle> toggles,
                    EvalOptions opts = {});

}  // namespace specguard
