#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "specguard/matrix.hpp"

namespace specguard {

enum class KernelKind : std::uint32_t { Linear = 0, Poly = 1, Rbf = 2 };

std::string to_string(KernelKind kind);
KernelKind parse_kernel_kind(const std::string& text);

/// linear: <x, xi>; poly: (gamma <x, xi> + offset)^degree;
/// rbf: exp(-0.5 sigma^-2 |x - xi|^2).
struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  int degree = 2;
  double offset = 1.0;
  double gamma = 1.0;
  double sigma = 1.0;

  void validate() const;

  static KernelSpec linear();
  static KernelSpec poly(int degree, double offset = 1.0, double gamma = 1.0);
  static KernelSpec rbf(double sigma);
};

double kernel_value(const KernelSpec& k, std::span<const double> x, std::span<const double> xi);

/// d K(x, xi) / d x.
std::vector<double> kernel_gradient(const KernelSpec& k, std::span<const double> x, std::span<const double> xi);

struct SvmModel {
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> alphas;  ///< alpha_i * y_i
  double bias = 0.0;
  KernelSpec kernel;
  double cost = 1.0;

  std::size_t dim() const noexcept { return support_vectors.empty() ? 0 : support_vectors.front().size(); }
};

struct SmoOptions {
  double tolerance = 1e-3;
  std::size_t max_iters = 200000;
};

/// Full dual solution, for KKT inspection.
struct SmoSolution {
  std::vector<double> alpha;  ///< unsigned, in [0, cost]
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Soft-margin dual on a precomputed Gram matrix with labels in {-1, +1}.
/// Working pairs are chosen by maximal KKT violation.
SmoSolution smo_solve(const Matrix& gram, std::span<const int> y, double cost, const SmoOptions& opts = {});

Matrix gram_matrix(const KernelSpec& k, std::span<const std::vector<double>> x);

/// Labels in {-1, +1}. Throws Domain when only one class is present.
SvmModel svm_train(std::span<const std::vector<double>> x, std::span<const int> y, const KernelSpec& kernel,
                   double cost, const SmoOptions& opts = {});

double svm_decision(const SvmModel& model, std::span<const double> x);
int svm_label(const SvmModel& model, std::span<const double> x);

/// sum_i alpha_i dK(x, x_i)/dx.
std::vector<double> decision_gradient(const SvmModel& model, std::span<const double> x);

/// w = sum_i alpha_i x_i; linear kernel only.
std::vector<double> linear_weights(const SvmModel& model);

double hinge_loss(int y, double f);

struct MulticlassSvm {
  std::vector<SvmModel> models;  ///< one-vs-rest, model c separates class c (+1) from the rest
  std::vector<std::string> class_names;

  std::size_t n_classes() const noexcept { return models.size(); }
};

/// Labels in [0, n_classes). Every class must be present.
MulticlassSvm multiclass_train(std::span<const std::vector<double>> x, std::span<const int> labels,
                               std::size_t n_classes, const KernelSpec& kernel, double cost,
                               const SmoOptions& opts = {});

std::vector<double> multiclass_decisions(const MulticlassSvm& m, std::span<const double> x);

/// argmax of the decision values; ties go to the lowest index.
int multiclass_predict(const MulticlassSvm& m, std::span<const double> x);

/// SVM1: "SVM1", kernel (u32 kind, u32 degree, f64 offset, f64 gamma,
/// f64 sigma), f64 cost, u32 n_sv, u32 dim, alphas, support vectors, f64 bias.
void write_svm(std::ostream& out, const SvmModel& model);
SvmModel read_svm(std::istream& in);
void save_svm(const std::filesystem::path& path, const SvmModel& model);
SvmModel load_svm(const std::filesystem::path& path);

/// MSV1: "MSV1", u32 n_classes, class names, then one SVM1 block per class.
void save_multiclass(const std::filesystem::path& path, const MulticlassSvm& model);
MulticlassSvm load_multiclass(const std::filesystem::path& path);

}  // namespace specguard
