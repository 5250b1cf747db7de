#include "specguard/svm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "specguard/binary_io.hpp"
#include "specguard/error.hpp"
#include "specguard/kernels.hpp"

namespace specguard {

namespace fs = std::filesystem;

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Poly: return "poly";
    case KernelKind::Rbf: return "rbf";
  }
  return "unknown";
}

KernelKind parse_kernel_kind(const std::string& text) {
  if (text == "linear") return KernelKind::Linear;
  if (text == "poly" || text == "quadratic") return KernelKind::Poly;
  if (text == "rbf") return KernelKind::Rbf;
  fail(ErrorKind::Config, "unknown kernel '" + text + "'");
}

void KernelSpec::validate() const {
  if (kind == KernelKind::Poly) {
    require(degree >= 1, ErrorKind::Domain, "polynomial degree must be at least 1");
    require(std::isfinite(offset) && std::isfinite(gamma) && gamma > 0.0, ErrorKind::Domain,
            "polynomial kernel parameters must be finite with gamma > 0");
  }
  if (kind == KernelKind::Rbf) require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::Domain, "sigma must be positive");
}

KernelSpec KernelSpec::linear() { return KernelSpec{}; }

KernelSpec KernelSpec::poly(int degree, double offset, double gamma) {
  KernelSpec k;
  k.kind = KernelKind::Poly;
  k.degree = degree;
  k.offset = offset;
  k.gamma = gamma;
  k.validate();
  return k;
}

KernelSpec KernelSpec::rbf(double sigma) {
  KernelSpec k;
  k.kind = KernelKind::Rbf;
  k.sigma = sigma;
  k.validate();
  return k;
}

double kernel_value(const KernelSpec& k, std::span<const double> x, std::span<const double> xi) {
  require(x.size() == xi.size(), ErrorKind::Shape, "kernel arguments differ in dimension");
  switch (k.kind) {
    case KernelKind::Linear: return kernels::dot(x, xi);
    case KernelKind::Poly: return std::pow(k.gamma * kernels::dot(x, xi) + k.offset, k.degree);
    case KernelKind::Rbf: return std::exp(-0.5 * kernels::squared_distance(x, xi) / (k.sigma * k.sigma));
  }
  return 0.0;
}

std::vector<double> kernel_gradient(const KernelSpec& k, std::span<const double> x, std::span<const double> xi) {
  require(x.size() == xi.size(), ErrorKind::Shape, "kernel arguments differ in dimension");
  std::vector<double> g(x.size(), 0.0);
  switch (k.kind) {
    case KernelKind::Linear:
      g.assign(xi.begin(), xi.end());
      break;
    case KernelKind::Poly: {
      const double base = k.gamma * kernels::dot(x, xi) + k.offset;
      const double scale = k.degree * k.gamma * (k.degree == 1 ? 1.0 : std::pow(base, k.degree - 1));
      kernels::axpy(scale, xi, g);
      break;
    }
    case KernelKind::Rbf: {
      const double inv = 1.0 / (k.sigma * k.sigma);
      const double kv = std::exp(-0.5 * kernels::squared_distance(x, xi) * inv);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = -inv * kv * (x[i] - xi[i]);
      break;
    }
  }
  return g;
}

Matrix gram_matrix(const KernelSpec& k, std::span<const std::vector<double>> x) {
  Matrix g(x.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i; j < x.size(); ++j) g(i, j) = g(j, i) = kernel_value(k, x[i], x[j]);
  return g;
}

SmoSolution smo_solve(const Matrix& gram, std::span<const int> y, double cost, const SmoOptions& opts) {
  const std::size_t n = y.size();
  require(gram.rows() == n && gram.cols() == n, ErrorKind::Shape, "Gram matrix does not match the labels");
  require(cost > 0.0 && std::isfinite(cost), ErrorKind::Domain, "cost must be positive");
  bool pos = false, neg = false;
  for (int v : y) {
    require(v == 1 || v == -1, ErrorKind::Domain, "binary labels must be -1 or +1");
    (v > 0 ? pos : neg) = true;
  }
  require(pos && neg, ErrorKind::Domain, "training data must contain both classes");

  constexpr double kTau = 1e-12;
  auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * gram(i, j); };
  SmoSolution sol;
  std::vector<double>& alpha = sol.alpha;
  alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);
  auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < cost) || (y[t] < 0 && alpha[t] > 0.0); };
  auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0.0) || (y[t] < 0 && alpha[t] < cost); };

  for (; sol.iterations < opts.max_iters; ++sol.iterations) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i == n || j == n || gmax - gmin < opts.tolerance) {
      sol.converged = true;
      break;
    }
    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = gram(i, i) + gram(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > cost) {
          alpha[i] = cost;
          alpha[j] = cost - diff;
        }
      } else if (alpha[j] > cost) {
        alpha[j] = cost;
        alpha[i] = cost + diff;
      }
    } else {
      double quad = gram(i, i) + gram(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > cost) {
        if (alpha[i] > cost) {
          alpha[i] = cost;
          alpha[j] = sum - cost;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > cost) {
        if (alpha[j] > cost) {
          alpha[j] = cost;
          alpha[i] = sum - cost;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) grad[t] += q(t, i) * di + q(t, j) * dj;
  }

  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= cost) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  if (!std::isfinite(rho)) rho = std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);
  sol.bias = -rho;
  return sol;
}

SvmModel svm_train(std::span<const std::vector<double>> x, std::span<const int> y, const KernelSpec& kernel,
                   double cost, const SmoOptions& opts) {
  require(!x.empty() && x.size() == y.size(), ErrorKind::Size, "training data and labels differ in size");
  kernel.validate();
  const std::size_t dim = x.front().size();
  for (const auto& v : x) {
    require(v.size() == dim, ErrorKind::Shape, "training vectors differ in dimension");
    require(all_finite(v), ErrorKind::Domain, "training vectors must be finite");
  }
  const SmoSolution sol = smo_solve(gram_matrix(kernel, x), y, cost, opts);
  SvmModel model;
  model.kernel = kernel;
  model.cost = cost;
  model.bias = sol.bias;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (sol.alpha[i] > 0.0) {
      model.support_vectors.push_back(x[i]);
      model.alphas.push_back(sol.alpha[i] * y[i]);
    }
  }
  return model;
}

double svm_decision(const SvmModel& model, std::span<const double> x) {
  require(model.support_vectors.empty() || x.size() == model.dim(), ErrorKind::Shape,
          "input dimension does not match the model");
  double f = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
    f += model.alphas[i] * kernel_value(model.kernel, x, model.support_vectors[i]);
  return f;
}

int svm_label(const SvmModel& model, std::span<const double> x) { return svm_decision(model, x) >= 0.0 ? 1 : -1; }

std::vector<double> decision_gradient(const SvmModel& model, std::span<const double> x) {
  require(model.support_vectors.empty() || x.size() == model.dim(), ErrorKind::Shape,
          "input dimension does not match the model");
  std::vector<double> g(x.size(), 0.0);
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
    kernels::axpy(model.alphas[i], kernel_gradient(model.kernel, x, model.support_vectors[i]), g);
  return g;
}

std::vector<double> linear_weights(const SvmModel& model) {
  require(model.kernel.kind == KernelKind::Linear, ErrorKind::Domain, "weights exist only for linear kernels");
  std::vector<double> w(model.dim(), 0.0);
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
    kernels::axpy(model.alphas[i], model.support_vectors[i], w);
  return w;
}

double hinge_loss(int y, double f) {
  require(y == 1 || y == -1, ErrorKind::Domain, "hinge label must be -1 or +1");
  return std::max(0.0, 1.0 - y * f);
}

MulticlassSvm multiclass_train(std::span<const std::vector<double>> x, std::span<const int> labels,
                               std::size_t n_classes, const KernelSpec& kernel, double cost,
                               const SmoOptions& opts) {
  require(n_classes >= 2, ErrorKind::Domain, "need at least two classes");
  require(x.size() == labels.size() && !x.empty(), ErrorKind::Size, "training data and labels differ in size");
  std::vector<std::size_t> counts(n_classes, 0);
  for (int l : labels) {
    require(l >= 0 && static_cast<std::size_t>(l) < n_classes, ErrorKind::Domain, "label out of range");
    ++counts[l];
  }
  for (std::size_t c = 0; c < n_classes; ++c)
    require(counts[c] > 0, ErrorKind::Domain, "class " + std::to_string(c) + " has no training samples");
  kernel.validate();
  const Matrix gram = gram_matrix(kernel, x);
  MulticlassSvm m;
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::vector<int> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == static_cast<int>(c) ? 1 : -1;
    const SmoSolution sol = smo_solve(gram, y, cost, opts);
    SvmModel model;
    model.kernel = kernel;
    model.cost = cost;
    model.bias = sol.bias;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (sol.alpha[i] > 0.0) {
        model.support_vectors.push_back(x[i]);
        model.alphas.push_back(sol.alpha[i] * y[i]);
      }
    }
    m.models.push_back(std::move(model));
    m.class_names.push_back(std::to_string(c));
  }
  return m;
}

std::vector<double> multiclass_decisions(const MulticlassSvm& m, std::span<const double> x) {
  std::vector<double> d;
  d.reserve(m.models.size());
  for (const auto& model : m.models) d.push_back(svm_decision(model, x));
  return d;
}

int multiclass_predict(const MulticlassSvm& m, std::span<const double> x) {
  require(!m.models.empty(), ErrorKind::State, "multiclass model is empty");
  const auto d = multiclass_decisions(m, x);
  std::size_t best = 0;
  for (std::size_t c = 1; c < d.size(); ++c)
    if (d[c] > d[best]) best = c;
  return static_cast<int>(best);
}

void write_svm(std::ostream& out, const SvmModel& model) {
  binio::write_magic(out, "SVM1");
  binio::write_u32(out, static_cast<std::uint32_t>(model.kernel.kind));
  binio::write_u32(out, static_cast<std::uint32_t>(model.kernel.degree));
  binio::write_f64(out, model.kernel.offset);
  binio::write_f64(out, model.kernel.gamma);
  binio::write_f64(out, model.kernel.sigma);
  binio::write_f64(out, model.cost);
  binio::write_u32(out, static_cast<std::uint32_t>(model.support_vectors.size()));
  binio::write_u32(out, static_cast<std::uint32_t>(model.dim()));
  for (double a : model.alphas) binio::write_f64(out, a);
  for (const auto& sv : model.support_vectors)
    for (double v : sv) binio::write_f64(out, v);
  binio::write_f64(out, model.bias);
}

SvmModel read_svm(std::istream& in) {
  binio::expect_magic(in, "SVM1");
  SvmModel model;
  const std::uint32_t kind = binio::read_u32(in);
  require(kind <= 2, ErrorKind::Format, "unknown kernel kind in SVM1");
  model.kernel.kind = static_cast<KernelKind>(kind);
  model.kernel.degree = static_cast<int>(binio::read_u32(in));
  model.kernel.offset = binio::read_f64(in);
  model.kernel.gamma = binio::read_f64(in);
  model.kernel.sigma = binio::read_f64(in);
  model.cost = binio::read_f64(in);
  const std::uint32_t n_sv = binio::read_u32(in);
  const std::uint32_t dim = binio::read_u32(in);
  model.alphas.resize(n_sv);
  for (double& a : model.alphas) a = binio::read_f64(in);
  model.support_vectors.assign(n_sv, std::vector<double>(dim));
  for (auto& sv : model.support_vectors)
    for (double& v : sv) v = binio::read_f64(in);
  model.bias = binio::read_f64(in);
  return model;
}

void save_svm(const fs::path& path, const SvmModel& model) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  write_svm(out, model);
}

SvmModel load_svm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  return read_svm(in);
}

void save_multiclass(const fs::path& path, const MulticlassSvm& model) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  binio::write_magic(out, "MSV1");
  binio::write_u32(out, static_cast<std::uint32_t>(model.models.size()));
  for (std::size_t c = 0; c < model.models.size(); ++c)
    binio::write_string(out, c < model.class_names.size() ? model.class_names[c] : std::to_string(c));
  for (const auto& m : model.models) write_svm(out, m);
}

MulticlassSvm load_multiclass(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  binio::expect_magic(in, "MSV1");
  const std::uint32_t n = binio::read_u32(in);
  require(n >= 2, ErrorKind::Format, "MSV1 needs at least two classes");
  MulticlassSvm m;
  for (std::uint32_t c = 0; c < n; ++c) m.class_names.push_back(binio::read_string(in));
  for (std::uint32_t c = 0; c < n; ++c) m.models.push_back(read_svm(in));
  return m;
}

}  // namespace specguard
