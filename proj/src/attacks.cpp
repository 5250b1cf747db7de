#include "specguard/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "specguard/error.hpp"
#include "specguard/kernels.hpp"
#include "specguard/parallel.hpp"
#include "specguard/random.hpp"
#include "specguard/text.hpp"

namespace specguard {

namespace fs = std::filesystem;

int GradientModel::predict(std::span<const double> x) const { return static_cast<int>(argmax(scores(x))); }

NetModel::NetModel(const NeuralNet& net) : net_(net) {}

std::size_t NetModel::n_classes() const { return net_.output_shape().size(); }
std::size_t NetModel::input_size() const { return net_.input_shape().size(); }

Tensor NetModel::shaped(std::span<const double> x) const {
  require(x.size() == input_size(), ErrorKind::Shape, "input size does not match the network");
  return Tensor(net_.input_shape(), std::vector<double>(x.begin(), x.end()));
}

std::vector<double> NetModel::scores(std::span<const double> x) const { return net_.logits(shaped(x)).data; }

std::vector<double> NetModel::loss_gradient(std::span<const double> x, std::size_t label) const {
  return net_.gradient_input(shaped(x), LossTarget::label(label, n_classes())).data;
}

std::vector<double> NetModel::score_gradient(std::span<const double> x, std::span<const double> coeffs) const {
  return net_.logit_gradient(shaped(x), coeffs).data;
}

SvmGradientModel::SvmGradientModel(const MulticlassSvm& svm) : svm_(svm) {
  require(svm.n_classes() >= 2, ErrorKind::State, "SVM model is empty");
}

std::size_t SvmGradientModel::n_classes() const { return svm_.n_classes(); }
std::size_t SvmGradientModel::input_size() const { return svm_.models.front().dim(); }

std::vector<double> SvmGradientModel::scores(std::span<const double> x) const { return multiclass_decisions(svm_, x); }

namespace {

std::vector<double> softmax_minus_onehot(std::vector<double> z, std::size_t label) {
  require(label < z.size(), ErrorKind::Domain, "label out of range");
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
  z[label] -= 1.0;
  return z;
}

}  // namespace

std::vector<double> SvmGradientModel::loss_gradient(std::span<const double> x, std::size_t label) const {
  return score_gradient(x, softmax_minus_onehot(scores(x), label));
}

std::vector<double> SvmGradientModel::score_gradient(std::span<const double> x, std::span<const double> coeffs) const {
  require(coeffs.size() == n_classes(), ErrorKind::Shape, "score coefficient count mismatch");
  std::vector<double> g(x.size(), 0.0);
  for (std::size_t c = 0; c < n_classes(); ++c)
    if (coeffs[c] != 0.0) kernels::axpy(coeffs[c], decision_gradient(svm_.models[c], x), g);
  return g;
}

LinearModel::LinearModel(Matrix weights, std::vector<double> bias) : w_(std::move(weights)), b_(std::move(bias)) {
  require(w_.rows() == b_.size() && w_.rows() >= 2, ErrorKind::Shape, "linear model needs one bias per class");
}

std::size_t LinearModel::n_classes() const { return w_.rows(); }
std::size_t LinearModel::input_size() const { return w_.cols(); }

std::vector<double> LinearModel::scores(std::span<const double> x) const {
  require(x.size() == w_.cols(), ErrorKind::Shape, "input size does not match the linear model");
  std::vector<double> z(b_);
  for (std::size_t c = 0; c < z.size(); ++c) z[c] += kernels::dot(w_.row(c), x);
  return z;
}

std::vector<double> LinearModel::loss_gradient(std::span<const double> x, std::size_t label) const {
  return score_gradient(x, softmax_minus_onehot(scores(x), label));
}

std::vector<double> LinearModel::score_gradient(std::span<const double> x, std::span<const double> coeffs) const {
  require(x.size() == w_.cols() && coeffs.size() == w_.rows(), ErrorKind::Shape, "linear model gradient shape mismatch");
  std::vector<double> g(x.size(), 0.0);
  for (std::size_t c = 0; c < coeffs.size(); ++c)
    if (coeffs[c] != 0.0) kernels::axpy(coeffs[c], w_.row(c), g);
  return g;
}

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::Fgsm: return "FGSM";
    case AttackKind::BimA: return "BIM-a";
    case AttackKind::BimB: return "BIM-b";
    case AttackKind::Cwa: return "CWA";
    case AttackKind::Evasion: return "EA";
    case AttackKind::LabelFlip: return "LFA";
  }
  return "unknown";
}

AttackKind parse_attack(const std::string& text) {
  std::string upper = text;
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char ch) { return std::toupper(ch); });
  if (upper == "FGSM") return AttackKind::Fgsm;
  if (upper == "BIM-A" || upper == "BIMA") return AttackKind::BimA;
  if (upper == "BIM-B" || upper == "BIMB") return AttackKind::BimB;
  if (upper == "CWA" || upper == "CW") return AttackKind::Cwa;
  if (upper == "EA" || upper == "EVASION") return AttackKind::Evasion;
  if (upper == "LFA" || upper == "LABEL-FLIP") return AttackKind::LabelFlip;
  fail(ErrorKind::Config, "unknown attack '" + text + "'");
}

const std::vector<AttackKind>& all_attacks() {
  static const std::vector<AttackKind> kinds{AttackKind::Fgsm, AttackKind::BimA,    AttackKind::BimB,
                                             AttackKind::Cwa,  AttackKind::Evasion, AttackKind::LabelFlip};
  return kinds;
}

bool is_deep_attack(AttackKind kind) {
  return kind == AttackKind::Fgsm || kind == AttackKind::BimA || kind == AttackKind::BimB || kind == AttackKind::Cwa;
}

void AttackConfig::validate() const {
  require(epsilon >= 0.0 && std::isfinite(epsilon), ErrorKind::Config, "epsilon must be non-negative");
  require(clip_lo < clip_hi, ErrorKind::Config, "clip range must satisfy lo < hi");
  require(step >= 0.0, ErrorKind::Config, "step must be non-negative");
  require(cwa_c_lo >= 0.0 && cwa_c_lo <= cwa_c_hi, ErrorKind::Config, "CWA c range must satisfy 0 <= lo <= hi");
  require(lfa_budget >= 0.0, ErrorKind::Config, "LFA budget must be non-negative");
  for (double c : lfa_costs) require(c > 0.0, ErrorKind::Config, "LFA flip costs must be positive");
}

namespace {

double linf(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

AttackReport start_report(const GradientModel& model, std::span<const double> x, std::size_t y, AttackKind kind,
                          const AttackConfig& cfg) {
  cfg.validate();
  require(x.size() == model.input_size(), ErrorKind::Shape, "input size does not match the model");
  require(y < model.n_classes(), ErrorKind::Domain, "label out of range");
  AttackReport r;
  r.attack = kind;
  r.original.assign(x.begin(), x.end());
  r.adversarial = r.original;
  r.true_label = static_cast<int>(y);
  r.label_before = model.predict(x);
  if (cfg.targeted) {
    require(cfg.target_label.has_value(), ErrorKind::Config, "targeted attack needs a target label");
    require(*cfg.target_label < model.n_classes(), ErrorKind::Domain, "target label out of range");
    r.target = cfg.target_label;
  }
  return r;
}

bool goal_met(const AttackReport& r, int label) {
  return r.target ? label == static_cast<int>(*r.target) : label != r.true_label;
}

}  // namespace

void finalize_report(AttackReport& r, const GradientModel& model) {
  r.label_after = model.predict(r.adversarial);
  r.success = goal_met(r, r.label_after);
  r.l2_norm = std::sqrt(kernels::squared_distance(r.adversarial, r.original));
  r.linf_norm = linf(r.adversarial, r.original);
}

AttackReport fgsm(const GradientModel& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg) {
  AttackReport r = start_report(model, x, y, AttackKind::Fgsm, cfg);
  if (cfg.epsilon > 0.0) {
    const double dir = r.target ? -1.0 : 1.0;
    const auto g = model.loss_gradient(x, r.target ? *r.target : y);
    for (std::size_t i = 0; i < x.size(); ++i)
      r.adversarial[i] = std::clamp(x[i] + dir * cfg.epsilon * sign(g[i]), cfg.clip_lo, cfg.clip_hi);
  }
  r.iterations = 1;
  finalize_report(r, model);
  return r;
}

AttackReport bim(const GradientModel& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg,
                 BimVariant variant) {
  AttackReport r = start_report(model, x, y, variant == BimVariant::A ? AttackKind::BimA : AttackKind::BimB, cfg);
  require(cfg.max_iters >= 1, ErrorKind::Config, "BIM needs max_iters >= 1");
  const double dir = r.target ? -1.0 : 1.0;
  const std::size_t label = r.target ? *r.target : y;
  if (variant == BimVariant::A && goal_met(r, r.label_before)) {
    finalize_report(r, model);
    return r;
  }
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const auto g = model.loss_gradient(r.adversarial, label);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = r.adversarial[i] + dir * cfg.step * sign(g[i]);
      r.adversarial[i] = std::clamp(std::clamp(v, x[i] - cfg.epsilon, x[i] + cfg.epsilon), cfg.clip_lo, cfg.clip_hi);
    }
    r.iterations = it + 1;
    if (variant == BimVariant::A && goal_met(r, model.predict(r.adversarial))) break;
  }
  finalize_report(r, model);
  return r;
}

AttackReport cwa(const GradientModel& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg) {
  AttackReport r = start_report(model, x, y, AttackKind::Cwa, cfg);
  const std::size_t n = x.size();
  const double lo = cfg.clip_lo, half = 0.5 * (cfg.clip_hi - cfg.clip_lo);
  std::vector<double> u0(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::clamp((x[i] - lo) / half - 1.0, -1.0 + 1e-9, 1.0 - 1e-9);
    u0[i] = std::atanh(t);
  }
  const std::size_t goal = r.target ? *r.target : y;
  const std::size_t k = model.n_classes();

  double best_l2 = std::numeric_limits<double>::infinity();
  std::vector<double> best;
  std::vector<double> fallback = r.original;
  double fallback_c = -1.0;
  double c_lo = cfg.cwa_c_lo, c_hi = cfg.cwa_c_hi;
  std::size_t total_steps = 0;
  std::vector<double> xp(n), u(n);

  for (std::size_t bs = 0; bs < std::max<std::size_t>(1, cfg.cwa_binary_steps); ++bs) {
    double c;
    if (c_hi <= 0.0) c = 0.0;
    else if (c_lo <= 0.0) c = 0.5 * (c_lo + c_hi);
    else c = std::sqrt(c_lo * c_hi);
    u = u0;
    bool succeeded = false;
    for (std::size_t step = 0; step <= cfg.cwa_steps; ++step) {
      for (std::size_t i = 0; i < n; ++i) xp[i] = lo + half * (std::tanh(u[i]) + 1.0);
      const auto z = model.scores(xp);
      const int label = static_cast<int>(argmax(z));
      if (goal_met(r, label)) {
        succeeded = true;
        const double l2 = std::sqrt(kernels::squared_distance(xp, x));
        if (l2 < best_l2) {
          best_l2 = l2;
          best = xp;
        }
      }
      if (step == cfg.cwa_steps) break;
      ++total_steps;
      std::size_t other = goal == 0 ? 1 : 0;
      for (std::size_t j = 0; j < k; ++j)
        if (j != goal && z[j] > z[other]) other = j;
      const double margin = r.target ? z[other] - z[goal] : z[goal] - z[other];
      std::vector<double> grad(n);
      for (std::size_t i = 0; i < n; ++i) grad[i] = 2.0 * (xp[i] - x[i]);
      if (margin > 0.0 && c > 0.0) {
        std::vector<double> coeffs(k, 0.0);
        coeffs[other] = r.target ? 1.0 : -1.0;
        coeffs[goal] = r.target ? -1.0 : 1.0;
        kernels::axpy(c, model.score_gradient(xp, coeffs), grad);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double th = std::tanh(u[i]);
        u[i] -= cfg.cwa_lr * grad[i] * half * (1.0 - th * th);
      }
    }
    if (c >= fallback_c) {
      fallback_c = c;
      fallback = xp;
    }
    if (succeeded) c_hi = c;
    else c_lo = c;
  }
  r.iterations = total_steps;
  r.adversarial = best.empty() ? fallback : best;
  finalize_report(r, model);
  return r;
}

namespace {

AttackReport binary_report(const SvmModel& model, std::span<const double> x, const AttackConfig& cfg) {
  cfg.validate();
  require(!model.support_vectors.empty(), ErrorKind::State, "SVM model has no support vectors");
  require(x.size() == model.dim(), ErrorKind::Shape, "input size does not match the model");
  AttackReport r;
  r.attack = AttackKind::Evasion;
  r.original.assign(x.begin(), x.end());
  r.adversarial = r.original;
  r.label_before = svm_label(model, x);
  r.true_label = r.label_before;
  return r;
}

void clip_all(std::vector<double>& v, const AttackConfig& cfg) {
  for (double& e : v) e = std::clamp(e, cfg.clip_lo, cfg.clip_hi);
}

void move_closed_form(std::vector<double>& adv, const SvmModel& model, double direction, const AttackConfig& cfg) {
  const auto w = linear_weights(model);
  const double norm = std::sqrt(kernels::dot(w, w));
  if (norm == 0.0) fail(ErrorKind::DegenerateModel, "evasion needs a non-zero weight vector");
  kernels::axpy(-direction * cfg.epsilon / norm, w, adv);
  clip_all(adv, cfg);
}

}  // namespace

AttackReport evasion(const SvmModel& model, std::span<const double> x, const AttackConfig& cfg) {
  AttackReport r = binary_report(model, x, cfg);
  const double s = r.label_before > 0 ? 1.0 : -1.0;
  if (cfg.evasion_mode == EvasionMode::ClosedForm) {
    move_closed_form(r.adversarial, model, s, cfg);
    r.iterations = 1;
  } else {
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
      if (svm_label(model, r.adversarial) != r.label_before) break;
      const auto g = decision_gradient(model, r.adversarial);
      kernels::axpy(-s * cfg.eta, g, r.adversarial);
      clip_all(r.adversarial, cfg);
      r.iterations = it + 1;
    }
  }
  r.label_after = svm_label(model, r.adversarial);
  r.success = r.label_after != r.true_label;
  r.l2_norm = std::sqrt(kernels::squared_distance(r.adversarial, r.original));
  r.linf_norm = linf(r.adversarial, r.original);
  return r;
}

AttackReport evasion(const MulticlassSvm& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg) {
  SvmGradientModel gm(model);
  AttackReport r = start_report(gm, x, y, AttackKind::Evasion, cfg);
  r.target.reset();
  const SvmModel& own = model.models[y];
  if (cfg.evasion_mode == EvasionMode::ClosedForm) {
    move_closed_form(r.adversarial, own, 1.0, cfg);
    r.iterations = 1;
  } else {
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
      if (gm.predict(r.adversarial) != static_cast<int>(y)) break;
      kernels::axpy(-cfg.eta, decision_gradient(own, r.adversarial), r.adversarial);
      clip_all(r.adversarial, cfg);
      r.iterations = it + 1;
    }
  }
  finalize_report(r, gm);
  return r;
}

namespace {

std::vector<double> decisions_from_gram(const Matrix& gram, std::span<const int> y, const SmoSolution& sol) {
  const std::size_t n = y.size();
  std::vector<double> f(n, sol.bias);
  for (std::size_t j = 0; j < n; ++j) {
    const double a = sol.alpha[j] * y[j];
    if (a == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) f[i] += a * gram(i, j);
  }
  return f;
}

double clean_hinge(const Matrix& gram, std::span<const int> clean, std::span<const int> labels, double cost) {
  const auto sol = smo_solve(gram, labels, cost);
  const auto f = decisions_from_gram(gram, labels, sol);
  double total = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) total += hinge_loss(clean[i], f[i]);
  return total;
}

bool has_both(std::span<const int> y) {
  bool pos = false, neg = false;
  for (int v : y) (v > 0 ? pos : neg) = true;
  return pos && neg;
}

std::vector<double> flip_costs(const AttackConfig& cfg, std::size_t n) {
  cfg.validate();
  if (cfg.lfa_costs.empty()) return std::vector<double>(n, 1.0);
  require(cfg.lfa_costs.size() == n, ErrorKind::Config, "one LFA flip cost per training sample is required");
  return cfg.lfa_costs;
}

}  // namespace

LabelFlipResult label_flip_attack(std::span<const std::vector<double>> x, std::span<const int> y,
                                  const KernelSpec& kernel, double cost, const AttackConfig& cfg) {
  require(x.size() == y.size() && !x.empty(), ErrorKind::Size, "training data and labels differ in size");
  const auto costs = flip_costs(cfg, x.size());
  LabelFlipResult res;
  res.labels.assign(y.begin(), y.end());
  res.flipped.assign(x.size(), false);
  if (!has_both(y)) return res;
  const Matrix gram = gram_matrix(kernel, x);
  double current = clean_hinge(gram, y, res.labels, cost);
  while (true) {
    double best_gain = -std::numeric_limits<double>::infinity();
    double best_loss = 0.0;
    std::size_t best = x.size();
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (res.flipped[i] || res.spent + costs[i] > cfg.lfa_budget) continue;
      std::vector<int> trial = res.labels;
      trial[i] = -trial[i];
      if (!has_both(trial)) continue;
      const double loss = clean_hinge(gram, y, trial, cost);
      const double gain = cfg.lfa_gamma * (loss - current) / costs[i];
      if (gain > best_gain) {
        best_gain = gain;
        best_loss = loss;
        best = i;
      }
    }
    if (best == x.size()) break;
    res.labels[best] = -res.labels[best];
    res.flipped[best] = true;
    res.spent += costs[best];
    res.order.push_back(best);
    current = best_loss;
  }
  return res;
}

LabelFlipResult label_flip_attack(std::span<const std::vector<double>> x, std::span<const int> labels,
                                  std::size_t n_classes, const KernelSpec& kernel, double cost,
                                  const AttackConfig& cfg) {
  require(x.size() == labels.size() && !x.empty(), ErrorKind::Size, "training data and labels differ in size");
  require(n_classes >= 2, ErrorKind::Domain, "need at least two classes");
  const auto costs = flip_costs(cfg, x.size());
  const std::size_t n = x.size();
  LabelFlipResult res;
  res.labels.assign(labels.begin(), labels.end());
  res.flipped.assign(n, false);
  auto one_vs_rest = [&](std::span<const int> lab, std::size_t c) {
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = lab[i] == static_cast<int>(c) ? 1 : -1;
    return y;
  };
  std::vector<std::vector<int>> clean(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    clean[c] = one_vs_rest(labels, c);
    if (!has_both(clean[c])) return res;
  }
  const Matrix gram = gram_matrix(kernel, x);
  std::vector<double> per_class(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) per_class[c] = clean_hinge(gram, clean[c], clean[c], cost);
  double current = 0.0;
  for (double v : per_class) current += v;

  while (true) {
    double best_gain = -std::numeric_limits<double>::infinity();
    std::size_t best_i = n, best_to = 0;
    double best_from_loss = 0.0, best_to_loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (res.flipped[i] || res.spent + costs[i] > cfg.lfa_budget) continue;
      const std::size_t from = static_cast<std::size_t>(res.labels[i]);
      for (std::size_t to = 0; to < n_classes; ++to) {
        if (to == from) continue;
        std::vector<int> trial = res.labels;
        trial[i] = static_cast<int>(to);
        const auto y_from = one_vs_rest(trial, from);
        const auto y_to = one_vs_rest(trial, to);
        if (!has_both(y_from) || !has_both(y_to)) continue;
        const double loss_from = clean_hinge(gram, clean[from], y_from, cost);
        const double loss_to = clean_hinge(gram, clean[to], y_to, cost);
        const double loss = current - per_class[from] - per_class[to] + loss_from + loss_to;
        const double gain = cfg.lfa_gamma * (loss - current) / costs[i];
        if (gain > best_gain) {
          best_gain = gain;
          best_i = i;
          best_to = to;
          best_from_loss = loss_from;
          best_to_loss = loss_to;
        }
      }
    }
    if (best_i == n) break;
    const std::size_t from = static_cast<std::size_t>(res.labels[best_i]);
    current += best_from_loss + best_to_loss - per_class[from] - per_class[best_to];
    per_class[from] = best_from_loss;
    per_class[best_to] = best_to_loss;
    res.labels[best_i] = static_cast<int>(best_to);
    res.flipped[best_i] = true;
    res.spent += costs[best_i];
    res.order.push_back(best_i);
  }
  return res;
}

std::size_t random_wrong_label(std::size_t true_label, std::size_t n_classes, std::uint64_t seed, std::size_t index) {
  require(n_classes >= 2 && true_label < n_classes, ErrorKind::Domain, "label out of range");
  std::mt19937_64 rng(derive_seed(seed, {0x7461u, index}));
  const std::size_t r = std::uniform_int_distribution<std::size_t>(0, n_classes - 2)(rng);
  return r >= true_label ? r + 1 : r;
}

namespace {

AttackReport failed_report(const LabeledSample& s, AttackKind kind, const std::string& what) {
  AttackReport r;
  r.source_id = s.source_id;
  r.attack = kind;
  r.original = s.x;
  r.adversarial = s.x;
  r.true_label = s.label;
  r.label_before = -1;
  r.label_after = -1;
  r.error = what;
  return r;
}

}  // namespace

std::vector<AttackReport> attack_batch(const GradientModel& model, std::span<const LabeledSample> data,
                                       AttackKind attack, const AttackConfig& cfg, std::size_t jobs) {
  require(!data.empty(), ErrorKind::Size, "attack batch is empty");
  require(is_deep_attack(attack), ErrorKind::Config, to_string(attack) + " is not a gradient attack");
  std::vector<AttackReport> out(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    const auto& s = data[i];
    try {
      AttackConfig c = cfg;
      if (c.targeted && !cfg.target_label)
        c.target_label = random_wrong_label(static_cast<std::size_t>(s.label), model.n_classes(), cfg.seed, i);
      const auto y = static_cast<std::size_t>(s.label);
      switch (attack) {
        case AttackKind::Fgsm: out[i] = fgsm(model, s.x, y, c); break;
        case AttackKind::BimA: out[i] = bim(model, s.x, y, c, BimVariant::A); break;
        case AttackKind::BimB: out[i] = bim(model, s.x, y, c, BimVariant::B); break;
        case AttackKind::Cwa: out[i] = cwa(model, s.x, y, c); break;
        default: break;
      }
      out[i].source_id = s.source_id;
    } catch (const Error& e) {
      out[i] = failed_report(s, attack, e.what());
    }
  });
  return out;
}

std::vector<AttackReport> evasion_batch(const MulticlassSvm& model, std::span<const LabeledSample> data,
                                        const AttackConfig& cfg, std::size_t jobs) {
  require(!data.empty(), ErrorKind::Size, "attack batch is empty");
  std::vector<AttackReport> out(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    const auto& s = data[i];
    try {
      out[i] = evasion(model, s.x, static_cast<std::size_t>(s.label), cfg);
      out[i].source_id = s.source_id;
    } catch (const Error& e) {
      out[i] = failed_report(s, AttackKind::Evasion, e.what());
    }
  });
  return out;
}

void write_reports_csv(const fs::path& path, std::span<const AttackReport> reports) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << "source_id,attack,label_before,label_after,success,l2,linf,iterations\n";
  for (const auto& r : reports) {
    out << r.source_id << ',' << to_string(r.attack) << ',' << r.label_before << ',' << r.label_after << ','
        << (r.success ? 1 : 0) << ',' << format_number(r.l2_norm) << ',' << format_number(r.linf_norm) << ','
        << r.iterations << '\n';
  }
}

}  // namespace specguard
