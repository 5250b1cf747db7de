#include "specguard/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "specguard/error.hpp"
#include "specguard/parallel.hpp"
#include "specguard/random.hpp"
#include "specguard/robustness.hpp"

namespace specguard {

std::string to_string(AblationToggle toggle) {
  switch (toggle) {
    case AblationToggle::VisScales: return "vis_scales";
    case AblationToggle::Color: return "color";
    case AblationToggle::Highboost: return "highboost";
    case AblationToggle::Svd: return "svd";
    case AblationToggle::Cda: return "cda";
  }
  return "unknown";
}

AblationToggle parse_toggle(const std::string& text) {
  for (auto t : all_toggles()) {
    if (to_string(t) == text) return t;
  }
  fail(ErrorKind::Config, "unknown ablation toggle '" + text + "'");
}

const std::vector<AblationToggle>& all_toggles() {
  static const std::vector<AblationToggle> toggles{AblationToggle::VisScales, AblationToggle::Color,
                                                   AblationToggle::Highboost, AblationToggle::Svd,
                                                   AblationToggle::Cda};
  return toggles;
}

PipelineConfig without(const PipelineConfig& cfg, AblationToggle toggle) {
  PipelineConfig out = cfg;
  switch (toggle) {
    case AblationToggle::VisScales: out.representation.multi_scale = false; break;
    case AblationToggle::Color: out.color.enabled = false; break;
    case AblationToggle::Highboost: out.highboost.enabled = false; break;
    case AblationToggle::Svd: out.svd.enabled = false; break;
    case AblationToggle::Cda: out.cda.enabled = false; break;
  }
  return out;
}

Dataset build_dataset(std::span<const LabeledClip> clips, const RepresentationConfig& rep,
                      std::vector<std::string> class_names, std::size_t jobs) {
  Dataset d;
  d.stacks.resize(clips.size());
  parallel_for(clips.size(), jobs, [&](std::size_t i) { d.stacks[i] = clip_stack(clips[i].clip, rep); });
  for (const auto& c : clips) {
    require(c.label >= 0 && static_cast<std::size_t>(c.label) < class_names.size(), ErrorKind::Domain,
            "clip label out of range");
    d.labels.push_back(c.label);
    d.source_ids.push_back(c.source_id);
  }
  d.class_names = std::move(class_names);
  return d;
}

void summarize(ModelEval& m) {
  double all = 0.0, deep = 0.0, svm = 0.0;
  std::size_t n_all = 0, n_deep = 0, n_svm = 0;
  for (const auto& [name, f] : m.fooling) {
    all += f;
    ++n_all;
    if (is_deep_attack(parse_attack(name))) {
      deep += f;
      ++n_deep;
    } else {
      svm += f;
      ++n_svm;
    }
  }
  m.mean_fooling = n_all ? all / static_cast<double>(n_all) : 0.0;
  m.deep_fooling = n_deep ? deep / static_cast<double>(n_deep) : 0.0;
  m.svm_fooling = n_svm ? svm / static_cast<double>(n_svm) : 0.0;
  m.distance = tradeoff_distance(100.0 - m.accuracy, m.mean_fooling);
}

std::uint64_t fold_seed(const PipelineConfig& cfg, std::size_t test_fold) {
  return derive_seed(cfg.seed, {0x464f4c44, test_fold});
}

std::uint64_t proposed_seed(std::uint64_t fold_seed) { return derive_seed(fold_seed, {0x50524f}); }

TrainResult fit_cnn(const PipelineConfig& cfg, std::span<const Tensor> stacks, std::span<const int> labels,
                    std::size_t n_classes, std::uint64_t seed) {
  require(!stacks.empty() && stacks.size() == labels.size(), ErrorKind::Size, "invalid CNN training set");
  std::vector<TrainSample> data;
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    data.push_back(TrainSample{stacks[i], LossTarget::label(static_cast<std::size_t>(labels[i]), n_classes)});
  }
  TrainConfig tc;
  tc.epochs = cfg.cnn.epochs;
  tc.batch_size = cfg.cnn.batch_size;
  tc.learning_rate = cfg.cnn.learning_rate;
  tc.early_stop_patience = cfg.cnn.patience;
  tc.seed = derive_seed(seed, {0x434e4e, 1});
  return train(make_surrogate_cnn(stacks.front().shape, n_classes, derive_seed(seed, {0x434e4e})), data, {}, tc);
}

MulticlassSvm fit_linear_svm(const PipelineConfig& cfg, std::span<const Tensor> stacks, std::span<const int> labels,
                             std::size_t n_classes) {
  std::vector<std::vector<double>> x;
  for (const auto& s : stacks) x.push_back(s.data);
  return multiclass_train(x, labels, n_classes, KernelSpec::linear(), cfg.svm.linear_cost);
}

AttackConfig attack_config(const PipelineConfig& cfg, AttackKind kind, std::size_t n_train, std::uint64_t seed) {
  AttackConfig a;
  a.seed = seed;
  if (is_deep_attack(kind)) {
    a.epsilon = cfg.attack.epsilon;
    a.step = cfg.attack.step;
    a.max_iters = cfg.attack.max_iters;
    a.targeted = cfg.attack.targeted;
    a.cwa_c_lo = cfg.attack.cwa_c_lo;
    a.cwa_c_hi = cfg.attack.cwa_c_hi;
    a.cwa_binary_steps = cfg.attack.cwa_binary_steps;
    a.cwa_steps = cfg.attack.cwa_steps;
    a.cwa_lr = cfg.attack.cwa_lr;
  } else if (kind == AttackKind::Evasion) {
    a.epsilon = cfg.attack.ea_epsilon;
    a.evasion_mode = EvasionMode::ClosedForm;
  } else {
    a.lfa_budget = std::floor(cfg.attack.lfa_budget_fraction * static_cast<double>(n_train));
    a.lfa_gamma = cfg.attack.lfa_gamma;
  }
  return a;
}

std::vector<int> poison_labels(const PipelineConfig& cfg, std::span<const Tensor> stacks, std::span<const int> labels,
                               std::size_t n_classes) {
  std::vector<std::vector<double>> x;
  for (const auto& s : stacks) x.push_back(s.data);
  const auto a = attack_config(cfg, AttackKind::LabelFlip, stacks.size(), 0);
  return label_flip_attack(x, labels, n_classes, KernelSpec::linear(), cfg.svm.linear_cost, a).labels;
}

namespace {

using Predictor = std::function<int(const Tensor&)>;

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

Tensor reshape(std::span<const double> x, const Shape& shape) {
  require(x.size() == shape.size(), ErrorKind::Shape, "flat input does not match the stack shape");
  return Tensor{shape, std::vector<double>(x.begin(), x.end())};
}

double accuracy_of(const Predictor& predict, std::span<const Tensor> stacks, std::span<const int> labels,
                   std::size_t jobs) {
  std::vector<int> hit(stacks.size(), 0);
  parallel_for(stacks.size(), jobs, [&](std::size_t i) { hit[i] = predict(stacks[i]) == labels[i] ? 1 : 0; });
  return 100.0 * std::accumulate(hit.begin(), hit.end(), 0.0) / static_cast<double>(stacks.size());
}

double fooling_of(const Predictor& predict, std::span<const AttackReport> reports, const Shape& shape,
                  std::size_t jobs) {
  std::vector<int> pred(reports.size(), 0);
  parallel_for(reports.size(), jobs, [&](std::size_t i) {
    const auto& r = reports[i];
    pred[i] = predict(reshape(r.adversarial.empty() ? r.original : r.adversarial, shape));
  });
  std::size_t k = 0;
  return fooling_rate(reports, [&](std::span<const double>) { return pred[k++]; });
}

/// Everything a proposed-model variant needs to be scored on one fold.
struct Scenario {
  const std::vector<Tensor>* train_stacks;
  const std::vector<int>* train_labels;
  const std::vector<Tensor>* test_stacks;
  const std::vector<int>* test_labels;
  const std::map<std::string, std::vector<AttackReport>>* crafted;
  const std::vector<int>* poisoned;  ///< null when LFA is not evaluated
  std::size_t n_classes;
  Shape shape;
  std::size_t jobs;
};

ModelEval eval_proposed(const PipelineConfig& cfg, const Scenario& sc, std::uint64_t seed) {
  ProposedFitOptions fo;
  fo.jobs = sc.jobs;
  ProposedModel model = fit_proposed(*sc.train_stacks, *sc.train_labels, sc.n_classes, cfg, seed, fo);
  ModelEval m;
  m.name = kProposedName;
  Predictor predict = [&](const Tensor& t) { return proposed_predict(model, t); };
  m.accuracy = accuracy_of(predict, *sc.test_stacks, *sc.test_labels, sc.jobs);
  for (const auto& [name, reports] : *sc.crafted) m.fooling[name] = fooling_of(predict, reports, sc.shape, sc.jobs);
  if (sc.poisoned) {
    const auto encoded = encode_set(*sc.train_stacks, model, sc.jobs);
    ProposedModel poisoned = model;
    refit_classifier(poisoned, encoded, *sc.poisoned, sc.n_classes);
    Predictor p2 = [&](const Tensor& t) { return proposed_predict(poisoned, t); };
    m.fooling[to_string(AttackKind::LabelFlip)] = 100.0 - accuracy_of(p2, *sc.test_stacks, *sc.test_labels, sc.jobs);
  }
  summarize(m);
  return m;
}

void accumulate_model(ModelEval& sum, const ModelEval& m) {
  sum.name = m.name;
  sum.accuracy += m.accuracy;
  for (const auto& [k, v] : m.fooling) sum.fooling[k] += v;
}

void divide_model(ModelEval& m, double n) {
  m.accuracy /= n;
  for (auto& [k, v] : m.fooling) v /= n;
  summarize(m);
}

}  // namespace

FoldEval run_fold(const PipelineConfig& cfg, const Dataset& data, std::span<const std::size_t> fold_of,
                  std::size_t test_fold, const EvalOptions& opts) {
  cfg.validate();
  require(fold_of.size() == data.size(), ErrorKind::Size, "fold assignment does not match the dataset");
  require(!data.stacks.empty(), ErrorKind::Size, "empty dataset");
  const std::size_t n_classes = data.class_names.size();
  const Shape shape = data.stacks.front().shape;
  const std::uint64_t seed = fold_seed(cfg, test_fold);

  Split split;
  for (std::size_t i = 0; i < data.size(); ++i) (fold_of[i] == test_fold ? split.test : split.train).push_back(i);
  require(!split.test.empty() && !split.train.empty(), ErrorKind::Size, "fold has an empty train or test split");
  const auto train_stacks = pick(data.stacks, split.train);
  const auto train_labels = pick(data.labels, split.train);
  const auto test_stacks = pick(data.stacks, split.test);
  const auto test_labels = pick(data.labels, split.test);
  const auto test_ids = pick(data.source_ids, split.test);

  FoldEval fe;
  fe.fold = test_fold;
  fe.train_size = split.train.size();
  fe.test_size = split.test.size();

  const NeuralNet cnn = fit_cnn(cfg, train_stacks, train_labels, n_classes, seed).net;
  const MulticlassSvm linear = fit_linear_svm(cfg, train_stacks, train_labels, n_classes);
  const NetModel cnn_model(cnn);

  std::vector<LabeledSample> samples;
  for (std::size_t i = 0; i < test_stacks.size(); ++i) {
    samples.push_back(LabeledSample{test_ids[i], test_stacks[i].data, test_labels[i]});
  }

  std::vector<AttackKind> attacks;
  for (const auto& a : cfg.attack.attacks) attacks.push_back(parse_attack(a));

  std::map<std::string, std::vector<AttackReport>> crafted;
  std::vector<int> poisoned;
  bool has_lfa = false;
  const std::uint64_t attack_seed = derive_seed(seed, {0x41, 1});
  for (auto kind : attacks) {
    const auto name = to_string(kind);
    const auto a = attack_config(cfg, kind, train_stacks.size(), attack_seed);
    if (is_deep_attack(kind)) {
      crafted[name] = attack_batch(cnn_model, samples, kind, a, opts.jobs);
    } else if (kind == AttackKind::Evasion) {
      crafted[name] = evasion_batch(linear, samples, a, opts.jobs);
    } else {
      poisoned = poison_labels(cfg, train_stacks, train_labels, n_classes);
      has_lfa = true;
    }
  }

  // White-box potency on correctly classified samples.
  std::vector<LabeledSample> correct;
  for (const auto& s : samples) {
    if (cnn_model.predict(s.x) == s.label) correct.push_back(s);
  }
  fe.cnn_correct = correct.size();
  if (!correct.empty()) {
    for (auto kind : attacks) {
      if (!is_deep_attack(kind)) continue;
      const auto name = to_string(kind);
      std::vector<AttackReport> sub;
      for (const auto& r : crafted[name]) {
        if (cnn_model.predict(r.original) == r.true_label) sub.push_back(r);
      }
      fe.cnn_potency[name] = fooling_rate(sub, [&](std::span<const double> x) { return cnn_model.predict(x); });
      if (kind == AttackKind::Fgsm || kind == AttackKind::BimB) {
        auto zero = attack_config(cfg, kind, train_stacks.size(), attack_seed);
        zero.epsilon = 0.0;
        const auto reports = attack_batch(cnn_model, correct, kind, zero, opts.jobs);
        fe.cnn_potency_zero[name] =
            fooling_rate(reports, [&](std::span<const double> x) { return cnn_model.predict(x); });
      }
    }
  }

  // CNN and linear SVM under every crafted attack.
  ModelEval cnn_eval;
  cnn_eval.name = kCnnName;
  const Predictor cnn_predict = [&](const Tensor& t) { return static_cast<int>(cnn.predict(t)); };
  cnn_eval.accuracy = accuracy_of(cnn_predict, test_stacks, test_labels, opts.jobs);
  ModelEval lin_eval;
  lin_eval.name = kLinearSvmName;
  const Predictor lin_predict = [&](const Tensor& t) { return multiclass_predict(linear, t.data); };
  lin_eval.accuracy = accuracy_of(lin_predict, test_stacks, test_labels, opts.jobs);
  for (const auto& [name, reports] : crafted) {
    cnn_eval.fooling[name] = fooling_of(cnn_predict, reports, shape, opts.jobs);
    lin_eval.fooling[name] = fooling_of(lin_predict, reports, shape, opts.jobs);
  }
  if (has_lfa) {
    const auto lfa = to_string(AttackKind::LabelFlip);
    const NeuralNet cnn_p = fit_cnn(cfg, train_stacks, poisoned, n_classes, seed).net;
    const Predictor cp = [&](const Tensor& t) { return static_cast<int>(cnn_p.predict(t)); };
    cnn_eval.fooling[lfa] = 100.0 - accuracy_of(cp, test_stacks, test_labels, opts.jobs);
    const MulticlassSvm lin_p = fit_linear_svm(cfg, train_stacks, poisoned, n_classes);
    const Predictor lp = [&](const Tensor& t) { return multiclass_predict(lin_p, t.data); };
    lin_eval.fooling[lfa] = 100.0 - accuracy_of(lp, test_stacks, test_labels, opts.jobs);
  }
  summarize(cnn_eval);
  summarize(lin_eval);

  const Scenario sc{&train_stacks, &train_labels, &test_stacks, &test_labels, &crafted,
                    has_lfa ? &poisoned : nullptr, n_classes, shape, opts.jobs};
  const std::uint64_t p_seed = proposed_seed(seed);
  const ModelEval full = eval_proposed(cfg, sc, p_seed);
  fe.models = {cnn_eval, lin_eval, full};

  for (auto toggle : opts.toggles) {
    AblationEval ab;
    ab.toggle = toggle;
    ab.removed = eval_proposed(without(cfg, toggle), sc, p_seed);
    ab.accuracy_delta = ab.removed.accuracy - full.accuracy;
    ab.deep_robustness_delta = full.deep_fooling - ab.removed.deep_fooling;
    ab.svm_robustness_delta = full.svm_fooling - ab.removed.svm_fooling;
    fe.ablation.push_back(std::move(ab));
  }

  if (opts.keep_reports) {
    for (auto& [name, reports] : crafted) {
      for (auto& r : reports) fe.reports.push_back(std::move(r));
    }
  }
  return fe;
}

EvalReport kfold_evaluate(const PipelineConfig& cfg, const Dataset& data, const EvalOptions& opts) {
  cfg.validate();
  const auto fold_of = assign_folds(data.source_ids, data.labels, cfg.eval.folds, cfg.seed);
  std::vector<std::size_t> folds = opts.folds;
  if (folds.empty()) {
    folds.resize(cfg.eval.folds);
    std::iota(folds.begin(), folds.end(), 0);
  }
  for (auto f : folds) require(f < cfg.eval.folds, ErrorKind::Config, "fold index out of range");

  EvalReport rep;
  rep.attacks = cfg.attack.attacks;
  for (auto f : folds) rep.folds.push_back(run_fold(cfg, data, fold_of, f, opts));

  const double n = static_cast<double>(rep.folds.size());
  rep.models.resize(rep.folds.front().models.size());
  rep.ablation.resize(rep.folds.front().ablation.size());
  for (const auto& fe : rep.folds) {
    for (std::size_t m = 0; m < fe.models.size(); ++m) accumulate_model(rep.models[m], fe.models[m]);
    for (std::size_t t = 0; t < fe.ablation.size(); ++t) {
      auto& a = rep.ablation[t];
      a.toggle = fe.ablation[t].toggle;
      accumulate_model(a.removed, fe.ablation[t].removed);
    }
  }
  for (auto& m : rep.models) divide_model(m, n);
  const ModelEval& full = rep.models.back();
  for (auto& a : rep.ablation) {
    divide_model(a.removed, n);
    a.accuracy_delta = a.removed.accuracy - full.accuracy;
    a.deep_robustness_delta = full.deep_fooling - a.removed.deep_fooling;
    a.svm_robustness_delta = full.svm_fooling - a.removed.svm_fooling;
  }

  Matrix acc(rep.models.size(), rep.folds.size());
  for (std::size_t m = 0; m < rep.models.size(); ++m) {
    for (std::size_t f = 0; f < rep.folds.size(); ++f) acc(m, f) = rep.folds[f].models[m].accuracy;
  }
  rep.accuracy_rank = average_rank(acc, true);
  if (!rep.attacks.empty()) {
    Matrix fool(rep.models.size(), rep.attacks.size());
    for (std::size_t m = 0; m < rep.models.size(); ++m) {
      for (std::size_t a = 0; a < rep.attacks.size(); ++a) {
        fool(m, a) = rep.models[m].fooling.at(to_string(parse_attack(rep.attacks[a])));
      }
    }
    rep.fooling_rank = average_rank(fool, false);
  }
  return rep;
}

EvalReport ablation(const PipelineConfig& cfg, const Dataset& data, std::span<const AblationToggle> toggles,
                    EvalOptions opts) {
  opts.toggles.assign(toggles.begin(), toggles.end());
  return kfold_evaluate(cfg, data, opts);
}

}  // namespace specguard
