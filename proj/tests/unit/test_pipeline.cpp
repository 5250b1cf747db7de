#include <filesystem>
#include <set>

#include "doctest.h"
#include "specguard/error.hpp"
#include "specguard/evaluation.hpp"
#include "specguard/pipeline.hpp"
#include "tiny_config.hpp"

using namespace specguard;

namespace {

struct TinyData {
  PipelineConfig cfg = testing::tiny_config();
  Dataset data;
  TinyData() {
    const auto clips = synth_clips(cfg.dataset, cfg.seed);
    data = build_dataset(clips, cfg.representation, synth_class_names(cfg.dataset.classes));
  }
};

const TinyData& tiny() {
  static const TinyData d;
  return d;
}

}  // namespace

TEST_CASE("synthetic clips are labeled, balanced and deterministic") {
  DatasetConfig dc;
  dc.clips_per_class = 4;
  const auto a = synth_clips(dc, 3);
  const auto b = synth_clips(dc, 3);
  const auto c = synth_clips(dc, 4);
  REQUIRE(a.size() == 12);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].clip.samples == b[i].clip.samples);
    CHECK(a[i].label >= 0);
    CHECK(a[i].label < 3);
    CHECK(a[i].clip.sample_rate == dc.sample_rate);
    for (double v : a[i].clip.samples) CHECK(std::abs(v) <= 1.0);
    ids.insert(a[i].source_id);
  }
  CHECK(ids.size() == a.size());
  CHECK(a[0].clip.samples != c[0].clip.samples);
  CHECK(synth_class_names(3).size() == 3);
  CHECK_THROWS_AS(synth_class_names(1), Error);
  CHECK_THROWS_AS(synth_class_names(6), Error);
}

TEST_CASE("clip stacks hold one normalized channel per magnitude scale") {
  const auto& d = tiny();
  const Tensor& t = d.data.stacks.front();
  CHECK(t.shape == Shape{3, 16, 16});
  for (double v : t.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(stack_scales().size() == 3);
  RepresentationConfig stft_cfg = d.cfg.representation;
  stft_cfg.kind = "stft";
  const auto clip = synth_clips(d.cfg.dataset, 1).front().clip;
  CHECK(clip_stack(clip, stft_cfg).shape == Shape{1, 16, 16});
}

TEST_CASE("variant counts follow the enabled modules") {
  PipelineConfig cfg;
  CHECK(variant_specs(cfg, 3).size() == 9);
  cfg.color.enabled = false;
  CHECK(variant_specs(cfg, 3).size() == 3);
  for (const auto& v : variant_specs(cfg, 3)) CHECK(v.palette == Palette::Gray);
  cfg.representation.multi_scale = false;
  CHECK(variant_specs(cfg, 3).size() == 1);
  CHECK(variant_specs(cfg, 3).front().channel == 1);
  cfg.color.enabled = true;
  CHECK(variant_specs(cfg, 3).size() == 3);
  CHECK(variant_specs(PipelineConfig{}, 1).size() == 3);
}

TEST_CASE("preprocessing keeps the image size and range and needs a fitted CDA") {
  const auto& d = tiny();
  const Matrix img = stack_channel(d.data.stacks.front(), 0);
  const auto spec = variant_specs(d.cfg, 3).front();
  CHECK_THROWS_AS(preprocess(img, spec, d.cfg, nullptr), Error);
  PipelineConfig no_cda = without(d.cfg, AblationToggle::Cda);
  const Matrix out = preprocess(img, spec, no_cda, nullptr);
  CHECK(out.rows() == img.rows());
  CHECK(out.cols() == img.cols());
  for (double v : out.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("ablation toggles disable exactly one module") {
  const PipelineConfig cfg;
  CHECK_FALSE(without(cfg, AblationToggle::Svd).svd.enabled);
  CHECK_FALSE(without(cfg, AblationToggle::Cda).cda.enabled);
  CHECK_FALSE(without(cfg, AblationToggle::Highboost).highboost.enabled);
  CHECK_FALSE(without(cfg, AblationToggle::Color).color.enabled);
  CHECK_FALSE(without(cfg, AblationToggle::VisScales).representation.multi_scale);
  CHECK(without(cfg, AblationToggle::Svd).cda == cfg.cda);
  for (AblationToggle t : all_toggles()) CHECK(parse_toggle(to_string(t)) == t);
  CHECK_THROWS_AS(parse_toggle("nope"), Error);
}

TEST_CASE("proposed model fits, predicts consistently and round-trips to disk") {
  const auto& d = tiny();
  const auto n = d.data.size();
  std::vector<int> labels = d.data.labels;
  const auto cda = fit_cda(d.data.stacks, d.cfg, 5);
  CHECK(cda.net.trained());
  ProposedFitOptions o;
  o.cda = &cda.net;
  const auto model = fit_proposed(d.data.stacks, labels, 3, d.cfg, 5, o);
  CHECK(model.codebook.k() == d.cfg.features.codebook_k);
  const auto encoded = encode_set(d.data.stacks, model, 2);
  REQUIRE(encoded.per_sample.size() == n);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int p = proposed_predict(model, d.data.stacks[i]);
    CHECK(p == proposed_predict_encoded(model, encoded.per_sample[i]));
    hits += p == labels[i] ? 1 : 0;
  }
  CHECK(hits >= n * 8 / 10);

  const auto dir = std::filesystem::temp_directory_path() / "specguard_unit_proposed";
  save_proposed(dir, model);
  const auto back = load_proposed(dir, d.cfg, 3);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(proposed_decisions(back, d.data.stacks[i]) == proposed_decisions(model, d.data.stacks[i]));
  std::filesystem::remove_all(dir);
}

TEST_CASE("summarize splits deep and SVM attacks and computes the distance") {
  ModelEval m;
  m.accuracy = 97.0;
  m.fooling = {{"FGSM", 4.0}, {"BIM-a", 4.0}, {"EA", 10.0}, {"LFA", 2.0}};
  summarize(m);
  CHECK(m.deep_fooling == 4.0);
  CHECK(m.svm_fooling == 6.0);
  CHECK(m.mean_fooling == 5.0);
  CHECK(m.distance == doctest::Approx(std::hypot(3.0, 5.0)));
}

TEST_CASE("attack settings map from the pipeline config") {
  PipelineConfig cfg;
  const auto lfa = attack_config(cfg, AttackKind::LabelFlip, 72, 1);
  CHECK(lfa.lfa_budget == 7.0);
  const auto ea = attack_config(cfg, AttackKind::Evasion, 72, 1);
  CHECK(ea.epsilon == cfg.attack.ea_epsilon);
  const auto fgsm = attack_config(cfg, AttackKind::Fgsm, 72, 1);
  CHECK(fgsm.epsilon == cfg.attack.epsilon);
  CHECK(fgsm.targeted == cfg.attack.targeted);
}
