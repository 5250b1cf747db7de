#include "specguard/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "specguard/binary_io.hpp"
#include "specguard/error.hpp"
#include "specguard/parallel.hpp"
#include "specguard/random.hpp"
#include "specguard/robustness.hpp"
#include "specguard/spectra.hpp"
#include "specguard/text.hpp"

namespace specguard {

namespace fs = std::filesystem;

namespace {

void note(const CommandOptions& opts, const std::string& msg) {
  if (opts.log) *opts.log << msg << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string padded(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

void write_stack(const fs::path& path, const Tensor& t) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + tmp.string());
    binio::write_magic(out, "STK1");
    binio::write_u32(out, static_cast<std::uint32_t>(t.shape.c));
    binio::write_u32(out, static_cast<std::uint32_t>(t.shape.h));
    binio::write_u32(out, static_cast<std::uint32_t>(t.shape.w));
    for (double v : t.data) binio::write_f64(out, v);
    require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

Tensor read_stack(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  binio::expect_magic(in, "STK1");
  Tensor t;
  t.shape.c = binio::read_u32(in);
  t.shape.h = binio::read_u32(in);
  t.shape.w = binio::read_u32(in);
  require(t.shape.size() > 0 && t.shape.size() < (1u << 26), ErrorKind::Format, "implausible stack shape");
  t.data.resize(t.shape.size());
  for (auto& v : t.data) v = binio::read_f64(in);
  require(static_cast<bool>(in), ErrorKind::Format, "truncated stack file " + path.string());
  return t;
}

/// Serialized representation section only; keys the stack cache.
std::string representation_key(const PipelineConfig& cfg) {
  PipelineConfig only;
  only.representation = cfg.representation;
  return serialize_config(only);
}

struct IndexRow {
  std::string clip_id;
  std::string source_id;
  int label = 0;
  std::string stack;
  std::string wav;
};

fs::path build_dir(const CommandOptions& opts) { return opts.out / "build"; }
fs::path models_dir(const CommandOptions& opts) { return opts.out / "models"; }
fs::path attacks_dir(const CommandOptions& opts) { return opts.out / "attacks"; }

void write_index(const fs::path& path, const std::vector<IndexRow>& rows) {
  std::string text = "clip_id,source_id,label,stack,wav\n";
  for (const auto& r : rows) {
    text += r.clip_id + "," + r.source_id + "," + std::to_string(r.label) + "," + r.stack + "," + r.wav + "\n";
  }
  write_text(path, text);
}

std::vector<IndexRow> read_index(const fs::path& path) {
  require(fs::exists(path), ErrorKind::State, "no representation index at " + path.string() + "; run build first");
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  require(trim(line) == "clip_id,source_id,label,stack,wav", ErrorKind::Format, "bad index header in " + path.string());
  std::vector<IndexRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto f = split(line, ',');
    require(f.size() >= 5, ErrorKind::Format, "bad index row: " + line);
    IndexRow r;
    r.clip_id = f[0];
    r.source_id = f[1];
    r.label = std::stoi(f[2]);
    r.stack = f[3];
    r.wav = f[4];
    for (std::size_t i = 5; i < f.size(); ++i) r.wav += "," + f[i];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<std::string> read_class_names(const fs::path& path) {
  require(fs::exists(path), ErrorKind::State, "missing class list " + path.string() + "; run build first");
  try {
    return nlohmann::json::parse(read_bytes(path)).get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, "bad class list " + path.string() + ": " + e.what());
  }
}

struct LoadedData {
  Dataset data;
  std::vector<IndexRow> rows;
};

LoadedData load_dataset(const CommandOptions& opts) {
  LoadedData ld;
  ld.rows = read_index(build_dir(opts) / "index.csv");
  require(!ld.rows.empty(), ErrorKind::State, "representation index is empty; run build first");
  ld.data.class_names = read_class_names(build_dir(opts) / "classes.json");
  const fs::path cache = cache_dir(opts);
  ld.data.stacks.resize(ld.rows.size());
  parallel_for(ld.rows.size(), opts.jobs, [&](std::size_t i) {
    const fs::path p = cache / (ld.rows[i].stack + ".stk");
    require(fs::exists(p), ErrorKind::State, "cached stack " + p.string() + " is missing; run build first");
    ld.data.stacks[i] = read_stack(p);
  });
  for (auto& r : ld.rows) {
    if (fs::path(r.wav).is_relative()) r.wav = (build_dir(opts) / r.wav).lexically_normal().string();
    require(r.label >= 0 && static_cast<std::size_t>(r.label) < ld.data.class_names.size(), ErrorKind::Format,
            "index label out of range");
    ld.data.labels.push_back(r.label);
    ld.data.source_ids.push_back(r.source_id);
  }
  return ld;
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::size_t> fold_of;
};

Split split_of(const PipelineConfig& cfg, const Dataset& d) {
  Split s;
  s.fold_of = assign_folds(d.source_ids, d.labels, cfg.eval.folds, cfg.seed);
  for (std::size_t i = 0; i < d.size(); ++i) (s.fold_of[i] == cfg.eval.test_fold ? s.test : s.train).push_back(i);
  require(!s.train.empty() && !s.test.empty(), ErrorKind::Size, "held-out split is empty");
  return s;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

struct Models {
  NeuralNet cnn;
  MulticlassSvm linear;
  ProposedModel proposed;
};

void save_models(const fs::path& dir, const Models& m) {
  fs::create_directories(dir);
  m.cnn.save(dir / "cnn.nnc");
  save_multiclass(dir / "linear_svm.msv", m.linear);
  save_proposed(dir / "proposed", m.proposed);
}

Models load_models(const fs::path& dir, const PipelineConfig& cfg, std::size_t channels) {
  require(fs::exists(dir / "cnn.nnc"), ErrorKind::State, "no trained models in " + dir.string() + "; run train first");
  return Models{NeuralNet::load(dir / "cnn.nnc"), load_multiclass(dir / "linear_svm.msv"),
                load_proposed(dir / "proposed", cfg, channels)};
}

using Predictor = std::function<int(const Tensor&)>;

std::vector<std::pair<std::string, Predictor>> predictors(const Models& m) {
  return {{kCnnName, [&m](const Tensor& t) { return static_cast<int>(m.cnn.predict(t)); }},
          {kLinearSvmName, [&m](const Tensor& t) { return multiclass_predict(m.linear, t.data); }},
          {kProposedName, [&m](const Tensor& t) { return proposed_predict(m.proposed, t); }}};
}

double accuracy_of(const Predictor& p, const std::vector<Tensor>& x, const std::vector<int>& y, std::size_t jobs) {
  std::vector<int> hit(x.size(), 0);
  parallel_for(x.size(), jobs, [&](std::size_t i) { hit[i] = p(x[i]) == y[i] ? 1 : 0; });
  return 100.0 * std::accumulate(hit.begin(), hit.end(), 0.0) / static_cast<double>(x.size());
}

/// ADV1: magic, u32 n, u32 c, h, w; per sample: string source_id, i32 true
/// label, u32 success, f64 values.
void write_adv(const fs::path& path, const std::vector<AttackReport>& reports, const Shape& shape) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  binio::write_magic(out, "ADV1");
  binio::write_u32(out, static_cast<std::uint32_t>(reports.size()));
  binio::write_u32(out, static_cast<std::uint32_t>(shape.c));
  binio::write_u32(out, static_cast<std::uint32_t>(shape.h));
  binio::write_u32(out, static_cast<std::uint32_t>(shape.w));
  for (const auto& r : reports) {
    binio::write_string(out, r.source_id);
    binio::write_i32(out, r.true_label);
    binio::write_u32(out, r.success ? 1u : 0u);
    const auto& x = r.adversarial.empty() ? r.original : r.adversarial;
    require(x.size() == shape.size(), ErrorKind::Shape, "adversarial example does not match the stack shape");
    for (double v : x) binio::write_f64(out, v);
  }
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

std::vector<AttackReport> read_adv(const fs::path& path, const Shape& shape) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  binio::expect_magic(in, "ADV1");
  const std::uint32_t n = binio::read_u32(in);
  Shape s;
  s.c = binio::read_u32(in);
  s.h = binio::read_u32(in);
  s.w = binio::read_u32(in);
  require(s.c == shape.c && s.h == shape.h && s.w == shape.w, ErrorKind::Format,
          "adversarial dump shape does not match the representation");
  std::vector<AttackReport> out(n);
  for (auto& r : out) {
    r.source_id = binio::read_string(in);
    r.true_label = binio::read_i32(in);
    r.success = binio::read_u32(in) != 0;
    r.adversarial.resize(shape.size());
    for (auto& v : r.adversarial) v = binio::read_f64(in);
  }
  require(static_cast<bool>(in), ErrorKind::Format, "truncated adversarial dump " + path.string());
  return out;
}

std::string csv_models_header(const std::vector<std::string>& attacks) {
  std::string h = "model";
  for (const auto& a : attacks) h += "," + a;
  return h + "\n";
}

void write_model_tables(const fs::path& dir, const std::vector<ModelEval>& models,
                        const std::vector<std::string>& attacks, const std::vector<double>& accuracy_rank,
                        const std::vector<double>& fooling_rank) {
  std::string acc = "model,accuracy\n";
  for (const auto& m : models) acc += m.name + "," + format_number(m.accuracy) + "\n";
  write_text(dir / "accuracy.csv", acc);

  std::string rank = "model,accuracy_rank";
  if (!fooling_rank.empty()) rank += ",fooling_rank";
  rank += "\n";
  for (std::size_t i = 0; i < models.size(); ++i) {
    rank += models[i].name + "," + format_number(accuracy_rank.at(i));
    if (!fooling_rank.empty()) rank += "," + format_number(fooling_rank.at(i));
    rank += "\n";
  }
  write_text(dir / "ranking.csv", rank);
  if (attacks.empty()) return;

  std::string fool = csv_models_header(attacks);
  for (const auto& m : models) {
    fool += m.name;
    for (const auto& a : attacks) fool += "," + format_number(m.fooling.at(a));
    fool += "\n";
  }
  write_text(dir / "fooling.csv", fool);

  std::string trade = "model,error,fooling,distance\n";
  for (const auto& m : models) {
    trade += m.name + "," + format_number(100.0 - m.accuracy) + "," + format_number(m.mean_fooling) + "," +
             format_number(m.distance) + "\n";
  }
  write_text(dir / "tradeoff.csv", trade);
  write_text(dir / "tradeoff.svg", tradeoff_svg(models));
}

std::vector<std::string> canonical_attacks(const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (const auto& n : names) out.push_back(to_string(parse_attack(n)));
  return out;
}

ColorSpectrogram gray_image(const Matrix& m) { return colorize(m, Palette::Gray, 1.0); }

}  // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ull;
  }
  return state;
}

fs::path cache_dir(const CommandOptions& opts) {
  if (const char* env = std::getenv("SPECGUARD_CACHE"); env != nullptr && *env != '\0') return fs::path(env);
  return opts.out / "cache";
}

std::string tradeoff_svg(const std::vector<ModelEval>& models) {
  constexpr double kSize = 420.0;
  constexpr double kMargin = 50.0;
  const double span = kSize - 2 * kMargin;
  auto px = [&](double v) { return kMargin + span * v / 100.0; };
  auto py = [&](double v) { return kSize - kMargin - span * v / 100.0; };
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"420\" height=\"420\" viewBox=\"0 0 420 420\">\n";
  s += "<rect width=\"420\" height=\"420\" fill=\"white\"/>\n";
  s += "<line x1=\"50\" y1=\"370\" x2=\"370\" y2=\"370\" stroke=\"black\"/>\n";
  s += "<line x1=\"50\" y1=\"370\" x2=\"50\" y2=\"50\" stroke=\"black\"/>\n";
  s += "<text x=\"210\" y=\"405\" text-anchor=\"middle\" font-size=\"13\">error (%)</text>\n";
  s += "<text x=\"15\" y=\"210\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 15 210)\">"
       "fooling rate (%)</text>\n";
  for (int t = 0; t <= 100; t += 25) {
    s += "<text x=\"" + format_fixed(px(t), 1) + "\" y=\"385\" text-anchor=\"middle\" font-size=\"10\">" +
         std::to_string(t) + "</text>\n";
    s += "<text x=\"44\" y=\"" + format_fixed(py(t) + 3, 1) + "\" text-anchor=\"end\" font-size=\"10\">" +
         std::to_string(t) + "</text>\n";
  }
  for (const auto& m : models) {
    const double e = 100.0 - m.accuracy;
    const double x = px(e);
    const double y = py(m.mean_fooling);
    s += "<line x1=\"50\" y1=\"370\" x2=\"" + format_fixed(x, 1) + "\" y2=\"" + format_fixed(y, 1) +
         "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    s += "<circle cx=\"" + format_fixed(x, 1) + "\" cy=\"" + format_fixed(y, 1) + "\" r=\"4\" fill=\"black\"/>\n";
    s += "<text x=\"" + format_fixed(x + 7, 1) + "\" y=\"" + format_fixed(y - 6, 1) + "\" font-size=\"11\">" +
         m.name + " d=" + format_fixed(m.distance, 2) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

int cmd_synth(const CommandOptions& opts) {
  opts.cfg.validate();
  const fs::path dir = opts.out / "data";
  fs::create_directories(dir);
  const auto clips = synth_clips(opts.cfg.dataset, opts.cfg.seed);
  DatasetManifest manifest;
  manifest.class_names = synth_class_names(opts.cfg.dataset.classes);
  for (const auto& c : clips) {
    const fs::path p = dir / (c.source_id + ".wav");
    write_wav(p, c.clip);
    manifest.entries.push_back(ManifestEntry{p, c.label, std::nullopt, c.source_id});
  }
  write_manifest(manifest, dir / "manifest.csv", dir / "classes.json");
  note(opts, "synth: wrote " + std::to_string(clips.size()) + " clips to " + dir.string());
  return 0;
}

int cmd_build(const CommandOptions& opts, const fs::path& manifest_path, const fs::path& class_names,
              BuildResult* result) {
  const auto& cfg = opts.cfg;
  cfg.validate();
  const fs::path names = class_names.empty() ? manifest_path.parent_path() / "classes.json" : class_names;
  DatasetManifest manifest = read_manifest(manifest_path, names);
  const fs::path out = build_dir(opts);
  if (cfg.dataset.augment) {
    manifest = augment_dataset(manifest, cfg.dataset.pitch_scales, out / "augmented");
  }
  const fs::path cache = cache_dir(opts);
  fs::create_directories(cache);
  fs::create_directories(out / "png");
  fs::create_directories(out / "spg");
  const std::uint64_t rep_hash = fnv1a(representation_key(cfg));
  const bool dwt = cfg.representation.kind == "dwt";
  const SpectrumKind kind = dwt ? SpectrumKind::Dwt
                                : (cfg.representation.kind == "stft" ? SpectrumKind::Stft : SpectrumKind::Pool);

  const std::size_t n = manifest.entries.size();
  std::vector<IndexRow> rows(n);
  std::vector<int> ok(n, 0), hit(n, 0);
  std::vector<std::size_t> images(n, 0);
  std::vector<std::string> errors(n);
  parallel_for(n, opts.jobs, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    try {
      const std::string bytes = read_bytes(e.path);
      const std::string key = hex64(fnv1a(bytes, rep_hash));
      const fs::path stack_path = cache / (key + ".stk");
      Tensor stack;
      bool cached = false;
      if (fs::exists(stack_path)) {
        try {
          stack = read_stack(stack_path);
          cached = true;
        } catch (const Error&) {
          cached = false;
        }
      }
      if (!cached) {
        stack = clip_stack(load_wav(e.path), cfg.representation);
        write_stack(stack_path, stack);
      }
      const std::string clip_id = padded(i) + "_" + e.path.stem().string();
      if (dwt) {
        for (const auto& spec : variant_specs(cfg, stack.shape.c)) {
          const auto img = enhance(stack_channel(stack, spec.channel), spec, cfg);
          write_png(out / "png" /
                        (clip_id + "_" + to_string(stack_scales()[spec.channel]) + "_" + to_string(spec.palette) +
                         ".png"),
                    img);
          ++images[i];
        }
      } else {
        write_png(out / "png" / (clip_id + "_" + cfg.representation.kind + ".png"),
                  gray_image(stack_channel(stack, 0)));
        ++images[i];
      }
      for (std::size_t c = 0; c < stack.shape.c; ++c) {
        Spectrogram sp;
        sp.data = stack_channel(stack, c);
        sp.kind = kind;
        sp.scale = dwt ? stack_scales()[c] : MagnitudeScale::None;
        write_spg(out / "spg" / (clip_id + "_" + to_string(sp.scale) + ".spg"), sp);
      }
      rows[i] = IndexRow{clip_id, e.source_id, e.class_id, key, fs::proximate(e.path, out).generic_string()};
      ok[i] = 1;
      hit[i] = cached ? 1 : 0;
    } catch (const Error& err) {
      errors[i] = err.what();
    }
  });

  BuildResult res;
  std::vector<IndexRow> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (ok[i]) {
      kept.push_back(rows[i]);
      ++res.clips;
      res.cache_hits += static_cast<std::size_t>(hit[i]);
      res.images += images[i];
    } else {
      ++res.skipped;
      note(opts, "build: skipped " + manifest.entries[i].path.string() + ": " + errors[i]);
    }
  }
  write_index(out / "index.csv", kept);
  write_text(out / "classes.json", nlohmann::json(manifest.class_names).dump() + "\n");
  note(opts, "build: " + std::to_string(res.clips) + " clips, " + std::to_string(res.cache_hits) + " cache hits, " +
                 std::to_string(res.images) + " images, " + std::to_string(res.skipped) + " skipped");
  if (result) *result = res;
  return n > 0 && static_cast<double>(res.skipped) > 0.1 * static_cast<double>(n) ? 3 : 0;
}

int cmd_train(const CommandOptions& opts) {
  const auto& cfg = opts.cfg;
  cfg.validate();
  const auto ld = load_dataset(opts);
  const auto& d = ld.data;
  const auto split = split_of(cfg, d);
  const auto train_x = pick(d.stacks, split.train);
  const auto train_y = pick(d.labels, split.train);
  const auto test_x = pick(d.stacks, split.test);
  const auto test_y = pick(d.labels, split.test);
  const std::size_t k = d.class_names.size();
  const std::uint64_t seed = fold_seed(cfg, cfg.eval.test_fold);

  std::string split_csv = "clip_id,fold,role\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    split_csv += ld.rows[i].clip_id + "," + std::to_string(split.fold_of[i]) + "," +
                 (split.fold_of[i] == cfg.eval.test_fold ? "test" : "train") + "\n";
  }

  note(opts, "train: CNN on " + std::to_string(train_x.size()) + " stacks");
  auto cnn = fit_cnn(cfg, train_x, train_y, k, seed);
  note(opts, "train: linear SVM");
  auto linear = fit_linear_svm(cfg, train_x, train_y, k);
  std::string log = "model,epoch,train_loss\n";
  for (const auto& h : cnn.history) log += kCnnName + "," + std::to_string(h.epoch) + "," + format_number(h.train_loss) + "\n";
  ProposedFitOptions fo;
  fo.jobs = opts.jobs;
  std::optional<NeuralNet> cda;
  if (cfg.cda.enabled) {
    note(opts, "train: denoising autoencoder");
    auto r = fit_cda(train_x, cfg, proposed_seed(seed));
    for (const auto& h : r.history) log += "CDA," + std::to_string(h.epoch) + "," + format_number(h.train_loss) + "\n";
    cda = std::move(r.net);
    fo.cda = &*cda;
  }
  note(opts, "train: proposed pipeline");
  Models m{std::move(cnn.net), std::move(linear),
           fit_proposed(train_x, train_y, k, cfg, proposed_seed(seed), fo)};
  save_models(models_dir(opts), m);
  save_config(models_dir(opts) / "config.toml", cfg);
  write_text(models_dir(opts) / "split.csv", split_csv);
  write_text(models_dir(opts) / "train_log.csv", log);

  std::string summary = "model,train_accuracy,test_accuracy\n";
  for (const auto& [name, p] : predictors(m)) {
    summary += name + "," + format_number(accuracy_of(p, train_x, train_y, opts.jobs)) + "," +
               format_number(accuracy_of(p, test_x, test_y, opts.jobs)) + "\n";
  }
  write_text(models_dir(opts) / "train_summary.csv", summary);
  note(opts, "train: models written to " + models_dir(opts).string());
  return 0;
}

int cmd_attack(const CommandOptions& opts, const std::vector<std::string>& requested) {
  const auto& cfg = opts.cfg;
  cfg.validate();
  const auto ld = load_dataset(opts);
  const auto& d = ld.data;
  const auto split = split_of(cfg, d);
  const Shape shape = d.stacks.front().shape;
  const Models m = load_models(models_dir(opts), cfg, shape.c);
  const auto train_x = pick(d.stacks, split.train);
  const auto train_y = pick(d.labels, split.train);
  const std::size_t k = d.class_names.size();
  const std::uint64_t seed = fold_seed(cfg, cfg.eval.test_fold);
  const std::uint64_t attack_seed = derive_seed(seed, {0x41, 1});

  std::vector<LabeledSample> samples;
  for (auto i : split.test) samples.push_back(LabeledSample{ld.rows[i].clip_id, d.stacks[i].data, d.labels[i]});

  const auto attacks = canonical_attacks(requested.empty() ? cfg.attack.attacks : requested);
  const fs::path dir = attacks_dir(opts);
  fs::create_directories(dir / "adv");
  const NetModel cnn_model(m.cnn);
  std::vector<AttackReport> all;
  std::size_t failures = 0;
  for (const auto& name : attacks) {
    const AttackKind kind = parse_attack(name);
    const auto a = attack_config(cfg, kind, train_x.size(), attack_seed);
    if (kind == AttackKind::LabelFlip) {
      note(opts, "attack: LFA on the linear SVM");
      const auto poisoned = poison_labels(cfg, train_x, train_y, k);
      std::string csv = "clip_id,label,poisoned\n";
      for (std::size_t j = 0; j < split.train.size(); ++j) {
        csv += ld.rows[split.train[j]].clip_id + "," + std::to_string(train_y[j]) + "," +
               std::to_string(poisoned[j]) + "\n";
      }
      write_text(dir / "poisoned_labels.csv", csv);
      const std::uint64_t pseed = proposed_seed(seed);
      Models p{fit_cnn(cfg, train_x, poisoned, k, seed).net, fit_linear_svm(cfg, train_x, poisoned, k), m.proposed};
      const auto encoded = encode_set(train_x, m.proposed, opts.jobs);
      refit_classifier(p.proposed, encoded, poisoned, k);
      (void)pseed;
      save_models(dir / "lfa", p);
      continue;
    }
    note(opts, "attack: " + name + " on " + std::to_string(samples.size()) + " samples");
    auto reports = kind == AttackKind::Evasion ? evasion_batch(m.linear, samples, a, opts.jobs)
                                               : attack_batch(cnn_model, samples, kind, a, opts.jobs);
    for (const auto& r : reports) failures += r.error.empty() ? 0 : 1;
    write_adv(dir / "adv" / (name + ".adv"), reports, shape);
    for (auto& r : reports) all.push_back(std::move(r));
  }
  write_reports_csv(dir / "reports.csv", all);
  if (!all.empty() && failures == all.size()) {
    note(opts, "attack: every sample failed");
    return 4;
  }
  return 0;
}

int cmd_report(const CommandOptions& opts) {
  const auto& cfg = opts.cfg;
  cfg.validate();
  const auto ld = load_dataset(opts);
  const auto& d = ld.data;
  const auto split = split_of(cfg, d);
  const Shape shape = d.stacks.front().shape;
  const Models m = load_models(models_dir(opts), cfg, shape.c);
  const auto test_x = pick(d.stacks, split.test);
  const auto test_y = pick(d.labels, split.test);

  std::vector<std::string> attacks;
  for (const auto& name : canonical_attacks(cfg.attack.attacks)) {
    const bool present = parse_attack(name) == AttackKind::LabelFlip
                             ? fs::exists(attacks_dir(opts) / "lfa" / "cnn.nnc")
                             : fs::exists(attacks_dir(opts) / "adv" / (name + ".adv"));
    if (present) attacks.push_back(name);
  }
  std::optional<Models> poisoned;
  if (std::find(attacks.begin(), attacks.end(), to_string(AttackKind::LabelFlip)) != attacks.end()) {
    poisoned = load_models(attacks_dir(opts) / "lfa", cfg, shape.c);
  }

  std::map<std::string, std::vector<AttackReport>> crafted;
  for (const auto& name : attacks) {
    if (parse_attack(name) != AttackKind::LabelFlip) crafted[name] = read_adv(attacks_dir(opts) / "adv" / (name + ".adv"), shape);
  }
  std::vector<ModelEval> evals;
  const auto preds = predictors(m);
  const auto ppreds = poisoned ? predictors(*poisoned) : decltype(preds){};
  for (std::size_t mi = 0; mi < preds.size(); ++mi) {
    const auto& [name, p] = preds[mi];
    ModelEval e;
    e.name = name;
    e.accuracy = accuracy_of(p, test_x, test_y, opts.jobs);
    for (const auto& [an, reports] : crafted) {
      std::vector<Tensor> adv;
      std::vector<int> y;
      for (const auto& r : reports) {
        adv.push_back(Tensor{shape, r.adversarial});
        y.push_back(r.true_label);
      }
      e.fooling[an] = 100.0 - accuracy_of(p, adv, y, opts.jobs);
    }
    if (poisoned) e.fooling[to_string(AttackKind::LabelFlip)] = 100.0 - accuracy_of(ppreds[mi].second, test_x, test_y, opts.jobs);
    summarize(e);
    evals.push_back(std::move(e));
  }

  Matrix acc(evals.size(), 1);
  for (std::size_t i = 0; i < evals.size(); ++i) acc(i, 0) = evals[i].accuracy;
  std::vector<double> fooling_rank;
  if (!attacks.empty()) {
    Matrix fool(evals.size(), attacks.size());
    for (std::size_t i = 0; i < evals.size(); ++i) {
      for (std::size_t a = 0; a < attacks.size(); ++a) fool(i, a) = evals[i].fooling.at(attacks[a]);
    }
    fooling_rank = average_rank(fool, false);
  }
  write_model_tables(opts.out / "report", evals, attacks, average_rank(acc, true), fooling_rank);
  note(opts, "report: " + std::to_string(evals.size()) + " models, " + std::to_string(attacks.size()) + " attacks");
  return 0;
}

int cmd_lid(const CommandOptions& opts) {
  const auto& cfg = opts.cfg;
  cfg.validate();
  const auto ld = load_dataset(opts);
  const auto& d = ld.data;
  const Shape shape = d.stacks.front().shape;
  const NeuralNet cnn = load_models(models_dir(opts), cfg, shape.c).cnn;
  const std::size_t max_k = *std::max_element(cfg.eval.lid_k.begin(), cfg.eval.lid_k.end());

  std::vector<LabeledSample> normal;
  for (std::size_t i = 0; i < d.size(); ++i) normal.push_back(LabeledSample{ld.rows[i].clip_id, d.stacks[i].data, d.labels[i]});
  if (normal.size() < std::max<std::size_t>(100, max_k + 1)) {
    note(opts, "lid: adding pitch-shifted variants to reach the mini-batch size");
    std::vector<std::vector<double>> extra(ld.rows.size() * cfg.dataset.pitch_scales.size());
    parallel_for(ld.rows.size(), opts.jobs, [&](std::size_t i) {
      const AudioClip clip = load_wav(ld.rows[i].wav);
      for (std::size_t s = 0; s < cfg.dataset.pitch_scales.size(); ++s) {
        extra[i * cfg.dataset.pitch_scales.size() + s] =
            clip_stack(pitch_shift(clip, cfg.dataset.pitch_scales[s]), cfg.representation).data;
      }
    });
    for (std::size_t j = 0; j < extra.size(); ++j) {
      const std::size_t i = j / cfg.dataset.pitch_scales.size();
      normal.push_back(LabeledSample{ld.rows[i].clip_id + "_ps" + std::to_string(j % cfg.dataset.pitch_scales.size()),
                                     std::move(extra[j]), d.labels[i]});
    }
  }

  const NetModel model(cnn);
  const auto a = attack_config(cfg, AttackKind::Fgsm, 0, derive_seed(cfg.seed, {0x4c4944}));
  const auto adv_reports = attack_batch(model, normal, AttackKind::Fgsm, a, opts.jobs);
  std::vector<std::vector<double>> clean, noisy, adv;
  std::mt19937_64 rng(derive_seed(cfg.seed, {0x4c4944, 1}));
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < normal.size(); ++i) {
    clean.push_back(normal[i].x);
    auto n = normal[i].x;
    for (auto& v : n) v = std::clamp(v + (coin(rng) ? cfg.attack.epsilon : -cfg.attack.epsilon), 0.0, 1.0);
    noisy.push_back(std::move(n));
    adv.push_back(adv_reports[i].adversarial);
  }
  LidOptions lo;
  lo.seed = derive_seed(cfg.seed, {0x4c4944, 2});
  const auto rows = lid_detectability(clean, noisy, adv, cfg.eval.lid_k, lo);
  std::string csv = "k,mean_difference,balanced_accuracy\n";
  for (const auto& r : rows) csv += std::to_string(r.k) + "," + format_number(r.mean_difference) + "," + format_number(r.accuracy) + "\n";
  write_text(opts.out / "lid" / "lid.csv", csv);
  note(opts, "lid: " + std::to_string(rows.size()) + " rows over " + std::to_string(clean.size()) + " vectors");
  return 0;
}

void write_eval_tables(const fs::path& dir, const EvalReport& report) {
  const auto attacks = canonical_attacks(report.attacks);
  write_model_tables(dir, report.models, attacks, report.accuracy_rank, report.fooling_rank);
  std::string folds = "fold,model,accuracy,mean_fooling,distance\n";
  for (const auto& f : report.folds) {
    for (const auto& m : f.models) {
      folds += std::to_string(f.fold) + "," + m.name + "," + format_number(m.accuracy) + "," +
               format_number(m.mean_fooling) + "," + format_number(m.distance) + "\n";
    }
  }
  write_text(dir / "folds.csv", folds);
  if (report.ablation.empty()) return;
  std::string ab = "toggle,accuracy_delta,deep_robustness_delta,svm_robustness_delta,accuracy,deep_fooling,svm_fooling\n";
  for (const auto& a : report.ablation) {
    ab += to_string(a.toggle) + "," + format_number(a.accuracy_delta) + "," + format_number(a.deep_robustness_delta) +
          "," + format_number(a.svm_robustness_delta) + "," + format_number(a.removed.accuracy) + "," +
          format_number(a.removed.deep_fooling) + "," + format_number(a.removed.svm_fooling) + "\n";
  }
  write_text(dir / "ablation.csv", ab);
}

int cmd_ablate(const CommandOptions& opts, const std::vector<std::string>& toggles,
               const std::vector<std::size_t>& folds) {
  opts.cfg.validate();
  std::vector<AblationToggle> t;
  if (toggles.empty()) {
    t = all_toggles();
  } else {
    for (const auto& name : toggles) t.push_back(parse_toggle(name));
  }
  const auto ld = load_dataset(opts);
  EvalOptions eo;
  eo.folds = folds;
  eo.jobs = opts.jobs;
  note(opts, "ablate: " + std::to_string(t.size()) + " toggles");
  const auto rep = ablation(opts.cfg, ld.data, t, eo);
  write_eval_tables(opts.out / "ablation", rep);
  return 0;
}

int cmd_evaluate(const CommandOptions& opts, const std::vector<std::size_t>& folds) {
  opts.cfg.validate();
  const auto ld = load_dataset(opts);
  EvalOptions eo;
  eo.folds = folds;
  eo.jobs = opts.jobs;
  const auto rep = kfold_evaluate(opts.cfg, ld.data, eo);
  write_eval_tables(opts.out / "evaluation", rep);
  return 0;
}

}  // namespace specguard
