#include "specguard/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "specguard/attacks.hpp"
#include "specguard/features.hpp"
#include "specguard/error.hpp"
#include "specguard/text.hpp"

namespace specguard {

namespace fs = std::filesystem;

KernelSpec SvmConfig::kernel_spec() const {
  KernelSpec k;
  k.kind = kernel;
  k.degree = degree;
  k.offset = offset;
  k.gamma = gamma;
  k.sigma = sigma;
  return k;
}

void PipelineConfig::validate() const {
  const auto& r = representation;
  require(r.kind == "dwt" || r.kind == "stft" || r.kind == "pool", ErrorKind::Config,
          "representation.kind must be dwt, stft or pool");
  require(r.dwt_scales >= 2, ErrorKind::Config, "representation.dwt_scales must be at least 2");
  require(r.octaves > 0.0 && r.morlet_factor > 0.0, ErrorKind::Config, "DWT octaves and Morlet factor must be positive");
  require(r.image_rows >= 8 && r.image_cols >= 8, ErrorKind::Config, "image must be at least 8x8");
  require(r.image_rows % 4 == 0 && r.image_cols % 4 == 0, ErrorKind::Config,
          "image rows and columns must be multiples of 4");
  require(r.stft_frame_ms > 0.0, ErrorKind::Config, "stft_frame_ms must be positive");
  require(r.primary_scale != MagnitudeScale::None, ErrorKind::Config, "primary_scale must be a magnitude scale");

  require(!color.palettes.empty() && color.palettes.size() == color.c.size(), ErrorKind::Config,
          "color.palettes and color.c must be non-empty and aligned");
  for (double c : color.c) require(c > 0.0 && c <= 1.0, ErrorKind::Config, "color.c values must lie in (0, 1]");
  require(highboost.c >= 0.0, ErrorKind::Config, "highboost.c must be non-negative");
  require(svd.n_prime > 1.0, ErrorKind::Config, "svd.n_prime must exceed 1");
  require(cda.filters.size() == 3, ErrorKind::Config, "cda.filters needs three entries");
  for (auto f : cda.filters) require(f > 0, ErrorKind::Config, "cda.filters must be positive");
  require(cda.dropout >= 0.0 && cda.dropout < 1.0, ErrorKind::Config, "cda.dropout must lie in [0, 1)");
  require(cda.corruption >= 0.0 && cda.corruption < 1.0, ErrorKind::Config, "cda.corruption must lie in [0, 1)");
  require(cda.epochs > 0 && cda.batch_size > 0 && cda.patience > 0 && cda.learning_rate > 0.0 && cda.train_images > 0,
          ErrorKind::Config, "cda training settings must be positive");

  ZoningPlan plan{features.zone_sizes, features.strides};
  plan.validate(std::min(r.image_rows, r.image_cols));
  require(features.codebook_k >= 2, ErrorKind::Config, "features.codebook_k must be at least 2");
  require(features.codebook_samples >= features.codebook_k, ErrorKind::Config,
          "features.codebook_samples must be at least codebook_k");
  require(features.kmeans_n_init >= 1, ErrorKind::Config, "features.kmeans_n_init must be at least 1");

  svm.kernel_spec().validate();
  require(svm.cost > 0.0 && svm.linear_cost > 0.0, ErrorKind::Config, "svm costs must be positive");
  require(cnn.epochs > 0 && cnn.batch_size > 0 && cnn.patience > 0 && cnn.learning_rate > 0.0, ErrorKind::Config,
          "cnn training settings must be positive");

  for (const auto& a : attack.attacks) parse_attack(a);
  require(attack.epsilon >= 0.0 && attack.step >= 0.0 && attack.ea_epsilon >= 0.0, ErrorKind::Config,
          "attack step sizes must be non-negative");
  require(attack.max_iters >= 1, ErrorKind::Config, "attack.max_iters must be at least 1");
  require(attack.cwa_c_lo >= 0.0 && attack.cwa_c_lo <= attack.cwa_c_hi, ErrorKind::Config,
          "attack CWA c range must satisfy 0 <= lo <= hi");
  require(attack.lfa_budget_fraction >= 0.0 && attack.lfa_budget_fraction <= 1.0, ErrorKind::Config,
          "attack.lfa_budget_fraction must lie in [0, 1]");

  require(dataset.classes >= 2 && dataset.clips_per_class >= 1, ErrorKind::Config,
          "dataset needs at least two classes and one clip per class");
  require(dataset.sample_rate > 0 && dataset.duration > 0.0 && dataset.noise >= 0.0, ErrorKind::Config,
          "dataset rate, duration and noise must be valid");
  for (double s : dataset.pitch_scales) require(s > 0.0, ErrorKind::Config, "pitch scales must be positive");

  require(eval.folds >= 2, ErrorKind::Config, "eval.folds must be at least 2");
  require(eval.test_fold < eval.folds, ErrorKind::Config, "eval.test_fold must be below eval.folds");
  for (auto k : eval.lid_k) require(k >= 2, ErrorKind::Config, "eval.lid_k values must be at least 2");
  require(jobs >= 1, ErrorKind::Config, "jobs must be at least 1");
}

namespace {

std::string quote(const std::string& s) { return "\"" + s + "\""; }

std::string unquote(const std::string& raw) {
  const std::string s = trim(raw);
  require(s.size() >= 2 && s.front() == '"' && s.back() == '"', ErrorKind::Config, "expected a quoted string: " + s);
  return s.substr(1, s.size() - 2);
}

double to_number(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size(), ErrorKind::Config, "expected a number: " + s);
  return v;
}

std::size_t to_count(const std::string& raw) {
  const double v = to_number(raw);
  require(v >= 0.0 && v == std::floor(v) && v < 1e15, ErrorKind::Config, "expected a non-negative integer: " + raw);
  return static_cast<std::size_t>(v);
}

std::uint64_t to_u64(const std::string& raw) {
  const std::string s = trim(raw);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size(), ErrorKind::Config, "expected an unsigned integer: " + s);
  return v;
}

bool to_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true") return true;
  if (s == "false") return false;
  fail(ErrorKind::Config, "expected true or false: " + s);
}

std::vector<std::string> to_list(const std::string& raw) {
  const std::string s = trim(raw);
  require(s.size() >= 2 && s.front() == '[' && s.back() == ']', ErrorKind::Config, "expected a [list]: " + s);
  const std::string inner = trim(s.substr(1, s.size() - 2));
  if (inner.empty()) return {};
  std::vector<std::string> items;
  for (auto& part : split(inner, ',')) items.push_back(trim(part));
  return items;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F&& fmt) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(v[i]);
  }
  return out + "]";
}

std::string num(double v) { return format_number(v); }
std::string count(std::size_t v) { return std::to_string(v); }
std::string boolean(bool v) { return v ? "true" : "false"; }

struct Field {
  std::string section;
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::vector<Field> fields(PipelineConfig& c) {
  std::vector<Field> f;
  auto add = [&](std::string section, std::string key, std::function<void(const std::string&)> set,
                 std::function<std::string()> get) {
    f.push_back(Field{std::move(section), std::move(key), std::move(set), std::move(get)});
  };
  auto number = [&](const std::string& s, const std::string& k, double& ref) {
    add(s, k, [&ref](const std::string& v) { ref = to_number(v); }, [&ref] { return num(ref); });
  };
  auto size = [&](const std::string& s, const std::string& k, std::size_t& ref) {
    add(s, k, [&ref](const std::string& v) { ref = to_count(v); }, [&ref] { return count(ref); });
  };
  auto flag = [&](const std::string& s, const std::string& k, bool& ref) {
    add(s, k, [&ref](const std::string& v) { ref = to_bool(v); }, [&ref] { return boolean(ref); });
  };
  auto sizes = [&](const std::string& s, const std::string& k, std::vector<std::size_t>& ref) {
    add(s, k,
        [&ref](const std::string& v) {
          ref.clear();
          for (auto& item : to_list(v)) ref.push_back(to_count(item));
        },
        [&ref] { return join(ref, count); });
  };
  auto numbers = [&](const std::string& s, const std::string& k, std::vector<double>& ref) {
    add(s, k,
        [&ref](const std::string& v) {
          ref.clear();
          for (auto& item : to_list(v)) ref.push_back(to_number(item));
        },
        [&ref] { return join(ref, num); });
  };

  auto& r = c.representation;
  add("representation", "kind", [&r](const std::string& v) { r.kind = unquote(v); }, [&r] { return quote(r.kind); });
  flag("representation", "multi_scale", r.multi_scale);
  add("representation", "primary_scale",
      [&r](const std::string& v) { r.primary_scale = parse_magnitude_scale(unquote(v)); },
      [&r] { return quote(to_string(r.primary_scale)); });
  size("representation", "dwt_scales", r.dwt_scales);
  number("representation", "octaves", r.octaves);
  number("representation", "morlet_factor", r.morlet_factor);
  size("representation", "image_rows", r.image_rows);
  size("representation", "image_cols", r.image_cols);
  number("representation", "stft_frame_ms", r.stft_frame_ms);

  auto& col = c.color;
  flag("color", "enabled", col.enabled);
  add("color", "palettes",
      [&col](const std::string& v) {
        col.palettes.clear();
        for (auto& item : to_list(v)) col.palettes.push_back(parse_palette(unquote(item)));
      },
      [&col] { return join(col.palettes, [](Palette p) { return quote(to_string(p)); }); });
  numbers("color", "c", col.c);

  flag("highboost", "enabled", c.highboost.enabled);
  number("highboost", "c", c.highboost.c);
  flag("svd", "enabled", c.svd.enabled);
  number("svd", "n_prime", c.svd.n_prime);

  auto& cda = c.cda;
  flag("cda", "enabled", cda.enabled);
  sizes("cda", "filters", cda.filters);
  number("cda", "dropout", cda.dropout);
  number("cda", "corruption", cda.corruption);
  size("cda", "epochs", cda.epochs);
  size("cda", "batch_size", cda.batch_size);
  number("cda", "learning_rate", cda.learning_rate);
  size("cda", "patience", cda.patience);
  size("cda", "train_images", cda.train_images);

  auto& fe = c.features;
  sizes("features", "zone_sizes", fe.zone_sizes);
  sizes("features", "strides", fe.strides);
  size("features", "codebook_k", fe.codebook_k);
  size("features", "codebook_samples", fe.codebook_samples);
  size("features", "kmeans_n_init", fe.kmeans_n_init);

  auto& s = c.svm;
  add("svm", "kernel", [&s](const std::string& v) { s.kernel = parse_kernel_kind(unquote(v)); },
      [&s] { return quote(to_string(s.kernel)); });
  add("svm", "degree",
      [&s](const std::string& v) { s.degree = static_cast<int>(to_count(v)); },
      [&s] { return std::to_string(s.degree); });
  number("svm", "offset", s.offset);
  number("svm", "gamma", s.gamma);
  number("svm", "sigma", s.sigma);
  number("svm", "cost", s.cost);
  number("svm", "linear_cost", s.linear_cost);

  size("cnn", "epochs", c.cnn.epochs);
  size("cnn", "batch_size", c.cnn.batch_size);
  number("cnn", "learning_rate", c.cnn.learning_rate);
  size("cnn", "patience", c.cnn.patience);

  auto& a = c.attack;
  add("attack", "attacks",
      [&a](const std::string& v) {
        a.attacks.clear();
        for (auto& item : to_list(v)) a.attacks.push_back(unquote(item));
      },
      [&a] { return join(a.attacks, quote); });
  number("attack", "epsilon", a.epsilon);
  number("attack", "step", a.step);
  size("attack", "max_iters", a.max_iters);
  flag("attack", "targeted", a.targeted);
  number("attack", "cwa_c_lo", a.cwa_c_lo);
  number("attack", "cwa_c_hi", a.cwa_c_hi);
  size("attack", "cwa_binary_steps", a.cwa_binary_steps);
  size("attack", "cwa_steps", a.cwa_steps);
  number("attack", "cwa_lr", a.cwa_lr);
  number("attack", "ea_epsilon", a.ea_epsilon);
  number("attack", "lfa_budget_fraction", a.lfa_budget_fraction);
  number("attack", "lfa_gamma", a.lfa_gamma);

  auto& d = c.dataset;
  size("dataset", "classes", d.classes);
  size("dataset", "clips_per_class", d.clips_per_class);
  add("dataset", "sample_rate",
      [&d](const std::string& v) { d.sample_rate = static_cast<int>(to_count(v)); },
      [&d] { return std::to_string(d.sample_rate); });
  number("dataset", "duration", d.duration);
  number("dataset", "noise", d.noise);
  flag("dataset", "augment", d.augment);
  numbers("dataset", "pitch_scales", d.pitch_scales);

  size("eval", "folds", c.eval.folds);
  size("eval", "test_fold", c.eval.test_fold);
  sizes("eval", "lid_k", c.eval.lid_k);

  add("run", "seed", [&c](const std::string& v) { c.seed = to_u64(v); },
      [&c] { return std::to_string(c.seed); });
  size("run", "jobs", c.jobs);
  return f;
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  auto table = fields(cfg);
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[' && line.find('=') == std::string::npos) {
      require(line.back() == ']', ErrorKind::Config, where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::Config, where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = std::find_if(table.begin(), table.end(),
                           [&](const Field& f) { return f.section == section && f.key == key; });
    require(it != table.end(), ErrorKind::Config, where + "unknown key '" + section + "." + key + "'");
    require(seen.insert(section + "." + key).second, ErrorKind::Config,
            where + "duplicate key '" + section + "." + key + "'");
    try {
      it->set(value);
    } catch (const Error& e) {
      fail(ErrorKind::Config, where + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

std::string serialize_config(const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;
  const auto table = fields(copy);
  std::string out;
  std::string section;
  for (const auto& f : table) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get() + "\n";
  }
  return out;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void save_config(const fs::path& path, const PipelineConfig& cfg) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << serialize_config(cfg);
}

}  // namespace specguard
