#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "specguard/commands.hpp"
#include "specguard/error.hpp"

namespace {

using specguard::ErrorKind;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::State:
      return 2;
    case ErrorKind::Decomposition:
    case ErrorKind::Training:
    case ErrorKind::DegenerateModel:
      return 4;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial robustness workbench for audio spectrogram classifiers"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::size_t jobs = 1;
  bool quiet = false;
  app.add_option("--config", config_path, "Pipeline configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--quiet", quiet, "Suppress progress messages");

  auto* synth = app.add_subcommand("synth", "Write the synthetic tone dataset");
  auto* build = app.add_subcommand("build", "Compute and cache spectrogram images");
  std::string manifest;
  std::string classes;
  build->add_option("manifest", manifest, "Manifest CSV (path,class_id[,fold][,source_id])")->required();
  build->add_option("--classes", classes, "Class-name JSON list (default: classes.json beside the manifest)");
  auto* train = app.add_subcommand("train", "Train the CNN, linear SVM and proposed pipeline");
  auto* attack = app.add_subcommand("attack", "Craft adversarial examples on the held-out fold");
  std::vector<std::string> attack_names;
  attack->add_option("--attack", attack_names, "Attack names (default: configured list)");
  auto* report = app.add_subcommand("report", "Score models on clean and adversarial data");
  auto* lid = app.add_subcommand("lid", "LID detectability of FGSM examples");
  auto* ablate = app.add_subcommand("ablate", "Cross-validated ablation of pipeline modules");
  std::vector<std::string> toggles;
  std::vector<std::size_t> ablate_folds;
  ablate->add_option("--toggle", toggles, "Modules to remove (default: all)");
  ablate->add_option("--fold", ablate_folds, "Test folds (default: all)");
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validated evaluation of all models");
  std::vector<std::size_t> eval_folds;
  evaluate->add_option("--fold", eval_folds, "Test folds (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    specguard::CommandOptions opts;
    if (!config_path.empty()) opts.cfg = specguard::load_config(config_path);
    if (seed) opts.cfg.seed = *seed;
    opts.out = out;
    opts.jobs = jobs;
    opts.log = quiet ? nullptr : &std::cerr;

    if (synth->parsed()) return specguard::cmd_synth(opts);
    if (build->parsed()) return specguard::cmd_build(opts, manifest, classes);
    if (train->parsed()) return specguard::cmd_train(opts);
    if (attack->parsed()) return specguard::cmd_attack(opts, attack_names);
    if (report->parsed()) return specguard::cmd_report(opts);
    if (lid->parsed()) return specguard::cmd_lid(opts);
    if (ablate->parsed()) return specguard::cmd_ablate(opts, toggles, ablate_folds);
    if (evaluate->parsed()) return specguard::cmd_evaluate(opts, eval_folds);
  } catch (const specguard::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return 4;
  }
  return 2;
}
