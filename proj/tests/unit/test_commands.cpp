#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "specguard/commands.hpp"
#include "specguard/error.hpp"
#include "tiny_config.hpp"

using namespace specguard;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("specguard_cmd_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("fnv1a matches published test vectors") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
  CHECK(fnv1a("bar", fnv1a("foo")) == fnv1a("foobar"));
}

TEST_CASE("cache directory honours the environment") {
  CommandOptions o;
  o.out = "somewhere";
  ::unsetenv("SPECGUARD_CACHE");
  CHECK(cache_dir(o) == fs::path("somewhere") / "cache");
  ::setenv("SPECGUARD_CACHE", "/tmp/elsewhere", 1);
  CHECK(cache_dir(o) == fs::path("/tmp/elsewhere"));
  ::unsetenv("SPECGUARD_CACHE");
}

TEST_CASE("tradeoff svg labels every model") {
  std::vector<ModelEval> models(2);
  models[0].name = "CNN";
  models[0].accuracy = 90;
  models[0].mean_fooling = 80;
  models[0].distance = 80.62;
  models[1].name = "Proposed";
  models[1].accuracy = 95;
  const auto svg = tradeoff_svg(models);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("CNN d=80.62") != std::string::npos);
  CHECK(svg.find("Proposed d=0.00") != std::string::npos);
}

TEST_CASE("commands before build report a state error") {
  CommandOptions o;
  o.cfg = testing::tiny_config();
  o.out = fresh_dir("empty");
  try {
    cmd_train(o);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::State);
  }
}

TEST_CASE("build skips unreadable clips and fails when too many are bad") {
  CommandOptions o;
  o.cfg = testing::tiny_config();
  o.out = fresh_dir("bad");
  REQUIRE(cmd_synth(o) == 0);
  const auto data = o.out / "data";
  std::size_t broken = 0;
  for (const auto& e : fs::directory_iterator(data)) {
    if (e.path().extension() == ".wav" && broken < 3) {
      std::ofstream(e.path(), std::ios::binary | std::ios::trunc) << "not a wav";
      ++broken;
    }
  }
  BuildResult r;
  CHECK(cmd_build(o, data / "manifest.csv", {}, &r) == 3);
  CHECK(r.skipped == 3);
  CHECK(r.clips == 15);
  CHECK(count_lines(o.out / "build" / "index.csv") == 16);
}

TEST_CASE("full command chain writes every artifact") {
  CommandOptions o;
  o.cfg = testing::tiny_config();
  o.out = fresh_dir("chain");
  o.jobs = 2;
  REQUIRE(cmd_synth(o) == 0);
  BuildResult r;
  REQUIRE(cmd_build(o, o.out / "data" / "manifest.csv", {}, &r) == 0);
  CHECK(r.clips == 18);
  CHECK(r.images == 18 * 9);
  CHECK(r.cache_hits == 0);
  REQUIRE(cmd_build(o, o.out / "data" / "manifest.csv", {}, &r) == 0);
  CHECK(r.cache_hits == 18);
  std::size_t pngs = 0, spgs = 0;
  for (const auto& e : fs::directory_iterator(o.out / "build" / "png")) pngs += e.path().extension() == ".png";
  for (const auto& e : fs::directory_iterator(o.out / "build" / "spg")) spgs += e.path().extension() == ".spg";
  CHECK(pngs == 18 * 9);
  CHECK(spgs == 18 * 3);

  REQUIRE(cmd_train(o) == 0);
  for (const char* f : {"cnn.nnc", "linear_svm.msv", "proposed/codebook.kmb", "split.csv", "train_log.csv",
                        "train_summary.csv"})
    CHECK(fs::exists(o.out / "models" / f));
  REQUIRE(cmd_attack(o) == 0);
  CHECK(fs::exists(o.out / "attacks" / "reports.csv"));
  CHECK(fs::exists(o.out / "attacks" / "adv" / "FGSM.adv"));
  CHECK(fs::exists(o.out / "attacks" / "poisoned_labels.csv"));
  REQUIRE(cmd_report(o) == 0);
  CHECK(count_lines(o.out / "report" / "fooling.csv") == 4);
  CHECK(slurp(o.out / "report" / "fooling.csv").rfind("model,FGSM,BIM-a,BIM-b,CWA,EA,LFA\n", 0) == 0);
  CHECK(fs::exists(o.out / "report" / "tradeoff.svg"));
  REQUIRE(cmd_lid(o) == 0);
  CHECK(count_lines(o.out / "lid" / "lid.csv") == 3);
}

TEST_CASE("report without attacks gives an accuracy-only table") {
  CommandOptions o;
  o.cfg = testing::tiny_config();
  o.cfg.cda.enabled = false;
  o.out = fresh_dir("noattack");
  REQUIRE(cmd_synth(o) == 0);
  REQUIRE(cmd_build(o, o.out / "data" / "manifest.csv") == 0);
  REQUIRE(cmd_train(o) == 0);
  REQUIRE(cmd_report(o) == 0);
  CHECK(count_lines(o.out / "report" / "accuracy.csv") == 4);
  CHECK_FALSE(fs::exists(o.out / "report" / "fooling.csv"));
}
