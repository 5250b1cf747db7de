#include <filesystem>

#include "doctest.h"
#include "specguard/config.hpp"
#include "specguard/error.hpp"
#include "tiny_config.hpp"

using namespace specguard;

TEST_CASE("default config is valid and round-trips through text") {
  const PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(parse_config(serialize_config(cfg)) == cfg);
  const PipelineConfig tiny = testing::tiny_config();
  CHECK_NOTHROW(tiny.validate());
  CHECK(parse_config(serialize_config(tiny)) == tiny);
}

TEST_CASE("config file round trip") {
  PipelineConfig cfg = testing::tiny_config();
  cfg.seed = 1234567890123ull;
  cfg.attack.targeted = true;
  cfg.color.palettes = {Palette::WB};
  cfg.color.c = {0.25};
  const auto path = std::filesystem::temp_directory_path() / "specguard_unit.toml";
  save_config(path, cfg);
  CHECK(load_config(path) == cfg);
  std::filesystem::remove(path);
}

TEST_CASE("partial config overrides defaults only where given") {
  const auto cfg = parse_config(
      "# comment\n"
      "[run]\n"
      "seed = 9\n"
      "[svd]\n"
      "n_prime = 3.5  # trailing comment\n"
      "[attack]\n"
      "attacks = [\"FGSM\", \"EA\"]  # quoted # kept\n"
      "targeted = true\n"
      "[representation]\n"
      "kind = \"stft\"  # inline comment after a string\n");
  CHECK(cfg.seed == 9);
  CHECK(cfg.svd.n_prime == 3.5);
  CHECK(cfg.attack.targeted);
  CHECK(cfg.attack.attacks == std::vector<std::string>{"FGSM", "EA"});
  CHECK(cfg.representation.kind == "stft");
  CHECK(cfg.cnn == PipelineConfig{}.cnn);
}

TEST_CASE("malformed or invalid configs raise config errors") {
  auto kind_of = [](const std::string& text) {
    try {
      parse_config(text).validate();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  CHECK(kind_of("[svd]\nbogus = 1\n") == ErrorKind::Config);
  CHECK(kind_of("[svd]\nn_prime = abc\n") == ErrorKind::Config);
  CHECK(kind_of("[svd\n") == ErrorKind::Config);
  CHECK(kind_of("[svd]\nn_prime\n") == ErrorKind::Config);
  CHECK(kind_of("[svd]\nn_prime = 2\nn_prime = 3\n") == ErrorKind::Config);
  CHECK(kind_of("[svd]\nn_prime = 1.0\n") == ErrorKind::Config);
  CHECK(kind_of("[color]\nc = [1.5, 1, 1]\n") == ErrorKind::Config);
  CHECK(kind_of("[eval]\nfolds = 3\ntest_fold = 3\n") == ErrorKind::Config);
  CHECK(kind_of("[features]\nzone_sizes = [16]\n") == ErrorKind::Config);
  CHECK(kind_of("[cnn]\nepochs = -2\n") == ErrorKind::Config);
  CHECK_THROWS_AS(load_config("/nonexistent/specguard.toml"), Error);
}
