#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "specguard/audio_io.hpp"
#include "specguard/error.hpp"

using namespace specguard;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "specguard_audio_test";
  fs::create_directories(dir);
  return dir / name;
}

/// Zero crossings per second / 2.
double crossing_frequency(const AudioClip& c) {
  std::size_t crossings = 0;
  for (std::size_t i = 1; i < c.samples.size(); ++i) {
    if ((c.samples[i - 1] < 0) != (c.samples[i] < 0)) ++crossings;
  }
  return crossings / 2.0 / (static_cast<double>(c.samples.size()) / c.sample_rate);
}

}  // namespace

TEST_CASE("wav round trip is within 16-bit quantization") {
  const AudioClip tone = synth_tone(440.0, 0.1, 8000, 0.8);
  const auto p = scratch("tone.wav");
  write_wav(p, tone);
  const AudioClip back = load_wav(p);
  CHECK(back.sample_rate == 8000);
  REQUIRE(back.samples.size() == tone.samples.size());
  for (std::size_t i = 0; i < tone.samples.size(); ++i) CHECK(std::abs(back.samples[i] - tone.samples[i]) <= 1.0 / 32768.0);
}

TEST_CASE("synth_tone length and amplitude") {
  const AudioClip t = synth_tone(100.0, 0.5, 8000, 0.25);
  CHECK(t.samples.size() == 4000);
  double peak = 0.0;
  for (double v : t.samples) peak = std::max(peak, std::abs(v));
  CHECK(peak == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("pitch_shift scales length and frequency") {
  const AudioClip t = synth_tone(400.0, 0.5, 8000, 0.5);
  for (double s : {0.5, 0.75, 1.25, 1.75}) {
    const AudioClip p = pitch_shift(t, s);
    CHECK(p.samples.size() == static_cast<std::size_t>(std::lround(4000 / s)));
    CHECK(crossing_frequency(p) == doctest::Approx(400.0 * s).epsilon(0.03));
  }
  CHECK_THROWS_AS(pitch_shift(t, 0.0), Error);
}

TEST_CASE("load_wav rejects garbage") {
  const auto p = scratch("bad.wav");
  std::ofstream(p, std::ios::binary) << "RIFFxxxxWAVEjunk";
  CHECK_THROWS_AS(load_wav(p), Error);
  CHECK_THROWS_AS(load_wav(scratch("missing.wav")), Error);
}

TEST_CASE("validate rejects empty or non-finite clips") {
  AudioClip c;
  c.sample_rate = 8000;
  CHECK_THROWS_AS(validate(c), Error);
  c.samples = {0.0, std::nan("")};
  CHECK_THROWS_AS(validate(c), Error);
}

TEST_CASE("manifest round trip and augmentation multiplies entries by eight") {
  const auto dir = scratch("manifest");
  fs::remove_all(dir);
  fs::create_directories(dir);
  DatasetManifest m;
  m.class_names = {"a", "b"};
  for (int i = 0; i < 4; ++i) {
    const auto wav = dir / ("clip" + std::to_string(i) + ".wav");
    write_wav(wav, synth_tone(300.0 + 100 * i, 0.1, 8000, 0.5));
    m.entries.push_back(ManifestEntry{wav, i % 2, std::nullopt, "clip" + std::to_string(i)});
  }
  write_manifest(m, dir / "manifest.csv", dir / "classes.json");
  const auto back = read_manifest(dir / "manifest.csv", dir / "classes.json");
  REQUIRE(back.entries.size() == 4);
  CHECK(back.class_names == m.class_names);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back.entries[i].class_id == m.entries[i].class_id);
    CHECK(fs::equivalent(back.entries[i].path, m.entries[i].path));
  }
  const auto aug = augment_dataset(back, kPaperPitchScales, dir / "aug");
  CHECK(aug.entries.size() == 8 * back.entries.size());
  for (const auto& e : aug.entries) CHECK(fs::exists(e.path));
}

TEST_CASE("manifest validation") {
  DatasetManifest m;
  m.class_names = {"a"};
  m.entries.push_back(ManifestEntry{"x.wav", 1, std::nullopt, "x"});
  CHECK_THROWS_AS(validate(m), Error);
  m.entries[0].class_id = 0;
  CHECK_NOTHROW(validate(m));
  m.entries.push_back(ManifestEntry{"y.wav", 0, 2, "y"});
  CHECK_THROWS_AS(validate(m), Error);
}
