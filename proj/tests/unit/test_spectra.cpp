#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "specguard/audio_io.hpp"
#include "specguard/error.hpp"
#include "specguard/spectra.hpp"

using namespace specguard;

namespace {

std::size_t peak_row(const Matrix& m) {
  std::size_t best = 0;
  double best_energy = -1e300;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double e = 0.0;
    for (double v : m.row(r)) e += v;
    if (e > best_energy) {
      best_energy = e;
      best = r;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("hanning window is symmetric with zero endpoints") {
  const auto w = hanning(9);
  CHECK(w.front() == doctest::Approx(0.0));
  CHECK(w.back() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w[4] == doctest::Approx(1.0));
  for (std::size_t i = 0; i < 9; ++i) CHECK(w[i] == doctest::Approx(w[8 - i]));
}

TEST_CASE("stft shape and log floor") {
  const AudioClip tone = synth_tone(1000.0, 0.25, 8000, 0.5);
  const StftParams p{400, 200};
  const Spectrogram sp = stft(tone, p);
  CHECK(sp.data.rows() == 201);
  CHECK(sp.data.cols() == (2000 - 400) / 200 + 1);
  // 1000 Hz at 8 kHz with a 400-sample window lands in bin 50
  CHECK(peak_row(sp.data) == 50);

  AudioClip silent{std::vector<double>(800, 0.0), 8000, std::nullopt, ""};
  const Spectrogram quiet = stft(silent, p);
  for (double v : quiet.data.data()) CHECK(v == doctest::Approx(std::log(kLogFloor)));
}

TEST_CASE("stft rejects clips shorter than a window") {
  AudioClip c{std::vector<double>(100, 0.1), 8000, std::nullopt, ""};
  CHECK_THROWS_AS(stft(c, StftParams{400, 200}), Error);
}

TEST_CASE("StftParams::from_ms uses half-window hop") {
  const auto p = StftParams::from_ms(50.0, 8000);
  CHECK(p.window_len == 400);
  CHECK(p.hop == 200);
}

TEST_CASE("morlet wavelet shape") {
  CHECK(morlet(0.0, 0.8431) == doctest::Approx(1.0));
  CHECK(morlet(1.0, 0.8431) == doctest::Approx(-std::exp(-0.8431 * 0.8431 / 2)));
  CHECK(morlet(2.5, 1.0) == doctest::Approx(morlet(-2.5, 1.0)));
}

TEST_CASE("dwt scale grid is geometric from 1 to 2^octaves") {
  DwtParams p;
  p.n_scales = 7;
  p.octaves = 6.0;
  const auto s = dwt_scales(p);
  CHECK(s.front() == doctest::Approx(1.0));
  CHECK(s.back() == doctest::Approx(64.0));
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] / s[i - 1] == doctest::Approx(2.0));
}

TEST_CASE("scaled wavelet has odd support with s^-1/2 peak") {
  const auto w = scaled_wavelet(4.0, 0.8431);
  CHECK(w.size() % 2 == 1);
  CHECK(w[w.size() / 2] == doctest::Approx(0.5));
  CHECK(w.size() == 2 * static_cast<std::size_t>(std::ceil(5.0 * 4.0 / 0.8431)) + 1);
}

TEST_CASE("dwt energy peaks at the scale matching the tone period") {
  DwtParams p;
  p.n_scales = 32;
  p.hop = 16;
  const AudioClip tone = synth_tone(500.0, 0.25, 8000, 0.5);
  const Spectrogram sp = dwt_spectrogram(tone, p, MagnitudeScale::Linear);
  CHECK(sp.data.rows() == 32);
  CHECK(sp.data.cols() == (2000 + 15) / 16);
  // cos(pi n / s) has period 2s samples, so 500 Hz at 8 kHz -> s = 8
  const double s = dwt_scales(p)[peak_row(sp.data)];
  CHECK(s > 8.0 / 1.3);
  CHECK(s < 8.0 * 1.3);
}

TEST_CASE("dwt magnitude scales relate as expected") {
  DwtParams p;
  p.n_scales = 8;
  p.hop = 32;
  const AudioClip tone = synth_tone(300.0, 0.1, 8000, 0.5);
  const auto lin = dwt_spectrogram(tone, p, MagnitudeScale::Linear);
  const auto lg = dwt_spectrogram(tone, p, MagnitudeScale::Logarithmic);
  const auto lr = dwt_spectrogram(tone, p, MagnitudeScale::LogarithmicReal);
  for (std::size_t i = 0; i < lin.data.size(); ++i) {
    CHECK(lin.data.data()[i] >= 0.0);
    CHECK(lg.data.data()[i] == doctest::Approx(std::log1p(lin.data.data()[i])).epsilon(1e-9));
    CHECK(std::abs(lr.data.data()[i]) == doctest::Approx(std::abs(lg.data.data()[i])).epsilon(1e-9));
  }
}

TEST_CASE("mfcc and crp shapes") {
  const AudioClip tone = synth_tone(440.0, 0.5, 8000, 0.5);
  const auto m = mfcc(tone);
  CHECK(m.data.rows() == 13);
  CHECK(m.data.cols() == (4000 - 400) / 200 + 1);
  CrpParams cp;
  cp.max_points = 64;
  const auto r = crp(tone, cp);
  CHECK(r.data.rows() == r.data.cols());
  for (std::size_t i = 0; i < r.data.rows(); ++i) CHECK(r.data(i, i) == 1.0);
  for (double v : r.data.data()) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("pool combines normalized parts into [0, 1]") {
  const AudioClip tone = synth_tone(440.0, 0.5, 8000, 0.5);
  const auto s = stft(tone, StftParams::from_ms(50.0, 8000));
  CrpParams cp;
  cp.max_points = 64;
  const auto p = pool(s, mfcc(tone), crp(tone, cp));
  CHECK(p.data.rows() == s.data.rows());
  CHECK(p.data.cols() == s.data.cols());
  for (double v : p.data.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("minmax and bilinear resize") {
  Matrix m(2, 2, std::vector<double>{1.0, 2.0, 3.0, 5.0});
  const Matrix n = minmax_normalize(m);
  CHECK(n(0, 0) == 0.0);
  CHECK(n(1, 1) == 1.0);
  CHECK(n(1, 0) == doctest::Approx(0.5));
  const Matrix flat = minmax_normalize(Matrix(3, 3, 7.0));
  for (double v : flat.data()) CHECK(v == 0.0);

  const Matrix up = resize_bilinear(Matrix(2, 2, 4.0), 5, 7);
  CHECK(up.rows() == 5);
  CHECK(up.cols() == 7);
  for (double v : up.data()) CHECK(v == doctest::Approx(4.0));
  const Matrix same = resize_bilinear(m, 2, 2);
  CHECK(same == m);
}

TEST_CASE("SPG1 round trip") {
  Spectrogram sp;
  sp.data = Matrix(3, 4, std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  sp.kind = SpectrumKind::Dwt;
  sp.scale = MagnitudeScale::LogarithmicReal;
  sp.rate = 8000;
  sp.params["n_scales"] = 32;
  const auto path = std::filesystem::temp_directory_path() / "specguard_unit.spg";
  write_spg(path, sp);
  const auto back = read_spg(path);
  CHECK(back.data == sp.data);
  CHECK(back.kind == sp.kind);
  CHECK(back.scale == sp.scale);
  CHECK(back.params.at("n_scales") == 32);
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".params");
}
