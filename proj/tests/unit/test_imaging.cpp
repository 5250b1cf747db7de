#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "specguard/error.hpp"
#include "specguard/imaging.hpp"

using namespace specguard;

TEST_CASE("svd singular values agree with Eigen and reconstruct the input") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 30);
  for (int trial = 0; trial < 40; ++trial) {
    const Matrix a = oracle::random_matrix(dim(rng), dim(rng), rng);
    const Svd d = svd(a);
    const auto ref = oracle::eigen_singular_values(a);
    REQUIRE(d.singular_values.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(d.singular_values[i] == doctest::Approx(ref[i]).epsilon(1e-10));
    CHECK(std::is_sorted(d.singular_values.rbegin(), d.singular_values.rend()));

    Matrix us(d.u.rows(), d.u.cols());
    for (std::size_t r = 0; r < us.rows(); ++r)
      for (std::size_t c = 0; c < us.cols(); ++c) us(r, c) = d.u(r, c) * d.singular_values[c];
    CHECK(frobenius_norm(us * d.v.transposed() - a) < 1e-10 * std::max(1.0, frobenius_norm(a)));
  }
}

TEST_CASE("svd factors are orthonormal") {
  std::mt19937_64 rng(12);
  const Matrix a = oracle::random_matrix(20, 9, rng);
  const Svd d = svd(a);
  const Matrix utu = d.u.transposed() * d.u;
  const Matrix vtv = d.v.transposed() * d.v;
  CHECK(frobenius_norm(utu - Matrix::identity(9)) < 1e-10);
  CHECK(frobenius_norm(vtv - Matrix::identity(9)) < 1e-10);
}

TEST_CASE("svd handles rank-deficient and zero matrices") {
  Matrix z(6, 4, 0.0);
  const Svd dz = svd(z);
  for (double g : dz.singular_values) CHECK(g == 0.0);

  Matrix r1(5, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) r1(i, j) = (i + 1.0) * (j + 2.0);
  const Svd d = svd(r1);
  CHECK(d.singular_values[0] > 1.0);
  for (std::size_t i = 1; i < 5; ++i) CHECK(d.singular_values[i] < 1e-9 * d.singular_values[0]);
}

TEST_CASE("svd_reduce keeps ceil(min/n') components and the error equals the dropped energy") {
  std::mt19937_64 rng(13);
  const Matrix a = oracle::random_matrix(12, 10, rng, 0.0, 1.0);
  const auto r = svd_reduce(a, 2.0);
  CHECK(r.kept_rank <= 5);
  CHECK(r.kept_rank >= 1);
  for (std::size_t i = 0; i < r.kept_rank; ++i) CHECK(r.singular_values[i] >= r.singular_values[0] / 255.0);
  double dropped = 0.0;
  for (std::size_t i = r.kept_rank; i < r.singular_values.size(); ++i) dropped += r.singular_values[i] * r.singular_values[i];
  CHECK(frobenius_norm(svd_reconstruct(r) - a) == doctest::Approx(std::sqrt(dropped)).epsilon(1e-9));
  CHECK_THROWS_AS(svd_reduce(a, 1.0), Error);
  CHECK(svd_reduce(a, 100.0).kept_rank == 1);
}

TEST_CASE("palette endpoints and gray identity") {
  for (double t : {0.0, 0.25, 0.5, 1.0}) {
    const auto g = palette_color(Palette::Gray, t);
    for (double v : g) CHECK(v == doctest::Approx(t));
  }
  for (Palette p : {Palette::BBG, Palette::PG, Palette::WB, Palette::Gray}) {
    CHECK(parse_palette(to_string(p)) == p);
    for (double t = 0.0; t <= 1.0; t += 0.05) {
      for (double v : palette_color(p, t)) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
  CHECK_THROWS_AS(parse_palette("rainbow"), Error);
}

TEST_CASE("color_compensate normalizes before mapping and c scales intensity") {
  Matrix m(2, 2, std::vector<double>{-5.0, 0.0, 5.0, 15.0});
  const auto full = color_compensate(m, Palette::Gray, 1.0);
  CHECK(full.channels[0](0, 0) == doctest::Approx(0.0));
  CHECK(full.channels[1](1, 1) == doctest::Approx(1.0));
  CHECK(full.channels[2](0, 1) == doctest::Approx(0.25));
  const auto half = color_compensate(m, Palette::Gray, 0.5);
  CHECK(half.channels[0](1, 1) == doctest::Approx(0.5));
}

TEST_CASE("laplacian sums to zero so highboost leaves flat images unchanged") {
  double s = 0.0;
  for (const auto& row : laplacian5())
    for (double v : row) s += v;
  CHECK(s == doctest::Approx(0.0));
  CHECK(laplacian5()[2][2] == doctest::Approx(1.0));

  ColorSpectrogram flat;
  for (auto& ch : flat.channels) ch = Matrix(9, 7, 0.4);
  const auto out = highboost(flat, 1.0);
  for (const auto& ch : out.channels)
    for (double v : ch.data()) CHECK(v == doctest::Approx(0.4));
}

TEST_CASE("highboost sharpens an isolated peak and stays in range") {
  ColorSpectrogram img;
  for (auto& ch : img.channels) {
    ch = Matrix(9, 9, 0.2);
    ch(4, 4) = 0.6;
  }
  const auto out = highboost(img, 1.0);
  // center: 0.6 + (24*0.6 - 24*0.2)/24 = 1.0
  CHECK(out.channels[0](4, 4) == doctest::Approx(1.0));
  // neighbour: 0.2 + (24*0.2 - 23*0.2 - 0.6)/24
  CHECK(out.channels[0](4, 5) == doctest::Approx(0.2 - 0.4 / 24.0));
  for (const auto& ch : out.channels)
    for (double v : ch.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
}

TEST_CASE("convolve5 with replicate padding preserves constants") {
  std::array<std::array<double, 5>, 5> box{};
  for (auto& row : box) row.fill(1.0 / 25.0);
  const Matrix out = convolve5(Matrix(3, 4, 2.5), box);
  for (double v : out.data()) CHECK(v == doctest::Approx(2.5));
}

TEST_CASE("luminance uses BT.601 weights") {
  ColorSpectrogram img;
  img.channels[0] = Matrix(1, 1, 1.0);
  img.channels[1] = Matrix(1, 1, 0.0);
  img.channels[2] = Matrix(1, 1, 0.0);
  CHECK(luminance(img)(0, 0) == doctest::Approx(0.299));
  img.channels[1](0, 0) = 1.0;
  img.channels[2](0, 0) = 1.0;
  CHECK(luminance(img)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("svd_smooth output stays in [0, 1]") {
  std::mt19937_64 rng(14);
  ColorSpectrogram img;
  for (auto& ch : img.channels) ch = oracle::random_matrix(16, 16, rng, 0.0, 1.0);
  const auto out = svd_smooth(img, 2.0);
  for (const auto& ch : out.channels)
    for (double v : ch.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
}

TEST_CASE("write_png produces a PNG signature") {
  ColorSpectrogram img;
  for (auto& ch : img.channels) ch = Matrix(4, 6, 0.5);
  const auto path = std::filesystem::temp_directory_path() / "specguard_unit.png";
  write_png(path, img);
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8];
  in.read(reinterpret_cast<char*>(sig), 8);
  const unsigned char expect[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  CHECK(std::equal(sig, sig + 8, expect));
  std::filesystem::remove(path);
}
