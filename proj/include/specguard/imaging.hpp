#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "specguard/matrix.hpp"

namespace specguard {

enum class Palette { BBG, PG, WB, Gray };

std::string to_string(Palette palette);
Palette parse_palette(const std::string& text);

/// Three same-shaped channels in [0, 1].
struct ColorSpectrogram {
  std::array<Matrix, 3> channels;
  Palette palette = Palette::Gray;
  double scale_c = 1.0;

  std::size_t rows() const { return channels[0].rows(); }
  std::size_t cols() const { return channels[0].cols(); }
};

/// Piecewise-linear colormap value at t in [0, 1].
std::array<double, 3> palette_color(Palette palette, double t);

/// Min-max normalizes `sp`, scales intensities by c in (0, 1], then maps
/// through the palette. Gray replicates the intensity into all channels.
ColorSpectrogram color_compensate(const Matrix& sp, Palette palette, double c);

/// Same as color_compensate but skips normalization; `image` must already be
/// in [0, 1].
ColorSpectrogram colorize(const Matrix& image, Palette palette, double c);

/// Normalized 5x5 Laplacian: 24 at the center, -1 elsewhere, divided by 24.
const std::array<std::array<double, 5>, 5>& laplacian5();

/// 5x5 convolution with replicate padding.
Matrix convolve5(const Matrix& m, const std::array<std::array<double, 5>, 5>& kernel);

/// Per channel img + c * (L * img), clipped to [0, 1].
ColorSpectrogram highboost(const ColorSpectrogram& img, double c);

/// Thin SVD A = U diag(G) V^T with G non-increasing. U is rows x r, V is
/// cols x r, r = min(rows, cols).
struct Svd {
  Matrix u;
  std::vector<double> singular_values;
  Matrix v;
};

/// One-sided Jacobi SVD. Throws Decomposition if sweeps do not converge.
Svd svd(const Matrix& a);

struct SvdReduction {
  std::vector<double> singular_values;
  Matrix hangers;   ///< U
  Matrix aligners;  ///< V
  std::size_t kept_rank = 0;
};

/// kept_rank = ceil(min(rows, cols) / n_prime), further pruned to singular
/// values >= max(G) / 255; never below 1.
SvdReduction svd_reduce(const Matrix& sp, double n_prime);

/// Sum of the first kept_rank rank-one terms.
Matrix svd_reconstruct(const SvdReduction& r);

/// svd_reduce + svd_reconstruct on every channel, clipped to [0, 1].
ColorSpectrogram svd_smooth(const ColorSpectrogram& img, double n_prime);

/// 0.299 R + 0.587 G + 0.114 B.
Matrix luminance(const ColorSpectrogram& img);

/// 8-bit RGB PNG.
void write_png(const std::filesystem::path& path, const ColorSpectrogram& img);

}  // namespace specguard
