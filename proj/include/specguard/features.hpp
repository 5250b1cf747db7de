#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "specguard/matrix.hpp"

namespace specguard {

inline constexpr std::size_t kGridSize = 8;
inline constexpr std::size_t kSurfDim = 64;

struct ZoningPlan {
  std::vector<std::size_t> zone_sizes;
  std::vector<std::size_t> strides;

  /// Zones in [8, min_side], strides in [1, 5], lists aligned.
  void validate(std::size_t min_side) const;
};

struct Patch {
  std::size_t zone_row = 0;
  std::size_t zone_col = 0;
  std::size_t row = 0;  ///< top-left of the 8x8 grid in image coordinates
  std::size_t col = 0;
};

/// Zones of each size tile the image from the top-left (truncated at the
/// borders); an 8x8 grid slides through every zone with the paired stride.
/// Truncated zones smaller than the grid contribute nothing.
std::vector<Patch> zone_and_slide(const Matrix& img, const ZoningPlan& plan);

struct SurfDescriptor {
  std::array<double, kSurfDim> values{};
  std::size_t zone_row = 0;
  std::size_t zone_col = 0;
  std::size_t row = 0;
  std::size_t col = 0;
};

/// Upright dense SURF on the 8x8 grid at (row, col). Haar responses are
/// central differences that read neighbours outside the grid from the image
/// (clamped at the image border).
SurfDescriptor surf64(const Matrix& img, std::size_t row, std::size_t col);

/// Same on an isolated 8x8 patch (context clamped to the patch).
SurfDescriptor surf64(const Matrix& patch);

std::vector<SurfDescriptor> extract_descriptors(const Matrix& img, const ZoningPlan& plan);

struct Codebook {
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;
  /// Objective after each Lloyd iteration; non-increasing.
  std::vector<double> inertia_history;

  std::size_t k() const noexcept { return centroids.size(); }
  std::size_t dim() const noexcept { return centroids.empty() ? 0 : centroids.front().size(); }
};

struct KMeansOptions {
  std::size_t max_iters = 300;
  double tolerance = 1e-6;
  /// Independent seedings; the lowest final inertia wins.
  std::size_t n_init = 1;
};

/// D^2 seeding of k centroids.
std::vector<std::vector<double>> kmeanspp_seed(std::span<const std::vector<double>> vectors, std::size_t k,
                                               std::uint64_t seed);

/// Lloyd iterations from the given centroids.
Codebook lloyd(std::span<const std::vector<double>> vectors, std::vector<std::vector<double>> centroids,
               const KMeansOptions& opts = {});

/// K-means++ seeding then Lloyd. Throws Size if there are fewer distinct
/// vectors than k.
Codebook kmeanspp_fit(std::span<const std::vector<double>> vectors, std::size_t k, std::uint64_t seed,
                      const KMeansOptions& opts = {});

double inertia(std::span<const std::vector<double>> vectors, const std::vector<std::vector<double>>& centroids);

/// Triangle map max(0, mean(d) - d_j) for one descriptor.
std::vector<double> triangle_encode(std::span<const double> descriptor, const Codebook& book);

/// Mean-pooled triangle encoding of all descriptors of one image. An empty
/// descriptor set encodes to zeros.
std::vector<double> encode(std::span<const std::vector<double>> descriptors, const Codebook& book);

/// KMB1: "KMB1", u32 k, u32 dim, centroids as f64.
void write_codebook(const std::filesystem::path& path, const Codebook& book);
Codebook read_codebook(const std::filesystem::path& path);

struct EncodedRow {
  std::string source_id;
  int label = 0;
  std::vector<double> features;
};

/// CSV with header source_id,label,f1..fk.
void write_encoded_csv(const std::filesystem::path& path, std::span<const EncodedRow> rows);

}  // namespace specguard
