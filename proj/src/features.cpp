#include "specguard/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "specguard/binary_io.hpp"
#include "specguard/error.hpp"
#include "specguard/kernels.hpp"
#include "specguard/text.hpp"

namespace specguard {

namespace fs = std::filesystem;

void ZoningPlan::validate(std::size_t min_side) const {
  require(!zone_sizes.empty(), ErrorKind::Config, "zoning plan has no zones");
  require(zone_sizes.size() == strides.size(), ErrorKind::Config, "zone sizes and strides must be aligned");
  for (std::size_t i = 0; i < zone_sizes.size(); ++i) {
    require(zone_sizes[i] >= kGridSize && zone_sizes[i] <= min_side, ErrorKind::Config,
            "zone size " + std::to_string(zone_sizes[i]) + " outside [8, " + std::to_string(min_side) + "]");
    require(strides[i] >= 1 && strides[i] <= 5, ErrorKind::Config, "zone stride must lie in [1, 5]");
  }
}

std::vector<Patch> zone_and_slide(const Matrix& img, const ZoningPlan& plan) {
  require(img.rows() >= kGridSize && img.cols() >= kGridSize, ErrorKind::Size, "image smaller than the 8x8 grid");
  plan.validate(std::min(img.rows(), img.cols()));
  std::vector<Patch> patches;
  for (std::size_t zi = 0; zi < plan.zone_sizes.size(); ++zi) {
    const std::size_t z = plan.zone_sizes[zi];
    const std::size_t s = plan.strides[zi];
    for (std::size_t zr = 0; zr < img.rows(); zr += z) {
      const std::size_t zh = std::min(z, img.rows() - zr);
      if (zh < kGridSize) continue;
      for (std::size_t zc = 0; zc < img.cols(); zc += z) {
        const std::size_t zw = std::min(z, img.cols() - zc);
        if (zw < kGridSize) continue;
        for (std::size_t r = 0; r + kGridSize <= zh; r += s)
          for (std::size_t c = 0; c + kGridSize <= zw; c += s) patches.push_back(Patch{zr, zc, zr + r, zc + c});
      }
    }
  }
  return patches;
}

namespace {

const std::array<double, kGridSize * kGridSize>& gaussian_weights() {
  static const auto weights = [] {
    std::array<double, kGridSize * kGridSize> w{};
    constexpr double sigma = 3.3;
    for (std::size_t y = 0; y < kGridSize; ++y)
      for (std::size_t x = 0; x < kGridSize; ++x) {
        const double dy = static_cast<double>(y) - 3.5, dx = static_cast<double>(x) - 3.5;
        w[y * kGridSize + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      }
    return w;
  }();
  return weights;
}

}  // namespace

SurfDescriptor surf64(const Matrix& img, std::size_t row, std::size_t col) {
  require(row + kGridSize <= img.rows() && col + kGridSize <= img.cols(), ErrorKind::Size,
          "SURF grid outside the image");
  const auto& weights = gaussian_weights();
  const std::size_t last_r = img.rows() - 1, last_c = img.cols() - 1;
  SurfDescriptor d;
  d.row = row;
  d.col = col;
  for (std::size_t y = 0; y < kGridSize; ++y) {
    const std::size_t r = row + y;
    const std::size_t up = r == 0 ? 0 : r - 1, down = std::min(r + 1, last_r);
    for (std::size_t x = 0; x < kGridSize; ++x) {
      const std::size_t c = col + x;
      const std::size_t left = c == 0 ? 0 : c - 1, right = std::min(c + 1, last_c);
      const double w = weights[y * kGridSize + x];
      const double dx = w * (img(r, right) - img(r, left));
      const double dy = w * (img(down, c) - img(up, c));
      double* slot = &d.values[((y / 2) * 4 + x / 2) * 4];
      slot[0] += dx;
      slot[1] += dy;
      slot[2] += std::abs(dx);
      slot[3] += std::abs(dy);
    }
  }
  const double norm = std::sqrt(kernels::dot(d.values, d.values));
  if (norm > 1e-12) {
    for (double& v : d.values) v /= norm;
  } else {
    d.values.fill(0.0);
  }
  return d;
}

SurfDescriptor surf64(const Matrix& patch) {
  require(patch.rows() == kGridSize && patch.cols() == kGridSize, ErrorKind::Shape, "SURF patch must be 8x8");
  return surf64(patch, 0, 0);
}

std::vector<SurfDescriptor> extract_descriptors(const Matrix& img, const ZoningPlan& plan) {
  const auto patches = zone_and_slide(img, plan);
  std::vector<SurfDescriptor> out;
  out.reserve(patches.size());
  for (const auto& p : patches) {
    SurfDescriptor d = surf64(img, p.row, p.col);
    d.zone_row = p.zone_row;
    d.zone_col = p.zone_col;
    out.push_back(d);
  }
  return out;
}

namespace {

void check_vectors(std::span<const std::vector<double>> vectors) {
  require(!vectors.empty(), ErrorKind::Size, "no vectors to cluster");
  const std::size_t dim = vectors.front().size();
  require(dim > 0, ErrorKind::Shape, "vectors must be non-empty");
  for (const auto& v : vectors) {
    require(v.size() == dim, ErrorKind::Shape, "vectors differ in dimension");
    require(all_finite(v), ErrorKind::Domain, "vectors must be finite");
  }
}

std::size_t distinct_count(std::span<const std::vector<double>> vectors) {
  std::vector<const std::vector<double>*> ptrs;
  ptrs.reserve(vectors.size());
  for (const auto& v : vectors) ptrs.push_back(&v);
  std::sort(ptrs.begin(), ptrs.end(), [](auto* a, auto* b) { return *a < *b; });
  return static_cast<std::size_t>(
      std::unique(ptrs.begin(), ptrs.end(), [](auto* a, auto* b) { return *a == *b; }) - ptrs.begin());
}

/// Nearest centroid; ties keep `current` when it is among the nearest,
/// otherwise the lowest index wins.
std::size_t nearest(std::span<const double> v, const std::vector<std::vector<double>>& centroids,
                    std::size_t current, double* dist) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const double d = kernels::squared_distance(v, centroids[j]);
    if (d < best_d || (d == best_d && j == current)) {
      best_d = d;
      best = j;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

double assign(std::span<const std::vector<double>> vectors, const std::vector<std::vector<double>>& centroids,
              std::vector<std::size_t>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    double d = 0.0;
    labels[i] = nearest(vectors[i], centroids, labels[i], &d);
    total += d;
  }
  return total;
}

}  // namespace

double inertia(std::span<const std::vector<double>> vectors, const std::vector<std::vector<double>>& centroids) {
  double total = 0.0;
  for (const auto& v : vectors) {
    double d = 0.0;
    nearest(v, centroids, std::numeric_limits<std::size_t>::max(), &d);
    total += d;
  }
  return total;
}

std::vector<std::vector<double>> kmeanspp_seed(std::span<const std::vector<double>> vectors, std::size_t k,
                                               std::uint64_t seed) {
  check_vectors(vectors);
  require(k >= 2, ErrorKind::Domain, "k must be at least 2");
  require(vectors.size() >= k, ErrorKind::Size, "fewer vectors than k");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centroids;
  centroids.push_back(vectors[std::uniform_int_distribution<std::size_t>(0, vectors.size() - 1)(rng)]);
  std::vector<double> d2(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) d2[i] = kernels::squared_distance(vectors[i], centroids[0]);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centroids.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    require(total > 0.0, ErrorKind::Size, "fewer distinct vectors than k");
    const double target = unit(rng) * total;
    double acc = 0.0;
    std::size_t pick = vectors.size();
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      acc += d2[i];
      if (d2[i] > 0.0 && acc > target) {
        pick = i;
        break;
      }
    }
    if (pick == vectors.size()) {
      for (std::size_t i = vectors.size(); i-- > 0;)
        if (d2[i] > 0.0) {
          pick = i;
          break;
        }
    }
    centroids.push_back(vectors[pick]);
    for (std::size_t i = 0; i < vectors.size(); ++i)
      d2[i] = std::min(d2[i], kernels::squared_distance(vectors[i], centroids.back()));
  }
  return centroids;
}

Codebook lloyd(std::span<const std::vector<double>> vectors, std::vector<std::vector<double>> centroids,
               const KMeansOptions& opts) {
  check_vectors(vectors);
  require(centroids.size() >= 2, ErrorKind::Domain, "k must be at least 2");
  const std::size_t dim = vectors.front().size();
  const std::size_t k = centroids.size();
  std::vector<std::size_t> labels(vectors.size(), std::numeric_limits<std::size_t>::max());
  double current = assign(vectors, centroids, labels);
  Codebook book;
  book.inertia_history.push_back(current);
  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      kernels::axpy(1.0, vectors[i], next[labels[i]]);
      ++counts[labels[i]];
    }
    double shift = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) {
        next[j] = centroids[j];
        continue;
      }
      for (double& v : next[j]) v /= static_cast<double>(counts[j]);
      shift = std::max(shift, std::sqrt(kernels::squared_distance(next[j], centroids[j])));
    }
    std::vector<std::size_t> next_labels = labels;
    const double next_inertia = assign(vectors, next, next_labels);
    const bool stable = next_labels == labels;
    centroids = std::move(next);
    labels = std::move(next_labels);
    current = next_inertia;
    book.inertia_history.push_back(current);
    if (stable || shift < opts.tolerance) break;
  }
  book.centroids = std::move(centroids);
  book.inertia = current;
  return book;
}

Codebook kmeanspp_fit(std::span<const std::vector<double>> vectors, std::size_t k, std::uint64_t seed,
                      const KMeansOptions& opts) {
  check_vectors(vectors);
  require(k >= 2, ErrorKind::Domain, "k must be at least 2");
  require(vectors.size() >= k, ErrorKind::Size, "fewer vectors than k");
  require(distinct_count(vectors) >= k, ErrorKind::Size, "fewer distinct vectors than k");
  require(opts.n_init >= 1, ErrorKind::Config, "n_init must be at least 1");
  std::mt19937_64 seeder(seed);
  Codebook best;
  for (std::size_t run = 0; run < opts.n_init; ++run) {
    const std::uint64_t run_seed = run == 0 ? seed : seeder();
    Codebook book = lloyd(vectors, kmeanspp_seed(vectors, k, run_seed), opts);
    if (run == 0 || book.inertia < best.inertia) best = std::move(book);
  }
  return best;
}

std::vector<double> triangle_encode(std::span<const double> descriptor, const Codebook& book) {
  require(book.k() >= 2, ErrorKind::State, "codebook is not fitted");
  require(descriptor.size() == book.dim(), ErrorKind::Shape, "descriptor dimension does not match the codebook");
  std::vector<double> d(book.k());
  double mean = 0.0;
  for (std::size_t j = 0; j < book.k(); ++j) {
    d[j] = std::sqrt(kernels::squared_distance(descriptor, book.centroids[j]));
    mean += d[j];
  }
  mean /= static_cast<double>(book.k());
  for (double& v : d) v = std::max(0.0, mean - v);
  return d;
}

std::vector<double> encode(std::span<const std::vector<double>> descriptors, const Codebook& book) {
  require(book.k() >= 2, ErrorKind::State, "codebook is not fitted");
  std::vector<double> pooled(book.k(), 0.0);
  if (descriptors.empty()) return pooled;
  for (const auto& d : descriptors) kernels::axpy(1.0, triangle_encode(d, book), pooled);
  for (double& v : pooled) v /= static_cast<double>(descriptors.size());
  return pooled;
}

void write_codebook(const fs::path& path, const Codebook& book) {
  require(book.k() >= 2, ErrorKind::State, "codebook is not fitted");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  binio::write_magic(out, "KMB1");
  binio::write_u32(out, static_cast<std::uint32_t>(book.k()));
  binio::write_u32(out, static_cast<std::uint32_t>(book.dim()));
  for (const auto& c : book.centroids)
    for (double v : c) binio::write_f64(out, v);
}

Codebook read_codebook(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  binio::expect_magic(in, "KMB1");
  const std::uint32_t k = binio::read_u32(in);
  const std::uint32_t dim = binio::read_u32(in);
  require(k >= 2 && dim > 0, ErrorKind::Format, "KMB1 header is invalid");
  Codebook book;
  book.centroids.assign(k, std::vector<double>(dim));
  for (auto& c : book.centroids)
    for (double& v : c) v = binio::read_f64(in);
  return book;
}

void write_encoded_csv(const fs::path& path, std::span<const EncodedRow> rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  const std::size_t k = rows.empty() ? 0 : rows.front().features.size();
  out << "source_id,label";
  for (std::size_t j = 1; j <= k; ++j) out << ",f" << j;
  out << '\n';
  for (const auto& row : rows) {
    require(row.features.size() == k, ErrorKind::Shape, "encoded rows differ in length");
    out << row.source_id << ',' << row.label;
    for (double v : row.features) out << ',' << format_number(v);
    out << '\n';
  }
}

}  // namespace specguard
