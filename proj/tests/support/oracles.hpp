#pragma once

// Independent reference computations shared by unit and acceptance tests.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "specguard/matrix.hpp"

namespace specguard::oracle {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

/// Singular values from Eigen's JacobiSVD, descending.
inline std::vector<double> eigen_singular_values(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
  const auto& s = svd.singularValues();
  return std::vector<double>(s.data(), s.data() + s.size());
}

/// Central finite-difference gradient of f at x.
inline std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                            std::span<const double> x, double h = 1e-5) {
  std::vector<double> p(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    const double up = f(p);
    p[i] = keep - h;
    const double down = f(p);
    p[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// |a - b| / max(|a|, |b|, floor), worst over the vector.
inline double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

/// ||a - b|| / max(||a||, ||b||, floor).
inline double relative_norm_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

/// Minimum within-cluster sum of squares over every 2-partition with both
/// parts non-empty.
inline double exhaustive_two_means(std::span<const std::vector<double>> pts) {
  const std::size_t n = pts.size();
  const std::size_t d = pts.front().size();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
    if (mask & 1u) continue;  // each partition once
    double total = 0.0;
    for (int side = 0; side < 2; ++side) {
      std::vector<double> mean(d, 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (((mask >> i) & 1u) != static_cast<unsigned>(side)) continue;
        for (std::size_t j = 0; j < d; ++j) mean[j] += pts[i][j];
        ++count;
      }
      for (auto& m : mean) m /= static_cast<double>(count);
      for (std::size_t i = 0; i < n; ++i) {
        if (((mask >> i) & 1u) != static_cast<unsigned>(side)) continue;
        for (std::size_t j = 0; j < d; ++j) total += (pts[i][j] - mean[j]) * (pts[i][j] - mean[j]);
      }
    }
    best = std::min(best, total);
  }
  return best;
}

/// Direct MLE LID estimate computed without the library: sort, take k
/// nearest, -k / sum ln(r_i / r_k).
inline double reference_lid(std::span<const double> q, std::span<const std::vector<double>> ref, std::size_t k) {
  std::vector<double> d;
  for (const auto& r : ref) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) s += (q[i] - r[i]) * (q[i] - r[i]);
    if (s > 0) d.push_back(std::sqrt(s));
  }
  std::sort(d.begin(), d.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::log(d[i] / d[k - 1]);
  return -static_cast<double>(k) / sum;
}

}  // namespace specguard::oracle
