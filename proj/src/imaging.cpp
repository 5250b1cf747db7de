#include "specguard/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <numeric>

#include <zlib.h>

#include "specguard/error.hpp"
#include "specguard/kernels.hpp"
#include "specguard/spectra.hpp"

namespace specguard {

namespace fs = std::filesystem;

std::string to_string(Palette palette) {
  switch (palette) {
    case Palette::BBG: return "BBG";
    case Palette::PG: return "PG";
    case Palette::WB: return "WB";
    case Palette::Gray: return "GRAY";
  }
  return "unknown";
}

Palette parse_palette(const std::string& text) {
  std::string upper = text;
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char ch) { return std::toupper(ch); });
  if (upper == "BBG") return Palette::BBG;
  if (upper == "PG") return Palette::PG;
  if (upper == "WB") return Palette::WB;
  if (upper == "GRAY") return Palette::Gray;
  fail(ErrorKind::Config, "unknown palette '" + text + "'");
}

namespace {

struct Anchor {
  double t;
  std::array<double, 3> rgb;
};

const std::vector<Anchor>& anchors(Palette palette) {
  static const std::vector<Anchor> bbg{{0.0, {0, 0, 0}}, {0.5, {0, 0, 1}}, {1.0, {0, 1, 0}}};
  static const std::vector<Anchor> pg{{0.0, {0.5, 0, 0.5}}, {1.0, {1, 0.84, 0}}};
  static const std::vector<Anchor> wb{{0.0, {1, 1, 1}}, {1.0, {0, 0, 0}}};
  static const std::vector<Anchor> gray{{0.0, {0, 0, 0}}, {1.0, {1, 1, 1}}};
  switch (palette) {
    case Palette::BBG: return bbg;
    case Palette::PG: return pg;
    case Palette::WB: return wb;
    case Palette::Gray: return gray;
  }
  return gray;
}

}  // namespace

std::array<double, 3> palette_color(Palette palette, double t) {
  const auto& table = anchors(palette);
  t = std::clamp(t, 0.0, 1.0);
  for (std::size_t i = 1; i < table.size(); ++i) {
    if (t <= table[i].t) {
      const double f = (t - table[i - 1].t) / (table[i].t - table[i - 1].t);
      std::array<double, 3> rgb;
      for (int c = 0; c < 3; ++c) rgb[c] = (1.0 - f) * table[i - 1].rgb[c] + f * table[i].rgb[c];
      return rgb;
    }
  }
  return table.back().rgb;
}

ColorSpectrogram colorize(const Matrix& image, Palette palette, double c) {
  require(c > 0.0 && c <= 1.0, ErrorKind::Domain, "color compensation scale must lie in (0, 1]");
  ColorSpectrogram out;
  out.palette = palette;
  out.scale_c = c;
  for (auto& ch : out.channels) ch = Matrix(image.rows(), image.cols());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const auto rgb = palette_color(palette, c * image.data()[i]);
    for (int ch = 0; ch < 3; ++ch) out.channels[ch].data()[i] = rgb[ch];
  }
  return out;
}

ColorSpectrogram color_compensate(const Matrix& sp, Palette palette, double c) {
  require(!sp.empty() && all_finite(sp.data()), ErrorKind::Domain, "spectrogram must be non-empty and finite");
  return colorize(minmax_normalize(sp), palette, c);
}

const std::array<std::array<double, 5>, 5>& laplacian5() {
  static const auto kernel = [] {
    std::array<std::array<double, 5>, 5> k{};
    for (auto& row : k) row.fill(-1.0 / 24.0);
    k[2][2] = 1.0;
    return k;
  }();
  return kernel;
}

Matrix convolve5(const Matrix& m, const std::array<std::array<double, 5>, 5>& kernel) {
  Matrix out(m.rows(), m.cols());
  const auto rows = static_cast<std::ptrdiff_t>(m.rows());
  const auto cols = static_cast<std::ptrdiff_t>(m.cols());
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t dy = -2; dy <= 2; ++dy) {
        const auto y = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(r + dy, 0, rows - 1));
        for (std::ptrdiff_t dx = -2; dx <= 2; ++dx) {
          const auto x = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(c + dx, 0, cols - 1));
          acc += kernel[dy + 2][dx + 2] * m(y, x);
        }
      }
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
    }
  }
  return out;
}

ColorSpectrogram highboost(const ColorSpectrogram& img, double c) {
  require(c >= 0.0, ErrorKind::Domain, "highboost scale must be non-negative");
  ColorSpectrogram out = img;
  if (c == 0.0) return out;
  for (int ch = 0; ch < 3; ++ch) {
    const Matrix high = convolve5(img.channels[ch], laplacian5());
    auto& dst = out.channels[ch].data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::clamp(dst[i] + c * high.data()[i], 0.0, 1.0);
  }
  return out;
}

namespace {

// Columns of `a` are stored as rows of `work` so rotations touch contiguous
// memory.
Svd jacobi_tall(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix work = a.transposed();  // n x m
  Matrix v = Matrix::identity(n);  // rows are columns of V

  const double tol = std::max(1e-15, static_cast<double>(m) * std::numeric_limits<double>::epsilon());
  const double frob2 = kernels::dot(work.data(), work.data());
  const double negligible = frob2 * 1e-30;
  constexpr int kMaxSweeps = 80;
  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto bp = work.row(p);
        auto bq = work.row(q);
        const double alpha = kernels::dot(bp, bp);
        const double beta = kernels::dot(bq, bq);
        const double gamma = kernels::dot(bp, bq);
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        if (alpha <= negligible || beta <= negligible) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = bp[i], y = bq[i];
          bp[i] = cs * x - sn * y;
          bq[i] = sn * x + cs * y;
        }
        auto vp = v.row(p);
        auto vq = v.row(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double x = vp[i], y = vq[i];
          vp[i] = cs * x - sn * y;
          vq[i] = sn * x + cs * y;
        }
      }
    }
  }
  if (!converged) fail(ErrorKind::Decomposition, "Jacobi SVD did not converge");

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(kernels::dot(work.row(j), work.row(j)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Svd out;
  out.u = Matrix(m, n);
  out.v = Matrix(n, n);
  out.singular_values.resize(n);
  const double smax = n > 0 ? sigma[order[0]] : 0.0;
  const double zero_tol = std::max(smax, 1.0) * 1e-300;
  std::vector<std::vector<double>> basis;  // accepted U columns
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.singular_values[k] = sigma[j];
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(j, i);
    std::vector<double> col(m, 0.0);
    if (sigma[j] > zero_tol) {
      for (std::size_t i = 0; i < m; ++i) col[i] = work(j, i) / sigma[j];
    }
    basis.push_back(std::move(col));
  }
  // Null singular values leave U columns undetermined; complete them to an
  // orthonormal set by Gram-Schmidt over the standard basis.
  std::size_t probe = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (out.singular_values[k] > zero_tol) continue;
    for (; probe < m; ++probe) {
      std::vector<double> cand(m, 0.0);
      cand[probe] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t other = 0; other < n; ++other) {
          if (other == k) continue;
          const auto& b = basis[other];
          const double proj = kernels::dot(cand, b);
          if (proj != 0.0) kernels::axpy(-proj, b, cand);
        }
      }
      const double norm = std::sqrt(kernels::dot(cand, cand));
      if (norm > 1e-8) {
        for (double& x : cand) x /= norm;
        basis[k] = std::move(cand);
        ++probe;
        break;
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < m; ++i) out.u(i, k) = basis[k][i];
  return out;
}

}  // namespace

Svd svd(const Matrix& a) {
  require(!a.empty(), ErrorKind::Shape, "SVD of an empty matrix");
  require(all_finite(a.data()), ErrorKind::Domain, "SVD input must be finite");
  if (a.rows() >= a.cols()) return jacobi_tall(a);
  Svd t = jacobi_tall(a.transposed());
  return Svd{std::move(t.v), std::move(t.singular_values), std::move(t.u)};
}

SvdReduction svd_reduce(const Matrix& sp, double n_prime) {
  require(n_prime > 1.0, ErrorKind::Domain, "n' must exceed 1");
  Svd d = svd(sp);
  const std::size_t full = d.singular_values.size();
  std::size_t kept = static_cast<std::size_t>(std::ceil(static_cast<double>(full) / n_prime));
  const double threshold = d.singular_values.front() / 255.0;
  std::size_t significant = 0;
  while (significant < full && d.singular_values[significant] >= threshold && d.singular_values[significant] > 0.0) {
    ++significant;
  }
  kept = std::max<std::size_t>(1, std::min(kept, significant));
  return SvdReduction{std::move(d.singular_values), std::move(d.u), std::move(d.v), kept};
}

Matrix svd_reconstruct(const SvdReduction& r) {
  require(r.kept_rank >= 1 && r.kept_rank <= r.singular_values.size(), ErrorKind::Domain,
          "kept rank must lie in [1, min(rows, cols)]");
  const std::size_t rows = r.hangers.rows();
  const std::size_t cols = r.aligners.rows();
  Matrix out(rows, cols);
  Matrix vt = r.aligners.transposed();  // r x cols, row k is V_k
  for (std::size_t k = 0; k < r.kept_rank; ++k) {
    const double g = r.singular_values[k];
    for (std::size_t i = 0; i < rows; ++i) {
      const double coeff = g * r.hangers(i, k);
      if (coeff != 0.0) kernels::axpy(coeff, vt.row(k), out.row(i));
    }
  }
  return out;
}

ColorSpectrogram svd_smooth(const ColorSpectrogram& img, double n_prime) {
  ColorSpectrogram out = img;
  for (int ch = 0; ch < 3; ++ch) {
    Matrix rec = svd_reconstruct(svd_reduce(img.channels[ch], n_prime));
    for (double& v : rec.data()) v = std::clamp(v, 0.0, 1.0);
    out.channels[ch] = std::move(rec);
  }
  return out;
}

Matrix luminance(const ColorSpectrogram& img) {
  Matrix out(img.rows(), img.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = 0.299 * img.channels[0].data()[i] + 0.587 * img.channels[1].data()[i] +
                    0.114 * img.channels[2].data()[i];
  }
  return out;
}

namespace {

void put_u32_be(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) buf.push_back(static_cast<unsigned char>((v >> shift) & 0xFFu));
}

void write_chunk(std::ofstream& out, const char* type, const std::vector<unsigned char>& data) {
  std::vector<unsigned char> buf;
  put_u32_be(buf, static_cast<std::uint32_t>(data.size()));
  buf.insert(buf.end(), type, type + 4);
  buf.insert(buf.end(), data.begin(), data.end());
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), buf.data() + 4, static_cast<uInt>(buf.size() - 4));
  put_u32_be(buf, static_cast<std::uint32_t>(crc));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

void write_png(const fs::path& path, const ColorSpectrogram& img) {
  require(img.rows() > 0 && img.cols() > 0, ErrorKind::Shape, "cannot write an empty image");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  static const unsigned char signature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  out.write(reinterpret_cast<const char*>(signature), 8);

  std::vector<unsigned char> header;
  put_u32_be(header, static_cast<std::uint32_t>(img.cols()));
  put_u32_be(header, static_cast<std::uint32_t>(img.rows()));
  header.insert(header.end(), {8, 2, 0, 0, 0});
  write_chunk(out, "IHDR", header);

  std::vector<unsigned char> raw;
  raw.reserve(img.rows() * (1 + 3 * img.cols()));
  for (std::size_t r = 0; r < img.rows(); ++r) {
    raw.push_back(0);
    for (std::size_t c = 0; c < img.cols(); ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::clamp(img.channels[ch](r, c), 0.0, 1.0);
        raw.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
    }
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> packed(packed_size);
  require(compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 6) == Z_OK,
          ErrorKind::Io, "PNG compression failed");
  packed.resize(packed_size);
  write_chunk(out, "IDAT", packed);
  write_chunk(out, "IEND", {});
}

}  // namespace specguard
