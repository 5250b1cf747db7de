#include "specguard/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "specguard/binary_io.hpp"
#include "specguard/error.hpp"
#include "specguard/kernels.hpp"

namespace specguard {

namespace fs = std::filesystem;
using std::numbers::pi;

std::string to_string(SpectrumKind kind) {
  switch (kind) {
    case SpectrumKind::Stft: return "stft";
    case SpectrumKind::Dwt: return "dwt";
    case SpectrumKind::Mfcc: return "mfcc";
    case SpectrumKind::Crp: return "crp";
    case SpectrumKind::Pool: return "pool";
  }
  return "unknown";
}

std::string to_string(MagnitudeScale scale) {
  switch (scale) {
    case MagnitudeScale::Linear: return "linear";
    case MagnitudeScale::Logarithmic: return "logarithmic";
    case MagnitudeScale::LogarithmicReal: return "logarithmic_real";
    case MagnitudeScale::None: return "none";
  }
  return "unknown";
}

MagnitudeScale parse_magnitude_scale(const std::string& text) {
  if (text == "linear") return MagnitudeScale::Linear;
  if (text == "logarithmic" || text == "log") return MagnitudeScale::Logarithmic;
  if (text == "logarithmic_real" || text == "log_real") return MagnitudeScale::LogarithmicReal;
  if (text == "none") return MagnitudeScale::None;
  fail(ErrorKind::Config, "unknown magnitude scale '" + text + "'");
}

StftParams StftParams::from_ms(double frame_ms, int rate) {
  const auto window = static_cast<std::size_t>(std::llround(frame_ms * rate / 1000.0));
  return {std::max<std::size_t>(window, 2), std::max<std::size_t>(window / 2, 1)};
}

std::vector<double> hanning(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(i) / (n - 1));
  return w;
}

namespace {

void check_framing(const AudioClip& clip, const StftParams& p) {
  validate(clip);
  require(p.window_len > 0 && p.hop > 0 && p.hop <= p.window_len, ErrorKind::Domain,
          "STFT needs 0 < hop <= window");
  require(clip.samples.size() >= p.window_len, ErrorKind::Size, "clip is shorter than one STFT window");
}

// Rows 0..window/2 of |DFT(windowed frame)|^2 per frame (column).
Matrix power_frames(const AudioClip& clip, const StftParams& p) {
  check_framing(clip, p);
  const std::size_t w = p.window_len;
  const std::size_t bins = w / 2 + 1;
  const std::size_t frames = (clip.samples.size() - w) / p.hop + 1;
  const auto window = hanning(w);

  Matrix cos_table(bins, w), sin_table(bins, w);
  for (std::size_t k = 0; k < bins; ++k) {
    for (std::size_t n = 0; n < w; ++n) {
      const double phase = 2.0 * pi * static_cast<double>((k * n) % w) / static_cast<double>(w);
      cos_table(k, n) = std::cos(phase);
      sin_table(k, n) = std::sin(phase);
    }
  }

  Matrix power(bins, frames);
  std::vector<double> frame(w);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < w; ++n) frame[n] = clip.samples[t * p.hop + n] * window[n];
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = kernels::dot(frame, cos_table.row(k));
      const double im = kernels::dot(frame, sin_table.row(k));
      power(k, t) = re * re + im * im;
    }
  }
  return power;
}

}  // namespace

Matrix stft_power(const AudioClip& clip, const StftParams& params) { return power_frames(clip, params); }

Spectrogram stft(const AudioClip& clip, const StftParams& params) {
  Matrix power = power_frames(clip, params);
  for (double& v : power.data()) v = std::log(std::max(std::sqrt(v), kLogFloor));
  Spectrogram sp;
  sp.data = std::move(power);
  sp.kind = SpectrumKind::Stft;
  sp.scale = MagnitudeScale::Logarithmic;
  sp.rate = clip.sample_rate;
  sp.params = {{"window_len", static_cast<double>(params.window_len)}, {"hop", static_cast<double>(params.hop)}};
  return sp;
}

double morlet(double t, double factor) { return std::exp(-(factor * factor * t * t) / 2.0) * std::cos(pi * t); }

std::vector<double> dwt_scales(const DwtParams& params) {
  require(params.n_scales >= 1, ErrorKind::Domain, "DWT needs at least one scale");
  std::vector<double> scales(params.n_scales, 1.0);
  if (params.n_scales == 1) return scales;
  for (std::size_t j = 0; j < params.n_scales; ++j) {
    scales[j] = std::exp2(params.octaves * static_cast<double>(j) / static_cast<double>(params.n_scales - 1));
  }
  return scales;
}

std::vector<double> scaled_wavelet(double scale, double factor) {
  require(scale > 0.0 && factor > 0.0, ErrorKind::Domain, "wavelet scale and factor must be positive");
  const auto half = static_cast<std::size_t>(std::ceil(5.0 * scale / factor));
  std::vector<double> taps(2 * half + 1);
  const double norm = 1.0 / std::sqrt(scale);
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const double n = static_cast<double>(i) - static_cast<double>(half);
    taps[i] = norm * morlet(n / scale, factor);
  }
  return taps;
}

Spectrogram dwt_spectrogram(const AudioClip& clip, const DwtParams& params, MagnitudeScale scale) {
  validate(clip);
  require(params.morlet_factor > 0.0, ErrorKind::Domain, "Morlet factor must be positive");
  require(params.hop >= 1, ErrorKind::Domain, "DWT hop must be at least 1");
  const auto scales = dwt_scales(params);
  std::vector<std::vector<double>> wavelets;
  wavelets.reserve(scales.size());
  std::size_t max_half = 0;
  for (double s : scales) {
    wavelets.push_back(scaled_wavelet(s, params.morlet_factor));
    max_half = std::max(max_half, wavelets.back().size() / 2);
  }

  const std::size_t n = clip.samples.size();
  std::vector<double> padded(n + 2 * max_half, 0.0);
  std::copy(clip.samples.begin(), clip.samples.end(), padded.begin() + static_cast<std::ptrdiff_t>(max_half));

  const std::size_t cols = (n + params.hop - 1) / params.hop;
  Matrix out(scales.size(), cols);
  for (std::size_t r = 0; r < scales.size(); ++r) {
    const auto& taps = wavelets[r];
    const std::size_t half = taps.size() / 2;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t begin = c * params.hop;
      const std::size_t end = std::min(n, begin + params.hop);
      double power = 0.0, signed_sum = 0.0;
      for (std::size_t t = begin; t < end; ++t) {
        const std::size_t center = t + max_half;
        const double w = kernels::dot(std::span<const double>(padded).subspan(center - half, taps.size()), taps);
        power += w * w;
        signed_sum += w;
      }
      power /= static_cast<double>(end - begin);
      switch (scale) {
        case MagnitudeScale::Linear:
        case MagnitudeScale::None:
          out(r, c) = power;
          break;
        case MagnitudeScale::Logarithmic:
          out(r, c) = std::log1p(power);
          break;
        case MagnitudeScale::LogarithmicReal:
          out(r, c) = std::copysign(std::log1p(power), signed_sum);
          break;
      }
    }
  }

  Spectrogram sp;
  sp.data = std::move(out);
  sp.kind = SpectrumKind::Dwt;
  sp.scale = scale;
  sp.rate = clip.sample_rate;
  sp.params = {{"n_scales", static_cast<double>(params.n_scales)},
               {"morlet_factor", params.morlet_factor},
               {"octaves", params.octaves},
               {"hop", static_cast<double>(params.hop)}};
  return sp;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix mel_filterbank(std::size_t n_mels, std::size_t bins, std::size_t window, int rate) {
  Matrix bank(n_mels, bins);
  const double mel_max = hz_to_mel(rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * rate / static_cast<double>(window);
      double weight = 0.0;
      if (f > lo && f <= mid) weight = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) weight = (hi - f) / (hi - mid);
      bank(m, k) = weight;
    }
  }
  return bank;
}

}  // namespace

Spectrogram mfcc(const AudioClip& clip, const MfccParams& params) {
  validate(clip);
  require(params.n_mels >= 1 && params.n_coeffs >= 1 && params.n_coeffs <= params.n_mels, ErrorKind::Domain,
          "MFCC needs 1 <= n_coeffs <= n_mels");
  const StftParams framing = params.framing.value_or(StftParams::from_ms(50.0, clip.sample_rate));
  const Matrix power = power_frames(clip, framing);
  const Matrix bank = mel_filterbank(params.n_mels, power.rows(), framing.window_len, clip.sample_rate);

  const std::size_t frames = power.cols();
  Matrix out(params.n_coeffs, frames);
  std::vector<double> column(power.rows());
  std::vector<double> log_mel(params.n_mels);
  const double m = static_cast<double>(params.n_mels);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < power.rows(); ++k) column[k] = power(k, t);
    for (std::size_t b = 0; b < params.n_mels; ++b) {
      log_mel[b] = std::log(std::max(kernels::dot(bank.row(b), column), kLogFloor));
    }
    for (std::size_t c = 0; c < params.n_coeffs; ++c) {
      double acc = 0.0;
      for (std::size_t b = 0; b < params.n_mels; ++b) {
        acc += log_mel[b] * std::cos(pi * static_cast<double>(c) * (static_cast<double>(b) + 0.5) / m);
      }
      out(c, t) = acc * (c == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m));
    }
  }
  Spectrogram sp;
  sp.data = std::move(out);
  sp.kind = SpectrumKind::Mfcc;
  sp.scale = MagnitudeScale::None;
  sp.rate = clip.sample_rate;
  sp.params = {{"window_len", static_cast<double>(framing.window_len)},
               {"hop", static_cast<double>(framing.hop)},
               {"n_mels", static_cast<double>(params.n_mels)},
               {"n_coeffs", static_cast<double>(params.n_coeffs)}};
  return sp;
}

Spectrogram crp(const AudioClip& clip, const CrpParams& params) {
  validate(clip);
  require(params.dim >= 1 && params.delay >= 1 && params.max_points >= 1, ErrorKind::Domain,
          "CRP needs positive dim, delay and max_points");
  const std::size_t n = clip.samples.size();
  const std::size_t span = (params.dim - 1) * params.delay;
  require(n > params.dim * params.delay, ErrorKind::Size, "clip too short for the CRP embedding");

  const std::size_t factor = std::max<std::size_t>(1, (n + params.max_points + span - 1) / (params.max_points + span));
  std::vector<double> signal;
  for (std::size_t i = 0; i < n; i += factor) signal.push_back(clip.samples[i]);
  require(signal.size() > span, ErrorKind::Size, "downsampled clip too short for the CRP embedding");
  const std::size_t points = std::min(signal.size() - span, params.max_points);

  Matrix embedded(points, params.dim);
  for (std::size_t i = 0; i < points; ++i)
    for (std::size_t d = 0; d < params.dim; ++d) embedded(i, d) = signal[i + d * params.delay];

  Matrix dist(points, points);
  double diameter = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    for (std::size_t j = i + 1; j < points; ++j) {
      const double d = std::sqrt(kernels::squared_distance(embedded.row(i), embedded.row(j)));
      dist(i, j) = dist(j, i) = d;
      diameter = std::max(diameter, d);
    }
  }
  const double eps = params.eps.value_or(0.1 * diameter);
  require(eps >= 0.0, ErrorKind::Domain, "CRP threshold must be non-negative");

  Matrix out(points, points);
  for (std::size_t i = 0; i < points; ++i)
    for (std::size_t j = 0; j < points; ++j) out(i, j) = dist(i, j) <= eps ? 1.0 : 0.0;

  Spectrogram sp;
  sp.data = std::move(out);
  sp.kind = SpectrumKind::Crp;
  sp.scale = MagnitudeScale::None;
  sp.rate = clip.sample_rate;
  sp.params = {{"dim", static_cast<double>(params.dim)},
               {"delay", static_cast<double>(params.delay)},
               {"eps", eps},
               {"downsample", static_cast<double>(factor)}};
  return sp;
}

Matrix minmax_normalize(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  if (m.empty()) return out;
  const auto [lo, hi] = std::minmax_element(m.data().begin(), m.data().end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = (m.data()[i] - *lo) / range;
  return out;
}

Matrix resize_bilinear(const Matrix& m, std::size_t rows, std::size_t cols) {
  require(!m.empty() && rows > 0 && cols > 0, ErrorKind::Shape, "cannot resize an empty matrix");
  if (m.rows() == rows && m.cols() == cols) return m;
  Matrix out(rows, cols);
  const double ry = rows > 1 ? static_cast<double>(m.rows() - 1) / static_cast<double>(rows - 1) : 0.0;
  const double rx = cols > 1 ? static_cast<double>(m.cols() - 1) / static_cast<double>(cols - 1) : 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double y = static_cast<double>(r) * ry;
    const auto y0 = std::min(static_cast<std::size_t>(y), m.rows() - 1);
    const std::size_t y1 = std::min(y0 + 1, m.rows() - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = static_cast<double>(c) * rx;
      const auto x0 = std::min(static_cast<std::size_t>(x), m.cols() - 1);
      const std::size_t x1 = std::min(x0 + 1, m.cols() - 1);
      const double fx = x - static_cast<double>(x0);
      const double top = (1.0 - fx) * m(y0, x0) + fx * m(y0, x1);
      const double bottom = (1.0 - fx) * m(y1, x0) + fx * m(y1, x1);
      out(r, c) = (1.0 - fy) * top + fy * bottom;
    }
  }
  return out;
}

Spectrogram pool(const Spectrogram& stft_sp, const Spectrogram& mfcc_sp, const Spectrogram& crp_sp) {
  const std::size_t rows = stft_sp.data.rows();
  const std::size_t cols = stft_sp.data.cols();
  require(rows > 0 && cols > 0, ErrorKind::Shape, "POOL needs a non-empty STFT operand");
  const Matrix a = minmax_normalize(stft_sp.data);
  const Matrix b = resize_bilinear(minmax_normalize(mfcc_sp.data), rows, cols);
  const Matrix c = resize_bilinear(minmax_normalize(crp_sp.data), rows, cols);
  require(a.size() == b.size() && b.size() == c.size(), ErrorKind::Shape, "POOL operand shapes disagree");

  Spectrogram sp;
  sp.data = Matrix(rows, cols);
  for (std::size_t i = 0; i < a.size(); ++i) {
    sp.data.data()[i] = std::clamp(a.data()[i] + b.data()[i] + c.data()[i], 0.0, 1.0);
  }
  sp.kind = SpectrumKind::Pool;
  sp.scale = MagnitudeScale::None;
  sp.rate = stft_sp.rate;
  return sp;
}

void write_spg(const fs::path& path, const Spectrogram& sp) {
  require(!sp.data.empty(), ErrorKind::Shape, "cannot write an empty spectrogram");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  binio::write_magic(out, "SPG1");
  binio::write_u32(out, static_cast<std::uint32_t>(sp.data.rows()));
  binio::write_u32(out, static_cast<std::uint32_t>(sp.data.cols()));
  binio::write_u32(out, (static_cast<std::uint32_t>(sp.kind) << 8) | static_cast<std::uint32_t>(sp.scale));
  for (double v : sp.data.data()) binio::write_f32(out, static_cast<float>(v));

  std::ofstream side(path.string() + ".params");
  require(static_cast<bool>(side), ErrorKind::Io, "cannot write params sidecar for " + path.string());
  side << "kind=" << to_string(sp.kind) << "\nscale=" << to_string(sp.scale) << "\nrate=" << sp.rate << '\n';
  side.precision(17);
  for (const auto& [key, value] : sp.params) side << key << '=' << value << '\n';
}

Spectrogram read_spg(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  binio::expect_magic(in, "SPG1");
  const std::uint32_t rows = binio::read_u32(in);
  const std::uint32_t cols = binio::read_u32(in);
  const std::uint32_t code = binio::read_u32(in);
  require(rows > 0 && cols > 0, ErrorKind::Format, path.string() + ": empty spectrogram");
  require((code >> 8) <= 4 && (code & 0xFFu) <= 3, ErrorKind::Format, path.string() + ": bad kind/scale code");
  Spectrogram sp;
  sp.kind = static_cast<SpectrumKind>(code >> 8);
  sp.scale = static_cast<MagnitudeScale>(code & 0xFFu);
  sp.data = Matrix(rows, cols);
  for (double& v : sp.data.data()) v = binio::read_f32(in);

  std::ifstream side(path.string() + ".params");
  std::string line;
  while (side && std::getline(side, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "kind" || key == "scale") continue;
    try {
      if (key == "rate") sp.rate = std::stoi(value);
      else sp.params[key] = std::stod(value);
    } catch (const std::exception&) {
      fail(ErrorKind::Format, path.string() + ".params: bad value for " + key);
    }
  }
  return sp;
}

}  // namespace specguard
