#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "specguard/audio_io.hpp"
#include "specguard/matrix.hpp"

namespace specguard {

enum class SpectrumKind : std::uint32_t { Stft = 0, Dwt = 1, Mfcc = 2, Crp = 3, Pool = 4 };
enum class MagnitudeScale : std::uint32_t { Linear = 0, Logarithmic = 1, LogarithmicReal = 2, None = 3 };

std::string to_string(SpectrumKind kind);
std::string to_string(MagnitudeScale scale);
MagnitudeScale parse_magnitude_scale(const std::string& text);

/// Real time-frequency (or time-scale) matrix: rows are frequency/scale bins,
/// columns are time steps.
struct Spectrogram {
  Matrix data;
  SpectrumKind kind = SpectrumKind::Stft;
  MagnitudeScale scale = MagnitudeScale::None;
  int rate = 0;
  std::map<std::string, double> params;
};

struct StftParams {
  std::size_t window_len = 400;
  std::size_t hop = 200;

  /// Frame length in milliseconds with 50% overlap.
  static StftParams from_ms(double frame_ms, int rate);
};

struct DwtParams {
  std::size_t n_scales = 256;
  double morlet_factor = 0.8431;
  /// Scales run from 1 sample to 2^octaves samples, log-spaced.
  double octaves = 6.0;
  /// Samples averaged into each output column (1 = every sample).
  std::size_t hop = 1;
};

struct MfccParams {
  std::optional<StftParams> framing;  ///< defaults to 50 ms / 50% at the clip rate
  std::size_t n_mels = 40;
  std::size_t n_coeffs = 13;
};

struct CrpParams {
  std::size_t dim = 3;
  std::size_t delay = 8;
  /// Recurrence threshold; defaults to 10% of the embedded-space diameter.
  std::optional<double> eps;
  std::size_t max_points = 512;
};

inline constexpr double kLogFloor = 1e-10;

/// Symmetric Hanning window of length n.
std::vector<double> hanning(std::size_t n);

/// log|S| with |S| floored at 1e-10. rows = window/2 + 1,
/// cols = floor((N - window) / hop) + 1.
Spectrogram stft(const AudioClip& clip, const StftParams& params);

/// Power spectrum |S|^2 on the same framing (no log).
Matrix stft_power(const AudioClip& clip, const StftParams& params);

/// psi(t) = exp(-(f^2 t^2)/2) cos(pi t).
double morlet(double t, double factor);

/// Geometric scale grid in samples.
std::vector<double> dwt_scales(const DwtParams& params);

/// Discretized wavelet for one scale: s^{-1/2} psi(n / s), n in [-L, L],
/// L = ceil(5 s / factor) (envelope below e^{-12.5}).
std::vector<double> scaled_wavelet(double scale, double factor);

/// Row s holds |W_s(n)|^2, W_s the correlation of the clip with the scale-s
/// wavelet, averaged over consecutive blocks of `hop` samples; then the
/// magnitude scale is applied (logarithmic_real takes the sign of the block's
/// summed coefficients).
Spectrogram dwt_spectrogram(const AudioClip& clip, const DwtParams& params, MagnitudeScale scale);

Spectrogram mfcc(const AudioClip& clip, const MfccParams& params = {});

Spectrogram crp(const AudioClip& clip, const CrpParams& params = {});

/// Sum of min-max normalized STFT, MFCC and CRP resized to the STFT shape,
/// clipped to [0, 1].
Spectrogram pool(const Spectrogram& stft, const Spectrogram& mfcc, const Spectrogram& crp);

Matrix resize_bilinear(const Matrix& m, std::size_t rows, std::size_t cols);

/// Maps to [0, 1]; a constant matrix maps to zeros.
Matrix minmax_normalize(const Matrix& m);

/// SPG1: "SPG1", u32 rows, u32 cols, u32 code (kind << 8 | scale), then
/// row-major f32. Params go to a `<path>.params` text sidecar.
void write_spg(const std::filesystem::path& path, const Spectrogram& sp);
Spectrogram read_spg(const std::filesystem::path& path);

}  // namespace specguard
