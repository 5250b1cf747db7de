#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace specguard {

/// Sampled waveform in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;
  std::optional<int> label;
  std::string source_id;
};

/// Throws Domain when the clip is empty, has a non-positive rate or
/// non-finite samples.
void validate(const AudioClip& clip);

/// Reads RIFF/PCM 16-bit mono or stereo. Stereo is averaged to mono.
AudioClip load_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1) and rounded.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

/// amplitude * sin(2 pi freq n / rate) for n in [0, round(duration * rate)).
AudioClip synth_tone(double freq, double duration, int rate, double amplitude);

/// Linear-interpolation resampling by `scale`: output length round(N / scale),
/// so a tone at f plays back at f * scale on the original rate.
AudioClip pitch_shift(const AudioClip& clip, double scale);

/// Scale set used for dataset augmentation.
inline constexpr double kPaperPitchScales[] = {0.5, 0.75, 0.9, 1.1, 1.25, 1.5, 1.75};

struct ManifestEntry {
  std::filesystem::path path;
  int class_id = 0;
  std::optional<int> fold;
  std::string source_id;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;
};

/// Checks that every class id indexes class_names and that folds are either
/// absent everywhere or present everywhere.
void validate(const DatasetManifest& manifest);

/// Source id used to keep augmented variants of one recording in one fold.
std::string source_id_for(const std::filesystem::path& path);

/// CSV `path,class_id,fold` (header row; fold may be empty) plus a class-name
/// sidecar holding a JSON array of strings. Relative paths resolve against the
/// CSV's directory.
DatasetManifest read_manifest(const std::filesystem::path& csv_path,
                              const std::filesystem::path& class_names_path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& csv_path,
                    const std::filesystem::path& class_names_path);

/// Adds one pitch-shifted variant per scale for every entry. Variant WAVs are
/// written to `out_dir`; labels, folds and source ids are carried over.
DatasetManifest augment_dataset(const DatasetManifest& manifest, std::span<const double> scales,
                                const std::filesystem::path& out_dir);

/// In-memory form of augment_dataset.
std::vector<AudioClip> augment_clips(std::span<const AudioClip> clips, std::span<const double> scales);

}  // namespace specguard
