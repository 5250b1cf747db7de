#include "specguard/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "specguard/binary_io.hpp"
#include "specguard/error.hpp"

namespace specguard {

namespace fs = std::filesystem;

void validate(const AudioClip& clip) {
  require(!clip.samples.empty(), ErrorKind::Domain, "audio clip has no samples");
  require(clip.sample_rate > 0, ErrorKind::Domain, "sample rate must be positive");
  for (double s : clip.samples) require(std::isfinite(s), ErrorKind::Domain, "audio sample is not finite");
}

AudioClip load_wav(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());

  char riff[4];
  in.read(riff, 4);
  require(in.gcount() == 4 && std::string_view(riff, 4) == "RIFF", ErrorKind::Format,
          path.string() + ": missing RIFF header");
  binio::read_u32(in);
  char wave[4];
  in.read(wave, 4);
  require(in.gcount() == 4 && std::string_view(wave, 4) == "WAVE", ErrorKind::Format,
          path.string() + ": missing WAVE tag");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<char> payload;
  bool have_data = false;

  while (!have_data) {
    char id[4];
    in.read(id, 4);
    if (in.gcount() != 4) break;
    const std::uint32_t size = binio::read_u32(in);
    const std::string_view tag(id, 4);
    if (tag == "fmt ") {
      require(size >= 16, ErrorKind::Format, path.string() + ": short fmt chunk");
      format = binio::read_pod<std::uint16_t>(in);
      channels = binio::read_pod<std::uint16_t>(in);
      rate = binio::read_u32(in);
      binio::read_u32(in);                    // byte rate
      binio::read_pod<std::uint16_t>(in);     // block align
      bits = binio::read_pod<std::uint16_t>(in);
      if (format == 0xFFFE && size >= 26) {
        binio::read_pod<std::uint16_t>(in);   // extension size
        binio::read_pod<std::uint16_t>(in);   // valid bits
        binio::read_u32(in);                  // channel mask
        format = binio::read_pod<std::uint16_t>(in);
        in.ignore(size - 26);
      } else {
        in.ignore(size - 16);
      }
      have_fmt = true;
    } else if (tag == "data") {
      payload.resize(size);
      in.read(payload.data(), size);
      require(in.gcount() == static_cast<std::streamsize>(size), ErrorKind::Format,
              path.string() + ": truncated data chunk");
      have_data = true;
    } else {
      in.ignore(size + (size & 1u));
    }
  }
  require(have_fmt, ErrorKind::Format, path.string() + ": missing fmt chunk");
  require(have_data, ErrorKind::Format, path.string() + ": missing data chunk");
  require(format == 1 && bits == 16, ErrorKind::Unsupported,
          path.string() + ": only 16-bit PCM is supported");
  require(channels == 1 || channels == 2, ErrorKind::Unsupported,
          path.string() + ": only mono or stereo is supported");
  require(rate > 0, ErrorKind::Format, path.string() + ": zero sample rate");

  const std::size_t frame_bytes = 2u * channels;
  const std::size_t frames = payload.size() / frame_bytes;
  require(frames > 0, ErrorKind::Format, path.string() + ": no audio frames");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.source_id = source_id_for(path);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      std::int16_t v;
      std::memcpy(&v, payload.data() + f * frame_bytes + 2 * c, 2);
      acc += static_cast<double>(v) / 32768.0;
    }
    clip.samples[f] = acc / channels;
  }
  return clip;
}

void write_wav(const fs::path& path, const AudioClip& clip) {
  validate(clip);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.write("RIFF", 4);
  binio::write_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  binio::write_u32(out, 16);
  binio::write_pod<std::uint16_t>(out, 1);
  binio::write_pod<std::uint16_t>(out, 1);
  binio::write_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  binio::write_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  binio::write_pod<std::uint16_t>(out, 2);
  binio::write_pod<std::uint16_t>(out, 16);
  out.write("data", 4);
  binio::write_u32(out, data_bytes);
  for (double s : clip.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    binio::write_pod<std::int16_t>(out, static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0)));
  }
}

AudioClip synth_tone(double freq, double duration, int rate, double amplitude) {
  require(rate > 0, ErrorKind::Domain, "sample rate must be positive");
  require(freq > 0.0 && freq < rate / 2.0, ErrorKind::Domain, "tone frequency must lie in (0, Nyquist)");
  require(duration > 0.0, ErrorKind::Domain, "duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration * rate));
  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    clip.samples[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate);
  }
  return clip;
}

AudioClip pitch_shift(const AudioClip& clip, double scale) {
  require(scale > 0.0 && std::isfinite(scale), ErrorKind::Domain, "pitch scale must be positive");
  validate(clip);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.label = clip.label;
  out.source_id = clip.source_id;
  if (scale == 1.0) {
    out.samples = clip.samples;
    return out;
  }
  const std::size_t n = clip.samples.size();
  const auto length = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n / scale)));
  out.samples.resize(length);
  for (std::size_t m = 0; m < length; ++m) {
    const double pos = static_cast<double>(m) * scale;
    const auto i0 = static_cast<std::size_t>(pos);
    if (i0 + 1 >= n) {
      out.samples[m] = clip.samples[n - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(i0);
    out.samples[m] = (1.0 - frac) * clip.samples[i0] + frac * clip.samples[i0 + 1];
  }
  return out;
}

void validate(const DatasetManifest& manifest) {
  const bool any_fold = std::any_of(manifest.entries.begin(), manifest.entries.end(),
                                    [](const ManifestEntry& e) { return e.fold.has_value(); });
  for (const auto& e : manifest.entries) {
    require(e.class_id >= 0 && static_cast<std::size_t>(e.class_id) < manifest.class_names.size(),
            ErrorKind::Format, "class id " + std::to_string(e.class_id) + " has no class name");
    require(!any_fold || e.fold.has_value(), ErrorKind::Format, "fold assignment must cover all entries");
  }
}

std::string source_id_for(const fs::path& path) {
  std::string stem = path.stem().string();
  if (const auto pos = stem.find("__ps"); pos != std::string::npos) stem.resize(pos);
  return stem;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

}  // namespace

DatasetManifest read_manifest(const fs::path& csv_path, const fs::path& class_names_path) {
  DatasetManifest manifest;
  {
    std::ifstream in(class_names_path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + class_names_path.string());
    nlohmann::json names;
    try {
      in >> names;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Format, class_names_path.string() + ": " + e.what());
    }
    require(names.is_array(), ErrorKind::Format, class_names_path.string() + ": expected a list of names");
    for (const auto& n : names) manifest.class_names.push_back(n.get<std::string>());
  }

  std::ifstream in(csv_path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + csv_path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Format, csv_path.string() + ": empty manifest");
  const auto header = split_csv_line(line);
  require(header.size() >= 2 && header[0] == "path" && header[1] == "class_id", ErrorKind::Format,
          csv_path.string() + ": header must be path,class_id,fold");
  const fs::path base = csv_path.parent_path();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    require(fields.size() >= 2, ErrorKind::Format,
            csv_path.string() + ":" + std::to_string(line_no) + ": expected at least 2 fields");
    ManifestEntry entry;
    entry.path = fs::path(fields[0]);
    if (entry.path.is_relative()) entry.path = base / entry.path;
    try {
      entry.class_id = std::stoi(fields[1]);
      if (fields.size() >= 3 && !fields[2].empty()) entry.fold = std::stoi(fields[2]);
    } catch (const std::exception&) {
      fail(ErrorKind::Format, csv_path.string() + ":" + std::to_string(line_no) + ": bad integer field");
    }
    entry.source_id = source_id_for(entry.path);
    manifest.entries.push_back(std::move(entry));
  }
  validate(manifest);
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& csv_path, const fs::path& class_names_path) {
  validate(manifest);
  if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
  std::ofstream out(csv_path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + csv_path.string());
  out << "path,class_id,fold\n";
  for (const auto& e : manifest.entries) {
    fs::path p = e.path;
    if (csv_path.has_parent_path()) {
      const auto rel = fs::relative(p, csv_path.parent_path());
      if (!rel.empty()) p = rel;
    }
    out << p.generic_string() << ',' << e.class_id << ',';
    if (e.fold) out << *e.fold;
    out << '\n';
  }
  std::ofstream names(class_names_path);
  require(static_cast<bool>(names), ErrorKind::Io, "cannot write " + class_names_path.string());
  names << nlohmann::json(manifest.class_names).dump() << '\n';
}

namespace {

std::string scale_tag(double scale) {
  std::ostringstream os;
  os << scale;
  return os.str();
}

}  // namespace

DatasetManifest augment_dataset(const DatasetManifest& manifest, std::span<const double> scales,
                                const fs::path& out_dir) {
  require(!scales.empty(), ErrorKind::Domain, "augmentation needs at least one scale");
  for (double s : scales) require(s > 0.0, ErrorKind::Domain, "pitch scale must be positive");
  DatasetManifest out;
  out.class_names = manifest.class_names;
  for (const auto& entry : manifest.entries) {
    out.entries.push_back(entry);
    const AudioClip clip = load_wav(entry.path);
    for (double scale : scales) {
      ManifestEntry variant = entry;
      variant.path = out_dir / (entry.source_id + "__ps" + scale_tag(scale) + ".wav");
      write_wav(variant.path, pitch_shift(clip, scale));
      out.entries.push_back(std::move(variant));
    }
  }
  return out;
}

std::vector<AudioClip> augment_clips(std::span<const AudioClip> clips, std::span<const double> scales) {
  require(!scales.empty(), ErrorKind::Domain, "augmentation needs at least one scale");
  std::vector<AudioClip> out;
  out.reserve(clips.size() * (scales.size() + 1));
  for (const auto& clip : clips) {
    out.push_back(clip);
    for (double scale : scales) out.push_back(pitch_shift(clip, scale));
  }
  return out;
}

}  // namespace specguard
