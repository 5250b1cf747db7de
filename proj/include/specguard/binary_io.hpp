#pragma once

// Little-endian binary helpers for the SPG1/NNC1/KMB1/SVM1 artifact formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "specguard/error.hpp"

namespace specguard::binio {

static_assert(std::endian::native == std::endian::little, "artifact formats assume a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_pod(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  in.read(bytes.data(), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    fail(ErrorKind::Format, "unexpected end of file");
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

inline void write_u32(std::ostream& out, std::uint32_t v) { write_pod(out, v); }
inline void write_i32(std::ostream& out, std::int32_t v) { write_pod(out, v); }
inline void write_f32(std::ostream& out, float v) { write_pod(out, v); }
inline void write_f64(std::ostream& out, double v) { write_pod(out, v); }
inline std::uint32_t read_u32(std::istream& in) { return read_pod<std::uint32_t>(in); }
inline std::int32_t read_i32(std::istream& in) { return read_pod<std::int32_t>(in); }
inline float read_f32(std::istream& in) { return read_pod<float>(in); }
inline double read_f64(std::istream& in) { return read_pod<double>(in); }

inline void write_magic(std::ostream& out, std::string_view magic) { out.write(magic.data(), magic.size()); }

inline void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), got.size());
  if (got != magic) fail(ErrorKind::Format, "bad magic, expected " + std::string(magic));
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), s.size());
}

inline std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (in.gcount() != static_cast<std::streamsize>(n)) fail(ErrorKind::Format, "truncated string");
  return s;
}

}  // namespace specguard::binio
