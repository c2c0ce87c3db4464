#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "primesh/error.hpp"

// Little-endian primitives for the binary archive and checkpoint formats.
// The byte layouts are defined as little-endian; on such hosts values are
// copied as-is.
static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace primesh::io {

template <class T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <class T>
T read_pod(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw FormatError(std::string("truncated ") + what);
  return value;
}

template <class T>
void write_array(std::ostream& out, std::span<const T> values) {
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

template <class T>
void read_array(std::istream& in, std::span<T> values, const char* what) {
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!in) throw FormatError(std::string("truncated ") + what);
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_pod(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, const char* what, std::uint32_t limit = 1U << 20) {
  const auto n = read_pod<std::uint32_t>(in, what);
  if (n > limit) throw FormatError(std::string("oversized ") + what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw FormatError(std::string("truncated ") + what);
  return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[5], const char* what) {
  char got[4] = {};
  in.read(got, 4);
  if (!in || std::memcmp(got, magic, 4) != 0) throw FormatError(std::string(what) + ": bad magic");
}

}  // namespace primesh::io
