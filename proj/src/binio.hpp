#pragma once

// Little-endian primitive I/O shared by the file formats.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "lfqv/errors.hpp"

namespace lfqv::binio {

template <typename U>
void put_le(std::ostream& os, U v) {
  static_assert(std::is_unsigned_v<U>);
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, sizeof(U));
}

template <typename U>
U get_le(std::istream& is, const char* field) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) {
    throw FormatError(std::string("truncated file while reading ") + field);
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& is, const char* field) {
  return std::bit_cast<double>(get_le<std::uint64_t>(is, field));
}
inline void put_f32(std::ostream& os, float v) { put_le(os, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(std::istream& is, const char* field) {
  return std::bit_cast<float>(get_le<std::uint32_t>(is, field));
}

inline void put_str(std::ostream& os, const std::string& s) {
  put_le(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_str(std::istream& is, const char* field, std::uint32_t max_len = 1u << 20) {
  const auto n = get_le<std::uint32_t>(is, field);
  if (n > max_len) throw FormatError(std::string("implausible length for ") + field);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw FormatError(std::string("truncated ") + field);
  return s;
}

}  // namespace lfqv::binio
