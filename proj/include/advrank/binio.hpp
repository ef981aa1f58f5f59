#pragma once
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "advrank/errors.hpp"

namespace advrank::binio {

// Little-endian primitives for the project's binary file formats. Explicit
// byte order so files are portable across hosts.

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u8(std::ostream& out, std::uint8_t v) { write_bytes(out, &v, 1); }

inline void write_u16(std::ostream& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                              static_cast<unsigned char>((v >> 8) & 0xFF)};
  write_bytes(out, b, 2);
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  write_bytes(out, b, 4);
}

inline void write_i64(std::ostream& out, std::int64_t v) {
  const std::uint64_t u = static_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xFF);
  write_bytes(out, b, 8);
}

inline void write_f32(std::ostream& out, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  write_u32(out, u);
}

inline void read_bytes(std::istream& in, void* p, std::size_t n, const char* what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw TruncatedError(std::string("truncated while reading ") + what);
}

inline std::uint8_t read_u8(std::istream& in, const char* what) {
  std::uint8_t v;
  read_bytes(in, &v, 1, what);
  return v;
}

inline std::uint16_t read_u16(std::istream& in, const char* what) {
  unsigned char b[2];
  read_bytes(in, b, 2, what);
  return static_cast<std::uint16_t>(b[0] | (static_cast<std::uint16_t>(b[1]) << 8));
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  read_bytes(in, b, 4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::int64_t read_i64(std::istream& in, const char* what) {
  unsigned char b[8];
  read_bytes(in, b, 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return static_cast<std::int64_t>(v);
}

inline float read_f32(std::istream& in, const char* what) {
  const std::uint32_t u = read_u32(in, what);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace advrank::binio
