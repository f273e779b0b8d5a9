#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Little-endian primitives for the dataset and checkpoint formats.
namespace policygnn::binary {

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void write_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

inline std::uint32_t read_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw FormatError("unexpected end of file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32(std::ostream& out, std::span<const float> values) {
  for (float f : values) write_u32(out, std::bit_cast<std::uint32_t>(f));
}

inline std::vector<float> read_f32(std::istream& in, std::size_t count) {
  std::vector<float> out(count);
  for (auto& f : out) f = std::bit_cast<float>(read_u32(in));
  return out;
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4]{};
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected '") + magic + "'");
  }
}

}  // namespace policygnn::binary
