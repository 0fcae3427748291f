#pragma once

// Little-endian primitive I/O for the binary containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "nasality/error.hpp"

namespace nasality::detail {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw IoError("unexpected end of binary stream");
  return value;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, std::uint32_t max_len = 1u << 24) {
  const auto len = get<std::uint32_t>(is);
  if (len > max_len) throw IoError("string length exceeds limit");
  std::string s(len, '\0');
  if (len > 0 && !is.read(s.data(), len)) throw IoError("unexpected end of binary stream");
  return s;
}

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char buf[4];
  if (!is.read(buf, 4) || std::memcmp(buf, magic, 4) != 0)
    throw IoError(std::string("bad magic, expected ") + magic);
}

}  // namespace nasality::detail
