// include/accentvae/binary_io.hpp

// Copyright 2026 The accentvae Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Little-endian primitives shared by the mel cache, checkpoint and
// embedding-store formats.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "accentvae/common.hpp"

namespace accentvae::io {

inline void WriteU32(std::ostream &os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char *>(b), 4);
}

inline void WriteU64(std::ostream &os, std::uint64_t v) {
  WriteU32(os, static_cast<std::uint32_t>(v & 0xffffffffu));
  WriteU32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void WriteF32(std::ostream &os, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  WriteU32(os, u);
}

inline void WriteString(std::ostream &os, const std::string &s) {
  WriteU32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

/// Reader that turns any short read into a DataError mentioning `what`.
class Reader {
 public:
  Reader(std::istream &is, std::string what) : is_(is), what_(std::move(what)) {}

  void Bytes(char *dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n)
      throw DataError(what_ + ": file is truncated or corrupt");
  }
  std::uint32_t U32() {
    unsigned char b[4];
    Bytes(reinterpret_cast<char *>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::uint64_t U64() {
    const std::uint64_t lo = U32();
    return lo | (static_cast<std::uint64_t>(U32()) << 32);
  }
  float F32() {
    const std::uint32_t u = U32();
    float f;
    std::memcpy(&f, &u, 4);
    return f;
  }
  std::string String(std::size_t max_len = 1u << 26) {
    const std::uint32_t n = U32();
    if (n > max_len) throw DataError(what_ + ": implausible string length (corrupt file)");
    std::string s(n, '\0');
    if (n > 0) Bytes(s.data(), n);
    return s;
  }
  bool AtEnd() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream &is_;
  std::string what_;
};

inline std::ifstream OpenIn(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  return is;
}

inline std::ofstream OpenOut(const std::filesystem::path &path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

}  // namespace accentvae::io
