// Copyright 2026 The biscc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian byte buffers and the framed file layout shared by the
// dataset and checkpoint formats: 4-byte magic, u16 version, payload,
// trailing CRC32 of the payload.

#ifndef BISCC_BINARY_IO_HPP_
#define BISCC_BINARY_IO_HPP_

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

namespace biscc {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ByteWriter {
 public:
  void u16(std::uint16_t v) { put(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f32(float v) { put(v); }
  void f64(double v) { put(v); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<std::uint8_t>& buffer() const { return buf_; }

 private:
  template <typename T>
  void put(T v) {
    bytes(&v, sizeof(T));
  }
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}

  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  float f32() { return get<float>(); }
  double f64() { return get<double>(); }
  void bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw FormatError("unexpected end of data");
  }
  template <typename T>
  T get() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const std::uint8_t* p, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      ::crc32(crc, p, static_cast<uInt>(n)));
}

inline std::vector<std::uint8_t> frame(const char (&magic)[4],
                                       std::uint16_t version,
                                       const std::vector<std::uint8_t>& payload) {
  ByteWriter w;
  w.bytes(magic, 4);
  w.u16(version);
  w.bytes(payload.data(), payload.size());
  w.u32(crc32_of(payload.data(), payload.size()));
  return w.buffer();
}

/// Validates magic, version and checksum; returns a reader over the payload.
inline ByteReader unframe(const std::vector<std::uint8_t>& file,
                          const char (&magic)[4], std::uint16_t version,
                          const std::string& what) {
  if (file.size() < 4 + 2 + 4) throw FormatError(what + " file truncated");
  if (std::memcmp(file.data(), magic, 4) != 0) {
    throw FormatError(what + " file has wrong magic");
  }
  std::uint16_t v;
  std::memcpy(&v, file.data() + 4, 2);
  if (v != version) {
    throw FormatError(what + " file version " + std::to_string(v) +
                      " unsupported (expected " + std::to_string(version) +
                      ")");
  }
  const std::size_t payload_len = file.size() - 10;
  std::uint32_t stored;
  std::memcpy(&stored, file.data() + 6 + payload_len, 4);
  if (crc32_of(file.data() + 6, payload_len) != stored) {
    throw FormatError(what + " file checksum mismatch");
  }
  return ByteReader(std::vector<std::uint8_t>(
      file.begin() + 6, file.begin() + 6 + static_cast<long>(payload_len)));
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& p,
                       const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

}  // namespace biscc

#endif  // BISCC_BINARY_IO_HPP_
