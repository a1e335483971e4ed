#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>

#include "convlab/errors.hpp"

namespace convlab::binio {

/// Appends little-endian encodings to a byte string.
class Writer {
public:
  void bytes(std::string_view s) { buf_.append(s); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f32s(std::span<const float> v) {
    if constexpr (std::endian::native == std::endian::little) {
      buf_.append(reinterpret_cast<const char *>(v.data()), v.size() * sizeof(float));
    } else {
      for (float x : v) f32(x);
    }
  }
  /// u32 length prefix followed by the bytes.
  void str32(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  void str16(std::string_view s) {
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s);
  }
  const std::string &data() const { return buf_; }
  std::string take() { return std::move(buf_); }

private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

/// Bounds-checked little-endian decoder; every failure reports its offset.
class Reader {
public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint64_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

  std::string_view bytes(std::size_t n, const char *what) {
    need(n, what);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char *what) { return std::uint8_t(get(1, what)); }
  std::uint16_t u16(const char *what) { return std::uint16_t(get(2, what)); }
  std::uint32_t u32(const char *what) { return std::uint32_t(get(4, what)); }
  std::uint64_t u64(const char *what) { return get(8, what); }
  float f32(const char *what) { return std::bit_cast<float>(u32(what)); }
  void f32s(std::span<float> out, const char *what) {
    need(out.size() * 4, what);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), data_.data() + pos_, out.size() * 4);
      pos_ += out.size() * 4;
    } else {
      for (auto &x : out) x = f32(what);
    }
  }
  std::string str32(const char *what) { return std::string(bytes(u32(what), what)); }
  std::string str16(const char *what) { return std::string(bytes(u16(what), what)); }

  [[noreturn]] void fail(const std::string &why) const { throw FormatError(pos_, why); }

private:
  void need(std::size_t n, const char *what) const {
    if (n > remaining())
      throw FormatError(pos_, std::string("truncated ") + what + ": need " + std::to_string(n) +
                                  " bytes, " + std::to_string(remaining()) + " left");
  }
  std::uint64_t get(int n, const char *what) {
    need(std::size_t(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= std::uint64_t(static_cast<unsigned char>(data_[pos_ + std::size_t(i)])) << (8 * i);
    pos_ += std::size_t(n);
    return v;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string &path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw Error("failed writing '" + path + "'");
}

} // namespace convlab::binio
