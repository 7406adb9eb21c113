// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "csidt/error.hpp"

namespace csidt {

/// Little-endian byte sink.
class ByteWriter {
 public:
  void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char tmp[sizeof(T)];
    std::memcpy(tmp, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>(tmp[sizeof(T) - 1 - i]));
    } else {
      buf_.insert(buf_.end(), reinterpret_cast<char*>(tmp), reinterpret_cast<char*>(tmp) + sizeof(T));
    }
  }

  void u8(std::uint8_t v) { put(v); }
  void u16(std::uint16_t v) { put(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void i32(std::int32_t v) { put(v); }
  void f64(double v) { put(v); }
  void c128(std::complex<double> v) {
    f64(v.real());
    f64(v.imag());
  }
  /// u32 length followed by the bytes.
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }

  const std::vector<char>& data() const { return buf_; }
  std::string_view view() const { return {buf_.data(), buf_.size()}; }

 private:
  std::vector<char> buf_;
};

/// Little-endian byte source; every read past the end raises TruncatedError.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string context)
      : data_(data), context_(std::move(context)) {}

  std::string_view raw(std::size_t n) {
    need(n);
    const auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename T>
  T get() {
    need(sizeof(T));
    unsigned char tmp[sizeof(T)];
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T); ++i) tmp[i] = static_cast<unsigned char>(data_[pos_ + sizeof(T) - 1 - i]);
    } else {
      std::memcpy(tmp, data_.data() + pos_, sizeof(T));
    }
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, tmp, sizeof(T));
    return v;
  }

  std::uint8_t u8() { return get<std::uint8_t>(); }
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  std::int32_t i32() { return get<std::int32_t>(); }
  double f64() { return get<double>(); }
  std::complex<double> c128() {
    const double re = f64();
    return {re, f64()};
  }
  std::string str() {
    const auto n = u32();
    return std::string(raw(n));
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw TruncatedError(context_ + ": truncated at byte " + std::to_string(pos_) + " (need " +
                           std::to_string(n) + " more)");
    }
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  std::string context_;
};

}  // namespace csidt
