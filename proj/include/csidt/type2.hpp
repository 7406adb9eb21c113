// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csidt/precoder.hpp"

namespace csidt {

enum class Scheme : std::uint8_t { Type2 = 0, Neural = 1 };

/// Fixed-length bit string, packed most significant bit first.
class CodewordBits {
 public:
  CodewordBits() = default;
  explicit CodewordBits(Scheme scheme) : scheme_(scheme) {}

  Scheme scheme() const { return scheme_; }
  std::size_t size() const { return length_; }
  bool bit(std::size_t i) const;
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  /// Append the low `width` bits of `value`, MSB first.
  void push(std::uint64_t value, int width);

  bool operator==(const CodewordBits&) const = default;

 private:
  Scheme scheme_ = Scheme::Type2;
  std::size_t length_ = 0;
  std::vector<std::uint8_t> bytes_;
};

/// Sequential MSB-first reader over a CodewordBits.
class BitReader {
 public:
  explicit BitReader(const CodewordBits& bits) : bits_(bits) {}
  std::uint64_t read(int width);
  std::size_t remaining() const { return bits_.size() - pos_; }

 private:
  const CodewordBits& bits_;
  std::size_t pos_ = 0;
};

struct Type2Config {
  int n_beams = 4;          // L
  int oversampling = 4;     // O
  int amplitude_bits = 3;
  int phase_bits = 3;
  bool wideband = false;    // multi-subband reports share one beam selection

  void validate(int n_tx) const;
};

/// ceil(log2(n)) for n >= 1.
int ceil_log2(std::uint64_t n);
std::uint64_t binomial(int n, int k);

/// N_t x (N_t * O) oversampled DFT beams, column m has entries
/// exp(j 2 pi k m / (N_t O)) / sqrt(N_t).
CMatrix beam_grid(int n_tx, int oversampling);

/// ceil(log2 O) + ceil(log2 C(N_t, L)) + N_s (ceil(log2 L) + (L-1)(amp + phase bits)).
int overhead_bits(const Type2Config& cfg, int n_tx, int n_streams);

/// Bitstream per precoder, MSB first:
///   rotation index                      ceil(log2 O)
///   beam combination rank               ceil(log2 C(N_t, L))
///   for each stream:
///     strongest beam (position in set)  ceil(log2 L)
///     L-1 amplitude levels              amplitude_bits each
///     L-1 phase levels                  phase_bits each
/// Beams inside the selected set are ordered by increasing grid index; the
/// non-strongest beams are written in that order.
CodewordBits encode_type2(const Precoder& w, const Type2Config& cfg);
Precoder decode_type2(const CodewordBits& bits, const Type2Config& cfg, int n_tx, int n_streams);

/// Multi-subband report. With cfg.wideband the rotation and beam combination
/// are chosen once from the energy summed over all subbands and sent once.
CodewordBits encode_type2_report(std::span<const Precoder> subbands, const Type2Config& cfg);
std::vector<Precoder> decode_type2_report(const CodewordBits& bits, const Type2Config& cfg,
                                          int n_tx, int n_streams, int n_subbands);
int report_overhead_bits(const Type2Config& cfg, int n_tx, int n_streams, int n_subbands);

}  // namespace csidt
