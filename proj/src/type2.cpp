// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/type2.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>

namespace csidt {

bool CodewordBits::bit(std::size_t i) const {
  if (i >= length_) throw InvalidArgument("CodewordBits: bit index out of range");
  return (bytes_[i / 8] >> (7 - i % 8)) & 1u;
}

void CodewordBits::push(std::uint64_t value, int width) {
  for (int b = width - 1; b >= 0; --b) {
    if (length_ % 8 == 0) bytes_.push_back(0);
    if ((value >> b) & 1u) bytes_.back() |= static_cast<std::uint8_t>(1u << (7 - length_ % 8));
    ++length_;
  }
}

std::uint64_t BitReader::read(int width) {
  if (static_cast<std::size_t>(width) > remaining()) {
    throw FormatError("codeword ended early: need " + std::to_string(width) + " more bits");
  }
  std::uint64_t v = 0;
  for (int b = 0; b < width; ++b) v = (v << 1) | static_cast<std::uint64_t>(bits_.bit(pos_++));
  return v;
}

void Type2Config::validate(int n_tx) const {
  if (n_beams < 1 || n_beams > n_tx) {
    throw InvalidArgument("Type II: n_beams must be in [1, N_t]");
  }
  if (oversampling < 1) throw InvalidArgument("Type II: oversampling must be >= 1");
  if (amplitude_bits < 1 || phase_bits < 1 || amplitude_bits > 16 || phase_bits > 16) {
    throw InvalidArgument("Type II: amplitude/phase bits must be in [1, 16]");
  }
}

int ceil_log2(std::uint64_t n) {
  int b = 0;
  while ((std::uint64_t{1} << b) < n) ++b;
  return b;
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

CMatrix beam_grid(int n_tx, int oversampling) {
  if (n_tx < 1 || oversampling < 1) throw InvalidArgument("beam_grid: sizes must be positive");
  const int m_total = n_tx * oversampling;
  CMatrix b(n_tx, m_total);
  const double inv = 1.0 / std::sqrt(static_cast<double>(n_tx));
  for (int k = 0; k < n_tx; ++k) {
    for (int m = 0; m < m_total; ++m) {
      // k*m mod m_total keeps the argument small and exact
      const double frac = static_cast<double>((static_cast<long long>(k) * m) % m_total) / m_total;
      b(k, m) = std::polar(inv, 2.0 * std::numbers::pi * frac);
    }
  }
  return b;
}

int overhead_bits(const Type2Config& cfg, int n_tx, int n_streams) {
  cfg.validate(n_tx);
  const int per_stream =
      ceil_log2(static_cast<std::uint64_t>(cfg.n_beams)) +
      (cfg.n_beams - 1) * (cfg.amplitude_bits + cfg.phase_bits);
  return ceil_log2(static_cast<std::uint64_t>(cfg.oversampling)) +
         ceil_log2(binomial(n_tx, cfg.n_beams)) + n_streams * per_stream;
}

int report_overhead_bits(const Type2Config& cfg, int n_tx, int n_streams, int n_subbands) {
  const int per = overhead_bits(cfg, n_tx, n_streams);
  if (!cfg.wideband) return per * n_subbands;
  const int basis = ceil_log2(static_cast<std::uint64_t>(cfg.oversampling)) +
                    ceil_log2(binomial(n_tx, cfg.n_beams));
  return basis + (per - basis) * n_subbands;
}

namespace {

constexpr double kZeroEnergy = 1e-12;

struct Selection {
  int rotation = 0;
  std::vector<int> beams;  // ascending, size L
};

struct StreamFields {
  int strongest = 0;          // position within Selection::beams
  std::vector<int> amp;       // level per selected beam, strongest at max level
  std::vector<int> phase;     // level per selected beam, strongest at 0
};

int column_of(const Selection& s, int beam, int oversampling) {
  return s.rotation + oversampling * beam;
}

// Energy of every beam of every rotation, summed over the given precoders
// and their streams. Result is indexed [rotation][beam].
std::vector<std::vector<double>> beam_energies(std::span<const Precoder> ws, const CMatrix& grid,
                                               int n_tx, int oversampling) {
  std::vector<std::vector<double>> e(static_cast<std::size_t>(oversampling),
                                     std::vector<double>(static_cast<std::size_t>(n_tx), 0.0));
  for (const auto& p : ws) {
    const CMatrix proj = grid.adjoint() * p.w;  // (N_t O) x N_s
    for (int r = 0; r < oversampling; ++r)
      for (int i = 0; i < n_tx; ++i)
        e[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] +=
            proj.row(r + oversampling * i).squaredNorm();
  }
  return e;
}

std::vector<int> top_beams(const std::vector<double>& energy, int count, double total) {
  std::vector<int> idx(energy.size());
  std::iota(idx.begin(), idx.end(), 0);
  const double floor = kZeroEnergy * std::max(total, 1e-300);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double ea = energy[static_cast<std::size_t>(a)] > floor ? energy[static_cast<std::size_t>(a)] : 0.0;
    const double eb = energy[static_cast<std::size_t>(b)] > floor ? energy[static_cast<std::size_t>(b)] : 0.0;
    return ea > eb;
  });
  idx.resize(static_cast<std::size_t>(count));
  std::sort(idx.begin(), idx.end());
  return idx;
}

Selection select(std::span<const Precoder> ws, const CMatrix& grid, const Type2Config& cfg,
                 int n_tx) {
  const auto energy = beam_energies(ws, grid, n_tx, cfg.oversampling);
  double total = 0.0;
  for (const auto& p : ws) total += p.w.squaredNorm();
  Selection best;
  double best_energy = -1.0;
  for (int r = 0; r < cfg.oversampling; ++r) {
    const auto& er = energy[static_cast<std::size_t>(r)];
    auto beams = top_beams(er, cfg.n_beams, total);
    double captured = 0.0;
    for (int b : beams) captured += er[static_cast<std::size_t>(b)];
    if (captured > best_energy + kZeroEnergy * total) {
      best_energy = captured;
      best.rotation = r;
      best.beams = std::move(beams);
    }
  }
  return best;
}

StreamFields quantize_stream(const CVector& coeffs, const Type2Config& cfg) {
  const int levels_a = (1 << cfg.amplitude_bits) - 1;
  const int levels_p = 1 << cfg.phase_bits;
  Eigen::Index k = 0;
  coeffs.cwiseAbs().maxCoeff(&k);
  StreamFields f;
  f.amp.assign(static_cast<std::size_t>(coeffs.size()), 0);
  f.phase.assign(static_cast<std::size_t>(coeffs.size()), 0);
  const std::complex<double> ref = coeffs(k);
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    if (ref == 0.0) break;
    const std::complex<double> rel = coeffs(i) / ref;
    const int a = static_cast<int>(std::lround(std::min(std::abs(rel), 1.0) * levels_a));
    long p = std::lround(std::arg(rel) / (2.0 * std::numbers::pi) * levels_p);
    p = ((p % levels_p) + levels_p) % levels_p;
    f.amp[static_cast<std::size_t>(i)] = a;
    f.phase[static_cast<std::size_t>(i)] = a == 0 ? 0 : static_cast<int>(p);
  }
  f.amp[static_cast<std::size_t>(k)] = levels_a;
  f.phase[static_cast<std::size_t>(k)] = 0;
  // Canonical reference: the lowest-positioned beam at full amplitude.
  int first_full = 0;
  while (f.amp[static_cast<std::size_t>(first_full)] != levels_a) ++first_full;
  const int shift = f.phase[static_cast<std::size_t>(first_full)];
  for (std::size_t i = 0; i < f.phase.size(); ++i) {
    if (f.amp[i] != 0) f.phase[i] = ((f.phase[i] - shift) % levels_p + levels_p) % levels_p;
  }
  f.strongest = first_full;
  return f;
}

// Replace beams that carry zero amplitude in every stream by the lowest-index
// unused beams so that the selection is a function of the decoded precoder.
void canonicalize(Selection& sel, std::vector<StreamFields>& fields, int n_tx) {
  const auto l = sel.beams.size();
  std::vector<bool> live(l, false);
  for (const auto& f : fields)
    for (std::size_t i = 0; i < l; ++i) live[i] = live[i] || f.amp[i] != 0;
  if (std::all_of(live.begin(), live.end(), [](bool b) { return b; })) return;

  std::vector<int> keep;
  for (std::size_t i = 0; i < l; ++i)
    if (live[i]) keep.push_back(sel.beams[i]);
  std::vector<int> beams = keep;
  for (int b = 0; b < n_tx && beams.size() < l; ++b) {
    if (std::find(keep.begin(), keep.end(), b) == keep.end()) beams.push_back(b);
  }
  std::sort(beams.begin(), beams.end());

  for (auto& f : fields) {
    StreamFields g;
    g.amp.assign(l, 0);
    g.phase.assign(l, 0);
    for (std::size_t i = 0; i < l; ++i) {
      if (!live[i]) continue;
      const auto pos = static_cast<std::size_t>(
          std::find(beams.begin(), beams.end(), sel.beams[i]) - beams.begin());
      g.amp[pos] = f.amp[i];
      g.phase[pos] = f.phase[i];
      // Live beams keep their relative order, so the reference beam is
      // still the lowest full-amplitude one.
      if (static_cast<int>(i) == f.strongest) g.strongest = static_cast<int>(pos);
    }
    f = std::move(g);
  }
  sel.beams = std::move(beams);
}

std::uint64_t rank_combination(const std::vector<int>& beams) {
  std::uint64_t r = 0;
  for (std::size_t i = 0; i < beams.size(); ++i) r += binomial(beams[i], static_cast<int>(i) + 1);
  return r;
}

std::vector<int> unrank_combination(std::uint64_t rank, int n, int l) {
  std::vector<int> beams(static_cast<std::size_t>(l));
  for (int i = l - 1; i >= 0; --i) {
    int c = i;
    while (c + 1 < n && binomial(c + 1, i + 1) <= rank) ++c;
    beams[static_cast<std::size_t>(i)] = c;
    rank -= binomial(c, i + 1);
  }
  return beams;
}

void write_basis(CodewordBits& out, const Selection& sel, const Type2Config& cfg, int n_tx) {
  out.push(static_cast<std::uint64_t>(sel.rotation), ceil_log2(static_cast<std::uint64_t>(cfg.oversampling)));
  out.push(rank_combination(sel.beams), ceil_log2(binomial(n_tx, cfg.n_beams)));
}

Selection read_basis(BitReader& in, const Type2Config& cfg, int n_tx) {
  Selection sel;
  const auto rot = in.read(ceil_log2(static_cast<std::uint64_t>(cfg.oversampling)));
  if (rot >= static_cast<std::uint64_t>(cfg.oversampling)) {
    throw FormatError("Type II: rotation index " + std::to_string(rot) + " out of range");
  }
  const auto rank = in.read(ceil_log2(binomial(n_tx, cfg.n_beams)));
  if (rank >= binomial(n_tx, cfg.n_beams)) {
    throw FormatError("Type II: beam combination index " + std::to_string(rank) + " out of range");
  }
  sel.rotation = static_cast<int>(rot);
  sel.beams = unrank_combination(rank, n_tx, cfg.n_beams);
  return sel;
}

void write_stream(CodewordBits& out, const StreamFields& f, const Type2Config& cfg) {
  out.push(static_cast<std::uint64_t>(f.strongest), ceil_log2(static_cast<std::uint64_t>(cfg.n_beams)));
  for (std::size_t i = 0; i < f.amp.size(); ++i)
    if (static_cast<int>(i) != f.strongest) out.push(static_cast<std::uint64_t>(f.amp[i]), cfg.amplitude_bits);
  for (std::size_t i = 0; i < f.phase.size(); ++i)
    if (static_cast<int>(i) != f.strongest) out.push(static_cast<std::uint64_t>(f.phase[i]), cfg.phase_bits);
}

StreamFields read_stream(BitReader& in, const Type2Config& cfg) {
  StreamFields f;
  const auto s = in.read(ceil_log2(static_cast<std::uint64_t>(cfg.n_beams)));
  if (s >= static_cast<std::uint64_t>(cfg.n_beams)) {
    throw FormatError("Type II: strongest-beam index " + std::to_string(s) + " out of range");
  }
  f.strongest = static_cast<int>(s);
  const auto l = static_cast<std::size_t>(cfg.n_beams);
  f.amp.assign(l, (1 << cfg.amplitude_bits) - 1);
  f.phase.assign(l, 0);
  for (std::size_t i = 0; i < l; ++i)
    if (static_cast<int>(i) != f.strongest) f.amp[i] = static_cast<int>(in.read(cfg.amplitude_bits));
  for (std::size_t i = 0; i < l; ++i)
    if (static_cast<int>(i) != f.strongest) f.phase[i] = static_cast<int>(in.read(cfg.phase_bits));
  return f;
}

CVector reconstruct(const Selection& sel, const StreamFields& f, const CMatrix& grid,
                    const Type2Config& cfg) {
  const double levels_a = (1 << cfg.amplitude_bits) - 1;
  const double levels_p = 1 << cfg.phase_bits;
  CVector w = CVector::Zero(grid.rows());
  for (std::size_t i = 0; i < sel.beams.size(); ++i) {
    const double a = f.amp[i] / levels_a;
    if (a == 0.0) continue;
    const double ph = 2.0 * std::numbers::pi * f.phase[i] / levels_p;
    w += std::polar(a, ph) * grid.col(column_of(sel, sel.beams[i], cfg.oversampling));
  }
  return w.normalized();
}

void check_precoder(const Precoder& p, const Type2Config& cfg) {
  if (p.w.size() == 0) throw DimensionError("Type II: empty precoder");
  cfg.validate(static_cast<int>(p.n_tx()));
  if (!p.w.allFinite()) throw NumericalError("Type II: non-finite precoder");
}

std::vector<StreamFields> stream_fields(const Precoder& p, const Selection& sel, const CMatrix& grid,
                                        const Type2Config& cfg) {
  std::vector<StreamFields> out;
  for (Eigen::Index s = 0; s < p.n_streams(); ++s) {
    CVector c(static_cast<Eigen::Index>(sel.beams.size()));
    for (std::size_t i = 0; i < sel.beams.size(); ++i) {
      c(static_cast<Eigen::Index>(i)) =
          grid.col(column_of(sel, sel.beams[i], cfg.oversampling)).dot(p.w.col(s));
    }
    out.push_back(quantize_stream(c, cfg));
  }
  return out;
}

Precoder decode_fields(const Selection& sel, const std::vector<StreamFields>& fields,
                       const CMatrix& grid, const Type2Config& cfg) {
  Precoder p;
  p.w.resize(grid.rows(), static_cast<Eigen::Index>(fields.size()));
  for (std::size_t s = 0; s < fields.size(); ++s) {
    p.w.col(static_cast<Eigen::Index>(s)) = reconstruct(sel, fields[s], grid, cfg);
  }
  normalize_column_phases(p.w);
  p.eigenvalues = RVector::Zero(p.w.cols());
  return p;
}

}  // namespace

CodewordBits encode_type2(const Precoder& w, const Type2Config& cfg) {
  check_precoder(w, cfg);
  const int n_tx = static_cast<int>(w.n_tx());
  const CMatrix grid = beam_grid(n_tx, cfg.oversampling);
  Selection sel = select(std::span<const Precoder>(&w, 1), grid, cfg, n_tx);
  auto fields = stream_fields(w, sel, grid, cfg);
  canonicalize(sel, fields, n_tx);
  CodewordBits out(Scheme::Type2);
  write_basis(out, sel, cfg, n_tx);
  for (const auto& f : fields) write_stream(out, f, cfg);
  return out;
}

Precoder decode_type2(const CodewordBits& bits, const Type2Config& cfg, int n_tx, int n_streams) {
  cfg.validate(n_tx);
  const auto expected = static_cast<std::size_t>(overhead_bits(cfg, n_tx, n_streams));
  if (bits.size() != expected) {
    throw DimensionError("Type II: codeword has " + std::to_string(bits.size()) +
                         " bits, configuration expects " + std::to_string(expected));
  }
  BitReader in(bits);
  const Selection sel = read_basis(in, cfg, n_tx);
  std::vector<StreamFields> fields;
  for (int s = 0; s < n_streams; ++s) fields.push_back(read_stream(in, cfg));
  return decode_fields(sel, fields, beam_grid(n_tx, cfg.oversampling), cfg);
}

CodewordBits encode_type2_report(std::span<const Precoder> subbands, const Type2Config& cfg) {
  if (subbands.empty()) throw InvalidArgument("Type II report: no subbands");
  CodewordBits out(Scheme::Type2);
  if (!cfg.wideband) {
    for (const auto& p : subbands) {
      const auto one = encode_type2(p, cfg);
      for (std::size_t i = 0; i < one.size(); ++i) out.push(one.bit(i) ? 1 : 0, 1);
    }
    return out;
  }
  for (const auto& p : subbands) check_precoder(p, cfg);
  const int n_tx = static_cast<int>(subbands.front().n_tx());
  const CMatrix grid = beam_grid(n_tx, cfg.oversampling);
  Selection sel = select(subbands, grid, cfg, n_tx);
  std::vector<StreamFields> all;
  for (const auto& p : subbands) {
    auto f = stream_fields(p, sel, grid, cfg);
    all.insert(all.end(), f.begin(), f.end());
  }
  canonicalize(sel, all, n_tx);
  write_basis(out, sel, cfg, n_tx);
  for (const auto& f : all) write_stream(out, f, cfg);
  return out;
}

std::vector<Precoder> decode_type2_report(const CodewordBits& bits, const Type2Config& cfg,
                                          int n_tx, int n_streams, int n_subbands) {
  const auto expected =
      static_cast<std::size_t>(report_overhead_bits(cfg, n_tx, n_streams, n_subbands));
  if (bits.size() != expected) {
    throw DimensionError("Type II report: " + std::to_string(bits.size()) +
                         " bits, configuration expects " + std::to_string(expected));
  }
  const CMatrix grid = beam_grid(n_tx, cfg.oversampling);
  BitReader in(bits);
  std::vector<Precoder> out;
  if (!cfg.wideband) {
    for (int k = 0; k < n_subbands; ++k) {
      const Selection sel = read_basis(in, cfg, n_tx);
      std::vector<StreamFields> fields;
      for (int s = 0; s < n_streams; ++s) fields.push_back(read_stream(in, cfg));
      out.push_back(decode_fields(sel, fields, grid, cfg));
      out.back().subband = k;
    }
    return out;
  }
  const Selection sel = read_basis(in, cfg, n_tx);
  for (int k = 0; k < n_subbands; ++k) {
    std::vector<StreamFields> fields;
    for (int s = 0; s < n_streams; ++s) fields.push_back(read_stream(in, cfg));
    out.push_back(decode_fields(sel, fields, grid, cfg));
    out.back().subband = k;
  }
  return out;
}

}  // namespace csidt
