// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "csidt/binary_io.hpp"
#include "csidt/kv_text.hpp"

namespace csidt {

const std::string* CorpusHeader::param(std::string_view key) const {
  for (const auto& [k, v] : params)
    if (k == key) return &v;
  return nullptr;
}

void CorpusHeader::set_param(const std::string& key, std::string value) {
  for (auto& [k, v] : params) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  params.emplace_back(key, std::move(value));
}

std::vector<Precoder> Corpus::precoders() const {
  std::vector<Precoder> out;
  for (const auto& r : records) out.insert(out.end(), r.precoders.begin(), r.precoders.end());
  return out;
}

std::vector<int> Corpus::position_ids() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.position_id);
  return out;
}

bool Corpus::operator==(const Corpus& o) const { return serialize_corpus(*this) == serialize_corpus(o); }

AntennaArray record_ue(const CorpusHeader& h, const CorpusRecord& r) {
  AntennaArray ue = h.ue.oriented(r.ue_boresight);
  ue.position = r.position;
  return ue;
}

ChannelTensor record_channel(const CorpusHeader& h, const CorpusRecord& r) {
  ChannelTensor ch = synth_channel(r.paths, h.system.grid, h.bs, record_ue(h, r));
  ch.position_id = r.position_id;
  ch.domain = h.domain;
  if (std::isnan(r.noise_snr_db)) return ch;
  double power = 0.0;
  std::size_t count = 0;
  for (const auto& m : ch.subcarriers) {
    power += m.squaredNorm();
    count += static_cast<std::size_t>(m.size());
  }
  power /= static_cast<double>(count);
  const double sigma = std::sqrt(power / std::pow(10.0, r.noise_snr_db / 10.0) / 2.0);
  std::mt19937_64 rng(r.noise_seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& m : ch.subcarriers) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double re = n(rng);
        m(i, j) += std::complex<double>(sigma * re, sigma * n(rng));
      }
    }
  }
  return ch;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be
// written to per-index slots, so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, 256));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct Slot {
  std::optional<CorpusRecord> record;
  std::string failure;
};

void extract_into(const CorpusHeader& h, CorpusRecord& r) {
  const ChannelTensor ch = record_channel(h, r);
  double power = 0.0;
  for (const auto& m : ch.subcarriers) power += m.squaredNorm();
  if (!(power > 1e-300)) throw NumericalError("channel has no energy after antenna patterns");
  r.precoders = precoder_dataset(ch, h.system.grid, h.system.n_streams);
}

void collect(std::vector<Slot>& slots, const std::vector<int>& ids, Corpus& out) {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].record) {
      out.records.push_back(std::move(*slots[i].record));
    } else {
      out.failures.push_back({ids[i], slots[i].failure});
    }
  }
}

int trace_order(const CorpusHeader& h) {
  const auto* v = h.param("max_order");
  return v ? static_cast<int>(parse_int(*v)) : 2;
}

std::size_t trace_max_paths(const CorpusHeader& h) {
  const auto* v = h.param("max_paths");
  return v ? static_cast<std::size_t>(parse_int(*v)) : 64;
}

}  // namespace

Corpus build_corpus(const ScenePreset& preset, const std::string& preset_name,
                    const SystemConfig& sys, std::uint64_t seed, const BuildOptions& opts) {
  sys.validate();
  preset.scene.validate();
  if (static_cast<int>(preset.bs.size()) != sys.n_tx || static_cast<int>(preset.ue.size()) != sys.n_rx) {
    throw InvalidArgument("build_corpus: preset arrays do not match the system dimensions");
  }
  Corpus c;
  auto& h = c.header;
  h.system = sys;
  h.scene_name = preset_name;
  h.scene_text = serialize_scene(preset.scene);
  h.domain = Domain::DT;
  h.seed = seed;
  h.bs = preset.bs;
  h.ue = preset.ue;
  const int order = opts.max_order >= 0 ? opts.max_order : preset.default_max_order;
  h.set_param("max_order", std::to_string(order));
  h.set_param("max_paths", std::to_string(opts.max_paths));
  h.set_param("grid_pitch_m", format_double(preset.grid_pitch_m));
  h.set_param("orientations", "100");

  const auto orientations = orientation_set(100);
  TraceOptions topts;
  topts.max_order = order;
  topts.max_paths = opts.max_paths;
  topts.carrier_hz = sys.grid.carrier_hz;

  const auto n = preset.ue_grid.size();
  std::vector<Slot> slots(n);
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  parallel_for(n, opts.jobs, [&](std::size_t i) {
    try {
      std::mt19937_64 rng(mix_seed(seed, i));
      CorpusRecord r;
      r.position_id = static_cast<int>(i);
      r.position = preset.ue_grid[i];
      r.orientation_id = static_cast<int>(std::uniform_int_distribution<int>(0, 99)(rng));
      r.ue_boresight = orientations[static_cast<std::size_t>(r.orientation_id)];
      r.paths = trace_paths(preset.scene, preset.bs.position, r.position, topts);
      if (r.paths.paths.empty()) throw NumericalError("no propagation paths");
      extract_into(h, r);
      slots[i].record = std::move(r);
    } catch (const std::exception& e) {
      slots[i].failure = e.what();
    }
  });
  collect(slots, ids, c);
  return c;
}

Corpus build_cluster_corpus(const ClusterConfig& cfg, const AntennaArray& bs,
                            const AntennaArray& ue, const SystemConfig& sys, int n_positions,
                            std::uint64_t seed, int jobs) {
  sys.validate();
  if (n_positions < 1) throw InvalidArgument("build_cluster_corpus: need at least one draw");
  Corpus c;
  auto& h = c.header;
  h.system = sys;
  h.scene_name = "cluster";
  h.domain = Domain::Cluster;
  h.seed = seed;
  h.bs = bs;
  h.ue = ue;
  h.set_param("n_clusters", std::to_string(cfg.n_clusters));
  h.set_param("rays_per_cluster", std::to_string(cfg.rays_per_cluster));
  h.set_param("delay_spread_s", format_double(cfg.delay_spread_s));
  h.set_param("angular_spread_deg", format_double(cfg.angular_spread_deg));
  h.set_param("power_decay", format_double(cfg.power_decay));
  h.set_param("aod_sector_deg", format_double(cfg.aod_sector_deg));
  h.set_param("elevation_spread_deg", format_double(cfg.elevation_spread_deg));
  h.set_param("layouts", std::to_string(cfg.layouts));
  if (cfg.layouts < 0) throw InvalidArgument("build_cluster_corpus: negative layout count");

  const auto n = static_cast<std::size_t>(n_positions);
  std::vector<Slot> slots(n);
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  parallel_for(n, jobs, [&](std::size_t i) {
    try {
      CorpusRecord r;
      r.position_id = static_cast<int>(i);
      r.position = ue.position;
      r.ue_boresight = ue.boresight;
      const auto ray_seed = mix_seed(seed, i);
      const auto layout_seed =
          cfg.layouts > 0 ? mix_seed(seed ^ 0x6c61796f7574ULL, i % static_cast<std::size_t>(cfg.layouts))
                          : ray_seed;
      r.paths = cluster_paths(cfg, bs, record_ue(h, r), layout_seed, ray_seed);
      extract_into(h, r);
      slots[i].record = std::move(r);
    } catch (const std::exception& e) {
      slots[i].failure = e.what();
    }
  });
  collect(slots, ids, c);
  return c;
}

void PerturbSpec::validate() const {
  if (!(gamma_jitter >= 0.0 && gamma_jitter < 1.0)) {
    throw InvalidArgument("perturb: gamma jitter must lie in [0, 1)");
  }
  if (!(bs_phase_error_deg >= 0.0 && bs_phase_error_deg <= 180.0)) {
    throw InvalidArgument("perturb: BS phase error must lie in [0, 180] degrees");
  }
  if (diffuse_paths < 0) throw InvalidArgument("perturb: negative diffuse path count");
  if (diffuse_paths > 0 && !(diffuse_power_db < 0.0)) {
    throw InvalidArgument("perturb: diffuse power must be below 0 dB");
  }
  if (!(diffuse_max_excess_s >= 0.0)) throw InvalidArgument("perturb: negative diffuse excess delay");
}

PerturbSpec PerturbSpec::rw_proxy_default() {
  PerturbSpec p;
  p.bs_pattern_swap = PatternSpec::patch(2.0);
  p.gamma_jitter = 0.15;
  p.diffuse_paths = 8;
  p.diffuse_power_db = -20.0;
  return p;
}

namespace {

Vec3 uniform_direction(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> a(-std::numbers::pi, std::numbers::pi);
  const double z = u(rng);
  const double phi = a(rng);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

Scene jitter_scene(const Scene& s, double jitter, std::uint64_t seed) {
  if (jitter == 0.0) return s;
  Scene out = s;
  std::mt19937_64 rng(mix_seed(seed, 0x6a6974746572ULL));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int next_id = 0;
  for (const auto& m : s.materials) next_id = std::max(next_id, m.id + 1);
  for (auto& r : out.reflectors) {
    const double g = std::clamp(s.gamma(r.material) * (1.0 + jitter * u(rng)), 0.0, 1.0);
    out.materials.push_back({next_id, g});
    r.material = next_id++;
  }
  return out;
}

}  // namespace

Corpus perturb_corpus(const Corpus& dt, const PerturbSpec& spec, std::uint64_t seed, int jobs) {
  spec.validate();
  if (dt.header.domain != Domain::DT) throw InvalidArgument("perturb_corpus: input is not a DT corpus");
  if (dt.header.scene_text.empty()) throw InvalidArgument("perturb_corpus: corpus carries no scene");
  Corpus out;
  out.header = dt.header;
  auto& h = out.header;
  h.domain = Domain::RwProxy;
  h.seed = seed;
  if (spec.bs_pattern_swap) h.bs.pattern = *spec.bs_pattern_swap;
  if (spec.ue_pattern_swap) h.ue.pattern = *spec.ue_pattern_swap;
  h.set_param("perturb.bs_pattern", format_pattern(h.bs.pattern));
  h.set_param("perturb.ue_pattern", format_pattern(h.ue.pattern));
  h.set_param("perturb.gamma_jitter", format_double(spec.gamma_jitter));
  h.set_param("perturb.bs_phase_error_deg", format_double(spec.bs_phase_error_deg));
  if (spec.bs_phase_error_deg > 0.0) {
    std::mt19937_64 rng(mix_seed(seed, 0x63616c6962ULL));
    const double bound = spec.bs_phase_error_deg * std::numbers::pi / 180.0;
    std::uniform_real_distribution<double> u(-bound, bound);
    h.bs.element_phase_rad.resize(h.bs.size());
    for (auto& v : h.bs.element_phase_rad) v = u(rng);
  }
  h.set_param("perturb.diffuse_paths", std::to_string(spec.diffuse_paths));
  h.set_param("perturb.diffuse_power_db", format_double(spec.diffuse_power_db));
  h.set_param("perturb.noise_snr_db", spec.estimation_noise_snr_db
                                          ? format_double(*spec.estimation_noise_snr_db)
                                          : std::string("none"));

  const Scene scene = jitter_scene(parse_scene(dt.header.scene_text), spec.gamma_jitter, seed);
  TraceOptions topts;
  topts.max_order = trace_order(dt.header);
  topts.max_paths = trace_max_paths(dt.header);
  topts.carrier_hz = h.system.grid.carrier_hz;
  const double max_delay = 0.999 / h.system.grid.subcarrier_spacing_hz;

  const auto n = dt.records.size();
  std::vector<Slot> slots(n);
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = dt.records[i].position_id;
  parallel_for(n, jobs, [&](std::size_t i) {
    try {
      const auto& src = dt.records[i];
      std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(src.position_id)));
      CorpusRecord r = src;
      r.precoders.clear();
      r.paths = trace_paths(scene, h.bs.position, r.position, topts);
      if (spec.diffuse_paths > 0 && !r.paths.paths.empty()) {
        double strongest = 0.0, first = r.paths.paths.front().delay_s;
        for (const auto& p : r.paths.paths) {
          strongest = std::max(strongest, std::abs(p.gain));
          first = std::min(first, p.delay_s);
        }
        const double amp = strongest * std::pow(10.0, spec.diffuse_power_db / 20.0);
        std::uniform_real_distribution<double> excess(0.0, spec.diffuse_max_excess_s);
        std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi);
        for (int k = 0; k < spec.diffuse_paths; ++k) {
          Path p;
          p.order = Path::kDiffuseOrder;
          p.delay_s = std::min(first + excess(rng), max_delay);
          p.aod = uniform_direction(rng);
          p.aoa = uniform_direction(rng);
          p.gain = std::polar(amp, phase(rng));
          r.paths.paths.push_back(p);
        }
      }
      if (spec.estimation_noise_snr_db) {
        r.noise_snr_db = *spec.estimation_noise_snr_db;
        r.noise_seed = mix_seed(rng(), 0x6e6f697365ULL);
      }
      extract_into(h, r);
      for (auto& p : r.precoders) p.domain = Domain::RwProxy;
      slots[i].record = std::move(r);
    } catch (const std::exception& e) {
      slots[i].failure = e.what();
    }
  });
  collect(slots, ids, out);
  return out;
}

Corpus select_positions(const Corpus& c, const std::vector<int>& ids) {
  const std::set<int> keep(ids.begin(), ids.end());
  Corpus out;
  out.header = c.header;
  for (const auto& r : c.records)
    if (keep.count(r.position_id)) out.records.push_back(r);
  return out;
}

OlSplit ol_split(const Corpus& c, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("ol_split: fraction must lie in (0, 1)");
  auto ids = c.position_ids();
  const auto n_ol = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(ids.size())));
  if (n_ol == 0 || n_ol == ids.size()) {
    throw InvalidArgument("ol_split: fraction " + format_double(fraction) + " of " +
                          std::to_string(ids.size()) + " positions leaves one side empty");
  }
  std::mt19937_64 rng(mix_seed(seed, 0x6f6cULL));
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::vector<int> ol(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_ol));
  const std::vector<int> rest(ids.begin() + static_cast<std::ptrdiff_t>(n_ol), ids.end());
  OlSplit s{select_positions(c, ol), select_positions(c, rest)};
  s.ol.header.set_param("split", "ol");
  s.eval.header.set_param("split", "eval");
  return s;
}

namespace {

std::string vec_text(const Vec3& v) { return format_list({v.x(), v.y(), v.z()}); }

Vec3 parse_vec(const std::string& s) {
  const auto v = parse_list(s);
  if (v.size() != 3) throw FormatError("corpus header: expected a 3-vector, got '" + s + "'");
  return {v[0], v[1], v[2]};
}

void array_fields(const std::string& prefix, const AntennaArray& a,
                  std::vector<std::pair<std::string, std::string>>& kv) {
  std::vector<double> flat;
  for (const auto& e : a.elements) flat.insert(flat.end(), {e.x(), e.y(), e.z()});
  kv.emplace_back(prefix + ".elements", format_list(flat));
  kv.emplace_back(prefix + ".pattern", format_pattern(a.pattern));
  kv.emplace_back(prefix + ".boresight", vec_text(a.boresight));
  kv.emplace_back(prefix + ".position", vec_text(a.position));
  kv.emplace_back(prefix + ".reference_wavelength_m", format_double(a.reference_wavelength_m));
  if (!a.element_phase_rad.empty()) kv.emplace_back(prefix + ".element_phase_rad", format_list(a.element_phase_rad));
}

AntennaArray parse_array(const std::string& prefix, const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& k) -> const std::string& {
    const auto it = kv.find(prefix + "." + k);
    if (it == kv.end()) throw FormatError("corpus header: missing field '" + prefix + "." + k + "'");
    return it->second;
  };
  AntennaArray a;
  const auto flat = parse_list(get("elements"));
  if (flat.size() % 3 != 0) throw FormatError("corpus header: malformed element list");
  for (std::size_t i = 0; i < flat.size(); i += 3) a.elements.emplace_back(flat[i], flat[i + 1], flat[i + 2]);
  a.pattern = parse_pattern(get("pattern"));
  a.boresight = parse_vec(get("boresight"));
  a.position = parse_vec(get("position"));
  a.reference_wavelength_m = parse_double(get("reference_wavelength_m"));
  if (const auto it = kv.find(prefix + ".element_phase_rad"); it != kv.end()) {
    a.element_phase_rad = parse_list(it->second);
    if (a.element_phase_rad.size() != a.elements.size()) {
      throw FormatError("corpus header: element phase count does not match '" + prefix + ".elements'");
    }
  }
  return a;
}

void put_vec(ByteWriter& w, const Vec3& v) {
  for (int i = 0; i < 3; ++i) w.f64(v(i));
}

Vec3 get_vec(ByteReader& in) {
  Vec3 v;
  for (int i = 0; i < 3; ++i) v(i) = in.f64();
  return v;
}

constexpr std::string_view kCorpusMagic = "CSIDT1";

}  // namespace

std::string serialize_corpus(const Corpus& c) {
  const auto& h = c.header;
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("n_tx", std::to_string(h.system.n_tx));
  kv.emplace_back("n_rx", std::to_string(h.system.n_rx));
  kv.emplace_back("n_streams", std::to_string(h.system.n_streams));
  kv.emplace_back("grid.n_subcarriers", std::to_string(h.system.grid.n_subcarriers));
  kv.emplace_back("grid.subcarrier_spacing_hz", format_double(h.system.grid.subcarrier_spacing_hz));
  kv.emplace_back("grid.carrier_hz", format_double(h.system.grid.carrier_hz));
  kv.emplace_back("grid.n_subbands", std::to_string(h.system.grid.n_subbands));
  kv.emplace_back("scene_name", h.scene_name);
  kv.emplace_back("scene", h.scene_text);
  kv.emplace_back("domain", to_string(h.domain));
  kv.emplace_back("seed", std::to_string(h.seed));
  array_fields("bs", h.bs, kv);
  array_fields("ue", h.ue, kv);
  for (const auto& [k, v] : h.params) kv.emplace_back("param." + k, v);

  ByteWriter w;
  w.raw(kCorpusMagic);
  w.u16(kCorpusVersion);
  w.u32(static_cast<std::uint32_t>(kv.size()));
  for (const auto& [k, v] : kv) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(c.records.size()));
  for (const auto& r : c.records) {
    w.i32(r.position_id);
    put_vec(w, r.position);
    w.i32(r.orientation_id);
    put_vec(w, r.ue_boresight);
    w.f64(r.noise_snr_db);
    w.u64(r.noise_seed);
    put_vec(w, r.paths.tx);
    put_vec(w, r.paths.rx);
    w.f64(r.paths.carrier_hz);
    w.u32(static_cast<std::uint32_t>(r.paths.paths.size()));
    for (const auto& p : r.paths.paths) {
      w.c128(p.gain);
      w.f64(p.delay_s);
      put_vec(w, p.aod);
      put_vec(w, p.aoa);
      w.i32(p.order);
      w.u32(static_cast<std::uint32_t>(p.bounces.size()));
      for (int b : p.bounces) w.i32(b);
    }
    w.u32(static_cast<std::uint32_t>(r.precoders.size()));
    for (const auto& p : r.precoders) {
      w.i32(p.subband);
      w.u8(static_cast<std::uint8_t>(p.domain));
      w.u32(static_cast<std::uint32_t>(p.w.rows()));
      w.u32(static_cast<std::uint32_t>(p.w.cols()));
      for (Eigen::Index j = 0; j < p.w.cols(); ++j)
        for (Eigen::Index i = 0; i < p.w.rows(); ++i) w.c128(p.w(i, j));
      w.u32(static_cast<std::uint32_t>(p.eigenvalues.size()));
      for (Eigen::Index i = 0; i < p.eigenvalues.size(); ++i) w.f64(p.eigenvalues(i));
    }
  }
  w.u32(static_cast<std::uint32_t>(c.failures.size()));
  for (const auto& f : c.failures) {
    w.i32(f.position_id);
    w.str(f.reason);
  }
  return std::string(w.view());
}

Corpus parse_corpus(std::string_view bytes) {
  if (bytes.size() < kCorpusMagic.size() || bytes.substr(0, kCorpusMagic.size()) != kCorpusMagic) {
    throw MagicError("not a corpus file (bad magic)");
  }
  ByteReader in(bytes, "corpus");
  in.raw(kCorpusMagic.size());
  const auto version = in.u16();
  if (version != kCorpusVersion) throw VersionError("corpus", version, kCorpusVersion);

  std::map<std::string, std::string> kv;
  Corpus c;
  auto& h = c.header;
  const auto n_kv = in.u32();
  for (std::uint32_t i = 0; i < n_kv; ++i) {
    auto k = in.str();
    auto v = in.str();
    if (k.rfind("param.", 0) == 0) {
      h.params.emplace_back(k.substr(6), v);
    } else if (!kv.emplace(std::move(k), std::move(v)).second) {
      throw FormatError("corpus header: duplicate field");
    }
  }
  auto get = [&](const std::string& k) -> const std::string& {
    const auto it = kv.find(k);
    if (it == kv.end()) throw FormatError("corpus header: missing field '" + k + "'");
    return it->second;
  };
  h.system.n_tx = static_cast<int>(parse_int(get("n_tx")));
  h.system.n_rx = static_cast<int>(parse_int(get("n_rx")));
  h.system.n_streams = static_cast<int>(parse_int(get("n_streams")));
  h.system.grid.n_subcarriers = static_cast<int>(parse_int(get("grid.n_subcarriers")));
  h.system.grid.subcarrier_spacing_hz = parse_double(get("grid.subcarrier_spacing_hz"));
  h.system.grid.carrier_hz = parse_double(get("grid.carrier_hz"));
  h.system.grid.n_subbands = static_cast<int>(parse_int(get("grid.n_subbands")));
  h.scene_name = get("scene_name");
  h.scene_text = get("scene");
  h.domain = parse_domain(get("domain"));
  h.seed = std::stoull(get("seed"));
  h.bs = parse_array("bs", kv);
  h.ue = parse_array("ue", kv);

  const auto n_rec = in.u32();
  for (std::uint32_t k = 0; k < n_rec; ++k) {
    CorpusRecord r;
    r.position_id = in.i32();
    r.position = get_vec(in);
    r.orientation_id = in.i32();
    r.ue_boresight = get_vec(in);
    r.noise_snr_db = in.f64();
    r.noise_seed = in.u64();
    r.paths.tx = get_vec(in);
    r.paths.rx = get_vec(in);
    r.paths.carrier_hz = in.f64();
    const auto n_paths = in.u32();
    if (n_paths > in.remaining()) throw TruncatedError("corpus: path count exceeds file size");
    for (std::uint32_t i = 0; i < n_paths; ++i) {
      Path p;
      p.gain = in.c128();
      p.delay_s = in.f64();
      p.aod = get_vec(in);
      p.aoa = get_vec(in);
      p.order = in.i32();
      const auto nb = in.u32();
      if (nb > 3) throw FormatError("corpus: bounce list longer than 3");
      for (std::uint32_t b = 0; b < nb; ++b) p.bounces.push_back(in.i32());
      r.paths.paths.push_back(std::move(p));
    }
    const auto n_pre = in.u32();
    if (n_pre > in.remaining()) throw TruncatedError("corpus: precoder count exceeds file size");
    for (std::uint32_t i = 0; i < n_pre; ++i) {
      Precoder p;
      p.subband = in.i32();
      p.domain = static_cast<Domain>(in.u8());
      p.position = r.position_id;
      const auto rows = in.u32();
      const auto cols = in.u32();
      if (static_cast<int>(rows) != h.system.n_tx || static_cast<int>(cols) != h.system.n_streams) {
        throw DimensionError("corpus: precoder shape disagrees with header dims");
      }
      p.w.resize(rows, cols);
      for (Eigen::Index j = 0; j < p.w.cols(); ++j)
        for (Eigen::Index ii = 0; ii < p.w.rows(); ++ii) p.w(ii, j) = in.c128();
      const auto ne = in.u32();
      if (ne > 64) throw FormatError("corpus: implausible eigenvalue count");
      p.eigenvalues.resize(ne);
      for (std::uint32_t e = 0; e < ne; ++e) p.eigenvalues(e) = in.f64();
      r.precoders.push_back(std::move(p));
    }
    c.records.push_back(std::move(r));
  }
  const auto n_fail = in.u32();
  for (std::uint32_t i = 0; i < n_fail; ++i) {
    CorpusFailure f;
    f.position_id = in.i32();
    f.reason = in.str();
    c.failures.push_back(std::move(f));
  }
  if (!in.done()) throw FormatError("corpus: trailing bytes");
  return c;
}

void save_corpus(const std::string& path, const Corpus& c) {
  const auto bytes = serialize_corpus(c);
  if (const auto dir = std::filesystem::path(path).parent_path(); !dir.empty()) {
    std::filesystem::create_directories(dir);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write corpus '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing corpus '" + path + "'");
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("missing corpus '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str());
}

void write_failure_manifest(std::ostream& out, const Corpus& c) {
  out << "position_id,reason\n";
  for (const auto& f : c.failures) {
    std::string reason = f.reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    out << f.position_id << ',' << reason << '\n';
  }
}

}  // namespace csidt
