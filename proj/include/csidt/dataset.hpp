// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "csidt/metrics.hpp"
#include "csidt/precoder.hpp"

namespace csidt {

struct CorpusHeader {
  SystemConfig system;
  std::string scene_name;
  std::string scene_text;  // serialize_scene output; empty for cluster corpora
  Domain domain = Domain::DT;
  std::uint64_t seed = 0;
  AntennaArray bs;
  AntennaArray ue;  // template; each record sets position and boresight
  std::vector<std::pair<std::string, std::string>> params;  // creation parameters

  const std::string* param(std::string_view key) const;
  void set_param(const std::string& key, std::string value);
};

/// One UE position. The channel is stored as its path set and rebuilt on
/// demand with record_channel(); estimation noise is regenerated from
/// `noise_seed`.
struct CorpusRecord {
  int position_id = 0;
  Vec3 position = Vec3::Zero();
  int orientation_id = -1;  // index into orientation_set(), -1 when unused
  Vec3 ue_boresight = Vec3::UnitX();
  PathSet paths;
  double noise_snr_db = std::numeric_limits<double>::quiet_NaN();  // NaN: noiseless
  std::uint64_t noise_seed = 0;
  std::vector<Precoder> precoders;  // one per subband
};

struct CorpusFailure {
  int position_id = 0;
  std::string reason;
};

struct Corpus {
  CorpusHeader header;
  std::vector<CorpusRecord> records;
  std::vector<CorpusFailure> failures;

  /// All precoders, record-major then subband.
  std::vector<Precoder> precoders() const;
  std::vector<int> position_ids() const;
  bool operator==(const Corpus& o) const;
};

struct BuildOptions {
  int max_order = -1;  // -1: preset default
  std::size_t max_paths = 64;
  int jobs = 1;
};

/// UE array for a record: the header template moved to the record pose.
AntennaArray record_ue(const CorpusHeader& h, const CorpusRecord& r);

/// Frequency response of a record, including estimation noise if any.
ChannelTensor record_channel(const CorpusHeader& h, const CorpusRecord& r);

/// Trace, synthesize and extract at every grid point of the preset.
Corpus build_corpus(const ScenePreset& preset, const std::string& preset_name,
                    const SystemConfig& sys, std::uint64_t seed, const BuildOptions& opts = {});

/// `n_positions` independent draws of the clustered channel model.
Corpus build_cluster_corpus(const ClusterConfig& cfg, const AntennaArray& bs,
                            const AntennaArray& ue, const SystemConfig& sys, int n_positions,
                            std::uint64_t seed, int jobs = 1);

struct PerturbSpec {
  std::optional<PatternSpec> bs_pattern_swap;
  std::optional<PatternSpec> ue_pattern_swap;
  double gamma_jitter = 0.0;           // relative, per reflector
  double bs_phase_error_deg = 0.0;     // uniform per-element BS phase offset bound
  int diffuse_paths = 0;
  double diffuse_power_db = -20.0;     // per path, relative to the strongest specular path
  double diffuse_max_excess_s = 100e-9;
  std::optional<double> estimation_noise_snr_db;

  void validate() const;
  /// BS patch q=1 -> q=2, 15 % reflection jitter, 8 diffuse paths at -20 dB.
  static PerturbSpec rw_proxy_default();
};

/// Re-trace and re-synthesize a DT corpus under `spec`; the result is
/// tagged RW_PROXY.
Corpus perturb_corpus(const Corpus& dt, const PerturbSpec& spec, std::uint64_t seed, int jobs = 1);

struct OlSplit {
  Corpus ol;
  Corpus eval;
};

/// Partition positions: floor(fraction * n) go to the online-learning side.
OlSplit ol_split(const Corpus& c, double fraction, std::uint64_t seed);

/// Keep only the given position ids, in corpus order.
Corpus select_positions(const Corpus& c, const std::vector<int>& ids);

inline constexpr std::uint16_t kCorpusVersion = 1;

std::string serialize_corpus(const Corpus& c);
Corpus parse_corpus(std::string_view bytes);
void save_corpus(const std::string& path, const Corpus& c);
Corpus load_corpus(const std::string& path);

/// position_id,reason
void write_failure_manifest(std::ostream& out, const Corpus& c);

}  // namespace csidt
