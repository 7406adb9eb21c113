// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csidt/dataset.hpp"
#include "csidt/metrics.hpp"
#include "csidt/neural.hpp"
#include "csidt/type2.hpp"

namespace csidt {

/// Everything one run needs. Read from a kv-text file; see
/// configs/corridor.conf for the grammar and every accepted key.
struct ExperimentConfig {
  std::string name = "corridor_default";
  std::uint64_t seed = 1;

  SystemConfig system;
  std::string indoor_scene = "corridor";
  std::string outdoor_scene = "campus_square";
  PresetOptions preset;
  std::size_t max_paths = 64;

  ClusterConfig cluster;
  int cluster_draws = 400;
  std::optional<PatternSpec> cluster_bs_pattern;  // unset: the indoor BS pattern

  PerturbSpec perturb = PerturbSpec::rw_proxy_default();
  PatternSpec ue_swap = PatternSpec::patch(1.5);
  PatternSpec bs_swap = PatternSpec::dipole();
  double bs_swap_phase_error_deg = 0.0;  // calibration offsets of the swapped BS array

  Topology topology = default_topology(8, 2);
  QuantizerSpec quantizer;
  TrainConfig train;
  int subband_stride = 1;           // training uses every n-th subband
  double dt_test_fraction = 0.2;    // DT positions held out of training
  TrainConfig finetune;
  double ol_fraction = 0.3;
  double bs_ol_fraction = 0.05;

  Type2Config type2;
  std::vector<int> type2_beams{2, 3, 4};
  std::vector<int> type2_paper_bits{41, 58, 80};
  int neural_paper_bits = 32;

  double snr_db = 10.0;
  bool rho_squared = false;
  int rate_subcarrier_stride = 1;

  void validate() const;
  int feedback_bits() const { return topology.latent_dim() * quantizer.bits; }
};

/// Throws ConfigError naming the offending key for unknown sections, unknown
/// keys and malformed values.
ExperimentConfig parse_experiment_config(std::string_view text);
ExperimentConfig load_experiment_config(const std::string& path);
/// Complete, re-parseable listing of `cfg`.
std::string format_experiment_config(const ExperimentConfig& cfg);

struct Corpora {
  Corpus dt_indoor;
  Corpus rw_proxy;
  Corpus cluster;
  Corpus dt_outdoor;
  Corpus change_ue;  // DT indoor with only the UE pattern swapped
  Corpus change_bs;  // DT indoor with only the BS pattern swapped
};

Corpora build_corpora(const ExperimentConfig& cfg, int jobs);

/// Position partitions shared by every stage.
struct Splits {
  std::vector<int> dt_test;
  std::vector<int> dt_train;
  std::vector<int> rw_ol;
  std::vector<int> rw_eval;
  std::vector<int> bs_ol;
  std::vector<int> bs_eval;
};

Splits make_splits(const ExperimentConfig& cfg, const Corpus& dt_indoor, const Corpus& rw_proxy,
                   const Corpus& change_bs);

/// Precoders of the given positions (all when empty), every `stride`-th subband.
std::vector<Precoder> select_precoders(const Corpus& c, const std::vector<int>& positions,
                                       int stride = 1);

/// Model slots: 0 indoor, 1 outdoor, 2 cluster.
inline constexpr const char* kModelNames[] = {"indoor", "outdoor", "cluster"};

TrainResult<float> train_model(const ExperimentConfig& cfg, std::span<const Precoder> data,
                               int slot);
TrainResult<float> finetune_model(const ExperimentConfig& cfg, const ModelParams<float>& model,
                                  std::span<const Precoder> ol, int slot);

std::vector<Precoder> neural_reconstruct(const ExperimentConfig& cfg,
                                         const ModelParams<float>& model,
                                         std::span<const Precoder> ps);
std::vector<Precoder> type2_reconstruct(const Type2Config& cfg, std::span<const Precoder> ps);

/// Rate proxy of several reconstructions of the same corpus subset. Every
/// entry of `methods` is aligned with select_precoders(c, positions).
std::vector<double> corpus_rates(const ExperimentConfig& cfg, const Corpus& c,
                                 const std::vector<int>& positions,
                                 const std::vector<std::vector<Precoder>>& methods, int jobs);

/// Per-position DT-versus-RW path similarity at a named probe.
struct ProbeRow {
  std::string label;
  int position_id = 0;
  double eta_primary = 0.0;
  double eta_secondary = 0.0;
};

/// Probes A4, D4, F4, G, H; the two strongest paths (antenna gains
/// included) of each corpus are paired by rank.
std::vector<ProbeRow> path_similarity_table(const Corpus& dt, const Corpus& rw);

struct Table3Row {
  std::string scenario;
  double rho = 0.0;
};

// Pipeline stages. Each reads and writes files below `out_dir`.
void cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir, int jobs);
void cmd_train(const ExperimentConfig& cfg, const std::string& out_dir);
void cmd_finetune(const ExperimentConfig& cfg, const std::string& out_dir);
void cmd_eval(const ExperimentConfig& cfg, const std::string& out_dir, int jobs);
void cmd_report(const std::string& run_dir);

}  // namespace csidt
