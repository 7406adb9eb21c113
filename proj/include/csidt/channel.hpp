// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csidt/ray_tracer.hpp"

namespace csidt {

struct OfdmGrid {
  int n_subcarriers = 1620;
  double subcarrier_spacing_hz = 60e3;
  double carrier_hz = 3.8e9;
  int n_subbands = 60;

  double bandwidth_hz() const { return n_subcarriers * subcarrier_spacing_hz; }
  double wavelength_m() const { return kSpeedOfLight / carrier_hz; }
  int subcarriers_per_subband() const { return n_subcarriers / n_subbands; }
  /// Throws InvalidArgument unless the subcarriers split evenly into subbands.
  void validate() const;
};

enum class Domain : std::uint8_t { DT = 0, RwProxy = 1, Cluster = 2 };

std::string to_string(Domain d);
Domain parse_domain(const std::string& s);

/// Frequency response over the OFDM grid; subcarriers[i] is H_n for n = i + 1.
struct ChannelTensor {
  std::vector<CMatrix> subcarriers;
  int position_id = 0;
  Domain domain = Domain::DT;

  Eigen::Index n_rx() const { return subcarriers.empty() ? 0 : subcarriers.front().rows(); }
  Eigen::Index n_tx() const { return subcarriers.empty() ? 0 : subcarriers.front().cols(); }
};

/// Delay in OFDM samples, delay_s * N_c * subcarrier spacing.
double normalized_delay(double delay_s, const OfdmGrid& grid);

/// H_n = sum_l G_l exp(-j 2 pi (n / N_c) tau_l), tau_l in samples.
/// Throws InvalidArgument for an empty path set and for any delay that
/// reaches one OFDM symbol.
ChannelTensor synth_channel(const PathSet& paths, const OfdmGrid& grid, const AntennaArray& bs,
                            const AntennaArray& ue);

struct Subband {
  int id = 0;
  std::span<const CMatrix> channels;
};

/// Ordered partition of the subcarriers into grid.n_subbands equal groups.
std::vector<Subband> subband_channels(const ChannelTensor& ch, const OfdmGrid& grid);

/// Stochastic clustered multipath generator.
struct ClusterConfig {
  int n_clusters = 8;
  int rays_per_cluster = 10;
  double delay_spread_s = 60e-9;
  double angular_spread_deg = 8.0;    // Laplacian scale of ray offsets
  double power_decay = 1.5;           // cluster power ~ exp(-decay * tau / spread)
  double aod_sector_deg = 120.0;      // cluster AoD azimuths uniform in +-sector/2 of boresight
  double elevation_spread_deg = 10.0;  // cluster elevation std around the horizontal
  int layouts = 0;                     // distinct cluster layouts in a corpus; 0: one per draw
};

/// Paths of one cluster-channel draw; sum of |gain|^2 is exactly 1.
PathSet cluster_paths(const ClusterConfig& cfg, const AntennaArray& bs, const AntennaArray& ue,
                      std::uint64_t seed);

/// Cluster delays, powers and angles from `layout_seed`; ray offsets and
/// phases from `ray_seed`.
PathSet cluster_paths(const ClusterConfig& cfg, const AntennaArray& bs, const AntennaArray& ue,
                      std::uint64_t layout_seed, std::uint64_t ray_seed);

ChannelTensor cluster_channel(const ClusterConfig& cfg, const OfdmGrid& grid,
                              const AntennaArray& bs, const AntennaArray& ue, std::uint64_t seed);

/// splitmix64 finaliser; derives independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace csidt
