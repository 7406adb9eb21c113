// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/channel.hpp"

#include <algorithm>
#include <numbers>
#include <random>

namespace csidt {

void OfdmGrid::validate() const {
  if (n_subcarriers <= 0 || n_subbands <= 0) {
    throw InvalidArgument("OFDM grid needs positive subcarrier and subband counts");
  }
  if (n_subcarriers % n_subbands != 0) {
    throw InvalidArgument("OFDM grid: " + std::to_string(n_subcarriers) +
                          " subcarriers do not split into " + std::to_string(n_subbands) +
                          " equal subbands");
  }
  if (!(subcarrier_spacing_hz > 0.0) || !(carrier_hz > 0.0)) {
    throw InvalidArgument("OFDM grid: spacing and carrier must be positive");
  }
}

std::string to_string(Domain d) {
  switch (d) {
    case Domain::DT: return "DT";
    case Domain::RwProxy: return "RW_PROXY";
    case Domain::Cluster: return "CLUSTER";
  }
  return "?";
}

Domain parse_domain(const std::string& s) {
  if (s == "DT") return Domain::DT;
  if (s == "RW_PROXY") return Domain::RwProxy;
  if (s == "CLUSTER") return Domain::Cluster;
  throw FormatError("unknown domain tag '" + s + "'");
}

double normalized_delay(double delay_s, const OfdmGrid& grid) {
  return delay_s * grid.n_subcarriers * grid.subcarrier_spacing_hz;
}

ChannelTensor synth_channel(const PathSet& paths, const OfdmGrid& grid, const AntennaArray& bs,
                            const AntennaArray& ue) {
  grid.validate();
  if (paths.paths.empty()) throw InvalidArgument("synth_channel: empty path set");
  const double wl = grid.wavelength_m();
  const int nc = grid.n_subcarriers;

  std::vector<CMatrix> gains;
  std::vector<double> taus;
  gains.reserve(paths.paths.size());
  for (const auto& p : paths.paths) {
    const double tau = normalized_delay(p.delay_s, grid);
    if (!(tau >= 0.0) || tau >= nc) {
      throw InvalidArgument("synth_channel: path delay " + std::to_string(p.delay_s) +
                            " s falls outside one OFDM symbol");
    }
    gains.push_back(path_channel_gain(p, bs, ue, wl));
    taus.push_back(tau);
  }

  // H = G E with G holding the vectorised path gains column by column and
  // E(l, i) the phase of path l on subcarrier i + 1.
  const auto nr = static_cast<Eigen::Index>(ue.size());
  const auto nt = static_cast<Eigen::Index>(bs.size());
  const auto n_paths = static_cast<Eigen::Index>(gains.size());
  CMatrix g(nr * nt, n_paths);
  CMatrix e(n_paths, nc);
  for (Eigen::Index l = 0; l < n_paths; ++l) {
    g.col(l) = gains[static_cast<std::size_t>(l)].reshaped();
    for (int i = 0; i < nc; ++i) {
      const double n = i + 1;
      // Reduce the phase in cycles first so large n * tau stays exact.
      const double cycles = std::fmod(n * taus[static_cast<std::size_t>(l)], static_cast<double>(nc)) / nc;
      e(l, i) = std::polar(1.0, -2.0 * std::numbers::pi * cycles);
    }
  }
  const CMatrix h = g * e;
  ChannelTensor out;
  out.subcarriers.reserve(static_cast<std::size_t>(nc));
  for (int i = 0; i < nc; ++i) out.subcarriers.push_back(h.col(i).reshaped(nr, nt));
  return out;
}

std::vector<Subband> subband_channels(const ChannelTensor& ch, const OfdmGrid& grid) {
  grid.validate();
  if (static_cast<int>(ch.subcarriers.size()) != grid.n_subcarriers) {
    throw DimensionError("subband_channels: tensor has " + std::to_string(ch.subcarriers.size()) +
                         " subcarriers, grid expects " + std::to_string(grid.n_subcarriers));
  }
  const auto per = static_cast<std::size_t>(grid.subcarriers_per_subband());
  std::vector<Subband> out;
  out.reserve(static_cast<std::size_t>(grid.n_subbands));
  const std::span<const CMatrix> all(ch.subcarriers);
  for (int k = 0; k < grid.n_subbands; ++k) {
    out.push_back({k, all.subspan(static_cast<std::size_t>(k) * per, per)});
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = (seed ^ index) + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

double laplace(std::mt19937_64& rng, double scale) {
  if (scale == 0.0) return 0.0;
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const double x = u(rng);
  return -scale * (x < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(x));
}

Vec3 direction_in_frame(const Eigen::Matrix3d& frame, double az, double el) {
  const Vec3 local(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  return (frame * local).normalized();
}

}  // namespace

PathSet cluster_paths(const ClusterConfig& cfg, const AntennaArray& bs, const AntennaArray& ue,
                      std::uint64_t seed) {
  return cluster_paths(cfg, bs, ue, seed, seed);
}

PathSet cluster_paths(const ClusterConfig& cfg, const AntennaArray& bs, const AntennaArray& ue,
                      std::uint64_t layout_seed, std::uint64_t ray_seed) {
  if (cfg.n_clusters < 1 || cfg.rays_per_cluster < 1) {
    throw InvalidArgument("cluster_paths: need at least one cluster and one ray");
  }
  constexpr double deg = std::numbers::pi / 180.0;
  // Equal seeds share one stream.
  std::mt19937_64 rng(layout_seed);
  std::mt19937_64 ray_stream(ray_seed);
  auto& ray_rng = layout_seed == ray_seed ? rng : ray_stream;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto n = static_cast<std::size_t>(cfg.n_clusters);
  std::vector<double> delays(n);
  for (auto& d : delays) d = cfg.delay_spread_s == 0.0 ? 0.0 : -cfg.delay_spread_s * std::log(1.0 - unit(rng));
  std::sort(delays.begin(), delays.end());
  const double d0 = delays.front();
  for (auto& d : delays) d -= d0;

  std::vector<double> powers(n);
  double total = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    powers[c] = cfg.delay_spread_s == 0.0
                    ? 1.0
                    : std::exp(-cfg.power_decay * delays[c] / cfg.delay_spread_s);
    total += powers[c];
  }

  const auto bs_frame = bs.frame();
  const auto ue_frame = ue.frame();
  PathSet out;
  for (std::size_t c = 0; c < n; ++c) {
    const double aod_az = (unit(rng) - 0.5) * cfg.aod_sector_deg * deg;
    const double aod_el = normal(rng) * cfg.elevation_spread_deg * deg;
    const double aoa_az = (unit(rng) - 0.5) * 2.0 * std::numbers::pi;
    const double aoa_el = normal(rng) * cfg.elevation_spread_deg * deg;
    const double amp = std::sqrt(powers[c] / total / cfg.rays_per_cluster);
    for (int r = 0; r < cfg.rays_per_cluster; ++r) {
      Path p;
      const double spread = cfg.angular_spread_deg * deg;
      p.aod = direction_in_frame(bs_frame, aod_az + laplace(ray_rng, spread),
                                 std::clamp(aod_el + laplace(ray_rng, spread), -1.5, 1.5));
      p.aoa = direction_in_frame(ue_frame, aoa_az + laplace(ray_rng, spread),
                                 std::clamp(aoa_el + laplace(ray_rng, spread), -1.5, 1.5));
      p.gain = std::polar(amp, 2.0 * std::numbers::pi * unit(ray_rng));
      p.delay_s = delays[c];
      p.order = 0;
      out.paths.push_back(p);
    }
  }
  return out;
}

ChannelTensor cluster_channel(const ClusterConfig& cfg, const OfdmGrid& grid,
                              const AntennaArray& bs, const AntennaArray& ue, std::uint64_t seed) {
  auto ch = synth_channel(cluster_paths(cfg, bs, ue, seed), grid, bs, ue);
  ch.domain = Domain::Cluster;
  return ch;
}

}  // namespace csidt
