// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <ostream>
#include <vector>

#include "csidt/scene.hpp"

namespace csidt {

/// One propagation path. `gain` carries free-space spreading, reflection
/// losses and carrier phase; antenna patterns are applied later.
struct Path {
  std::complex<double> gain;
  double delay_s = 0.0;
  Vec3 aod = Vec3::UnitX();  // departure direction at the transmitter
  Vec3 aoa = Vec3::UnitX();  // direction at the receiver towards the incoming wave
  int order = 0;             // reflection count; kDiffuseOrder for injected diffuse paths
  std::vector<int> bounces;  // reflector indices, transmitter side first

  static constexpr int kDiffuseOrder = -1;
};

struct PathSet {
  std::vector<Path> paths;
  Vec3 tx = Vec3::Zero();
  Vec3 rx = Vec3::Zero();
  double carrier_hz = 3.8e9;
};

struct TraceOptions {
  int max_order = 2;
  std::size_t max_paths = 64;
  double carrier_hz = 3.8e9;
  double eps_m = 1e-9;
};

/// Enumerate specular paths tx -> rx with up to `max_order` reflections by
/// the image-source method. Paths are sorted by descending |gain|, ties by
/// delay and then by bounce sequence.
PathSet trace_paths(const Scene& scene, const Vec3& tx, const Vec3& rx, const TraceOptions& opts);

/// G = gain * g_rx(aoa) g_tx(aod) * sqrt(Nr Nt) * a_rx(aoa) a_tx(aod)^H.
CMatrix path_channel_gain(const Path& path, const AntennaArray& bs, const AntennaArray& ue,
                          double wavelength_m);

/// Mirror `p` across the plane of `r`.
Vec3 mirror(const Vec3& p, const Reflector& r);

/// CSV dump: order,delay_s,gain_re,gain_im,aod_x,aod_y,aod_z,aoa_x,aoa_y,aoa_z
void write_paths_csv(std::ostream& out, const PathSet& set);

}  // namespace csidt
