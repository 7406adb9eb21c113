// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/channel.hpp"

#include <numbers>

#include <gtest/gtest.h>

#include "csidt/error.hpp"

namespace csidt {
namespace {

OfdmGrid small_grid() {
  OfdmGrid g;
  g.n_subcarriers = 96;
  g.n_subbands = 8;
  return g;
}

struct Fixture {
  ScenePreset p = preset_scene("corridor");
  AntennaArray ue;
  PathSet paths;
  Fixture() {
    ue = p.ue;
    ue.position = Vec3(9.0, 2.0, 1.2);
    ue.boresight = Vec3(-1, 0, 0);
    TraceOptions o;
    o.max_order = 2;
    paths = trace_paths(p.scene, p.bs.position, ue.position, o);
  }
};

// Direct per-subcarrier sum with std::exp, no phase reduction.
CMatrix direct_sum(const PathSet& ps, const OfdmGrid& g, const AntennaArray& bs,
                   const AntennaArray& ue, int n) {
  CMatrix h = CMatrix::Zero(static_cast<Eigen::Index>(ue.size()), static_cast<Eigen::Index>(bs.size()));
  for (const auto& p : ps.paths) {
    const double tau = p.delay_s * g.n_subcarriers * g.subcarrier_spacing_hz;
    h += path_channel_gain(p, bs, ue, g.wavelength_m()) *
         std::exp(std::complex<double>(0.0, -2.0 * std::numbers::pi * n * tau / g.n_subcarriers));
  }
  return h;
}

TEST(Channel, MatchesDirectSum) {
  Fixture f;
  const auto g = small_grid();
  const auto ch = synth_channel(f.paths, g, f.p.bs, f.ue);
  ASSERT_EQ(ch.subcarriers.size(), 96u);
  EXPECT_EQ(ch.n_rx(), 8);
  EXPECT_EQ(ch.n_tx(), 8);
  for (int n : {1, 2, 17, 50, 96}) {
    const CMatrix ref = direct_sum(f.paths, g, f.p.bs, f.ue, n);
    EXPECT_LE((ch.subcarriers[static_cast<std::size_t>(n - 1)] - ref).norm(), 1e-10 * ref.norm()) << n;
  }
}

TEST(Channel, SinglePathFlatMagnitude) {
  Fixture f;
  PathSet one = f.paths;
  one.paths.resize(1);
  const auto ch = synth_channel(one, small_grid(), f.p.bs, f.ue);
  const double n0 = ch.subcarriers.front().norm();
  for (const auto& h : ch.subcarriers) EXPECT_NEAR(h.norm(), n0, 1e-12 * n0);
}

TEST(Channel, DelayShiftIsLinearPhase) {
  Fixture f;
  const auto g = small_grid();
  PathSet one = f.paths;
  one.paths.resize(1);
  PathSet late = one;
  const double shift = 3.0 / (g.n_subcarriers * g.subcarrier_spacing_hz);  // 3 samples
  late.paths[0].delay_s += shift;
  const auto a = synth_channel(one, g, f.p.bs, f.ue);
  const auto b = synth_channel(late, g, f.p.bs, f.ue);
  for (int n = 1; n <= g.n_subcarriers; ++n) {
    const auto rot = std::exp(std::complex<double>(0, -2.0 * std::numbers::pi * n * 3.0 / g.n_subcarriers));
    const auto& ha = a.subcarriers[static_cast<std::size_t>(n - 1)];
    EXPECT_LE((b.subcarriers[static_cast<std::size_t>(n - 1)] - ha * rot).norm(), 1e-10 * ha.norm());
  }
}

TEST(Channel, RejectsBadInput) {
  Fixture f;
  auto g = small_grid();
  EXPECT_THROW(synth_channel(PathSet{}, g, f.p.bs, f.ue), InvalidArgument);
  PathSet far = f.paths;
  far.paths[0].delay_s = 1.0 / g.subcarrier_spacing_hz;  // one full symbol
  EXPECT_THROW(synth_channel(far, g, f.p.bs, f.ue), InvalidArgument);
  g.n_subbands = 7;
  EXPECT_THROW(synth_channel(f.paths, g, f.p.bs, f.ue), InvalidArgument);
}

TEST(Channel, SubbandPartition) {
  Fixture f;
  const auto g = small_grid();
  const auto ch = synth_channel(f.paths, g, f.p.bs, f.ue);
  const auto sb = subband_channels(ch, g);
  ASSERT_EQ(sb.size(), 8u);
  for (int k = 0; k < 8; ++k) {
    EXPECT_EQ(sb[static_cast<std::size_t>(k)].id, k);
    ASSERT_EQ(sb[static_cast<std::size_t>(k)].channels.size(), 12u);
    EXPECT_EQ(&sb[static_cast<std::size_t>(k)].channels[0], &ch.subcarriers[static_cast<std::size_t>(12 * k)]);
  }
  auto bad = g;
  bad.n_subcarriers = 48;
  EXPECT_THROW(subband_channels(ch, bad), DimensionError);
}

TEST(Channel, DefaultGridSplits) {
  const OfdmGrid g;
  EXPECT_NO_THROW(g.validate());
  EXPECT_EQ(g.subcarriers_per_subband(), 27);
}

TEST(Channel, DomainTags) {
  for (auto d : {Domain::DT, Domain::RwProxy, Domain::Cluster}) EXPECT_EQ(parse_domain(to_string(d)), d);
  EXPECT_THROW(parse_domain("NOPE"), FormatError);
}

TEST(Channel, ClusterPowerAndDeterminism) {
  Fixture f;
  const ClusterConfig cfg;
  const auto a = cluster_paths(cfg, f.p.bs, f.ue, 42);
  const auto b = cluster_paths(cfg, f.p.bs, f.ue, 42);
  const auto c = cluster_paths(cfg, f.p.bs, f.ue, 43);
  ASSERT_EQ(a.paths.size(), 80u);
  double power = 0.0;
  for (const auto& p : a.paths) power += std::norm(p.gain);
  EXPECT_NEAR(power, 1.0, 1e-12);
  for (std::size_t i = 0; i < a.paths.size(); ++i) EXPECT_EQ(a.paths[i].gain, b.paths[i].gain);
  EXPECT_NE(a.paths[0].gain, c.paths[0].gain);
  EXPECT_EQ(cluster_channel(cfg, small_grid(), f.p.bs, f.ue, 1).domain, Domain::Cluster);
  ClusterConfig bad;
  bad.n_clusters = 0;
  EXPECT_THROW(cluster_paths(bad, f.p.bs, f.ue, 1), InvalidArgument);
}

TEST(Channel, MixSeedSpreads) {
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
  EXPECT_EQ(mix_seed(7, 3), mix_seed(7, 3));
}

}  // namespace
}  // namespace csidt
