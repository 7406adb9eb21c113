// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/ray_tracer.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "csidt/error.hpp"
#include "oracles.hpp"

namespace csidt {
namespace {

constexpr double kCarrier = 3.8e9;

TraceOptions opts(int order) {
  TraceOptions o;
  o.max_order = order;
  o.max_paths = 1000;
  o.carrier_hz = kCarrier;
  return o;
}

// Match traced paths against the analytic image set by length and gain.
void expect_matches_box(const Scene& s, const Vec3& tx, const Vec3& rx, int order) {
  const auto got = trace_paths(s, tx, rx, opts(order)).paths;
  const std::array<double, 3> size{s.bounds_max.x(), s.bounds_max.y(), s.bounds_max.z()};
  const auto want = oracle::box_image_paths(size, {tx.x(), tx.y(), tx.z()}, {rx.x(), rx.y(), rx.z()},
                                            {0.7, 0.7, 0.7}, {0.7, 0.7, 0.5}, order);
  ASSERT_EQ(got.size(), want.size());
  const double wl = kSpeedOfLight / kCarrier;
  std::vector<bool> used(got.size(), false);
  for (const auto& w : want) {
    const double amp = wl / (4.0 * std::numbers::pi * w.length) * w.gamma_product;
    bool found = false;
    for (std::size_t i = 0; i < got.size() && !found; ++i) {
      if (used[i]) continue;
      const double len = got[i].delay_s * kSpeedOfLight;
      if (std::abs(len - w.length) > 1e-9 * w.length) continue;
      if (std::abs(std::abs(got[i].gain) - amp) > 1e-12 * amp) continue;
      if (got[i].order != w.order) continue;
      used[i] = true;
      found = true;
    }
    EXPECT_TRUE(found) << "missing path of length " << w.length << " order " << w.order;
  }
}

TEST(RayTracer, CorridorMatchesImageEnumeration) {
  const auto p = preset_scene("corridor");
  expect_matches_box(p.scene, p.bs.position, Vec3(7.3, 1.9, 1.2), 2);
  expect_matches_box(p.scene, p.bs.position, Vec3(15.1, 4.4, 0.9), 1);
  expect_matches_box(p.scene, Vec3(3.3, 2.2, 1.7), Vec3(11.0, 0.8, 1.4), 2);
}

TEST(RayTracer, PathCountsInShoebox) {
  const auto p = preset_scene("corridor");
  const Vec3 rx(9.2, 3.1, 1.3);
  EXPECT_EQ(trace_paths(p.scene, p.bs.position, rx, opts(0)).paths.size(), 1u);
  EXPECT_EQ(trace_paths(p.scene, p.bs.position, rx, opts(1)).paths.size(), 7u);
  EXPECT_EQ(trace_paths(p.scene, p.bs.position, rx, opts(2)).paths.size(), 25u);
}

TEST(RayTracer, LosGainAndGeometry) {
  const auto p = preset_scene("corridor");
  const Vec3 tx = p.bs.position, rx(6.0, 1.0, 1.2);
  const auto set = trace_paths(p.scene, tx, rx, opts(0));
  ASSERT_EQ(set.paths.size(), 1u);
  const auto& los = set.paths[0];
  const double d = (rx - tx).norm();
  const double wl = kSpeedOfLight / kCarrier;
  EXPECT_NEAR(los.delay_s, d / kSpeedOfLight, 1e-18);
  EXPECT_NEAR(std::abs(los.gain), wl / (4 * std::numbers::pi * d), 1e-15);
  EXPECT_NEAR(std::arg(los.gain * std::polar(1.0, 2 * std::numbers::pi * d / wl)), 0.0, 1e-9);
  EXPECT_TRUE(los.aod.isApprox((rx - tx).normalized(), 1e-12));
  EXPECT_TRUE(los.aoa.isApprox((tx - rx).normalized(), 1e-12));
  EXPECT_TRUE(los.bounces.empty());
}

TEST(RayTracer, ZeroReflectionLeavesLos) {
  auto p = preset_scene("corridor");
  for (auto& m : p.scene.materials) m.gamma = 0.0;
  const auto set = trace_paths(p.scene, p.bs.position, Vec3(12.0, 2.0, 1.2), opts(2));
  ASSERT_EQ(set.paths.size(), 1u);
  EXPECT_EQ(set.paths[0].order, 0);
}

TEST(RayTracer, SortedByGainAndTruncated) {
  const auto p = preset_scene("corridor");
  auto o = opts(2);
  const auto all = trace_paths(p.scene, p.bs.position, Vec3(8.0, 2.5, 1.2), o).paths;
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_GE(std::abs(all[i - 1].gain), std::abs(all[i].gain));
  o.max_paths = 5;
  const auto cut = trace_paths(p.scene, p.bs.position, Vec3(8.0, 2.5, 1.2), o).paths;
  ASSERT_EQ(cut.size(), 5u);
  for (std::size_t i = 0; i < cut.size(); ++i) EXPECT_EQ(cut[i].gain, all[i].gain);
}

TEST(RayTracer, SingleBounceReflectionPoint) {
  const auto p = preset_scene("corridor");
  const Vec3 tx = p.bs.position, rx(6.0, 2.0, 1.2);
  const auto set = trace_paths(p.scene, tx, rx, opts(1));
  // Floor bounce: image of tx below z = 0.
  const Vec3 img(tx.x(), tx.y(), -tx.z());
  const double d = (rx - img).norm();
  const auto it = std::find_if(set.paths.begin(), set.paths.end(),
                               [](const Path& q) { return q.bounces == std::vector<int>{0}; });
  ASSERT_NE(it, set.paths.end());
  EXPECT_NEAR(it->delay_s * kSpeedOfLight, d, 1e-12);
  EXPECT_LT(it->aod.z(), 0.0);
  EXPECT_LT(it->aoa.z(), 0.0);
}

TEST(RayTracer, OcclusionByInnerWall) {
  Scene s = preset_scene("corridor").scene;
  // Partition across the corridor at x = 10 covering the full cross-section.
  Reflector wall;
  wall.corner = Vec3(10.0, 0.0, 0.0);
  wall.extents = Vec3(0.0, s.bounds_max.y(), s.bounds_max.z());
  wall.normal = Vec3(-1, 0, 0);
  s.reflectors.push_back(wall);
  const auto set = trace_paths(s, Vec3(2.0, 3.0, 2.0), Vec3(15.0, 3.0, 1.2), opts(2));
  EXPECT_TRUE(set.paths.empty());
}

TEST(RayTracer, Mirror) {
  Reflector r;
  r.corner = Vec3(0, 0, 2.0);
  r.extents = Vec3(1, 1, 0);
  r.normal = Vec3(0, 0, -1);
  EXPECT_TRUE(mirror(Vec3(0.3, 0.4, 0.5), r).isApprox(Vec3(0.3, 0.4, 3.5)));
}

TEST(RayTracer, RejectsBadInput) {
  const auto p = preset_scene("corridor");
  const Vec3 a(3, 3, 1), b(5, 3, 1);
  EXPECT_THROW(trace_paths(p.scene, a, a, opts(1)), InvalidArgument);
  EXPECT_THROW(trace_paths(p.scene, a, b, opts(4)), InvalidArgument);
  EXPECT_THROW(trace_paths(p.scene, a, b, opts(-1)), InvalidArgument);
  auto o = opts(1);
  o.carrier_hz = 0.0;
  EXPECT_THROW(trace_paths(p.scene, a, b, o), InvalidArgument);
  EXPECT_THROW(trace_paths(p.scene, a, Vec3(50, 3, 1), opts(1)), InvalidArgument);
}

TEST(RayTracer, PathChannelGainRankOne) {
  const auto p = preset_scene("corridor");
  const auto set = trace_paths(p.scene, p.bs.position, Vec3(7.0, 2.0, 1.2), opts(0));
  auto ue = p.ue;
  ue.position = Vec3(7.0, 2.0, 1.2);
  ue.boresight = Vec3(-1, 0, 0);
  const double wl = kSpeedOfLight / kCarrier;
  const CMatrix g = path_channel_gain(set.paths[0], p.bs, ue, wl);
  ASSERT_EQ(g.rows(), 8);
  ASSERT_EQ(g.cols(), 8);
  Eigen::JacobiSVD<CMatrix> svd(g);
  EXPECT_LT(svd.singularValues()(1), 1e-12 * svd.singularValues()(0));
  const double expect = std::abs(set.paths[0].gain) * p.bs.gain(set.paths[0].aod) *
                        ue.gain(set.paths[0].aoa) * 8.0;
  EXPECT_NEAR(svd.singularValues()(0), expect, 1e-12 * expect);
}

TEST(RayTracer, CsvDump) {
  const auto p = preset_scene("corridor");
  const auto set = trace_paths(p.scene, p.bs.position, Vec3(7.0, 2.0, 1.2), opts(1));
  std::ostringstream os;
  write_paths_csv(os, set);
  const auto text = os.str();
  EXPECT_EQ(text.rfind("order,delay_s,", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), set.paths.size() + 1);
}

}  // namespace
}  // namespace csidt
