// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "csidt/scene.hpp"

namespace csidt {
namespace {

TEST(PatternGain, Families) {
  const Vec3 x = Vec3::UnitX();
  EXPECT_DOUBLE_EQ(pattern_gain(PatternSpec::isotropic(), x, Vec3(0, 0.6, 0.8)), 1.0);
  EXPECT_DOUBLE_EQ(pattern_gain(PatternSpec::patch(1.0, 2.5), x, x), 2.5);
  const double psi = std::numbers::pi / 3;
  const Vec3 d(std::cos(psi), std::sin(psi), 0);
  EXPECT_NEAR(pattern_gain(PatternSpec::patch(2.0), x, d), 0.25, 1e-15);
  EXPECT_DOUBLE_EQ(pattern_gain(PatternSpec::patch(1.0), x, -x), 0.0);
  EXPECT_NEAR(pattern_gain(PatternSpec::dipole(), Vec3::UnitZ(), x), 1.0, 1e-15);
  EXPECT_NEAR(pattern_gain(PatternSpec::dipole(), Vec3::UnitZ(), Vec3::UnitZ()), 0.0, 1e-15);
  EXPECT_THROW(pattern_gain(PatternSpec::patch(1.0), x, Vec3(2, 0, 0)), InvalidArgument);
}

TEST(PatternSpec, ParseFormatRoundTrip) {
  for (const auto& p : {PatternSpec::isotropic(), PatternSpec::patch(1.5), PatternSpec::dipole(2.0),
                        PatternSpec::patch(4.0, 0.5)}) {
    EXPECT_EQ(parse_pattern(format_pattern(p)), p);
  }
  EXPECT_THROW(parse_pattern("horn"), ConfigError);
  EXPECT_THROW(parse_pattern("patch:x"), ConfigError);
}

TEST(SteeringVector, BroadsideEndfireAndNorm) {
  const double wl = 0.1;
  auto a = uniform_linear_array(2);
  a.reference_wavelength_m = wl;
  const CVector broad = steering_vector(a, Vec3::UnitX(), wl);
  EXPECT_NEAR(std::abs(broad(0) - broad(1)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(broad(0)), 1.0 / std::sqrt(2.0), 1e-15);
  const CVector end = steering_vector(a, Vec3::UnitY(), wl);
  EXPECT_NEAR(std::abs(end(0) + end(1)), 0.0, 1e-14);
  auto big = uniform_linear_array(8);
  big.reference_wavelength_m = wl;
  EXPECT_NEAR(steering_vector(big, Vec3(0.3, -0.4, std::sqrt(0.75)), wl).norm(), 1.0, 1e-14);
  EXPECT_THROW(steering_vector(big, Vec3::UnitX(), 0.0), InvalidArgument);
}

TEST(SteeringVector, ElementPhaseOffsets) {
  const double wl = 0.1;
  auto a = uniform_linear_array(4);
  a.reference_wavelength_m = wl;
  const Vec3 dir = Vec3(0.6, 0.8, 0.0);
  const CVector ideal = steering_vector(a, dir, wl);
  a.element_phase_rad = {0.1, -0.7, 2.0, 0.0};
  const CVector off = steering_vector(a, dir, wl);
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(std::abs(off(k) - ideal(k) * std::polar(1.0, a.element_phase_rad[k])), 0.0, 1e-15);
  }
  a.element_phase_rad.pop_back();
  EXPECT_THROW(steering_vector(a, dir, wl), DimensionError);
}

TEST(Presets, CorridorAndCampus) {
  const auto c = preset_scene("corridor");
  EXPECT_EQ(c.scene.reflectors.size(), 6u);
  EXPECT_TRUE(c.scene.bounds_max.isApprox(Vec3(19.7, 5.93, 2.8)));
  EXPECT_DOUBLE_EQ(c.grid_pitch_m, 0.5);
  for (const auto& r : c.scene.reflectors) EXPECT_NEAR(r.normal.norm(), 1.0, 1e-15);
  for (const auto& m : c.scene.materials) {
    EXPECT_GE(m.gamma, 0.0);
    EXPECT_LE(m.gamma, 1.0);
  }
  for (const auto& p : c.ue_grid) EXPECT_TRUE(c.scene.inside(p));
  PresetOptions fine;
  fine.indoor_grid_pitch_m = 0.25;
  const auto d = preset_scene("corridor", fine);
  EXPECT_DOUBLE_EQ(d.grid_pitch_m, 0.25);
  EXPECT_EQ(d.ue_grid.size(), 71u * 20u);
  for (const auto& p : d.ue_grid) EXPECT_TRUE(d.scene.inside(p));
  fine.indoor_grid_pitch_m = 0.0;
  EXPECT_THROW(preset_scene("corridor", fine), InvalidArgument);
  const auto o = preset_scene("campus_square");
  EXPECT_DOUBLE_EQ(o.grid_pitch_m, 2.0);
  EXPECT_THROW(preset_scene("atrium"), InvalidArgument);
}

TEST(Presets, CorridorGridMatchesEnumeration) {
  // 0.5 m lattice from 1.5 m to the far wall minus 0.5 m, and 0.5 m from
  // both side walls.
  const auto c = preset_scene("corridor");
  int count = 0;
  for (double x = 1.5; x <= 19.7 - 0.5 + 1e-9; x += 0.5)
    for (double y = 0.5; y <= 5.93 - 0.5 + 1e-9; y += 0.5) ++count;
  EXPECT_EQ(static_cast<int>(c.ue_grid.size()), count);
}

TEST(SceneText, RoundTrip) {
  const auto c = preset_scene("campus_square");
  const auto text = serialize_scene(c.scene);
  const auto back = parse_scene(text);
  EXPECT_EQ(serialize_scene(back), text);
  EXPECT_EQ(back.reflectors.size(), c.scene.reflectors.size());
  EXPECT_THROW(parse_scene("[wall]\nx = 1\n"), Error);
}

TEST(Scene, ValidateRejectsMalformed) {
  auto s = preset_scene("corridor").scene;
  s.reflectors[0].normal = Vec3(0, 0, 2);
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = preset_scene("corridor").scene;
  s.materials[0].gamma = 1.5;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = preset_scene("corridor").scene;
  s.reflectors[0].material = 42;
  EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(AntennaArray, OrientationAndGain) {
  auto a = uniform_linear_array(4, 0.5, PatternSpec::patch(1.0));
  EXPECT_DOUBLE_EQ(a.gain(Vec3::UnitX()), 1.0);
  const auto b = a.oriented(Vec3(0, 1, 0));
  EXPECT_NEAR(b.gain(Vec3::UnitY()), 1.0, 1e-15);
  EXPECT_NEAR(b.gain(Vec3::UnitX()), 0.0, 1e-15);
  EXPECT_EQ(orientation_set(100).size(), 100u);
}

}  // namespace
}  // namespace csidt
