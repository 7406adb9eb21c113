// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "csidt/linalg.hpp"

namespace csidt {

inline constexpr double kSpeedOfLight = 299792458.0;

/// Axis-aligned planar rectangle. `extents` has exactly one zero component,
/// the axis of `normal`.
struct Reflector {
  Vec3 corner = Vec3::Zero();
  Vec3 extents = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  int material = 0;

  int normal_axis() const;
  double plane_offset() const { return corner(normal_axis()); }
  /// True when `p` lies inside the rectangle, tolerance `eps` on the in-plane axes.
  bool contains(const Vec3& p, double eps) const;
};

struct Material {
  int id = 0;
  double gamma = 0.7;  // reflection coefficient magnitude
};

struct Scene {
  std::string name;
  std::vector<Reflector> reflectors;
  std::vector<Material> materials;
  Vec3 bounds_min = Vec3::Zero();
  Vec3 bounds_max = Vec3::Zero();

  double gamma(int material) const;
  bool inside(const Vec3& p) const;
  /// Throws InvalidArgument when normals, extents, materials or bounds are malformed.
  void validate() const;
};

enum class PatternFamily { Isotropic, Patch, Dipole };

struct PatternSpec {
  PatternFamily family = PatternFamily::Isotropic;
  double q = 1.0;          // patch exponent
  double peak_gain = 1.0;  // linear amplitude scale

  static PatternSpec isotropic() { return {}; }
  static PatternSpec patch(double q, double peak = 1.0) {
    return {PatternFamily::Patch, q, peak};
  }
  static PatternSpec dipole(double peak = 1.0) { return {PatternFamily::Dipole, 1.0, peak}; }

  bool operator==(const PatternSpec&) const = default;
};

/// "isotropic", "patch:<q>", "dipole" (optionally suffixed "@<peak>").
PatternSpec parse_pattern(std::string_view text);
std::string format_pattern(const PatternSpec& p);

/// Amplitude gain of a single element towards `direction`.
///
/// `axis` is the boresight for a patch and the element axis for a dipole;
/// psi is the angle between `axis` and `direction`:
///   isotropic: 1
///   patch(q):  peak * max(cos psi, 0)^q
///   dipole:    peak * |sin psi|
double pattern_gain(const PatternSpec& p, const Vec3& axis, const Vec3& direction);

/// Antenna array. Element offsets are given in carrier wavelengths in the
/// array frame (x = boresight, y = array axis, z = up).
struct AntennaArray {
  std::vector<Vec3> elements;
  PatternSpec pattern;
  Vec3 boresight = Vec3::UnitX();
  Vec3 position = Vec3::Zero();
  double reference_wavelength_m = kSpeedOfLight / 3.8e9;
  /// Per-element phase offsets in radians; empty means an ideal array.
  std::vector<double> element_phase_rad;

  std::size_t size() const { return elements.size(); }
  /// Columns: boresight, array axis, up, all in world coordinates.
  Eigen::Matrix3d frame() const;
  /// Element gain towards a world-frame direction.
  double gain(const Vec3& direction) const;
  AntennaArray oriented(const Vec3& new_boresight) const;
};

/// N-element uniform linear array along the array y axis, centred, with the
/// given spacing in wavelengths.
AntennaArray uniform_linear_array(int n, double spacing_wavelengths = 0.5,
                                  PatternSpec pattern = PatternSpec::isotropic());

/// Unit-norm array response: a_k = exp(j 2 pi <d_k, u> / lambda) / sqrt(N).
CVector steering_vector(const AntennaArray& array, const Vec3& direction, double wavelength_m);

/// `count` horizontal unit boresights evenly spaced on the azimuth circle.
std::vector<Vec3> orientation_set(int count = 100);

/// A scene together with its default BS placement and UE sampling grid.
struct ScenePreset {
  Scene scene;
  AntennaArray bs;
  AntennaArray ue;  // template; position and boresight set per grid point
  std::vector<Vec3> ue_grid;
  double grid_pitch_m = 0.0;
  int default_max_order = 2;
};

struct PresetOptions {
  int n_tx = 8;
  int n_rx = 8;
  double bs_height_m = 2.0;
  /// Corridor UE grid pitch.
  double indoor_grid_pitch_m = 0.5;
  PatternSpec bs_pattern = PatternSpec::patch(1.0);
  PatternSpec ue_pattern = PatternSpec::patch(1.0);
  double carrier_hz = 3.8e9;
};

/// "corridor" or "campus_square".
ScenePreset preset_scene(std::string_view name, const PresetOptions& opts = {});

std::string serialize_scene(const Scene& scene);
Scene parse_scene(std::string_view text);

}  // namespace csidt
