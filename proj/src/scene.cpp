// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/scene.hpp"

#include <numbers>

#include "csidt/kv_text.hpp"

namespace csidt {
namespace {

constexpr double kUnitTol = 1e-9;

void require_unit(const Vec3& v, const char* what) {
  if (!v.allFinite() || std::abs(v.norm() - 1.0) > kUnitTol) {
    throw InvalidArgument(std::string(what) + " must be a unit vector");
  }
}

Vec3 to_vec3(const std::vector<double>& v, const char* key) {
  if (v.size() != 3) throw ConfigError(std::string(key) + " needs 3 components");
  return {v[0], v[1], v[2]};
}

std::vector<double> from_vec3(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Reflector rect(Vec3 corner, Vec3 extents, Vec3 normal, int material) {
  return Reflector{corner, extents, normal, material};
}

}  // namespace

int Reflector::normal_axis() const {
  int axis = 0;
  normal.cwiseAbs().maxCoeff(&axis);
  return axis;
}

bool Reflector::contains(const Vec3& p, double eps) const {
  const int a = normal_axis();
  for (int k = 0; k < 3; ++k) {
    if (k == a) continue;
    const double lo = std::min(corner(k), corner(k) + extents(k));
    const double hi = std::max(corner(k), corner(k) + extents(k));
    if (p(k) < lo - eps || p(k) > hi + eps) return false;
  }
  return true;
}

double Scene::gamma(int material) const {
  for (const auto& m : materials)
    if (m.id == material) return m.gamma;
  throw InvalidArgument("scene '" + name + "': unknown material id " + std::to_string(material));
}

bool Scene::inside(const Vec3& p) const {
  return (p.array() >= bounds_min.array()).all() && (p.array() <= bounds_max.array()).all();
}

void Scene::validate() const {
  if (!((bounds_max.array() > bounds_min.array()).all())) {
    throw InvalidArgument("scene '" + name + "': degenerate bounds");
  }
  for (const auto& m : materials) {
    if (!(m.gamma >= 0.0 && m.gamma <= 1.0)) {
      throw InvalidArgument("scene '" + name + "': reflection coefficient outside [0,1]");
    }
  }
  for (std::size_t i = 0; i < reflectors.size(); ++i) {
    const auto& r = reflectors[i];
    require_unit(r.normal, "reflector normal");
    const int a = r.normal_axis();
    if (std::abs(std::abs(r.normal(a)) - 1.0) > kUnitTol) {
      throw InvalidArgument("reflector " + std::to_string(i) + " is not axis-aligned");
    }
    for (int k = 0; k < 3; ++k) {
      const bool zero = r.extents(k) == 0.0;
      if ((k == a) != zero) {
        throw InvalidArgument("reflector " + std::to_string(i) +
                              " must have zero extent exactly along its normal");
      }
    }
    (void)gamma(r.material);
  }
}

PatternSpec parse_pattern(std::string_view text) {
  PatternSpec p;
  auto body = text;
  if (const auto at = text.find('@'); at != std::string_view::npos) {
    p.peak_gain = parse_double(text.substr(at + 1));
    body = text.substr(0, at);
  }
  if (body == "isotropic") {
    p.family = PatternFamily::Isotropic;
  } else if (body == "dipole") {
    p.family = PatternFamily::Dipole;
  } else if (body.starts_with("patch")) {
    p.family = PatternFamily::Patch;
    if (body.size() > 5) {
      if (body[5] != ':') throw ConfigError("bad pattern '" + std::string(text) + "'");
      p.q = parse_double(body.substr(6));
    }
  } else {
    throw ConfigError("unknown antenna pattern '" + std::string(text) + "'");
  }
  return p;
}

std::string format_pattern(const PatternSpec& p) {
  std::string out;
  switch (p.family) {
    case PatternFamily::Isotropic: out = "isotropic"; break;
    case PatternFamily::Patch: out = "patch:" + format_double(p.q); break;
    case PatternFamily::Dipole: out = "dipole"; break;
  }
  if (p.peak_gain != 1.0) out += "@" + format_double(p.peak_gain);
  return out;
}

double pattern_gain(const PatternSpec& p, const Vec3& axis, const Vec3& direction) {
  require_unit(axis, "pattern axis");
  require_unit(direction, "direction");
  const double c = std::clamp(axis.dot(direction), -1.0, 1.0);
  switch (p.family) {
    case PatternFamily::Isotropic: return 1.0;
    case PatternFamily::Patch: return p.peak_gain * std::pow(std::max(c, 0.0), p.q);
    case PatternFamily::Dipole: return p.peak_gain * std::sqrt(std::max(0.0, 1.0 - c * c));
  }
  return 0.0;
}

Eigen::Matrix3d AntennaArray::frame() const {
  const Vec3 x = boresight.normalized();
  Vec3 up_hint = Vec3::UnitZ();
  if (std::abs(x.dot(up_hint)) > 1.0 - 1e-12) up_hint = Vec3::UnitX();
  const Vec3 y = up_hint.cross(x).normalized();
  const Vec3 z = x.cross(y);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

double AntennaArray::gain(const Vec3& direction) const {
  const auto r = frame();
  const Vec3 axis = pattern.family == PatternFamily::Dipole ? Vec3(r.col(2)) : Vec3(r.col(0));
  return pattern_gain(pattern, axis, direction);
}

AntennaArray AntennaArray::oriented(const Vec3& new_boresight) const {
  AntennaArray out = *this;
  out.boresight = new_boresight.normalized();
  return out;
}

AntennaArray uniform_linear_array(int n, double spacing_wavelengths, PatternSpec pattern) {
  if (n < 1) throw InvalidArgument("array needs at least one element");
  AntennaArray a;
  a.pattern = pattern;
  const double centre = 0.5 * (n - 1);
  for (int k = 0; k < n; ++k) a.elements.emplace_back(0.0, (k - centre) * spacing_wavelengths, 0.0);
  return a;
}

CVector steering_vector(const AntennaArray& array, const Vec3& direction, double wavelength_m) {
  if (!(wavelength_m > 0.0)) throw InvalidArgument("steering_vector: wavelength must be positive");
  if (array.elements.empty()) throw DimensionError("steering_vector: empty array");
  const bool offsets = !array.element_phase_rad.empty();
  if (offsets && array.element_phase_rad.size() != array.size()) {
    throw DimensionError("steering_vector: element phase count does not match the array");
  }
  const auto r = array.frame();
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(array.size()));
  CVector a(static_cast<Eigen::Index>(array.size()));
  for (std::size_t k = 0; k < array.size(); ++k) {
    const Vec3 d = r * array.elements[k] * array.reference_wavelength_m;
    double phase = 2.0 * std::numbers::pi * d.dot(direction) / wavelength_m;
    if (offsets) phase += array.element_phase_rad[k];
    a(static_cast<Eigen::Index>(k)) = std::polar(inv_sqrt_n, phase);
  }
  return a;
}

std::vector<Vec3> orientation_set(int count) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double az = 2.0 * std::numbers::pi * k / count;
    out.emplace_back(std::cos(az), std::sin(az), 0.0);
  }
  return out;
}

namespace {

ScenePreset corridor(const PresetOptions& o) {
  ScenePreset p;
  auto& s = p.scene;
  s.name = "corridor";
  const double lx = 19.7, ly = 5.93, lz = 2.8;
  s.bounds_min = Vec3::Zero();
  s.bounds_max = Vec3(lx, ly, lz);
  s.materials = {{0, 0.7}, {1, 0.5}};  // concrete walls and floor, ceiling
  s.reflectors = {
      rect({0, 0, 0}, {lx, ly, 0}, {0, 0, 1}, 0),    // floor
      rect({0, 0, lz}, {lx, ly, 0}, {0, 0, -1}, 1),  // ceiling
      rect({0, 0, 0}, {0, ly, lz}, {1, 0, 0}, 0),    // x = 0 end wall
      rect({lx, 0, 0}, {0, ly, lz}, {-1, 0, 0}, 0),  // x = lx end wall
      rect({0, 0, 0}, {lx, 0, lz}, {0, 1, 0}, 0),    // y = 0 side wall
      rect({0, ly, 0}, {lx, 0, lz}, {0, -1, 0}, 0),  // y = ly side wall
  };
  const double wl = kSpeedOfLight / o.carrier_hz;
  p.bs = uniform_linear_array(o.n_tx, 0.5, o.bs_pattern);
  p.bs.reference_wavelength_m = wl;
  p.bs.position = Vec3(1.0, 0.5 * ly, o.bs_height_m);
  p.bs.boresight = Vec3::UnitX();
  p.ue = uniform_linear_array(o.n_rx, 0.5, o.ue_pattern);
  p.ue.reference_wavelength_m = wl;
  const double pitch = o.indoor_grid_pitch_m;
  if (!(pitch > 0.0)) throw InvalidArgument("corridor: grid pitch must be positive");
  p.grid_pitch_m = pitch;
  p.default_max_order = 2;
  // Walkable area in front of the BS with a 0.5 m wall clearance.
  const int nx = static_cast<int>(std::floor((lx - 0.5 - 1.5) / pitch + 1e-9)) + 1;
  const int ny = static_cast<int>(std::floor((ly - 0.5 - 0.5) / pitch + 1e-9)) + 1;
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      p.ue_grid.emplace_back(1.5 + pitch * ix, 0.5 + pitch * iy, 1.2);
    }
  }
  return p;
}

ScenePreset campus_square(const PresetOptions& o) {
  ScenePreset p;
  auto& s = p.scene;
  s.name = "campus_square";
  s.bounds_min = Vec3(0, -30, 0);
  s.bounds_max = Vec3(80, 30, 60);
  s.materials = {{0, 0.6}, {1, 0.7}};  // ground, facades
  s.reflectors = {
      rect({0, -30, 0}, {80, 60, 0}, {0, 0, 1}, 0),    // ground
      rect({0, -30, 0}, {0, 60, 48}, {1, 0, 0}, 1),    // BS building facade
      rect({80, -30, 0}, {0, 60, 20}, {-1, 0, 0}, 1),  // far facade
      rect({0, -30, 0}, {80, 0, 15}, {0, 1, 0}, 1),    // south facade
      rect({0, 30, 0}, {80, 0, 15}, {0, -1, 0}, 1),    // north facade
  };
  const double wl = kSpeedOfLight / o.carrier_hz;
  p.bs = uniform_linear_array(o.n_tx, 0.5, o.bs_pattern);
  p.bs.reference_wavelength_m = wl;
  p.bs.position = Vec3(2.0, 0.0, 50.0);
  const double tilt = 30.0 * std::numbers::pi / 180.0;
  p.bs.boresight = Vec3(std::cos(tilt), 0.0, -std::sin(tilt));
  p.ue = uniform_linear_array(o.n_rx, 0.5, o.ue_pattern);
  p.ue.reference_wavelength_m = wl;
  p.grid_pitch_m = 2.0;
  p.default_max_order = 1;
  for (int ix = 0; ix < 21; ++ix) {
    for (int iy = 0; iy < 21; ++iy) {
      p.ue_grid.emplace_back(20.0 + 2.0 * ix, -20.0 + 2.0 * iy, 1.5);
    }
  }
  return p;
}

}  // namespace

ScenePreset preset_scene(std::string_view name, const PresetOptions& opts) {
  ScenePreset p;
  if (name == "corridor") {
    p = corridor(opts);
  } else if (name == "campus_square") {
    p = campus_square(opts);
  } else {
    throw InvalidArgument("unknown scene preset '" + std::string(name) + "'");
  }
  p.scene.validate();
  return p;
}

std::string serialize_scene(const Scene& scene) {
  KvDocument doc;
  auto& head = doc.add("scene");
  head.set("name", scene.name);
  head.set("bounds_min", format_list(from_vec3(scene.bounds_min)));
  head.set("bounds_max", format_list(from_vec3(scene.bounds_max)));
  for (const auto& m : scene.materials) {
    auto& s = doc.add("material");
    s.set("id", std::to_string(m.id));
    s.set("gamma", format_double(m.gamma));
  }
  for (const auto& r : scene.reflectors) {
    auto& s = doc.add("reflector");
    s.set("corner", format_list(from_vec3(r.corner)));
    s.set("extents", format_list(from_vec3(r.extents)));
    s.set("normal", format_list(from_vec3(r.normal)));
    s.set("material", std::to_string(r.material));
  }
  return doc.dump();
}

Scene parse_scene(std::string_view text) {
  const auto doc = parse_kv_text(text);
  const auto* head = doc.first("scene");
  if (!head) throw ConfigError("scene file has no [scene] section");
  Scene s;
  s.name = head->get("name");
  s.bounds_min = to_vec3(head->get_list("bounds_min"), "bounds_min");
  s.bounds_max = to_vec3(head->get_list("bounds_max"), "bounds_max");
  for (const auto* m : doc.all("material")) {
    s.materials.push_back({static_cast<int>(m->get_int("id")), m->get_double("gamma")});
  }
  for (const auto* r : doc.all("reflector")) {
    s.reflectors.push_back(rect(to_vec3(r->get_list("corner"), "corner"),
                                to_vec3(r->get_list("extents"), "extents"),
                                to_vec3(r->get_list("normal"), "normal"),
                                static_cast<int>(r->get_int("material"))));
  }
  for (const auto& sec : doc.sections) {
    if (sec.name != "scene" && sec.name != "material" && sec.name != "reflector") {
      throw ConfigError("scene file: unknown section [" + sec.name + "]");
    }
  }
  s.validate();
  return s;
}

}  // namespace csidt
