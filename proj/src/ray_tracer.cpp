// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/ray_tracer.hpp"

#include <algorithm>
#include <cstdio>
#include <numbers>

namespace csidt {
namespace {

// Segment a->b against a reflector. Touching the rectangle (including its
// rim or running inside its plane) counts as a hit.
bool segment_hits(const Vec3& a, const Vec3& b, const Reflector& r, double eps) {
  const int axis = r.normal_axis();
  const double c = r.plane_offset();
  const double da = a(axis) - c;
  const double db = b(axis) - c;
  if ((da > eps && db > eps) || (da < -eps && db < -eps)) return false;
  if (std::abs(da) <= eps && std::abs(db) <= eps) {
    return r.contains(a, eps) || r.contains(b, eps) || r.contains(0.5 * (a + b), eps);
  }
  if (std::abs(da) <= eps) return r.contains(a, eps);
  if (std::abs(db) <= eps) return r.contains(b, eps);
  const double t = da / (da - db);
  return r.contains(a + t * (b - a), eps);
}

bool occluded(const Scene& scene, const Vec3& a, const Vec3& b, int skip_a, int skip_b,
              double eps) {
  for (std::size_t i = 0; i < scene.reflectors.size(); ++i) {
    const int idx = static_cast<int>(i);
    if (idx == skip_a || idx == skip_b) continue;
    if (segment_hits(a, b, scene.reflectors[i], eps)) return true;
  }
  return false;
}

class Tracer {
 public:
  Tracer(const Scene& scene, const Vec3& tx, const Vec3& rx, const TraceOptions& opts)
      : scene_(scene), tx_(tx), rx_(rx), opts_(opts) {
    wavelength_ = kSpeedOfLight / opts.carrier_hz;
  }

  std::vector<Path> run() {
    std::vector<int> seq;
    if (!occluded(scene_, tx_, rx_, -1, -1, opts_.eps_m)) emit(seq, {}, tx_);
    for (int order = 1; order <= opts_.max_order; ++order) enumerate(seq, order);
    return std::move(paths_);
  }

 private:
  void enumerate(std::vector<int>& seq, int order) {
    if (static_cast<int>(seq.size()) == order) {
      validate(seq);
      return;
    }
    for (std::size_t i = 0; i < scene_.reflectors.size(); ++i) {
      const int idx = static_cast<int>(i);
      if (!seq.empty() && seq.back() == idx) continue;
      seq.push_back(idx);
      enumerate(seq, order);
      seq.pop_back();
    }
  }

  void validate(const std::vector<int>& seq) {
    const double eps = opts_.eps_m;
    const std::size_t k = seq.size();
    // images[i] = tx mirrored across reflectors seq[0..i]
    std::vector<Vec3> images(k);
    Vec3 img = tx_;
    for (std::size_t i = 0; i < k; ++i) {
      img = mirror(img, scene_.reflectors[static_cast<std::size_t>(seq[i])]);
      images[i] = img;
    }
    // Back-track from the receiver: hits[i] is the reflection point on seq[i].
    std::vector<Vec3> hits(k);
    Vec3 target = rx_;
    for (std::size_t j = k; j-- > 0;) {
      const auto& r = scene_.reflectors[static_cast<std::size_t>(seq[j])];
      const int axis = r.normal_axis();
      const double c = r.plane_offset();
      const double da = images[j](axis) - c;
      const double db = target(axis) - c;
      if (!(da * db < 0.0) || std::abs(da) <= eps || std::abs(db) <= eps) return;
      const double t = da / (da - db);
      const Vec3 p = images[j] + t * (target - images[j]);
      if (!r.contains(p, 0.0)) return;
      hits[j] = p;
      target = p;
    }
    // Reflect off the front face only.
    for (std::size_t i = 0; i < k; ++i) {
      const auto& r = scene_.reflectors[static_cast<std::size_t>(seq[i])];
      const Vec3& prev = i == 0 ? tx_ : hits[i - 1];
      const Vec3& next = i + 1 == k ? rx_ : hits[i + 1];
      if ((prev - hits[i]).dot(r.normal) <= eps || (next - hits[i]).dot(r.normal) <= eps) return;
    }
    // Every leg must be clear of the other reflectors.
    for (std::size_t i = 0; i <= k; ++i) {
      const Vec3& a = i == 0 ? tx_ : hits[i - 1];
      const Vec3& b = i == k ? rx_ : hits[i];
      const int skip_a = i == 0 ? -1 : seq[i - 1];
      const int skip_b = i == k ? -1 : seq[i];
      if (occluded(scene_, a, b, skip_a, skip_b, eps)) return;
    }
    emit(seq, hits, images.back());
  }

  // The unfolded length equals the distance from the last image to rx.
  void emit(const std::vector<int>& seq, const std::vector<Vec3>& hits, const Vec3& image) {
    const double length = (rx_ - image).norm();
    double refl = 1.0;
    for (int r : seq) refl *= scene_.gamma(scene_.reflectors[static_cast<std::size_t>(r)].material);
    Path p;
    const double amp = wavelength_ / (4.0 * std::numbers::pi * length) * refl;
    p.gain = std::polar(amp, -2.0 * std::numbers::pi * std::fmod(length / wavelength_, 1.0));
    p.delay_s = length / kSpeedOfLight;
    p.aod = ((hits.empty() ? rx_ : hits.front()) - tx_).normalized();
    p.aoa = ((hits.empty() ? tx_ : hits.back()) - rx_).normalized();
    p.order = static_cast<int>(seq.size());
    p.bounces = seq;
    paths_.push_back(std::move(p));
  }

  const Scene& scene_;
  Vec3 tx_;
  Vec3 rx_;
  TraceOptions opts_;
  double wavelength_ = 0.0;
  std::vector<Path> paths_;
};

}  // namespace

Vec3 mirror(const Vec3& p, const Reflector& r) {
  Vec3 out = p;
  const int axis = r.normal_axis();
  out(axis) = 2.0 * r.plane_offset() - p(axis);
  return out;
}

PathSet trace_paths(const Scene& scene, const Vec3& tx, const Vec3& rx, const TraceOptions& opts) {
  if ((tx - rx).norm() <= opts.eps_m) throw InvalidArgument("trace_paths: coincident endpoints");
  if (opts.max_order < 0 || opts.max_order > 3) {
    throw InvalidArgument("trace_paths: max_order must be in [0, 3]");
  }
  if (!(opts.carrier_hz > 0.0)) throw InvalidArgument("trace_paths: carrier must be positive");
  scene.validate();
  if (!scene.inside(tx) || !scene.inside(rx)) {
    throw InvalidArgument("trace_paths: endpoints must lie inside the scene bounds");
  }

  PathSet out;
  out.tx = tx;
  out.rx = rx;
  out.carrier_hz = opts.carrier_hz;
  out.paths = Tracer(scene, tx, rx, opts).run();
  std::erase_if(out.paths, [](const Path& p) { return std::abs(p.gain) == 0.0; });
  std::sort(out.paths.begin(), out.paths.end(), [](const Path& a, const Path& b) {
    const double ga = std::abs(a.gain), gb = std::abs(b.gain);
    if (ga != gb) return ga > gb;
    if (a.delay_s != b.delay_s) return a.delay_s < b.delay_s;
    return a.bounces < b.bounces;
  });
  if (out.paths.size() > opts.max_paths) out.paths.resize(opts.max_paths);
  return out;
}

CMatrix path_channel_gain(const Path& path, const AntennaArray& bs, const AntennaArray& ue,
                          double wavelength_m) {
  if (bs.size() == 0 || ue.size() == 0) throw DimensionError("path_channel_gain: empty array");
  const CVector a_tx = steering_vector(bs, path.aod, wavelength_m);
  const CVector a_rx = steering_vector(ue, path.aoa, wavelength_m);
  const double scale = bs.gain(path.aod) * ue.gain(path.aoa) *
                       std::sqrt(static_cast<double>(bs.size() * ue.size()));
  return (path.gain * scale) * (a_rx * a_tx.adjoint());
}

void write_paths_csv(std::ostream& out, const PathSet& set) {
  out << "order,delay_s,gain_re,gain_im,aod_x,aod_y,aod_z,aoa_x,aoa_y,aoa_z\n";
  char buf[512];
  for (const auto& p : set.paths) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  p.order, p.delay_s, p.gain.real(), p.gain.imag(), p.aod.x(), p.aod.y(),
                  p.aod.z(), p.aoa.x(), p.aoa.y(), p.aoa.z());
    out << buf;
  }
}

}  // namespace csidt
