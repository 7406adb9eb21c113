// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/metrics.hpp"

#include <cmath>
#include <numbers>

#include "csidt/kv_text.hpp"

namespace csidt {

DirectionAngles DirectionAngles::from_vector(const Vec3& u) {
  const Vec3 n = u.normalized();
  DirectionAngles a;
  a.azimuth = std::atan2(n.y(), n.x());
  if (a.azimuth == -std::numbers::pi) a.azimuth = std::numbers::pi;
  a.elevation = std::asin(std::clamp(n.z(), -1.0, 1.0));
  return a;
}

Vec3 DirectionAngles::unit() const {
  return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
          std::sin(elevation)};
}

RVector rho_per_stream(const CMatrix& w, const CMatrix& w_hat) {
  if (w.rows() != w_hat.rows() || w.cols() != w_hat.cols()) {
    throw DimensionError("rho: precoder shapes " + std::to_string(w.rows()) + "x" +
                         std::to_string(w.cols()) + " and " + std::to_string(w_hat.rows()) + "x" +
                         std::to_string(w_hat.cols()) + " differ");
  }
  RVector out(w.cols());
  for (Eigen::Index s = 0; s < w.cols(); ++s) {
    out(s) = std::min(1.0, std::abs(w.col(s).dot(w_hat.col(s))));
  }
  return out;
}

double rho(const CMatrix& w, const CMatrix& w_hat, bool squared) {
  const RVector r = rho_per_stream(w, w_hat);
  if (r.size() == 0) throw DimensionError("rho: no streams");
  return squared ? r.array().square().mean() : r.mean();
}

double rho(const Precoder& w, const Precoder& w_hat, bool squared) {
  return rho(w.w, w_hat.w, squared);
}

double mean_rho(std::span<const Precoder> w, std::span<const Precoder> w_hat, bool squared) {
  if (w.size() != w_hat.size()) throw DimensionError("mean_rho: list lengths differ");
  if (w.empty()) throw DimensionError("mean_rho: empty lists");
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += rho(w[i], w_hat[i], squared);
  return acc / static_cast<double>(w.size());
}

double aoa_similarity(const DirectionAngles& a, const DirectionAngles& b) {
  return std::clamp(a.unit().dot(b.unit()), -1.0, 1.0);
}

Eigen::MatrixXd similarity_heatmap(std::span<const Precoder> precoders) {
  if (precoders.size() < 2) throw InvalidArgument("similarity_heatmap: need at least two positions");
  const auto n = static_cast<Eigen::Index>(precoders.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (precoders[i].subband != precoders[0].subband) {
      throw InvalidArgument("similarity_heatmap: precoders come from different subbands");
    }
    m(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) m(i, j) = m(j, i) = rho(precoders[i], precoders[j]);
  }
  return m;
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != m.rows() || m.rows() != m.cols()) {
    throw DimensionError("write_matrix_csv: label count does not match matrix");
  }
  out << "position";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << labels[i];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << format_double(m(i, j));
    out << '\n';
  }
}

double mmse_rate(const CMatrix& h, const CMatrix& w, double snr) {
  if (h.cols() != w.rows()) throw DimensionError("mmse_rate: H and W do not conform");
  if (snr < 0.0) throw InvalidArgument("mmse_rate: negative snr");
  if (snr == 0.0) return 0.0;
  const auto ns = w.cols();
  const CMatrix a = h * w;
  CMatrix m = CMatrix::Identity(ns, ns) + (snr / static_cast<double>(ns)) * (a.adjoint() * a);
  m.diagonal().array() += 1e-12;
  const CMatrix inv = m.ldlt().solve(CMatrix::Identity(ns, ns));
  double rate = 0.0;
  for (Eigen::Index s = 0; s < ns; ++s) {
    const double sinr = std::max(0.0, 1.0 / inv(s, s).real() - 1.0);
    rate += std::log2(1.0 + sinr);
  }
  if (!std::isfinite(rate)) throw NumericalError("mmse_rate: non-finite rate");
  return rate;
}

double rate_proxy(const ChannelTensor& ch, std::span<const Precoder> w_hat, const OfdmGrid& grid,
                  double snr) {
  const auto bands = subband_channels(ch, grid);
  if (bands.size() != w_hat.size()) {
    throw DimensionError("rate_proxy: " + std::to_string(w_hat.size()) + " precoders for " +
                         std::to_string(bands.size()) + " subbands");
  }
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < bands.size(); ++b) {
    for (const auto& h : bands[b].channels) {
      acc += mmse_rate(h, w_hat[b].w, snr);
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << "# " << kSummaryCsvVersion << '\n';
  out << "method,training_env,bits,paper_bits,rho_rw,rho_dt,rate_proxy\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.method << ',' << r.training_env << ',' << r.bits << ',' << r.paper_bits;
    for (double v : {r.rho_rw, r.rho_dt}) {
      std::snprintf(buf, sizeof buf, ",%.4f", v);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.4f\n", r.rate);
    out << buf;
  }
}

}  // namespace csidt
