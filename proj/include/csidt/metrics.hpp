// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "csidt/precoder.hpp"

namespace csidt {

struct DirectionAngles {
  double azimuth = 0.0;    // (-pi, pi]
  double elevation = 0.0;  // [-pi/2, pi/2]

  static DirectionAngles from_vector(const Vec3& u);
  Vec3 unit() const;
};

/// (1/N_s) sum_s |<w_s, w_hat_s>|, or the squared form with `squared`.
double rho(const CMatrix& w, const CMatrix& w_hat, bool squared = false);
double rho(const Precoder& w, const Precoder& w_hat, bool squared = false);

/// Per-stream |<w_s, w_hat_s>|.
RVector rho_per_stream(const CMatrix& w, const CMatrix& w_hat);

/// Mean rho over index-matched precoder lists.
double mean_rho(std::span<const Precoder> w, std::span<const Precoder> w_hat, bool squared = false);

/// Inner product of the two unit direction vectors.
double aoa_similarity(const DirectionAngles& a, const DirectionAngles& b);

/// Pairwise rho between precoders of different positions, same subband.
Eigen::MatrixXd similarity_heatmap(std::span<const Precoder> precoders);
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& labels);

/// Mean over subcarriers of sum_s log2(1 + SINR_s) for a linear MMSE
/// receiver on A = H_n w_hat with per-stream power snr / N_s. `w_hat`
/// holds one precoder per subband, in subband order.
double rate_proxy(const ChannelTensor& ch, std::span<const Precoder> w_hat, const OfdmGrid& grid,
                  double snr);

/// Same for a single effective channel A = H w.
double mmse_rate(const CMatrix& h, const CMatrix& w, double snr);

/// One row of a per-method summary CSV.
struct SummaryRow {
  std::string method;
  std::string training_env;
  std::string bits;
  std::string paper_bits;
  double rho_rw = 0.0;
  double rho_dt = 0.0;
  double rate = 0.0;
};

inline constexpr const char* kSummaryCsvVersion = "csidt-summary-v1";
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);

}  // namespace csidt
