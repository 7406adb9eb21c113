// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/precoder.hpp"

namespace csidt {

void SystemConfig::validate() const {
  if (n_tx < 1 || n_rx < 1 || n_streams < 1) {
    throw InvalidArgument("system dimensions must be positive");
  }
  if (n_streams > std::min(n_tx, n_rx)) {
    throw InvalidArgument("n_streams must not exceed min(n_tx, n_rx)");
  }
  grid.validate();
}

Precoder extract_precoder(std::span<const CMatrix> channels, int n_streams) {
  if (channels.empty()) throw InvalidArgument("extract_precoder: no channels");
  const auto n_tx = channels.front().cols();
  if (n_streams < 1 || n_streams > n_tx) {
    throw InvalidArgument("extract_precoder: n_streams must be in [1, N_t]");
  }
  const auto eig = eig_hermitian<double>(gram_average<double>(channels));
  Precoder p;
  p.w = eig.eigenvectors.leftCols(n_streams);
  p.eigenvalues = eig.eigenvalues.head(n_streams);
  return p;
}

std::vector<Precoder> precoder_dataset(const ChannelTensor& ch, const OfdmGrid& grid,
                                       int n_streams) {
  std::vector<Precoder> out;
  for (const auto& sb : subband_channels(ch, grid)) {
    auto p = extract_precoder(sb.channels, n_streams);
    p.subband = sb.id;
    p.position = ch.position_id;
    p.domain = ch.domain;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace csidt
