// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "csidt/channel.hpp"

namespace csidt {

/// N_t x N_s eigen-precoder of one subband; unit, mutually orthogonal columns.
struct Precoder {
  CMatrix w;
  RVector eigenvalues;
  int subband = 0;
  int position = 0;
  Domain domain = Domain::DT;

  Eigen::Index n_tx() const { return w.rows(); }
  Eigen::Index n_streams() const { return w.cols(); }
};

struct SystemConfig {
  int n_tx = 8;
  int n_rx = 8;
  int n_streams = 2;
  OfdmGrid grid;

  void validate() const;
};

/// Top `n_streams` eigenvectors of the averaged Gram matrix of `channels`.
Precoder extract_precoder(std::span<const CMatrix> channels, int n_streams);

/// One precoder per subband of `ch`, in subband order.
std::vector<Precoder> precoder_dataset(const ChannelTensor& ch, const OfdmGrid& grid,
                                       int n_streams);

}  // namespace csidt
