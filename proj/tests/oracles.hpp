// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations used only by tests. None of them call into the
// code they check.

#pragma once

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Eigenvalues of a Hermitian matrix as the roots of its characteristic
/// polynomial (Faddeev-LeVerrier in long double, companion-matrix roots,
/// Newton polish), ascending.
std::vector<double> charpoly_eigenvalues(const Eigen::MatrixXcd& a);

struct BoxPath {
  double length = 0.0;
  double gamma_product = 1.0;
  int order = 0;
};

/// Specular paths of order <= max_order between two points inside the box
/// [0, size], by per-axis image enumeration. gamma_lo / gamma_hi are the
/// reflection coefficients of the walls at 0 and at size(axis).
std::vector<BoxPath> box_image_paths(const std::array<double, 3>& size,
                                     const std::array<double, 3>& tx,
                                     const std::array<double, 3>& rx,
                                     const std::array<double, 3>& gamma_lo,
                                     const std::array<double, 3>& gamma_hi, int max_order);

}  // namespace oracle
