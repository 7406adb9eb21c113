// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <span>
#include <vector>

#include "csidt/error.hpp"

namespace csidt {

template <typename Real>
using CMatrixT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using CVectorT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

using CMatrix = CMatrixT<double>;
using CVector = CVectorT<double>;
using RVector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are sorted in
/// descending order and eigenvectors are stored column-wise with unit norm.
template <typename Real>
struct EigResultT {
  Eigen::Matrix<Real, Eigen::Dynamic, 1> eigenvalues;
  CMatrixT<Real> eigenvectors;
  int sweeps = 0;
};
using EigResult = EigResultT<double>;

template <typename Derived>
typename Derived::RealScalar fro_norm(const Eigen::MatrixBase<Derived>& a) {
  return a.norm();
}

template <typename Derived>
auto adjoint(const Eigen::MatrixBase<Derived>& a) {
  return a.adjoint().eval();
}

template <typename A, typename B>
auto matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + ")");
  }
  return (a * b).eval();
}

/// Largest elementwise deviation from Hermitian symmetry, max |a_ij - conj(a_ji)|.
template <typename Derived>
typename Derived::RealScalar hermitian_asymmetry(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Derived::RealScalar;
  if (a.rows() != a.cols()) return std::numeric_limits<Real>::infinity();
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

/// (1/N) * sum_n H_n^H H_n over a list of equally sized channel matrices.
template <typename Real>
CMatrixT<Real> gram_average(std::span<const CMatrixT<Real>> channels) {
  if (channels.empty()) throw InvalidArgument("gram_average: empty channel list");
  const auto rows = channels.front().rows();
  const auto cols = channels.front().cols();
  CMatrixT<Real> acc = CMatrixT<Real>::Zero(cols, cols);
  for (const auto& h : channels) {
    if (h.rows() != rows || h.cols() != cols) {
      throw DimensionError("gram_average: channel dimensions are not uniform");
    }
    acc.noalias() += h.adjoint() * h;
  }
  acc /= static_cast<Real>(channels.size());
  // Exact Hermitian symmetry; accumulation rounding can leave ~1 ulp skew.
  return ((acc + acc.adjoint()) * Real(0.5)).eval();
}

template <typename Real>
CMatrixT<Real> gram_average(const std::vector<CMatrixT<Real>>& channels) {
  return gram_average(std::span<const CMatrixT<Real>>(channels));
}

/// Rotate each column so that its largest-magnitude entry is real and positive.
/// The first index wins among equal magnitudes.
template <typename Real>
void normalize_column_phases(CMatrixT<Real>& v) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index arg = 0;
    Real best = -1;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      const Real m = std::abs(v(r, c));
      if (m > best) {
        best = m;
        arg = r;
      }
    }
    if (best > 0) v.col(c) *= std::conj(v(arg, c)) / best;
  }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// Sweeps the strict upper triangle in row-major order, annihilating each
/// off-diagonal entry with a complex plane rotation, until the off-diagonal
/// Frobenius norm drops below `tol * ||A||_F`. The sweep order and the phase
/// convention (largest entry of every eigenvector real-positive) make the
/// output a deterministic function of the input.
template <typename Real>
EigResultT<Real> eig_hermitian(const CMatrixT<Real>& input, Real tol = Real(1e-12),
                               int max_sweeps = 100) {
  using C = std::complex<Real>;
  const Eigen::Index n = input.rows();
  if (n != input.cols()) throw DimensionError("eig_hermitian: matrix is not square");
  if (n == 0) throw DimensionError("eig_hermitian: empty matrix");
  if (!input.allFinite()) throw NumericalError("eig_hermitian: non-finite input");
  const Real scale = input.norm();
  if (hermitian_asymmetry(input) > Real(1e-10) * std::max(Real(1), scale)) {
    throw InvalidArgument("eig_hermitian: input is not Hermitian within 1e-10");
  }

  CMatrixT<Real> a = (input + input.adjoint()) * Real(0.5);
  CMatrixT<Real> v = CMatrixT<Real>::Identity(n, n);

  auto off_norm = [&]() {
    Real s = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) s += std::norm(a(i, j));
    return std::sqrt(Real(2) * s);
  };

  int sweep = 0;
  const Real target = tol * scale;
  while (off_norm() > target) {
    if (sweep >= max_sweeps) {
      throw ConvergenceError("eig_hermitian: Jacobi iteration did not converge", sweep);
    }
    ++sweep;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Real mag = std::abs(a(p, q));
        if (mag == Real(0)) continue;
        const C phase = a(p, q) / mag;  // e^{j alpha}
        const Real app = std::real(a(p, p));
        const Real aqq = std::real(a(q, q));
        const Real theta = (aqq - app) / (Real(2) * mag);
        Real t = Real(1) / (std::abs(theta) + std::sqrt(theta * theta + Real(1)));
        if (theta < 0) t = -t;
        const Real c = Real(1) / std::sqrt(t * t + Real(1));
        const Real s = t * c;
        // U = diag(1, e^{-j alpha}) * [[c, s], [-s, c]]
        const C u00 = c;
        const C u01 = s;
        const C u10 = -s * std::conj(phase);
        const C u11 = c * std::conj(phase);
        for (Eigen::Index k = 0; k < n; ++k) {
          const C akp = a(k, p);
          const C akq = a(k, q);
          a(k, p) = akp * u00 + akq * u10;
          a(k, q) = akp * u01 + akq * u11;
          const C vkp = v(k, p);
          const C vkq = v(k, q);
          v(k, p) = vkp * u00 + vkq * u10;
          v(k, q) = vkp * u01 + vkq * u11;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const C apk = a(p, k);
          const C aqk = a(q, k);
          a(p, k) = std::conj(u00) * apk + std::conj(u10) * aqk;
          a(q, k) = std::conj(u01) * apk + std::conj(u11) * aqk;
        }
        a(p, q) = C(0);
        a(q, p) = C(0);
        a(p, p) = std::real(a(p, p));
        a(q, q) = std::real(a(q, q));
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    return std::real(a(i, i)) > std::real(a(j, j));
  });

  EigResultT<Real> out;
  out.sweeps = sweep;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto src = order[static_cast<std::size_t>(k)];
    out.eigenvalues(k) = std::real(a(src, src));
    out.eigenvectors.col(k) = v.col(src).normalized();
  }
  normalize_column_phases(out.eigenvectors);
  return out;
}

}  // namespace csidt
