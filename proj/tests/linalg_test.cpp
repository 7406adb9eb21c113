// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <gtest/gtest.h>

#include "csidt/linalg.hpp"

namespace csidt {
namespace {

using cd = std::complex<double>;

CMatrix random_matrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  CMatrix m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = {n(rng), n(rng)};
  return m;
}

TEST(GramAverage, IdentityAndScaledIdentity) {
  const CMatrix i2 = CMatrix::Identity(2, 2);
  EXPECT_TRUE(gram_average(std::vector<CMatrix>{i2}).isApprox(i2));
  EXPECT_TRUE(gram_average(std::vector<CMatrix>{i2, 2.0 * i2}).isApprox(2.5 * i2));
}

TEST(GramAverage, MatchesDirectSummation) {
  std::mt19937_64 rng(3);
  std::vector<CMatrix> hs;
  for (int k = 0; k < 5; ++k) hs.push_back(random_matrix(3, 2, rng));
  CMatrix expected = CMatrix::Zero(2, 2);
  for (const auto& h : hs) {
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int r = 0; r < 3; ++r) expected(a, b) += std::conj(h(r, a)) * h(r, b);
  }
  expected /= 5.0;
  EXPECT_LT((gram_average(hs) - expected).norm(), 1e-12);
}

TEST(GramAverage, Errors) {
  EXPECT_THROW(gram_average(std::vector<CMatrix>{}), InvalidArgument);
  EXPECT_THROW(gram_average(std::vector<CMatrix>{CMatrix::Zero(2, 2), CMatrix::Zero(2, 3)}),
               DimensionError);
}

TEST(EigHermitian, Diagonal) {
  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = 3.0;
  const auto r = eig_hermitian(a);
  EXPECT_NEAR(r.eigenvalues(0), 3.0, 1e-14);
  EXPECT_NEAR(r.eigenvalues(1), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(r.eigenvectors(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(r.eigenvectors(0, 1)), 1.0, 1e-14);
}

TEST(EigHermitian, TwoByTwoClosedForm) {
  CMatrix a(2, 2);
  a << 2.0, 1.0, 1.0, 2.0;
  const auto r = eig_hermitian(a);
  EXPECT_NEAR(r.eigenvalues(0), 3.0, 1e-14);
  EXPECT_NEAR(r.eigenvalues(1), 1.0, 1e-14);
  EXPECT_NEAR(r.eigenvectors(0, 0).real(), 1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(r.eigenvectors(1, 0).real(), 1.0 / std::sqrt(2.0), 1e-14);
}

TEST(EigHermitian, ResidualsOrthonormalityAndPhase) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const CMatrix b = random_matrix(8, 8, rng);
    const CMatrix a = b + b.adjoint();
    const auto r = eig_hermitian(a);
    for (int k = 0; k < 8; ++k) {
      const CVector w = r.eigenvectors.col(k);
      EXPECT_LE((a * w - r.eigenvalues(k) * w).norm(), 1e-9 * a.norm());
      if (k > 0) EXPECT_GE(r.eigenvalues(k - 1), r.eigenvalues(k));
      Eigen::Index imax = 0;
      w.cwiseAbs().maxCoeff(&imax);
      EXPECT_NEAR(w(imax).imag(), 0.0, 1e-12);
      EXPECT_GT(w(imax).real(), 0.0);
    }
    EXPECT_LT((r.eigenvectors.adjoint() * r.eigenvectors - CMatrix::Identity(8, 8)).norm(), 1e-10);
  }
}

TEST(EigHermitian, RejectsBadInput) {
  EXPECT_THROW(eig_hermitian(CMatrix(CMatrix::Zero(2, 3))), DimensionError);
  CMatrix a = CMatrix::Identity(2, 2);
  a(0, 1) = 1.0;
  EXPECT_THROW(eig_hermitian(a), InvalidArgument);
  a(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(eig_hermitian(a), NumericalError);
}

TEST(Kernels, MatmulAdjointNorm) {
  std::mt19937_64 rng(5);
  const CMatrix a = random_matrix(2, 2, rng);
  const CMatrix b = random_matrix(2, 2, rng);
  EXPECT_TRUE(matmul(CMatrix(CMatrix::Identity(2, 2)), a).isApprox(a));
  EXPECT_TRUE(CMatrix(adjoint(CMatrix(adjoint(a)))).isApprox(a));
  CMatrix loop = CMatrix::Zero(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) loop(i, j) += a(i, k) * b(k, j);
  EXPECT_LT((matmul(a, b) - loop).norm(), 1e-14);
  EXPECT_THROW(matmul(a, CMatrix(CMatrix::Zero(3, 1))), DimensionError);
  double s = 0;
  for (int i = 0; i < 4; ++i) s += std::norm(a(i));
  EXPECT_NEAR(fro_norm(a), std::sqrt(s), 1e-14);
}

}  // namespace
}  // namespace csidt
