// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/precoder.hpp"

#include <random>

#include <gtest/gtest.h>

#include "csidt/error.hpp"

namespace csidt {
namespace {

CMatrix random_unitary(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  CMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = {nd(rng), nd(rng)};
  return Eigen::HouseholderQR<CMatrix>(a).householderQ() * CMatrix::Identity(n, n);
}

TEST(Precoder, RecoversKnownRightSingularVectors) {
  std::mt19937_64 rng(5);
  const CMatrix v = random_unitary(8, rng);
  const CMatrix u = random_unitary(8, rng);
  const RVector s = (RVector(8) << 9, 5, 3, 2, 1, 0.5, 0.2, 0.1).finished();
  std::vector<CMatrix> hs;
  for (int k = 0; k < 4; ++k) {
    // Same right singular vectors, per-subcarrier left rotation and phase.
    const CMatrix uk = random_unitary(8, rng);
    hs.push_back(uk * u * s.cast<std::complex<double>>().asDiagonal() * v.adjoint());
  }
  const auto p = extract_precoder(hs, 2);
  ASSERT_EQ(p.n_tx(), 8);
  ASSERT_EQ(p.n_streams(), 2);
  EXPECT_NEAR(p.eigenvalues(0), 81.0, 1e-9);
  EXPECT_NEAR(p.eigenvalues(1), 25.0, 1e-9);
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(std::abs(p.w.col(k).dot(v.col(k))), 1.0, 1e-10);
  EXPECT_LE((p.w.adjoint() * p.w - CMatrix::Identity(2, 2)).norm(), 1e-12);
}

TEST(Precoder, AgreesWithEigenSelfAdjointSolver) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  std::vector<CMatrix> hs(27, CMatrix(8, 8));
  for (auto& h : hs)
    for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = {nd(rng), nd(rng)};
  CMatrix r = CMatrix::Zero(8, 8);
  for (const auto& h : hs) r += h.adjoint() * h;
  r /= 27.0;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(r);
  const auto p = extract_precoder(hs, 2);
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(p.eigenvalues(k), es.eigenvalues()(7 - k), 1e-10);
    EXPECT_NEAR(std::abs(p.w.col(k).dot(es.eigenvectors().col(7 - k))), 1.0, 1e-8);
  }
}

TEST(Precoder, PhaseConventionLargestEntryRealPositive) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::vector<CMatrix> hs(3, CMatrix(4, 8));
  for (auto& h : hs)
    for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = {nd(rng), nd(rng)};
  const auto p = extract_precoder(hs, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::Index m = 0;
    p.w.col(k).cwiseAbs().maxCoeff(&m);
    EXPECT_NEAR(p.w(m, k).imag(), 0.0, 1e-14);
    EXPECT_GT(p.w(m, k).real(), 0.0);
  }
}

TEST(Precoder, DatasetOnePerSubband) {
  OfdmGrid g;
  g.n_subcarriers = 24;
  g.n_subbands = 4;
  ChannelTensor ch;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 24; ++i) {
    CMatrix h(8, 8);
    for (Eigen::Index j = 0; j < h.size(); ++j) h(j) = {nd(rng), nd(rng)};
    ch.subcarriers.push_back(h);
  }
  ch.position_id = 17;
  ch.domain = Domain::RwProxy;
  const auto ps = precoder_dataset(ch, g, 2);
  ASSERT_EQ(ps.size(), 4u);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(ps[static_cast<std::size_t>(k)].subband, k);
    EXPECT_EQ(ps[static_cast<std::size_t>(k)].position, 17);
    EXPECT_EQ(ps[static_cast<std::size_t>(k)].domain, Domain::RwProxy);
  }
  const auto direct = extract_precoder(std::span<const CMatrix>(ch.subcarriers).subspan(6, 6), 2);
  EXPECT_EQ(ps[1].w, direct.w);
}

TEST(Precoder, RejectsBadInput) {
  std::vector<CMatrix> hs{CMatrix::Identity(4, 4)};
  EXPECT_THROW(extract_precoder(std::span<const CMatrix>{}, 1), InvalidArgument);
  EXPECT_THROW(extract_precoder(hs, 0), InvalidArgument);
  EXPECT_THROW(extract_precoder(hs, 5), InvalidArgument);
  SystemConfig s;
  EXPECT_NO_THROW(s.validate());
  s.n_streams = 9;
  EXPECT_THROW(s.validate(), InvalidArgument);
}

}  // namespace
}  // namespace csidt
