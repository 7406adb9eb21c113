// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "csidt/error.hpp"

namespace csidt {
namespace {

SystemConfig small_system() {
  SystemConfig s;
  s.grid.n_subcarriers = 96;
  s.grid.n_subbands = 8;
  return s;
}

ScenePreset small_corridor(int n) {
  auto p = preset_scene("corridor");
  std::vector<Vec3> keep;
  for (std::size_t i = 0; i < p.ue_grid.size() && static_cast<int>(keep.size()) < n; i += 31) keep.push_back(p.ue_grid[i]);
  p.ue_grid = keep;
  return p;
}

const Corpus& dt_corpus() {
  static const Corpus c = build_corpus(small_corridor(12), "corridor", small_system(), 11);
  return c;
}

double corpus_rho(const Corpus& a, const Corpus& b) {
  return mean_rho(a.precoders(), b.precoders());
}

TEST(Dataset, BuildShapeAndDeterminism) {
  const auto& c = dt_corpus();
  EXPECT_EQ(c.header.domain, Domain::DT);
  EXPECT_EQ(c.records.size() + c.failures.size(), 12u);
  ASSERT_FALSE(c.records.empty());
  for (const auto& r : c.records) {
    EXPECT_EQ(r.precoders.size(), 8u);
    EXPECT_GE(r.orientation_id, 0);
    EXPECT_LT(r.orientation_id, 100);
    EXPECT_TRUE(std::isnan(r.noise_snr_db));
  }
  EXPECT_NE(c.header.param("max_order"), nullptr);
  EXPECT_EQ(c.header.param("nope"), nullptr);
  const auto again = build_corpus(small_corridor(12), "corridor", small_system(), 11);
  EXPECT_TRUE(again == c);
  BuildOptions par;
  par.jobs = 3;
  EXPECT_TRUE(build_corpus(small_corridor(12), "corridor", small_system(), 11, par) == c);
}

TEST(Dataset, RecordChannelRebuildsPrecoders) {
  const auto& c = dt_corpus();
  const auto& r = c.records[2];
  const auto ps = precoder_dataset(record_channel(c.header, r), c.header.system.grid, 2);
  ASSERT_EQ(ps.size(), r.precoders.size());
  for (std::size_t k = 0; k < ps.size(); ++k) EXPECT_EQ(ps[k].w, r.precoders[k].w);
  EXPECT_TRUE(record_ue(c.header, r).position.isApprox(r.position));
}

TEST(Dataset, SerializeRoundTrip) {
  const auto& c = dt_corpus();
  const auto bytes = serialize_corpus(c);
  EXPECT_TRUE(parse_corpus(bytes) == c);
  const auto dir = std::filesystem::temp_directory_path() / "csidt_dataset_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "c.csidt").string();
  save_corpus(path, c);
  EXPECT_TRUE(load_corpus(path) == c);
  std::filesystem::remove_all(dir);
}

TEST(Dataset, ParseErrors) {
  const auto bytes = serialize_corpus(dt_corpus());
  auto bad = bytes;
  bad[1] = 'Z';
  EXPECT_THROW(parse_corpus(bad), MagicError);
  bad = bytes;
  bad[6] = 7;
  EXPECT_THROW(parse_corpus(bad), VersionError);
  EXPECT_THROW(parse_corpus(bytes.substr(0, bytes.size() / 2)), TruncatedError);
  EXPECT_THROW(parse_corpus(bytes + "zz"), FormatError);
  EXPECT_THROW(load_corpus("/nonexistent/dir/c.csidt"), MissingInput);
}

TEST(Dataset, EmptyPerturbationIsIdentity) {
  const auto& dt = dt_corpus();
  const auto same = perturb_corpus(dt, PerturbSpec{}, 5);
  EXPECT_EQ(same.header.domain, Domain::RwProxy);
  ASSERT_EQ(same.records.size(), dt.records.size());
  EXPECT_NEAR(corpus_rho(dt, same), 1.0, 1e-12);
}

TEST(Dataset, HighSnrNoiseKeepsPrecoders) {
  const auto& dt = dt_corpus();
  PerturbSpec s;
  s.estimation_noise_snr_db = 30.0;
  const auto noisy = perturb_corpus(dt, s, 5);
  const double r = corpus_rho(dt, noisy);
  EXPECT_GE(r, 0.99);
  EXPECT_LT(r, 1.0);
  // The noise draw is reproducible from the stored seed.
  const auto& rec = noisy.records[0];
  const auto ps = precoder_dataset(record_channel(noisy.header, rec), noisy.header.system.grid, 2);
  EXPECT_EQ(ps[3].w, rec.precoders[3].w);
}

TEST(Dataset, PerturbationsOrderedByStrength) {
  const auto& dt = dt_corpus();
  PerturbSpec weak, strong;
  weak.gamma_jitter = 0.05;
  strong.gamma_jitter = 0.05;
  strong.diffuse_paths = 8;
  strong.diffuse_power_db = -10.0;
  const double rw = corpus_rho(dt, perturb_corpus(dt, weak, 3));
  const double rs = corpus_rho(dt, perturb_corpus(dt, strong, 3));
  EXPECT_LT(rw, 1.0);
  EXPECT_LT(rs, rw);
}

TEST(Dataset, BsSwapOutweighsUeSwap) {
  const auto& dt = dt_corpus();
  PerturbSpec ue, bs;
  ue.ue_pattern_swap = PatternSpec::patch(1.5);
  bs.bs_pattern_swap = PatternSpec::dipole();
  EXPECT_LT(corpus_rho(dt, perturb_corpus(dt, bs, 1)), corpus_rho(dt, perturb_corpus(dt, ue, 1)));
}

TEST(Dataset, BsPhaseErrorRotatesPrecoders) {
  const auto& dt = dt_corpus();
  PerturbSpec s;
  s.bs_phase_error_deg = 60.0;
  const auto rw = perturb_corpus(dt, s, 8);
  const auto& phases = rw.header.bs.element_phase_rad;
  ASSERT_EQ(phases.size(), 8u);
  for (double v : phases) EXPECT_LE(std::abs(v), 60.0 * std::numbers::pi / 180.0);
  EXPECT_TRUE(dt.header.bs.element_phase_rad.empty());
  // H' = H diag(exp(-j phi)), so the right singular vectors become D v.
  CVector d(8);
  for (int k = 0; k < 8; ++k) d(k) = std::polar(1.0, phases[static_cast<std::size_t>(k)]);
  auto rotated = dt.precoders();
  for (auto& p : rotated) p.w = d.asDiagonal() * p.w;
  EXPECT_NEAR(mean_rho(rotated, rw.precoders()), 1.0, 1e-9);
  EXPECT_LT(corpus_rho(dt, rw), 0.99);
  EXPECT_TRUE(parse_corpus(serialize_corpus(rw)) == rw);
  s.bs_phase_error_deg = 200.0;
  EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(Dataset, PerturbRejectsBadInput) {
  PerturbSpec s;
  s.gamma_jitter = 1.0;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = PerturbSpec{};
  s.diffuse_paths = 2;
  s.diffuse_power_db = 0.0;
  EXPECT_THROW(s.validate(), InvalidArgument);
  const auto rw = perturb_corpus(dt_corpus(), PerturbSpec{}, 1);
  EXPECT_THROW(perturb_corpus(rw, PerturbSpec{}, 1), InvalidArgument);
}

TEST(Dataset, ClusterCorpusAndOlSplit) {
  const auto p = preset_scene("corridor");
  const auto c = build_cluster_corpus(ClusterConfig{}, p.bs, p.ue, small_system(), 78, 4);
  EXPECT_EQ(c.header.domain, Domain::Cluster);
  ASSERT_EQ(c.records.size(), 78u);
  const auto split = ol_split(c, 0.3, 9);
  EXPECT_EQ(split.ol.records.size(), 23u);
  EXPECT_EQ(split.eval.records.size(), 55u);
  auto ids = split.ol.position_ids();
  for (int id : split.eval.position_ids()) {
    EXPECT_EQ(std::count(ids.begin(), ids.end(), id), 0);
  }
  const auto again = ol_split(c, 0.3, 9);
  EXPECT_EQ(again.ol.position_ids(), ids);
  EXPECT_THROW(ol_split(c, 0.001, 9), InvalidArgument);
  EXPECT_THROW(ol_split(c, 1.0, 9), InvalidArgument);
  const auto sel = select_positions(c, {5, 2});
  ASSERT_EQ(sel.records.size(), 2u);
}

TEST(Dataset, ClusterLayoutsShareClusterDelays) {
  const auto p = preset_scene("corridor");
  auto delays = [](const CorpusRecord& r) {
    std::vector<double> d;
    for (const auto& path : r.paths.paths) d.push_back(path.delay_s);
    std::sort(d.begin(), d.end());
    return d;
  };
  ClusterConfig fixed;
  fixed.layouts = 1;
  const auto a = build_cluster_corpus(fixed, p.bs, p.ue, small_system(), 4, 6);
  EXPECT_EQ(*a.header.param("layouts"), "1");
  for (std::size_t i = 1; i < a.records.size(); ++i) {
    EXPECT_EQ(delays(a.records[i]), delays(a.records[0]));
    EXPECT_NE(a.records[i].paths.paths[0].gain, a.records[0].paths.paths[0].gain);
  }
  const auto b = build_cluster_corpus(ClusterConfig{}, p.bs, p.ue, small_system(), 2, 6);
  EXPECT_NE(delays(b.records[1]), delays(b.records[0]));
  fixed.layouts = -1;
  EXPECT_THROW(build_cluster_corpus(fixed, p.bs, p.ue, small_system(), 2, 6), InvalidArgument);
}

TEST(Dataset, FailureManifest) {
  Corpus c = dt_corpus();
  c.failures.push_back({99, "no propagation paths"});
  std::ostringstream os;
  write_failure_manifest(os, c);
  EXPECT_NE(os.str().find("99"), std::string::npos);
  EXPECT_NE(os.str().find("no propagation paths"), std::string::npos);
}

}  // namespace
}  // namespace csidt
