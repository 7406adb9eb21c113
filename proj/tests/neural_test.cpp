// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/neural.hpp"

#include <random>

#include <gtest/gtest.h>

#include "csidt/error.hpp"

namespace csidt {
namespace {

Topology tiny() {
  Topology t;
  t.encoder = {8, 6, 5, 3};
  t.decoder = {3, 5, 6, 8};
  t.n_streams = 2;
  return t;
}

std::vector<Precoder> random_precoders(int count, int nt, int ns, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<Precoder> out;
  for (int i = 0; i < count; ++i) {
    CMatrix a(nt, ns);
    for (Eigen::Index k = 0; k < a.size(); ++k) a(k) = {nd(rng), nd(rng)};
    Precoder p;
    p.w = Eigen::HouseholderQR<CMatrix>(a).householderQ() * CMatrix::Identity(nt, ns);
    p.position = i;
    out.push_back(p);
  }
  return out;
}

double loss_at(const ModelParams<double>& p, const MatrixT<double>& x) {
  return loss_mse<double>(x, forward(p, x, QuantizerSpec{}, false).reconstruction);
}

// Central differences over every parameter of a small model.
TEST(Neural, GradientMatchesFiniteDifferences) {
  auto p = ModelParams<double>::init(tiny(), 3);
  // Non-zero biases so their gradients are exercised off the origin.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (auto* side : {&p.encoder, &p.decoder})
    for (auto& l : *side) l.bias = l.bias.unaryExpr([&](double) { return u(rng); });
  const auto ps = random_precoders(5, 2, 2, 1);
  const MatrixT<double> x = flatten_batch<double>(ps);
  const auto g = backward(p, x, x, QuantizerSpec{}, false);
  EXPECT_NEAR(g.loss, loss_at(p, x), 1e-14);

  const double h = 1e-6;
  double worst = 0.0;
  auto check = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = loss_at(p, x);
    param = keep - h;
    const double down = loss_at(p, x);
    param = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - analytic) / std::max(1e-6, std::abs(fd) + std::abs(analytic)));
  };
  for (std::size_t l = 0; l < p.encoder.size(); ++l) {
    for (Eigen::Index i = 0; i < p.encoder[l].weight.size(); ++i)
      check(p.encoder[l].weight(i), g.encoder[l].weight(i));
    for (Eigen::Index i = 0; i < p.encoder[l].bias.size(); ++i)
      check(p.encoder[l].bias(i), g.encoder[l].bias(i));
  }
  for (std::size_t l = 0; l < p.decoder.size(); ++l) {
    for (Eigen::Index i = 0; i < p.decoder[l].weight.size(); ++i)
      check(p.decoder[l].weight(i), g.decoder[l].weight(i));
    for (Eigen::Index i = 0; i < p.decoder[l].bias.size(); ++i)
      check(p.decoder[l].bias(i), g.decoder[l].bias(i));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Neural, DecoderOnlyGradients) {
  const auto p = ModelParams<double>::init(tiny(), 3);
  const MatrixT<double> x = flatten_batch<double>(random_precoders(4, 2, 2, 2));
  const auto full = backward(p, x, x, QuantizerSpec{}, true);
  const auto dec = backward(p, x, x, QuantizerSpec{}, true, true);
  EXPECT_TRUE(dec.encoder.empty());
  ASSERT_EQ(dec.decoder.size(), full.decoder.size());
  for (std::size_t l = 0; l < dec.decoder.size(); ++l)
    EXPECT_LE((dec.decoder[l].weight - full.decoder[l].weight).norm(), 1e-14);
}

TEST(Neural, QuantizerCells) {
  const QuantizerSpec q;
  EXPECT_EQ(q.levels(), 4);
  EXPECT_EQ(q.index(0.30), 1);
  EXPECT_DOUBLE_EQ(q.level(1), 0.375);
  EXPECT_EQ(q.index(0.0), 0);
  EXPECT_EQ(q.index(1.0), 3);
  EXPECT_EQ(q.index(0.25), 1);
  EXPECT_EQ(q.index(0.999), 3);
}

TEST(Neural, LossIsMeanSquare) {
  MatrixT<double> a = MatrixT<double>::Zero(4, 2);
  MatrixT<double> b = MatrixT<double>::Constant(4, 2, 0.25);
  EXPECT_DOUBLE_EQ(loss_mse<double>(a, b), 0.0625);
  EXPECT_THROW(loss_mse<double>(a, MatrixT<double>::Zero(3, 2)), DimensionError);
}

TEST(Neural, FlattenLayout) {
  CMatrix w = CMatrix::Zero(8, 2);
  w(1, 1) = 1.0;  // e_2 in the second stream
  const RVector x = flatten_precoder(w);
  ASSERT_EQ(x.size(), 32);
  for (Eigen::Index i = 0; i < 32; ++i) EXPECT_EQ(x(i), i == 17 ? 1.0 : 0.0) << i;
  w(3, 0) = {0.0, -2.0};
  const RVector y = flatten_precoder(w);
  EXPECT_EQ(y(8 + 3), -2.0);
  EXPECT_EQ(unflatten_precoder(y, 8, 2), w);
  EXPECT_THROW(unflatten_precoder(y, 8, 3), DimensionError);
}

TEST(Neural, ForwardShapesAndNorms) {
  const auto p = ModelParams<float>::init(default_topology(8, 2), 1);
  const auto ps = random_precoders(7, 8, 2, 3);
  const auto r = forward(p, flatten_batch<float>(ps), QuantizerSpec{}, true);
  EXPECT_EQ(r.latent.rows(), 16);
  EXPECT_EQ(r.latent.cols(), 7);
  EXPECT_GT(r.latent.minCoeff(), 0.0f);
  EXPECT_LT(r.latent.maxCoeff(), 1.0f);
  for (Eigen::Index b = 0; b < 7; ++b)
    for (Eigen::Index i = 0; i < 16; ++i)
      EXPECT_FLOAT_EQ(r.decoder_input(i, b), static_cast<float>(QuantizerSpec{}.level(r.indices(i, b))));
  for (Eigen::Index b = 0; b < 7; ++b) {
    EXPECT_NEAR(r.reconstruction.col(b).head(16).norm(), 1.0f, 1e-5f);
    EXPECT_NEAR(r.reconstruction.col(b).tail(16).norm(), 1.0f, 1e-5f);
  }
  const auto bits = pack_codeword(r.indices, 3, QuantizerSpec{});
  EXPECT_EQ(bits.size(), 32u);
  EXPECT_EQ(bits.scheme(), Scheme::Neural);
  EXPECT_EQ(unpack_codeword(bits, 16, QuantizerSpec{}), r.indices.col(3));
  MatrixT<float> bad = flatten_batch<float>(ps);
  bad(0, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(forward(p, bad, QuantizerSpec{}, true), NumericalError);
}

TEST(Neural, OverfitsSmallSet) {
  const auto ps = random_precoders(16, 2, 2, 4);
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.batch_size = 8;
  cfg.learning_rate = 3e-3;
  cfg.validation_fraction = 0.0;
  Topology t = tiny();
  t.encoder = {8, 32, 16, 8};
  t.decoder = {8, 16, 32, 8};
  const auto init = ModelParams<double>::init(t, 5);
  const MatrixT<double> x = flatten_batch<double>(ps);
  const double before = loss_at(init, x);
  const auto res = train(init, ps, QuantizerSpec{}, cfg);
  EXPECT_LT(loss_at(res.params, x), 0.25 * before);
  EXPECT_EQ(res.history.size(), 400u);
}

TEST(Neural, TrainingIsDeterministic) {
  const auto ps = random_precoders(40, 8, 2, 6);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  const auto init = ModelParams<float>::init(default_topology(8, 2), 2);
  const auto a = train(init, ps, QuantizerSpec{}, cfg);
  const auto b = train(init, ps, QuantizerSpec{}, cfg);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(serialize_model(a.params), serialize_model(b.params));
  cfg.seed = 2;
  const auto c = train(init, ps, QuantizerSpec{}, cfg);
  EXPECT_FALSE(a.params == c.params);
}

TEST(Neural, FinetuneKeepsEncoder) {
  const auto ps = random_precoders(30, 8, 2, 7);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  const auto init = ModelParams<float>::init(default_topology(8, 2), 3);
  const auto res = finetune_decoder(init, ps, QuantizerSpec{}, cfg);
  EXPECT_EQ(encoder_hash(res.params), encoder_hash(init));
  EXPECT_THROW(finetune_decoder(init, std::span<const Precoder>{}, QuantizerSpec{}, cfg), InvalidArgument);
}

TEST(Neural, CheckpointRoundTripAndErrors) {
  const auto p = ModelParams<float>::init(default_topology(8, 2), 4);
  const auto bytes = serialize_model(p);
  EXPECT_TRUE(parse_model<float>(bytes) == p);
  EXPECT_EQ(decoder_hash(parse_model<float>(bytes)), decoder_hash(p));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(parse_model<float>(bad), MagicError);
  bad = bytes;
  bad[6] = 9;
  EXPECT_THROW(parse_model<float>(bad), VersionError);
  EXPECT_THROW(parse_model<float>(bytes.substr(0, bytes.size() - 3)), TruncatedError);
  EXPECT_THROW(parse_model<float>(bytes + "x"), FormatError);
  const Topology other = default_topology(8, 2, 8);
  EXPECT_THROW(parse_model<float>(bytes, &other), ConfigError);
  EXPECT_THROW(load_model<float>("/nonexistent/model.ckpt"), MissingInput);
}

TEST(Neural, TopologyValidation) {
  EXPECT_NO_THROW(default_topology(8, 2).validate());
  Topology t = default_topology(8, 2);
  t.decoder.front() = 15;
  EXPECT_THROW(t.validate(), InvalidArgument);
  t = default_topology(8, 2);
  t.leaky_slope = 1.0;
  EXPECT_THROW(t.validate(), InvalidArgument);
  TrainConfig c;
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

}  // namespace
}  // namespace csidt
