// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/neural.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "csidt/binary_io.hpp"

namespace csidt {

void Topology::validate() const {
  if (encoder.size() < 2 || decoder.size() < 2) {
    throw InvalidArgument("topology: encoder and decoder need at least one layer");
  }
  if (encoder.back() != decoder.front()) {
    throw InvalidArgument("topology: encoder output must match decoder input");
  }
  if (encoder.front() != decoder.back()) {
    throw InvalidArgument("topology: decoder output must match encoder input");
  }
  for (int d : encoder)
    if (d < 1) throw InvalidArgument("topology: layer widths must be positive");
  for (int d : decoder)
    if (d < 1) throw InvalidArgument("topology: layer widths must be positive");
  if (n_streams < 1 || encoder.front() % (2 * n_streams) != 0) {
    throw InvalidArgument("topology: input width must be 2 * N_t * N_s");
  }
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    throw InvalidArgument("topology: leaky slope must lie in [0, 1)");
  }
}

Topology default_topology(int n_tx, int n_streams, int latent) {
  const int d = 2 * n_tx * n_streams;
  Topology t;
  t.encoder = {d, 512, 256, latent};
  t.decoder = {latent, 256, 512, d};
  t.n_streams = n_streams;
  return t;
}

int QuantizerSpec::index(double z) const {
  const int i = static_cast<int>(std::floor(z * levels()));
  return std::clamp(i, 0, levels() - 1);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("train: learning rate must be positive");
  if (batch_size < 1 || epochs < 0) throw InvalidArgument("train: bad batch size or epoch count");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw InvalidArgument("train: validation fraction must lie in [0, 1)");
  }
}

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::init(const Topology& topology, std::uint64_t seed) {
  topology.validate();
  ModelParams p;
  p.topology = topology;
  std::mt19937_64 rng(seed);
  auto make = [&](const std::vector<int>& dims, std::vector<DenseLayer<Scalar>>& out) {
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      const double limit = std::sqrt(6.0 / dims[i]);
      std::uniform_real_distribution<double> u(-limit, limit);
      DenseLayer<Scalar> l;
      l.weight.resize(dims[i + 1], dims[i]);
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = static_cast<Scalar>(u(rng));
      l.bias = VectorT<Scalar>::Zero(dims[i + 1]);
      out.push_back(std::move(l));
    }
  };
  make(topology.encoder, p.encoder);
  make(topology.decoder, p.decoder);
  return p;
}

template <typename Scalar>
bool ModelParams<Scalar>::all_finite() const {
  for (const auto* side : {&encoder, &decoder})
    for (const auto& l : *side)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

template <typename Scalar>
std::size_t ModelParams<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* side : {&encoder, &decoder})
    for (const auto& l : *side) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

template <typename Scalar>
bool ModelParams<Scalar>::operator==(const ModelParams& o) const {
  if (!(topology == o.topology) || encoder.size() != o.encoder.size() ||
      decoder.size() != o.decoder.size()) {
    return false;
  }
  auto same = [](const auto& a, const auto& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].weight != b[i].weight || a[i].bias != b[i].bias) return false;
    }
    return true;
  };
  return same(encoder, o.encoder) && same(decoder, o.decoder);
}

namespace {

template <typename Scalar>
std::uint64_t hash_layers(const std::vector<DenseLayer<Scalar>>& layers) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&](const Scalar* data, Eigen::Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(Scalar); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& l : layers) {
    feed(l.weight.data(), l.weight.size());
    feed(l.bias.data(), l.bias.size());
  }
  return h;
}

}  // namespace

template <typename Scalar>
std::uint64_t encoder_hash(const ModelParams<Scalar>& p) {
  return hash_layers(p.encoder);
}

template <typename Scalar>
std::uint64_t decoder_hash(const ModelParams<Scalar>& p) {
  return hash_layers(p.decoder);
}

RVector flatten_precoder(const CMatrix& w) {
  const auto n = w.rows();
  RVector x(2 * n * w.cols());
  for (Eigen::Index s = 0; s < w.cols(); ++s) {
    x.segment(2 * n * s, n) = w.col(s).real();
    x.segment(2 * n * s + n, n) = w.col(s).imag();
  }
  return x;
}

CMatrix unflatten_precoder(const RVector& x, int n_tx, int n_streams) {
  if (x.size() != 2 * n_tx * n_streams) {
    throw DimensionError("unflatten_precoder: vector length " + std::to_string(x.size()) +
                         " does not match " + std::to_string(n_tx) + "x" + std::to_string(n_streams));
  }
  CMatrix w(n_tx, n_streams);
  for (int s = 0; s < n_streams; ++s) {
    for (int k = 0; k < n_tx; ++k) w(k, s) = {x(2 * n_tx * s + k), x(2 * n_tx * s + n_tx + k)};
  }
  return w;
}

template <typename Scalar>
MatrixT<Scalar> flatten_batch(std::span<const Precoder> ps) {
  if (ps.empty()) return {};
  const auto d = 2 * ps.front().w.size();
  MatrixT<Scalar> x(d, static_cast<Eigen::Index>(ps.size()));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (2 * ps[i].w.size() != d) throw DimensionError("flatten_batch: inconsistent precoder sizes");
    x.col(static_cast<Eigen::Index>(i)) = flatten_precoder(ps[i].w).template cast<Scalar>();
  }
  return x;
}

namespace {

template <typename Scalar>
struct Cache {
  std::vector<MatrixT<Scalar>> enc_pre;   // pre-activations per encoder layer
  std::vector<MatrixT<Scalar>> enc_act;   // inputs to each encoder layer, then the latent
  std::vector<MatrixT<Scalar>> dec_pre;
  std::vector<MatrixT<Scalar>> dec_act;   // inputs to each decoder layer
  MatrixT<Scalar> out_raw;                // last decoder layer output
  MatrixT<Scalar> norms;                  // N_s x B
  MatrixT<Scalar> out;                    // renormalised output
  Eigen::MatrixXi indices;
};

template <typename Scalar>
void leaky(MatrixT<Scalar>& m, Scalar slope) {
  m = m.cwiseMax(slope * m);
}

template <typename Scalar>
void check_input(const ModelParams<Scalar>& p, const MatrixT<Scalar>& x) {
  if (x.rows() != p.topology.input_dim()) {
    throw DimensionError("autoencoder input has " + std::to_string(x.rows()) + " rows, model expects " +
                         std::to_string(p.topology.input_dim()));
  }
  if (!x.allFinite()) throw NumericalError("autoencoder input contains NaN/Inf");
}

template <typename Scalar>
void run_encoder(const ModelParams<Scalar>& p, const MatrixT<Scalar>& x, Cache<Scalar>& c) {
  const auto slope = static_cast<Scalar>(p.topology.leaky_slope);
  const auto n = p.encoder.size();
  c.enc_pre.resize(n);
  c.enc_act.resize(n + 1);
  c.enc_act[0] = x;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = p.encoder[i];
    c.enc_pre[i].noalias() = l.weight * c.enc_act[i];
    c.enc_pre[i].colwise() += l.bias;
    c.enc_act[i + 1] = c.enc_pre[i];
    if (i + 1 < n) {
      leaky(c.enc_act[i + 1], slope);
    } else {
      c.enc_act[i + 1] = (Scalar(1) / (Scalar(1) + (-c.enc_pre[i].array()).exp())).matrix();
    }
  }
}

template <typename Scalar>
void run_quantizer(const QuantizerSpec& q, bool quantize, Cache<Scalar>& c, MatrixT<Scalar>& dec_in) {
  const auto& z = c.enc_act.back();
  if (!quantize) {
    dec_in = z;
    c.indices.resize(0, 0);
    return;
  }
  c.indices.resize(z.rows(), z.cols());
  dec_in.resize(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const int idx = q.index(static_cast<double>(z(i, j)));
      c.indices(i, j) = idx;
      dec_in(i, j) = static_cast<Scalar>(q.level(idx));
    }
  }
}

template <typename Scalar>
void run_decoder(const ModelParams<Scalar>& p, const MatrixT<Scalar>& z, Cache<Scalar>& c) {
  const auto slope = static_cast<Scalar>(p.topology.leaky_slope);
  const auto n = p.decoder.size();
  c.dec_pre.resize(n);
  c.dec_act.resize(n);
  c.dec_act[0] = z;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = p.decoder[i];
    c.dec_pre[i].noalias() = l.weight * c.dec_act[i];
    c.dec_pre[i].colwise() += l.bias;
    if (i + 1 < n) {
      c.dec_act[i + 1] = c.dec_pre[i];
      leaky(c.dec_act[i + 1], slope);
    }
  }
  c.out_raw = c.dec_pre.back();
  const int ns = p.topology.n_streams;
  const auto block = c.out_raw.rows() / ns;
  c.norms.resize(ns, c.out_raw.cols());
  c.out.resize(c.out_raw.rows(), c.out_raw.cols());
  const Scalar tiny = std::numeric_limits<Scalar>::min();
  for (int s = 0; s < ns; ++s) {
    auto raw = c.out_raw.middleRows(s * block, block);
    c.norms.row(s) = raw.colwise().norm().cwiseMax(tiny);
    c.out.middleRows(s * block, block) =
        (raw.array().rowwise() / c.norms.row(s).array()).matrix();
  }
}

template <typename Scalar>
void check_finite(const MatrixT<Scalar>& m, const char* where) {
  if (!m.allFinite()) throw NumericalError(std::string("NaN/Inf produced in ") + where);
}

}  // namespace

template <typename Scalar>
MatrixT<Scalar> encode(const ModelParams<Scalar>& p, const MatrixT<Scalar>& x) {
  check_input(p, x);
  Cache<Scalar> c;
  run_encoder(p, x, c);
  check_finite(c.enc_act.back(), "encoder");
  return c.enc_act.back();
}

template <typename Scalar>
MatrixT<Scalar> decode(const ModelParams<Scalar>& p, const MatrixT<Scalar>& z) {
  if (z.rows() != p.topology.latent_dim()) throw DimensionError("decode: latent width mismatch");
  Cache<Scalar> c;
  run_decoder(p, z, c);
  check_finite(c.out, "decoder");
  return c.out;
}

template <typename Scalar>
ForwardResult<Scalar> forward(const ModelParams<Scalar>& p, const MatrixT<Scalar>& x,
                              const QuantizerSpec& q, bool quantize) {
  check_input(p, x);
  Cache<Scalar> c;
  run_encoder(p, x, c);
  ForwardResult<Scalar> r;
  run_quantizer(q, quantize, c, r.decoder_input);
  run_decoder(p, r.decoder_input, c);
  check_finite(c.out, "autoencoder forward pass");
  r.latent = c.enc_act.back();
  r.indices = c.indices;
  r.reconstruction = c.out;
  return r;
}

CodewordBits pack_codeword(const Eigen::MatrixXi& indices, Eigen::Index col, const QuantizerSpec& q) {
  CodewordBits bits(Scheme::Neural);
  for (Eigen::Index i = 0; i < indices.rows(); ++i) {
    bits.push(static_cast<std::uint64_t>(indices(i, col)), q.bits);
  }
  return bits;
}

Eigen::VectorXi unpack_codeword(const CodewordBits& bits, int latent_dim, const QuantizerSpec& q) {
  if (bits.size() != static_cast<std::size_t>(latent_dim * q.bits)) {
    throw DimensionError("neural codeword has " + std::to_string(bits.size()) + " bits, expected " +
                         std::to_string(latent_dim * q.bits));
  }
  BitReader in(bits);
  Eigen::VectorXi out(latent_dim);
  for (int i = 0; i < latent_dim; ++i) out(i) = static_cast<int>(in.read(q.bits));
  return out;
}

template <typename Scalar>
Scalar loss_mse(const MatrixT<Scalar>& w, const MatrixT<Scalar>& w_hat) {
  if (w.rows() != w_hat.rows() || w.cols() != w_hat.cols()) {
    throw DimensionError("loss_mse: shape mismatch");
  }
  if (w.size() == 0) return Scalar(0);
  return (w - w_hat).squaredNorm() / static_cast<Scalar>(w.size());
}

namespace {

template <typename Scalar>
void dense_backward(const DenseLayer<Scalar>& l, const MatrixT<Scalar>& input,
                    const MatrixT<Scalar>& grad_out, DenseLayer<Scalar>& grad,
                    MatrixT<Scalar>* grad_in) {
  grad.weight.noalias() = grad_out * input.transpose();
  grad.bias = grad_out.rowwise().sum();
  if (grad_in) grad_in->noalias() = l.weight.transpose() * grad_out;
}

template <typename Scalar>
void leaky_backward(const MatrixT<Scalar>& pre, Scalar slope, MatrixT<Scalar>& grad) {
  grad = (pre.array() > Scalar(0)).select(grad, slope * grad);
}

// Loss and decoder gradients for a decoder pass already stored in `c`.
// Returns the gradient with respect to the decoder input when requested.
template <typename Scalar>
MatrixT<Scalar> decoder_backward(const ModelParams<Scalar>& p, const Cache<Scalar>& c,
                                 const MatrixT<Scalar>& target, Gradients<Scalar>& g,
                                 bool need_input_grad) {
  const auto slope = static_cast<Scalar>(p.topology.leaky_slope);
  g.loss = loss_mse<Scalar>(target, c.out);
  MatrixT<Scalar> grad = (c.out - target) * (Scalar(2) / static_cast<Scalar>(target.size()));

  // Through the per-stream renormalisation y = u / |u|.
  const int ns = p.topology.n_streams;
  const auto block = c.out.rows() / ns;
  for (int s = 0; s < ns; ++s) {
    auto gy = grad.middleRows(s * block, block);
    const auto y = c.out.middleRows(s * block, block);
    const auto proj = (y.array() * gy.array()).colwise().sum().eval();
    gy = ((gy - (y.array().rowwise() * proj).matrix()).array().rowwise() /
          c.norms.row(s).array()).matrix();
  }

  g.decoder.resize(p.decoder.size());
  for (std::size_t i = p.decoder.size(); i-- > 0;) {
    MatrixT<Scalar> grad_in;
    const bool need_input = i > 0 || need_input_grad;
    dense_backward(p.decoder[i], c.dec_act[i], grad, g.decoder[i], need_input ? &grad_in : nullptr);
    if (i > 0) leaky_backward(c.dec_pre[i - 1], slope, grad_in);
    grad = std::move(grad_in);
  }
  return grad;
}

template <typename Scalar>
Gradients<Scalar> backward_decoder(const ModelParams<Scalar>& p, const MatrixT<Scalar>& z,
                                   const MatrixT<Scalar>& target) {
  Cache<Scalar> c;
  run_decoder(p, z, c);
  check_finite(c.out, "decoder forward pass");
  Gradients<Scalar> g;
  decoder_backward(p, c, target, g, false);
  return g;
}

}  // namespace

template <typename Scalar>
Gradients<Scalar> backward(const ModelParams<Scalar>& p, const MatrixT<Scalar>& x,
                           const MatrixT<Scalar>& target, const QuantizerSpec& q, bool quantize,
                           bool decoder_only) {
  check_input(p, x);
  if (target.rows() != p.topology.decoder.back() || target.cols() != x.cols()) {
    throw DimensionError("backward: target shape mismatch");
  }
  const auto slope = static_cast<Scalar>(p.topology.leaky_slope);
  Cache<Scalar> c;
  run_encoder(p, x, c);
  MatrixT<Scalar> dec_in;
  run_quantizer(q, quantize, c, dec_in);
  run_decoder(p, dec_in, c);
  check_finite(c.out, "autoencoder forward pass");

  Gradients<Scalar> g;
  MatrixT<Scalar> grad = decoder_backward(p, c, target, g, !decoder_only);
  if (decoder_only) return g;

  // Straight-through quantizer, then the logistic output.
  const auto& z = c.enc_act.back();
  grad = (grad.array() * z.array() * (Scalar(1) - z.array())).matrix();
  g.encoder.resize(p.encoder.size());
  for (std::size_t i = p.encoder.size(); i-- > 0;) {
    MatrixT<Scalar> grad_in;
    dense_backward(p.encoder[i], c.enc_act[i], grad, g.encoder[i], i > 0 ? &grad_in : nullptr);
    if (i > 0) leaky_backward(c.enc_pre[i - 1], slope, grad_in);
    grad = std::move(grad_in);
  }
  return g;
}

namespace {

template <typename Scalar>
class Adam {
 public:
  Adam(const std::vector<DenseLayer<Scalar>>& layers, const TrainConfig& cfg) : cfg_(cfg) {
    for (const auto& l : layers) {
      m_.push_back({MatrixT<Scalar>::Zero(l.weight.rows(), l.weight.cols()),
                    VectorT<Scalar>::Zero(l.bias.size())});
    }
    v_ = m_;
  }

  void step(std::vector<DenseLayer<Scalar>>& layers, const std::vector<DenseLayer<Scalar>>& grads) {
    ++t_;
    const auto b1 = static_cast<Scalar>(cfg_.beta1);
    const auto b2 = static_cast<Scalar>(cfg_.beta2);
    const auto c1 = static_cast<Scalar>(1.0 - std::pow(cfg_.beta1, t_));
    const auto c2 = static_cast<Scalar>(1.0 - std::pow(cfg_.beta2, t_));
    const auto lr = static_cast<Scalar>(cfg_.learning_rate);
    const auto eps = static_cast<Scalar>(cfg_.epsilon);
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
      update(layers[i].weight, m_[i].weight, v_[i].weight, grads[i].weight);
      update(layers[i].bias, m_[i].bias, v_[i].bias, grads[i].bias);
    }
  }

 private:
  TrainConfig cfg_;
  std::vector<DenseLayer<Scalar>> m_;
  std::vector<DenseLayer<Scalar>> v_;
  int t_ = 0;
};

// Hold out whole positions so that subbands of one position never straddle
// the training and validation sides.
void split_by_position(std::span<const Precoder> ds, double fraction, std::uint64_t seed,
                       std::vector<Eigen::Index>& train_idx, std::vector<Eigen::Index>& val_idx) {
  std::set<int> unique;
  for (const auto& p : ds) unique.insert(p.position);
  std::vector<int> positions(unique.begin(), unique.end());
  std::set<int> held;
  if (fraction > 0.0 && positions.size() >= 2) {
    std::mt19937_64 rng(mix_seed(seed, 0x5a17));
    std::shuffle(positions.begin(), positions.end(), rng);
    auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(positions.size())));
    n = std::min(n, positions.size() - 1);
    held.insert(positions.begin(), positions.begin() + static_cast<std::ptrdiff_t>(n));
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (held.count(ds[i].position) ? val_idx : train_idx).push_back(static_cast<Eigen::Index>(i));
  }
}

template <typename Scalar>
MatrixT<Scalar> gather(const MatrixT<Scalar>& x, std::span<const Eigen::Index> idx) {
  MatrixT<Scalar> out(x.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = x.col(idx[i]);
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Shared loop for full training and decoder-only fine-tuning. For the
// latter `inputs` holds the frozen (dequantised) codewords.
template <typename Scalar>
TrainResult<Scalar> optimise(const ModelParams<Scalar>& init, const MatrixT<Scalar>& inputs,
                             const MatrixT<Scalar>& targets, std::span<const Precoder> ds,
                             const QuantizerSpec& q, const TrainConfig& cfg, bool decoder_only) {
  cfg.validate();
  std::vector<Eigen::Index> train_idx, val_idx;
  split_by_position(ds, cfg.validation_fraction, cfg.seed, train_idx, val_idx);
  const bool quantize = cfg.ste;

  auto eval_loss = [&](const ModelParams<Scalar>& p, const std::vector<Eigen::Index>& idx) {
    if (idx.empty()) return 0.0;
    const auto x = gather(inputs, idx);
    const auto t = gather(targets, idx);
    MatrixT<Scalar> out = decoder_only ? decode(p, x) : forward(p, x, q, quantize).reconstruction;
    return static_cast<double>(loss_mse<Scalar>(t, out));
  };

  TrainResult<Scalar> result;
  ModelParams<Scalar> params = init;
  Adam<Scalar> adam_enc(params.encoder, cfg);
  Adam<Scalar> adam_dec(params.decoder, cfg);
  const double initial = eval_loss(params, train_idx);
  const auto& select_idx = val_idx.empty() ? train_idx : val_idx;
  double best = eval_loss(params, select_idx);
  result.params = params;
  result.best_epoch = 0;

  std::vector<Eigen::Index> order = train_idx;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> losses;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto n = std::min(batch, order.size() - start);
      const std::span<const Eigen::Index> idx(order.data() + start, n);
      const auto x = gather(inputs, idx);
      const auto t = gather(targets, idx);
      Gradients<Scalar> g;
      if (decoder_only) {
        g = backward_decoder(params, x, t);
      } else {
        g = backward(params, x, t, q, quantize, false);
      }
      const double loss = static_cast<double>(g.loss);
      if (!std::isfinite(loss) || (initial > 0.0 && loss > 10.0 * initial)) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ": batch loss " +
                             std::to_string(loss) + " vs initial " + std::to_string(initial));
      }
      losses.push_back(loss);
      if (!decoder_only) adam_enc.step(params.encoder, g.encoder);
      adam_dec.step(params.decoder, g.decoder);
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = losses.empty() ? 0.0
                                   : std::accumulate(losses.begin(), losses.end(), 0.0) /
                                         static_cast<double>(losses.size());
    st.train_loss_median = median(losses);
    st.validation_loss = eval_loss(params, select_idx);
    result.history.push_back(st);
    if (st.validation_loss < best) {
      best = st.validation_loss;
      result.params = params;
      result.best_epoch = epoch;
    }
  }
  if (!result.params.all_finite()) throw NumericalError("training produced non-finite parameters");
  return result;
}

}  // namespace

template <typename Scalar>
TrainResult<Scalar> train(const ModelParams<Scalar>& init, std::span<const Precoder> dataset,
                          const QuantizerSpec& q, const TrainConfig& cfg) {
  if (dataset.empty()) throw InvalidArgument("train: empty dataset");
  const auto x = flatten_batch<Scalar>(dataset);
  return optimise(init, x, x, dataset, q, cfg, false);
}

template <typename Scalar>
TrainResult<Scalar> finetune_decoder(const ModelParams<Scalar>& trained,
                                     std::span<const Precoder> dataset, const QuantizerSpec& q,
                                     const TrainConfig& cfg) {
  if (dataset.empty()) throw InvalidArgument("finetune_decoder: empty online-learning set");
  const auto x = flatten_batch<Scalar>(dataset);
  const auto fw = forward(trained, x, q, cfg.ste);
  auto result = optimise(trained, fw.decoder_input, x, dataset, q, cfg, true);
  if (encoder_hash(result.params) != encoder_hash(trained)) {
    throw Error("finetune_decoder: encoder parameters changed");
  }
  return result;
}

template <typename Scalar>
std::vector<Precoder> reconstruct(const ModelParams<Scalar>& p, std::span<const Precoder> ps,
                                  const QuantizerSpec& q, bool quantize) {
  std::vector<Precoder> out;
  if (ps.empty()) return out;
  const int n_tx = static_cast<int>(ps.front().n_tx());
  const int ns = static_cast<int>(ps.front().n_streams());
  const auto x = flatten_batch<Scalar>(ps);
  const auto y = forward(p, x, q, quantize).reconstruction;
  out.reserve(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Precoder r;
    r.w = unflatten_precoder(y.col(static_cast<Eigen::Index>(i)).template cast<double>(), n_tx, ns);
    r.eigenvalues = RVector::Zero(ns);
    r.subband = ps[i].subband;
    r.position = ps[i].position;
    r.domain = ps[i].domain;
    out.push_back(std::move(r));
  }
  return out;
}

template <typename Scalar>
std::string serialize_model(const ModelParams<Scalar>& p) {
  ByteWriter w;
  w.raw("CSIAE1");
  w.u16(kModelVersion);
  w.u32(static_cast<std::uint32_t>(p.topology.n_streams));
  w.f64(p.topology.leaky_slope);
  for (const auto* dims : {&p.topology.encoder, &p.topology.decoder}) {
    w.u32(static_cast<std::uint32_t>(dims->size()));
    for (int d : *dims) w.u32(static_cast<std::uint32_t>(d));
  }
  for (const auto* side : {&p.encoder, &p.decoder}) {
    for (const auto& l : *side) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.f64(static_cast<double>(l.weight(r, c)));
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) w.f64(static_cast<double>(l.bias(r)));
    }
  }
  return std::string(w.view());
}

template <typename Scalar>
ModelParams<Scalar> parse_model(std::string_view bytes, const Topology* expected) {
  ByteReader in(bytes, "model checkpoint");
  if (bytes.size() < 6 || in.raw(6) != "CSIAE1") throw MagicError("not a model checkpoint (bad magic)");
  const auto version = in.u16();
  if (version != kModelVersion) throw VersionError("model checkpoint", version, kModelVersion);
  Topology t;
  t.n_streams = static_cast<int>(in.u32());
  t.leaky_slope = in.f64();
  for (auto* dims : {&t.encoder, &t.decoder}) {
    const auto n = in.u32();
    if (n > 64) throw FormatError("model checkpoint: implausible layer count");
    dims->clear();
    for (std::uint32_t i = 0; i < n; ++i) dims->push_back(static_cast<int>(in.u32()));
  }
  t.validate();
  if (expected && !(*expected == t)) {
    throw ConfigError("model checkpoint topology does not match the configuration");
  }
  ModelParams<Scalar> p;
  p.topology = t;
  auto read = [&](const std::vector<int>& dims, std::vector<DenseLayer<Scalar>>& out) {
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      DenseLayer<Scalar> l;
      l.weight.resize(dims[i + 1], dims[i]);
      l.bias.resize(dims[i + 1]);
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = static_cast<Scalar>(in.f64());
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = static_cast<Scalar>(in.f64());
      out.push_back(std::move(l));
    }
  };
  read(t.encoder, p.encoder);
  read(t.decoder, p.decoder);
  if (!in.done()) throw FormatError("model checkpoint: trailing bytes");
  return p;
}

template <typename Scalar>
void save_model(const std::string& path, const ModelParams<Scalar>& p) {
  const auto bytes = serialize_model(p);
  if (const auto dir = std::filesystem::path(path).parent_path(); !dir.empty()) {
    std::filesystem::create_directories(dir);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename Scalar>
ModelParams<Scalar> load_model(const std::string& path, const Topology* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("missing checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model<Scalar>(ss.str(), expected);
}

#define CSIDT_INSTANTIATE(S)                                                                     \
  template struct ModelParams<S>;                                                                \
  template std::uint64_t encoder_hash<S>(const ModelParams<S>&);                                 \
  template std::uint64_t decoder_hash<S>(const ModelParams<S>&);                                 \
  template MatrixT<S> flatten_batch<S>(std::span<const Precoder>);                               \
  template MatrixT<S> encode<S>(const ModelParams<S>&, const MatrixT<S>&);                       \
  template MatrixT<S> decode<S>(const ModelParams<S>&, const MatrixT<S>&);                       \
  template ForwardResult<S> forward<S>(const ModelParams<S>&, const MatrixT<S>&,                 \
                                       const QuantizerSpec&, bool);                              \
  template S loss_mse<S>(const MatrixT<S>&, const MatrixT<S>&);                                  \
  template Gradients<S> backward<S>(const ModelParams<S>&, const MatrixT<S>&, const MatrixT<S>&, \
                                    const QuantizerSpec&, bool, bool);                           \
  template TrainResult<S> train<S>(const ModelParams<S>&, std::span<const Precoder>,             \
                                   const QuantizerSpec&, const TrainConfig&);                    \
  template TrainResult<S> finetune_decoder<S>(const ModelParams<S>&, std::span<const Precoder>,  \
                                              const QuantizerSpec&, const TrainConfig&);         \
  template std::vector<Precoder> reconstruct<S>(const ModelParams<S>&, std::span<const Precoder>,\
                                                const QuantizerSpec&, bool);                     \
  template std::string serialize_model<S>(const ModelParams<S>&);                                \
  template ModelParams<S> parse_model<S>(std::string_view, const Topology*);                     \
  template void save_model<S>(const std::string&, const ModelParams<S>&);                        \
  template ModelParams<S> load_model<S>(const std::string&, const Topology*);

CSIDT_INSTANTIATE(float)
CSIDT_INSTANTIATE(double)

#undef CSIDT_INSTANTIATE

}  // namespace csidt
