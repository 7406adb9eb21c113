// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csidt/precoder.hpp"
#include "csidt/type2.hpp"

namespace csidt {

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Layer widths of the fully connected encoder and decoder. Hidden layers
/// use a leaky rectifier; the encoder output goes through a logistic
/// function and the decoder output is renormalised to one unit vector per
/// stream.
struct Topology {
  std::vector<int> encoder{32, 512, 256, 16};
  std::vector<int> decoder{16, 256, 512, 32};
  int n_streams = 2;
  double leaky_slope = 0.1;

  int input_dim() const { return encoder.front(); }
  int latent_dim() const { return encoder.back(); }
  void validate() const;
  bool operator==(const Topology&) const = default;
};

/// Topology with the default hidden widths for an n_tx x n_streams precoder
/// and the given latent size.
Topology default_topology(int n_tx, int n_streams, int latent = 16);

template <typename Scalar>
struct DenseLayer {
  MatrixT<Scalar> weight;  // out x in
  VectorT<Scalar> bias;
};

template <typename Scalar>
struct ModelParams {
  Topology topology;
  std::vector<DenseLayer<Scalar>> encoder;
  std::vector<DenseLayer<Scalar>> decoder;

  /// Uniform fan-in initialisation, U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero biases.
  static ModelParams init(const Topology& topology, std::uint64_t seed);

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out;
    out.topology = topology;
    for (const auto& l : encoder) out.encoder.push_back({l.weight.template cast<Other>(), l.bias.template cast<Other>()});
    for (const auto& l : decoder) out.decoder.push_back({l.weight.template cast<Other>(), l.bias.template cast<Other>()});
    return out;
  }

  bool all_finite() const;
  std::size_t parameter_count() const;
  bool operator==(const ModelParams& o) const;
};

/// FNV-1a over the encoder weights and biases.
template <typename Scalar>
std::uint64_t encoder_hash(const ModelParams<Scalar>& p);
template <typename Scalar>
std::uint64_t decoder_hash(const ModelParams<Scalar>& p);

/// Uniform scalar quantizer on [0, 1] with 2^bits cells; level i sits at
/// the cell centre (i + 0.5) / 2^bits.
struct QuantizerSpec {
  int bits = 2;

  int levels() const { return 1 << bits; }
  double level(int i) const { return (i + 0.5) / levels(); }
  int index(double z) const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 64;
  int epochs = 200;
  std::uint64_t seed = 1;
  bool ste = true;                   // quantized forward, straight-through gradient
  double validation_fraction = 0.1;  // positions held out for model selection

  void validate() const;
};

/// [Re w_1; Im w_1; Re w_2; Im w_2; ...]
RVector flatten_precoder(const CMatrix& w);
CMatrix unflatten_precoder(const RVector& x, int n_tx, int n_streams);

/// Columns are flattened precoders.
template <typename Scalar>
MatrixT<Scalar> flatten_batch(std::span<const Precoder> ps);

template <typename Scalar>
struct ForwardResult {
  MatrixT<Scalar> latent;          // encoder output in (0,1), V x B
  MatrixT<Scalar> decoder_input;   // dequantised latent when quantizing
  Eigen::MatrixXi indices;         // quantizer cell per latent entry
  MatrixT<Scalar> reconstruction;  // unit-norm per stream, D x B
};

template <typename Scalar>
MatrixT<Scalar> encode(const ModelParams<Scalar>& p, const MatrixT<Scalar>& x);
template <typename Scalar>
MatrixT<Scalar> decode(const ModelParams<Scalar>& p, const MatrixT<Scalar>& z);

/// f_d(Q(f_e(x))), or f_d(f_e(x)) when `quantize` is false.
template <typename Scalar>
ForwardResult<Scalar> forward(const ModelParams<Scalar>& p, const MatrixT<Scalar>& x,
                              const QuantizerSpec& q, bool quantize);

/// V * bits codeword for column `col` of ForwardResult::indices.
CodewordBits pack_codeword(const Eigen::MatrixXi& indices, Eigen::Index col,
                           const QuantizerSpec& q);
Eigen::VectorXi unpack_codeword(const CodewordBits& bits, int latent_dim, const QuantizerSpec& q);

/// Mean of squared entry differences.
template <typename Scalar>
Scalar loss_mse(const MatrixT<Scalar>& w, const MatrixT<Scalar>& w_hat);

template <typename Scalar>
struct Gradients {
  std::vector<DenseLayer<Scalar>> encoder;
  std::vector<DenseLayer<Scalar>> decoder;
  Scalar loss = 0;
};

/// Reverse-mode gradients of loss_mse(target, f_a(x)). The quantizer, when
/// enabled, passes gradients straight through. With `decoder_only` the
/// encoder gradients are left empty.
template <typename Scalar>
Gradients<Scalar> backward(const ModelParams<Scalar>& p, const MatrixT<Scalar>& x,
                           const MatrixT<Scalar>& target, const QuantizerSpec& q, bool quantize,
                           bool decoder_only = false);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;         // mean minibatch loss
  double train_loss_median = 0.0;  // median minibatch loss
  double validation_loss = 0.0;
};

template <typename Scalar>
struct TrainResult {
  ModelParams<Scalar> params;  // best validation checkpoint
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

/// Offline training on a precoder corpus.
template <typename Scalar>
TrainResult<Scalar> train(const ModelParams<Scalar>& init, std::span<const Precoder> dataset,
                          const QuantizerSpec& q, const TrainConfig& cfg);

/// Online learning: update the decoder only, encoder bit-identical.
template <typename Scalar>
TrainResult<Scalar> finetune_decoder(const ModelParams<Scalar>& trained,
                                     std::span<const Precoder> dataset, const QuantizerSpec& q,
                                     const TrainConfig& cfg);

/// Reconstruct every precoder through the autoencoder.
template <typename Scalar>
std::vector<Precoder> reconstruct(const ModelParams<Scalar>& p, std::span<const Precoder> ps,
                                  const QuantizerSpec& q, bool quantize = true);

/// Checkpoint: "CSIAE1", u16 version, topology, then every weight matrix
/// (row-major) and bias as little-endian f64, encoder layers first.
template <typename Scalar>
std::string serialize_model(const ModelParams<Scalar>& p);
template <typename Scalar>
ModelParams<Scalar> parse_model(std::string_view bytes, const Topology* expected = nullptr);

template <typename Scalar>
void save_model(const std::string& path, const ModelParams<Scalar>& p);
template <typename Scalar>
ModelParams<Scalar> load_model(const std::string& path, const Topology* expected = nullptr);

inline constexpr std::uint16_t kModelVersion = 1;

}  // namespace csidt
