#pragma once

// Fully convolutional denoising autoencoder for C2 maps.
//
// Encoder layer i:  conv(k) -> batchnorm -> ELU
// Decoder layer j:  conv_transpose(k) -> batchnorm -> ELU
// Final layer:      conv_transpose(k) only (linear output)
//
// With encoder channels [c1..cL] and one input channel the encoder chains
// 1 -> c1 -> ... -> cL and the decoder mirrors it back to 1.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "c2dn/c2.hpp"
#include "c2dn/nn.hpp"

namespace c2dn::dae {

struct Architecture {
  std::vector<std::size_t> encoder_channels{1, 4, 8, 16, 32};
  std::size_t kernel_size = 3;
  std::size_t input_channels = 1;

  void validate() const;
  /// (in, out) channel pairs for the encoder convolutions.
  std::vector<std::pair<std::size_t, std::size_t>> encoder_chain() const;
  /// (in, out) channel pairs for the decoder transposed convolutions.
  std::vector<std::pair<std::size_t, std::size_t>> decoder_chain() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct TrainingMeta {
  std::size_t epochs_run = 0;
  double final_loss = 0.0;
};

struct Model {
  Architecture arch;
  std::uint64_t seed = 0;
  std::vector<nn::ConvLayerParams> encoder_conv;
  std::vector<nn::BatchNormParams> encoder_bn;
  std::vector<nn::ConvLayerParams> decoder_conv;
  std::vector<nn::BatchNormParams> decoder_bn;  // one fewer than decoder_conv
  TrainingMeta meta;

  /// Learnable scalars: conv weights and biases, batch-norm gamma and beta.
  std::size_t parameter_count() const;
  /// Learnable parameters in forward-layer order: for each layer conv
  /// weights, conv bias, then (if normalized) gamma, beta_shift.
  std::vector<double> flatten_parameters() const;
  void assign_parameters(std::span<const double> flat);
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, identity
/// batch norm. Deterministic in `seed`.
Model build_model(const Architecture& arch, std::uint64_t seed);

/// Eval-mode forward pass; never mutates the model.
nn::Tensor4 forward(const Model& model, const nn::Tensor4& batch);

/// Activations recorded by forward_train for backward().
struct Tape {
  struct Layer {
    nn::Tensor4 input;
    nn::BatchNormCache bn;
    nn::Tensor4 pre_activation;
  };
  std::vector<Layer> encoder;
  std::vector<Layer> decoder;
};

/// Train-mode forward pass: batch statistics, running stats updated.
nn::Tensor4 forward_train(Model& model, const nn::Tensor4& batch, Tape& tape);

/// Gradient of <output, grad_out> w.r.t. the learnable parameters, in
/// flatten_parameters() order.
std::vector<double> backward(const Model& model, const Tape& tape,
                             const nn::Tensor4& grad_out);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 30;
  double early_stop_loss_threshold = 1e-3;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

/// A standardized (input, target) pair of equal square size.
struct TrainingPair {
  C2Matrix input;
  C2Matrix target;
};

/// Standardizes both matrices with the statistics of `raw`.
TrainingPair make_training_pair(const C2Matrix& raw, const C2Matrix& truth);

/// Returns the mean loss of each completed epoch.
std::vector<double> train(Model& model, const std::vector<TrainingPair>& data,
                          const TrainConfig& config);

/// standardize -> forward (eval) -> destandardize -> (A + A^T) / 2.
C2Matrix denoise(const Model& model, const C2Matrix& c2);

std::vector<Model> train_ensemble(const Architecture& arch,
                                  const std::vector<TrainingPair>& data,
                                  const TrainConfig& config,
                                  const std::vector<std::uint64_t>& seeds,
                                  bool allow_duplicate_seeds = false);

// Checkpoint: "FCDA" | u32 version | u32 header_len | key:value header |
// f64 blob. The blob holds, in forward-layer order, each conv layer's
// weights then bias and each batch-norm layer's gamma, beta_shift,
// running_mean, running_var.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Model& model);
Model decode_checkpoint(std::string_view bytes);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

/// Matrix <-> (1, 1, n, n) tensor helpers.
nn::Tensor4 to_tensor(const C2Matrix& c2);
C2Matrix from_tensor(const nn::Tensor4& t, std::size_t sample = 0);

}  // namespace c2dn::dae
