#include "c2dn/fcdae.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "c2dn/error.hpp"

namespace c2dn::dae {

using nn::Tensor4;

void Architecture::validate() const {
  if (encoder_channels.empty()) {
    throw_config("architecture: encoder channel list is empty");
  }
  for (std::size_t c : encoder_channels) {
    if (c == 0) throw_config("architecture: channel counts must be >= 1");
  }
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw_config("architecture: kernel_size must be odd, got " +
                 std::to_string(kernel_size));
  }
  if (input_channels != 1) {
    throw_config("architecture: input_channels must be 1");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> Architecture::encoder_chain()
    const {
  std::vector<std::pair<std::size_t, std::size_t>> chain;
  std::size_t in = input_channels;
  for (std::size_t out : encoder_channels) {
    chain.emplace_back(in, out);
    in = out;
  }
  return chain;
}

std::vector<std::pair<std::size_t, std::size_t>> Architecture::decoder_chain()
    const {
  auto enc = encoder_chain();
  std::vector<std::pair<std::size_t, std::size_t>> chain;
  for (auto it = enc.rbegin(); it != enc.rend(); ++it) {
    chain.emplace_back(it->second, it->first);
  }
  return chain;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& c : encoder_conv) n += c.weights.size() + c.bias.size();
  for (const auto& c : decoder_conv) n += c.weights.size() + c.bias.size();
  for (const auto& b : encoder_bn) n += 2 * b.channels();
  for (const auto& b : decoder_bn) n += 2 * b.channels();
  return n;
}

namespace {

// Visits learnable parameter blocks in forward-layer order.
template <typename ModelT, typename Fn>
void for_each_block(ModelT& m, Fn&& fn) {
  for (std::size_t i = 0; i < m.encoder_conv.size(); ++i) {
    fn(m.encoder_conv[i].weights.data());
    fn(std::span(m.encoder_conv[i].bias));
    fn(std::span(m.encoder_bn[i].gamma));
    fn(std::span(m.encoder_bn[i].beta_shift));
  }
  for (std::size_t i = 0; i < m.decoder_conv.size(); ++i) {
    fn(m.decoder_conv[i].weights.data());
    fn(std::span(m.decoder_conv[i].bias));
    if (i < m.decoder_bn.size()) {
      fn(std::span(m.decoder_bn[i].gamma));
      fn(std::span(m.decoder_bn[i].beta_shift));
    }
  }
}

void append(std::vector<double>& out, std::span<const double> s) {
  out.insert(out.end(), s.begin(), s.end());
}

void append(std::vector<double>& out, const std::vector<double>& v) {
  out.insert(out.end(), v.begin(), v.end());
}

}  // namespace

std::vector<double> Model::flatten_parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for_each_block(*this, [&](auto s) { append(flat, std::span<const double>(s)); });
  return flat;
}

void Model::assign_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw_shape("assign_parameters: expected " +
                std::to_string(parameter_count()) + " values, got " +
                std::to_string(flat.size()));
  }
  std::size_t pos = 0;
  for_each_block(*this, [&](auto s) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), s.size(),
                s.begin());
    pos += s.size();
  });
}

Model build_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  Model m;
  m.arch = arch;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  const std::size_t k = arch.kernel_size;

  auto init = [&](nn::ConvLayerParams& layer, std::size_t in_ch) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * k * k));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : layer.weights.data()) w = dist(rng);
  };

  for (auto [in, out] : arch.encoder_chain()) {
    m.encoder_conv.push_back(nn::ConvLayerParams::for_conv(in, out, k));
    init(m.encoder_conv.back(), in);
    m.encoder_bn.emplace_back(out);
  }
  const auto dec = arch.decoder_chain();
  for (std::size_t i = 0; i < dec.size(); ++i) {
    const auto [in, out] = dec[i];
    m.decoder_conv.push_back(nn::ConvLayerParams::for_transpose(in, out, k));
    init(m.decoder_conv.back(), in);
    if (i + 1 < dec.size()) m.decoder_bn.emplace_back(out);
  }
  return m;
}

namespace {

void check_input(const Model& model, const Tensor4& batch) {
  if (batch.channels() != model.arch.input_channels) {
    throw_shape("forward: expected " +
                std::to_string(model.arch.input_channels) +
                " input channel(s), got " + std::to_string(batch.channels()));
  }
}

}  // namespace

Tensor4 forward(const Model& model, const Tensor4& batch) {
  check_input(model, batch);
  Tensor4 x = batch;
  for (std::size_t i = 0; i < model.encoder_conv.size(); ++i) {
    x = nn::elu(nn::batchnorm2d_eval(nn::conv2d(x, model.encoder_conv[i]),
                                     model.encoder_bn[i]));
  }
  for (std::size_t i = 0; i < model.decoder_conv.size(); ++i) {
    x = nn::conv_transpose2d(x, model.decoder_conv[i]);
    if (i < model.decoder_bn.size()) {
      x = nn::elu(nn::batchnorm2d_eval(x, model.decoder_bn[i]));
    }
  }
  return x;
}

Tensor4 forward_train(Model& model, const Tensor4& batch, Tape& tape) {
  check_input(model, batch);
  tape.encoder.assign(model.encoder_conv.size(), {});
  tape.decoder.assign(model.decoder_conv.size(), {});
  Tensor4 x = batch;
  for (std::size_t i = 0; i < model.encoder_conv.size(); ++i) {
    auto& rec = tape.encoder[i];
    rec.input = std::move(x);
    rec.pre_activation =
        nn::batchnorm2d(nn::conv2d(rec.input, model.encoder_conv[i]),
                        model.encoder_bn[i], nn::Mode::Train, &rec.bn);
    x = nn::elu(rec.pre_activation);
  }
  for (std::size_t i = 0; i < model.decoder_conv.size(); ++i) {
    auto& rec = tape.decoder[i];
    rec.input = std::move(x);
    x = nn::conv_transpose2d(rec.input, model.decoder_conv[i]);
    if (i < model.decoder_bn.size()) {
      rec.pre_activation = nn::batchnorm2d(x, model.decoder_bn[i],
                                           nn::Mode::Train, &rec.bn);
      x = nn::elu(rec.pre_activation);
    }
  }
  return x;
}

std::vector<double> backward(const Model& model, const Tape& tape,
                             const Tensor4& grad_out) {
  // Per-layer gradient blocks, filled back to front, emitted front to back.
  struct LayerGrads {
    Tensor4 weights;
    std::vector<double> bias, gamma, beta;
  };
  std::vector<LayerGrads> enc(model.encoder_conv.size());
  std::vector<LayerGrads> dec(model.decoder_conv.size());

  Tensor4 g = grad_out;
  for (std::size_t ii = dec.size(); ii-- > 0;) {
    const auto& rec = tape.decoder[ii];
    if (ii < model.decoder_bn.size()) {
      g = nn::elu_grad(g, rec.pre_activation);
      auto bg = nn::batchnorm2d_grad(g, rec.bn, model.decoder_bn[ii]);
      dec[ii].gamma = std::move(bg.gamma);
      dec[ii].beta = std::move(bg.beta_shift);
      g = std::move(bg.input);
    }
    auto cg = nn::conv_transpose2d_grad(g, rec.input, model.decoder_conv[ii]);
    dec[ii].weights = std::move(cg.weights);
    dec[ii].bias = std::move(cg.bias);
    g = std::move(cg.input);
  }
  for (std::size_t ii = enc.size(); ii-- > 0;) {
    const auto& rec = tape.encoder[ii];
    g = nn::elu_grad(g, rec.pre_activation);
    auto bg = nn::batchnorm2d_grad(g, rec.bn, model.encoder_bn[ii]);
    enc[ii].gamma = std::move(bg.gamma);
    enc[ii].beta = std::move(bg.beta_shift);
    auto cg = nn::conv2d_grad(bg.input, rec.input, model.encoder_conv[ii]);
    enc[ii].weights = std::move(cg.weights);
    enc[ii].bias = std::move(cg.bias);
    if (ii > 0) g = std::move(cg.input);
  }

  std::vector<double> flat;
  flat.reserve(model.parameter_count());
  for (const auto& l : enc) {
    append(flat, l.weights.data());
    append(flat, l.bias);
    append(flat, l.gamma);
    append(flat, l.beta);
  }
  for (const auto& l : dec) {
    append(flat, l.weights.data());
    append(flat, l.bias);
    append(flat, l.gamma);
    append(flat, l.beta);
  }
  return flat;
}

void TrainConfig::validate() const {
  if (max_epochs < 1) throw_config("train: max_epochs must be >= 1");
  if (batch_size < 1) throw_config("train: batch_size must be >= 1");
  if (!(early_stop_loss_threshold > 0.0)) {
    throw_config("train: early_stop_loss_threshold must be > 0");
  }
  if (!(learning_rate > 0.0)) throw_config("train: learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw_config("train: Adam betas must lie in [0, 1)");
  }
}

Tensor4 to_tensor(const C2Matrix& c2) {
  Tensor4 t(1, 1, c2.size(), c2.size());
  std::copy(c2.values().begin(), c2.values().end(), t.data().begin());
  return t;
}

C2Matrix from_tensor(const Tensor4& t, std::size_t sample) {
  if (t.channels() != 1 || t.height() != t.width()) {
    throw_shape("from_tensor: expected a single square channel, got " +
                t.shape_string());
  }
  const auto plane = t.channel_plane(sample, 0);
  return C2Matrix(t.height(), std::vector<double>(plane.begin(), plane.end()));
}

TrainingPair make_training_pair(const C2Matrix& raw, const C2Matrix& truth) {
  if (raw.size() != truth.size()) {
    throw_shape("training pair: raw is " + std::to_string(raw.size()) +
                ", truth is " + std::to_string(truth.size()));
  }
  auto std_raw = corr::standardize(raw);
  return {std::move(std_raw.matrix),
          corr::apply_standardization(truth, std_raw.params)};
}

std::vector<double> train(Model& model, const std::vector<TrainingPair>& data,
                          const TrainConfig& config) {
  config.validate();
  if (data.empty()) throw_config("train: empty dataset");

  // Batches never mix crop sizes.
  std::map<std::size_t, std::vector<std::size_t>> by_size;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].input.size() != data[i].target.size()) {
      throw_shape("train: pair " + std::to_string(i) +
                  " has mismatched input/target sizes");
    }
    by_size[data[i].input.size()].push_back(i);
  }

  nn::AdamState adam(model.parameter_count(), config.learning_rate,
                     config.beta1, config.beta2, config.adam_eps);
  std::mt19937_64 rng(config.shuffle_seed);
  std::vector<double> history;
  Tape tape;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::vector<std::vector<std::size_t>> batches;
    for (auto& [size, idx] : by_size) {
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t s = 0; s < idx.size(); s += config.batch_size) {
        const std::size_t e = std::min(idx.size(), s + config.batch_size);
        batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(s),
                             idx.begin() + static_cast<std::ptrdiff_t>(e));
      }
    }
    std::shuffle(batches.begin(), batches.end(), rng);

    double weighted = 0.0;
    for (const auto& batch : batches) {
      const std::size_t n = data[batch.front()].input.size();
      Tensor4 input(batch.size(), 1, n, n);
      Tensor4 target(batch.size(), 1, n, n);
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& pair = data[batch[b]];
        std::copy(pair.input.values().begin(), pair.input.values().end(),
                  input.sample(b).begin());
        std::copy(pair.target.values().begin(), pair.target.values().end(),
                  target.sample(b).begin());
      }
      const Tensor4 output = forward_train(model, input, tape);
      const auto loss = nn::mse_loss(output, target);
      const auto grads = backward(model, tape, loss.grad);
      auto params = model.flatten_parameters();
      nn::adam_step(params, grads, adam);
      model.assign_parameters(params);
      weighted += loss.loss * static_cast<double>(batch.size());
    }
    const double epoch_loss = weighted / static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss)) {
      throw_numeric("train: loss diverged at epoch " + std::to_string(epoch));
    }
    history.push_back(epoch_loss);
    if (epoch_loss < config.early_stop_loss_threshold) break;
  }
  model.meta.epochs_run = history.size();
  model.meta.final_loss = history.back();
  return history;
}

C2Matrix denoise(const Model& model, const C2Matrix& c2) {
  if (c2.size() < model.arch.kernel_size) {
    throw_shape("denoise: matrix of size " + std::to_string(c2.size()) +
                " is smaller than the kernel");
  }
  Standardized s;
  try {
    s = corr::standardize(c2);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Numeric) throw_numeric("denoise: constant input");
    throw;
  }
  const Tensor4 out = forward(model, to_tensor(s.matrix));
  C2Matrix restored = corr::destandardize(from_tensor(out), s.params);
  const std::size_t n = restored.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (restored(i, j) + restored(j, i));
      restored(i, j) = v;
      restored(j, i) = v;
    }
  }
  restored.set_frame_interval_s(c2.frame_interval_s());
  restored.set_q_label(c2.q_label());
  return restored;
}

std::vector<Model> train_ensemble(const Architecture& arch,
                                  const std::vector<TrainingPair>& data,
                                  const TrainConfig& config,
                                  const std::vector<std::uint64_t>& seeds,
                                  bool allow_duplicate_seeds) {
  if (seeds.empty()) throw_config("train_ensemble: no seeds given");
  if (!allow_duplicate_seeds) {
    std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
    if (unique.size() != seeds.size()) {
      throw_config("train_ensemble: duplicate seeds");
    }
  }
  std::vector<Model> models;
  models.reserve(seeds.size());
  for (std::uint64_t seed : seeds) {
    Model m = build_model(arch, seed);
    train(m, data, config);
    models.push_back(std::move(m));
  }
  return models;
}

}  // namespace c2dn::dae
