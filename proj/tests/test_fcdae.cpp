#include <cmath>
#include <cstring>

#include "c2dn/error.hpp"
#include "c2dn/fcdae.hpp"
#include "c2dn/io.hpp"
#include "c2dn/synth.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace c2dn;
using namespace c2dn::dae;

namespace {

std::size_t closed_form_count(const Architecture& a) {
  std::size_t total = 0;
  const auto enc = a.encoder_chain();
  const auto dec = a.decoder_chain();
  const std::size_t k2 = a.kernel_size * a.kernel_size;
  for (auto [in, out] : enc) total += out * in * k2 + out + 2 * out;
  for (std::size_t i = 0; i < dec.size(); ++i) {
    const auto [in, out] = dec[i];
    total += out * in * k2 + out;
    if (i + 1 < dec.size()) total += 2 * out;
  }
  return total;
}

std::vector<TrainingPair> toy_pairs(std::size_t count, std::size_t n,
                                    std::uint64_t seed) {
  std::vector<TrainingPair> pairs;
  synth::SpeckleSpec spk;
  spk.n_pixels = 200;
  for (std::size_t i = 0; i < count; ++i) {
    const auto dyn = synth::DynamicsSpec::stationary(4.0 + static_cast<double>(i % 5), 1.0);
    auto s = synth::make_sample(dyn, spk, n, synth::derive_seed(seed, i));
    pairs.push_back(make_training_pair(corr::repair_diagonal(s.c2_raw),
                                       corr::repair_diagonal(s.c2_truth)));
  }
  return pairs;
}

}  // namespace

TEST_CASE("architecture chains and parameter count") {
  const Architecture a;
  using P = std::pair<std::size_t, std::size_t>;
  CHECK(a.encoder_chain() == std::vector<P>{{1, 1}, {1, 4}, {4, 8}, {8, 16}, {16, 32}});
  CHECK(a.decoder_chain() == std::vector<P>{{32, 16}, {16, 8}, {8, 4}, {4, 1}, {1, 1}});
  const Model m = build_model(a, 1);
  CHECK(m.parameter_count() == closed_form_count(a));
  CHECK(m.parameter_count() == 12457);
  CHECK(m.flatten_parameters().size() == 12457);
  CHECK(m.decoder_bn.size() + 1 == m.decoder_conv.size());

  Architecture bad;
  bad.kernel_size = 4;
  CHECK_THROWS_AS(build_model(bad, 1), Error);
  bad = Architecture{};
  bad.encoder_channels.clear();
  CHECK_THROWS_AS(build_model(bad, 1), Error);
}

TEST_CASE("initialization is deterministic and fan-in scaled") {
  const Architecture a;
  const Model m1 = build_model(a, 42), m2 = build_model(a, 42), m3 = build_model(a, 43);
  CHECK(m1.flatten_parameters() == m2.flatten_parameters());
  CHECK(m1.flatten_parameters() != m3.flatten_parameters());
  for (const auto& layer : m1.encoder_conv) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_channels() * 9));
    for (double w : layer.weights.data()) CHECK(std::abs(w) <= bound);
    for (double b : layer.bias) CHECK(b == 0.0);
  }
  for (const auto& bn : m1.encoder_bn) {
    for (double g : bn.gamma) CHECK(g == 1.0);
    for (double v : bn.running_var) CHECK(v == 1.0);
  }
}

TEST_CASE("forward preserves shape and is pure in eval mode") {
  const Model m = build_model(Architecture{}, 5);
  for (std::size_t n : {3u, 32u, 100u}) {
    const auto x = support::random_tensor(1, 1, n, n, n);
    const auto y = forward(m, x);
    CHECK(y.dims() == x.dims());
    CHECK(y.all_finite());
    CHECK(forward(m, x) == y);
  }
  Model zero = build_model(Architecture{}, 5);
  std::vector<double> flat(zero.parameter_count(), 0.0);
  zero.assign_parameters(flat);
  const auto out = forward(zero, support::random_tensor(1, 1, 9, 9, 1));
  for (double v : out.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(forward(m, nn::Tensor4(1, 2, 5, 5)), Error);
}

TEST_CASE("end-to-end loss gradient matches finite differences") {
  Model model = build_model(Architecture{}, 77);
  const auto x = support::random_tensor(2, 1, 8, 8, 78);
  const auto target = support::random_tensor(2, 1, 8, 8, 79);
  Tape tape;
  Model work = model;
  const auto out = forward_train(work, x, tape);
  const auto lg = nn::mse_loss(out, target);
  const auto analytic = backward(model, tape, lg.grad);

  std::vector<double> flat = model.flatten_parameters();
  auto objective = [&] {
    Model probe = model;
    probe.assign_parameters(flat);
    Tape t;
    return nn::mse_loss(forward_train(probe, x, t), target).loss;
  };
  const auto numeric = support::numeric_gradient(std::span<double>(flat), objective);
  CHECK(support::rel_error(analytic, numeric) < 1e-4);
}

TEST_CASE("training runs, stops early and is deterministic") {
  const auto pairs = toy_pairs(6, 16, 3);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 3;
  cfg.shuffle_seed = 9;

  Model a = build_model(Architecture{}, 1);
  Model b = build_model(Architecture{}, 1);
  const auto ha = train(a, pairs, cfg);
  const auto hb = train(b, pairs, cfg);
  CHECK(ha.size() == 3);
  CHECK(ha == hb);
  CHECK(a.flatten_parameters() == b.flatten_parameters());
  CHECK(a.meta.epochs_run == 3);

  TrainConfig stop = cfg;
  stop.early_stop_loss_threshold = 1e300;
  Model c = build_model(Architecture{}, 1);
  CHECK(train(c, pairs, stop).size() == 1);

  CHECK_THROWS_AS(train(c, {}, cfg), Error);
  TrainConfig bad = cfg;
  bad.max_epochs = 0;
  CHECK_THROWS_AS(train(c, pairs, bad), Error);
}

TEST_CASE("denoise is the documented composition and symmetric") {
  const Model m = build_model(Architecture{}, 8);
  const auto raw = support::random_symmetric(20, 4, 1.0, 1.3);
  const C2Matrix keep = raw;
  const C2Matrix d = denoise(m, raw);
  CHECK(raw == keep);
  CHECK(d.is_symmetric());

  const auto s = corr::standardize(raw);
  const C2Matrix y = from_tensor(forward(m, to_tensor(s.matrix)));
  const C2Matrix back = corr::destandardize(y, s.params);
  C2Matrix manual(20);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = 0; j < 20; ++j) manual(i, j) = 0.5 * (back(i, j) + back(j, i));
  }
  CHECK(support::max_abs_diff(manual.values(), d.values()) == 0.0);
  try {
    denoise(m, C2Matrix(10, 1.0));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("constant input") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip and failure modes") {
  const auto dir = support::scratch_dir("ckpt");
  Model m = build_model(Architecture{}, 12);
  const auto pairs = toy_pairs(2, 12, 1);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  train(m, pairs, cfg);
  save_checkpoint(m, dir / "m.fcda");
  const Model back = load_checkpoint(dir / "m.fcda");
  CHECK(back.arch == m.arch);
  CHECK(back.seed == m.seed);
  CHECK(back.meta.epochs_run == 1);
  CHECK(back.meta.final_loss == m.meta.final_loss);
  const auto x = support::random_tensor(1, 1, 11, 11, 2);
  const auto y1 = forward(m, x), y2 = forward(back, x);
  CHECK(std::memcmp(y1.raw(), y2.raw(), y1.size() * sizeof(double)) == 0);
  CHECK(encode_checkpoint(back) == encode_checkpoint(m));

  const std::string bytes = encode_checkpoint(m);
  auto issue = [](const std::string& b) {
    try {
      decode_checkpoint(b);
    } catch (const FormatError& e) {
      return static_cast<int>(e.issue());
    }
    return -1;
  };
  std::string bad = bytes;
  bad[1] = 'Z';
  CHECK(issue(bad) == static_cast<int>(FormatIssue::BadMagic));
  bad = bytes;
  bad[4] = 9;
  CHECK(issue(bad) == static_cast<int>(FormatIssue::VersionMismatch));
  CHECK(issue(bytes.substr(0, bytes.size() - 16)) == static_cast<int>(FormatIssue::Truncated));
  CHECK(issue(bytes + "xx") == static_cast<int>(FormatIssue::Malformed));
  std::filesystem::remove_all(dir);
}

TEST_CASE("train_ensemble seeds") {
  const auto pairs = toy_pairs(3, 12, 2);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  const auto same = train_ensemble(Architecture{}, pairs, cfg, {5, 5}, true);
  CHECK(same[0].flatten_parameters() == same[1].flatten_parameters());
  const auto diff = train_ensemble(Architecture{}, pairs, cfg, {5, 6});
  CHECK(diff[0].flatten_parameters() != diff[1].flatten_parameters());
  CHECK_THROWS_AS(train_ensemble(Architecture{}, pairs, cfg, {5, 5}), Error);
}
