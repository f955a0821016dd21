#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "convert.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "tempdir.hpp"
#include "transientsynth/checkpoint.hpp"
#include "transientsynth/errors.hpp"
#include "transientsynth/synthdata.hpp"
#include "transientsynth/training.hpp"

using namespace tsynth;

namespace {

std::vector<WindowStep> random_window(int length, int out_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<WindowStep> w;
  for (int t = 0; t < length; ++t) {
    w.push_back({{u(rng), u(rng), u(rng), u(rng)}, static_cast<MuLawCode>(rng() % out_dim)});
  }
  return w;
}

// mean cross-entropy of the window under the scalar oracle network
double oracle_loss(const NetworkParams& p, const std::vector<WindowStep>& window, const HiddenState& init) {
  const auto net = oracle::to_net(p);
  std::vector<oracle::Vec> hs;
  for (const auto& h : init.layers) hs.push_back(oracle::to_vec(h));
  double sum = 0.0;
  for (const auto& s : window) {
    const auto logits = oracle::forward(net, {s.frame.audio_in, s.frame.pitch, s.frame.volume, s.frame.instrument}, hs);
    sum -= std::log(std::exp(oracle::log_softmax_at(logits, s.target)) + 1e-12);  // same floor as the loss
  }
  return sum / static_cast<double>(window.size());
}

TrainingSequence synthetic_sequence(std::size_t n, std::uint64_t seed) {
  // a short tone: periodic codes with matching controls
  TrainingSequence seq;
  std::vector<double> audio(n + 1);
  for (std::size_t i = 0; i <= n; ++i) audio[i] = 0.5 * std::sin(2.0 * 3.141592653589793 * static_cast<double>(i) / 20.0);
  ConditioningTracks tr{std::vector<double>(n + 1, 0.5), std::vector<double>(n + 1, 0.7),
                        std::vector<double>(n + 1, static_cast<double>(seed % 2))};
  return frames_from_audio(audio, tr);
}

TrainConfig tiny_train_config() {
  TrainConfig c;
  c.network = {2, 8, 4, 256};
  c.batch_size = 2;
  c.bptt_window = 64;
  c.max_epochs = 3;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("cross entropy") {
  Vector p = Vector::Zero(256);
  p(9) = 1.0;
  CHECK(cross_entropy(p, 9) == doctest::Approx(0.0).epsilon(1e-11));
  CHECK(cross_entropy(Vector::Constant(256, 1.0 / 256), 3) == doctest::Approx(std::log(256.0)).epsilon(1e-9));
  p.setConstant(0.5 / 255);
  p(4) = 0.5;
  CHECK(cross_entropy(p, 4) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  // zero probability is floored, not infinite
  CHECK(cross_entropy(Vector::Zero(256), 0) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("validate rejects bad training configs") {
  TrainConfig c;
  c.bptt_window = 1;
  CHECK_THROWS_AS(validate(c), InvalidArgument);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(validate(c), InvalidArgument);
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(validate(c), InvalidArgument);
}

TEST_CASE("analytic gradients match central differences on a 2x3 network") {
  const NetworkConfig cfg{2, 3, 4, 256};
  auto p = init_params(cfg, 13);
  {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (auto t : tensors(p))
      for (double& v : t) v += u(rng);  // non-zero biases exercise every path
  }
  const auto window = random_window(5, cfg.out_dim, 3);
  HiddenState init = HiddenState::zeros(cfg);
  init.layers[0] << 0.2, -0.1, 0.4;
  init.layers[1] << -0.3, 0.05, 0.1;

  const auto r = bptt_gradients(p, window, init);
  CHECK(r.mean_loss == doctest::Approx(oracle_loss(p, window, init)).epsilon(1e-12));

  const double eps = 1e-5;
  auto grads = tensors(r.gradients);
  auto params = tensors(p);
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    for (std::size_t i = 0; i < params[ti].size(); ++i) {
      const double saved = params[ti][i];
      params[ti][i] = saved + eps;
      const double up = oracle_loss(p, window, init);
      params[ti][i] = saved - eps;
      const double down = oracle_loss(p, window, init);
      params[ti][i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = grads[ti][i];
      const double rel = std::fabs(analytic - numeric) / std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
      worst = std::max(worst, rel);
      ++checked;
    }
  }
  CHECK(checked == parameter_count(cfg));
  INFO("worst relative error ", worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("output bias gradient is the mean of probs minus one-hot") {
  const NetworkConfig cfg{2, 3, 4, 16};
  const auto p = init_params(cfg, 2);
  const auto window = random_window(6, cfg.out_dim, 8);
  const auto r = bptt_gradients(p, window, HiddenState::zeros(cfg));
  Vector expected = Vector::Zero(cfg.out_dim);
  HiddenState s = HiddenState::zeros(cfg);
  for (const auto& step : window) {
    const auto f = forward(p, step.frame, s);
    Vector probs = softmax(f.logits);
    probs(step.target) -= 1.0;
    expected += probs;
    s = f.state;
  }
  expected /= static_cast<double>(window.size());
  CHECK((r.gradients.output.bias - expected).cwiseAbs().maxCoeff() < 1e-14);
  for (int l = 0; l < cfg.n_layers; ++l) CHECK((r.final_state.layers[l] - s.layers[l]).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("identical windows give identical gradients") {
  const NetworkConfig cfg{2, 3, 4, 16};
  const auto p = init_params(cfg, 2);
  const auto window = random_window(9, cfg.out_dim, 1);
  const auto a = bptt_gradients(p, window, HiddenState::zeros(cfg));
  const auto b = bptt_gradients(p, window, HiddenState::zeros(cfg));
  const auto ta = tensors(a.gradients), tb = tensors(b.gradients);
  for (std::size_t i = 0; i < ta.size(); ++i) REQUIRE(std::equal(ta[i].begin(), ta[i].end(), tb[i].begin()));
}

TEST_CASE("batched gradients equal the average over sequences, padding is ignored") {
  const NetworkConfig cfg{2, 4, 4, 32};
  const auto p = init_params(cfg, 6);
  TrainingSequence s1, s2;
  for (const auto& w : random_window(7, 32, 10)) s1.frames.push_back(w.frame), s1.targets.push_back(w.target);
  for (const auto& w : random_window(4, 32, 11)) s2.frames.push_back(w.frame), s2.targets.push_back(w.target);
  const TrainingSequence* seqs[] = {&s1, &s2};
  const auto window = make_window(seqs, 0, 7);
  CHECK(window.valid_count() == 11);
  CHECK(window.mask[5 * 2 + 1] == 0);  // t=5, b=1 is padding
  const auto batched = bptt_gradients(p, window, BatchState::zeros(cfg, 2));

  std::vector<WindowStep> w1, w2;
  for (std::size_t t = 0; t < 7; ++t) w1.push_back({s1.frames[t], s1.targets[t]});
  for (std::size_t t = 0; t < 4; ++t) w2.push_back({s2.frames[t], s2.targets[t]});
  const auto g1 = bptt_gradients(p, w1, HiddenState::zeros(cfg));
  const auto g2 = bptt_gradients(p, w2, HiddenState::zeros(cfg));
  CHECK(batched.loss_sum == doctest::Approx(7 * g1.mean_loss + 4 * g2.mean_loss).epsilon(1e-12));
  const auto tb = tensors(batched.gradients), t1 = tensors(g1.gradients), t2 = tensors(g2.gradients);
  for (std::size_t i = 0; i < tb.size(); ++i)
    for (std::size_t k = 0; k < tb[i].size(); ++k) {
      const double want = (7 * t1[i][k] + 4 * t2[i][k]) / 11.0;
      REQUIRE(std::fabs(tb[i][k] - want) <= 1e-12 * std::max(1.0, std::fabs(want)));
    }
}

TEST_CASE("optimizer first step is -lr in every coordinate with gradient 0.5") {
  TrainConfig c;
  const NetworkConfig cfg{1, 2, 4, 4};
  auto st = TrainState::fresh(init_params(cfg, 1));
  const auto before = st.params;
  auto g = NetworkParams::zeros(cfg);
  for (auto t : tensors(g))
    for (double& v : t) v = 0.5;
  c.gradient_clip = 1e9;
  optimizer_step(st, g, c);
  const auto a = tensors(before);
  const auto b = tensors(std::as_const(st.params));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].size(); ++k)
      REQUIRE(b[i][k] - a[i][k] == doctest::Approx(-c.learning_rate * 0.5 / (0.5 + c.epsilon)).epsilon(1e-12));
  CHECK(st.step == 1);
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  TrainConfig c;
  const NetworkConfig cfg{1, 2, 4, 4};
  auto st = TrainState::fresh(init_params(cfg, 1));
  const auto before = st.params;
  optimizer_step(st, NetworkParams::zeros(cfg), c);
  const auto a = tensors(before);
  const auto b = tensors(std::as_const(st.params));
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(std::equal(a[i].begin(), a[i].end(), b[i].begin()));
}

TEST_CASE("global-norm clipping") {
  TrainConfig c;
  c.gradient_clip = 5.0;
  const NetworkConfig cfg{1, 2, 4, 4};
  auto g = NetworkParams::zeros(cfg);
  g.output.bias(0) = 30.0;
  g.output.bias(1) = 40.0;
  CHECK(global_norm(g) == doctest::Approx(50.0));
  auto st = TrainState::fresh(init_params(cfg, 1));
  CHECK(optimizer_step(st, g, c) == doctest::Approx(50.0));
  // after clipping the moments see (3, 4)
  CHECK(st.first_moment.output.bias(0) == doctest::Approx(0.1 * 3.0));
  CHECK(st.first_moment.output.bias(1) == doctest::Approx(0.1 * 4.0));
  CHECK(st.second_moment.output.bias(1) == doctest::Approx(0.001 * 16.0));
}

TEST_CASE("state carry: chunked forward losses equal the unrolled ones") {
  const NetworkConfig cfg{2, 5, 4, 64};
  const auto p = init_params(cfg, 4);
  TrainingSequence seq;
  for (const auto& w : random_window(50, 64, 12)) seq.frames.push_back(w.frame), seq.targets.push_back(w.target);
  const TrainingSequence* seqs[] = {&seq};
  BatchState whole_state = BatchState::zeros(cfg, 1);
  const auto whole = window_losses(p, make_window(seqs, 0, 50), whole_state);
  BatchState s = BatchState::zeros(cfg, 1);
  auto a = window_losses(p, make_window(seqs, 0, 20), s);
  const auto b = window_losses(p, make_window(seqs, 20, 30), s);
  a.insert(a.end(), b.begin(), b.end());
  REQUIRE(a.size() == whole.size());
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == whole[i]);
  // bptt carries the same state forward
  BatchState g0 = BatchState::zeros(cfg, 1);
  const auto r1 = bptt_gradients(p, make_window(seqs, 0, 20), g0);
  const auto r2 = bptt_gradients(p, make_window(seqs, 20, 30), r1.final_state);
  CHECK(r1.loss_sum + r2.loss_sum == doctest::Approx(std::accumulate(whole.begin(), whole.end(), 0.0)).epsilon(1e-12));
}

TEST_CASE("fresh network starts near ln 256") {
  const auto p = init_params(NetworkConfig{}, 1);
  const auto seq = synthetic_sequence(200, 0);
  std::vector<WindowStep> w;
  for (std::size_t i = 0; i < seq.size(); ++i) w.push_back({seq.frames[i], seq.targets[i]});
  const auto r = bptt_gradients(p, w, HiddenState::zeros(p.config));
  CHECK(std::fabs(r.mean_loss - std::log(256.0)) < 0.5);
}

TEST_CASE("zero epochs returns the initial parameters") {
  auto c = tiny_train_config();
  c.max_epochs = 0;
  const auto r = train({synthetic_sequence(100, 0)}, c);
  const auto init = init_params(c.network, c.seed);
  const auto a = tensors(init);
  const auto b = tensors(r.state.params);
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(std::equal(a[i].begin(), a[i].end(), b[i].begin()));
  CHECK(r.history.empty());
}

TEST_CASE("training is deterministic down to the checkpoint bytes") {
  TempDir dir("ts-train");
  auto c = tiny_train_config();
  const std::vector<TrainingSequence> data{synthetic_sequence(150, 0), synthetic_sequence(90, 1),
                                           synthetic_sequence(120, 2)};
  c.checkpoint_path = dir / "a.ckpt";
  c.log_path = dir / "a.csv";
  const auto ra = train(data, c);
  c.checkpoint_path = dir / "b.ckpt";
  c.log_path.clear();
  const auto rb = train(data, c);
  std::ifstream fa(dir / "a.ckpt", std::ios::binary), fb(dir / "b.ckpt", std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(fa)), {}), bb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(ba.size() == checkpoint_size(c.network));
  CHECK(ba == bb);
  const auto ta = tensors(ra.state.first_moment), tb = tensors(rb.state.first_moment);
  for (std::size_t i = 0; i < ta.size(); ++i) REQUIRE(std::equal(ta[i].begin(), ta[i].end(), tb[i].begin()));
  CHECK(ra.state.step == rb.state.step);
  // one log line per epoch after the header
  std::ifstream log(dir / "a.csv");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) ++lines;
  CHECK(lines == c.max_epochs + 1);
  // a different seed gives different weights
  c.seed = 6;
  c.checkpoint_path.clear();
  const auto rc = train(data, c);
  CHECK(rc.state.params.output.weight != ra.state.params.output.weight);
}

TEST_CASE("a non-finite input aborts with a divergence error") {
  auto c = tiny_train_config();
  auto seq = synthetic_sequence(80, 0);
  seq.frames[10].pitch = std::nan("");
  CHECK_THROWS_AS(train({seq}, c), DivergenceError);
}

TEST_CASE("memorizes a single 200-sample sequence") {
  TrainConfig c;
  c.max_epochs = 500;
  c.batch_size = 1;
  c.seed = 3;
  // four windows per epoch, so 2000 optimizer steps
  c.bptt_window = 64;
  c.learning_rate = 3e-3;
  const auto r = train({synthetic_sequence(200, 1)}, c);
  REQUIRE(r.history.size() == 500);
  INFO("final loss ", r.history.back().mean_loss);
  CHECK(r.history.back().mean_loss < 0.05);
}
