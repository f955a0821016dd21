#include "transientsynth/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "transientsynth/checkpoint.hpp"
#include "transientsynth/errors.hpp"

namespace tsynth {

namespace {

using Eigen::MatrixXd;

struct LayerTape {
  MatrixXd hprev, z, r, cand, rh, hout;  // hidden x N
};

struct Tape {
  int batch = 0;
  int length = 0;
  MatrixXd frames;  // in_dim x N
  MatrixXd x0;      // hidden x N
  std::vector<LayerTape> layers;
  MatrixXd probs;  // out_dim x N
  MatrixXd gz, gr, gh, a;  // scratch
};

void sigmoid_inplace(Eigen::Ref<MatrixXd> a) { a = (1.0 + (-a.array()).exp()).inverse().matrix(); }

// Forward over the window, keeping everything the backward pass needs.
void run_forward(const NetworkParams& p, const WindowBatch& w, const BatchState& initial, Tape& tape) {
  const int B = w.batch;
  const int T = w.length;
  const int H = p.config.hidden;
  const Eigen::Index N = static_cast<Eigen::Index>(B) * T;
  tape.batch = B;
  tape.length = T;

  tape.frames.resize(p.config.in_dim, N);
  for (Eigen::Index c = 0; c < N; ++c) {
    const auto& f = w.frames[static_cast<std::size_t>(c)];
    tape.frames.col(c) << f.audio_in, f.pitch, f.volume, f.instrument;
  }
  tape.x0.noalias() = p.input.weight * tape.frames;
  tape.x0.colwise() += p.input.bias;

  tape.layers.resize(p.layers.size());
  auto& gz = tape.gz;
  auto& gr = tape.gr;
  auto& gh = tape.gh;
  auto& a = tape.a;
  a.resize(H, B);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& lp = p.layers[l];
    auto& lt = tape.layers[l];
    const MatrixXd& x = l == 0 ? tape.x0 : tape.layers[l - 1].hout;
    gz.noalias() = lp.w_z * x;
    gz.colwise() += lp.b_z;
    gr.noalias() = lp.w_r * x;
    gr.colwise() += lp.b_r;
    gh.noalias() = lp.w_h * x;
    gh.colwise() += lp.b_h;
    for (MatrixXd* m : {&lt.hprev, &lt.z, &lt.r, &lt.cand, &lt.rh, &lt.hout}) m->resize(H, N);

    for (int t = 0; t < T; ++t) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(t) * B;
      if (t == 0) {
        lt.hprev.middleCols(c0, B) = initial.layers[l];
      } else {
        lt.hprev.middleCols(c0, B) = lt.hout.middleCols(c0 - B, B);
      }
      const auto hp = lt.hprev.middleCols(c0, B);

      a = gz.middleCols(c0, B);
      a.noalias() += lp.u_z * hp;
      sigmoid_inplace(a);
      lt.z.middleCols(c0, B) = a;

      a = gr.middleCols(c0, B);
      a.noalias() += lp.u_r * hp;
      sigmoid_inplace(a);
      lt.r.middleCols(c0, B) = a;
      lt.rh.middleCols(c0, B) = a.cwiseProduct(hp);

      a = gh.middleCols(c0, B);
      a.noalias() += lp.u_h * lt.rh.middleCols(c0, B);
      lt.cand.middleCols(c0, B) = a.array().tanh().matrix();

      const auto z = lt.z.middleCols(c0, B).array();
      lt.hout.middleCols(c0, B) = (z * hp.array() + (1.0 - z) * lt.cand.middleCols(c0, B).array()).matrix();
    }
  }

  tape.probs.noalias() = p.output.weight * tape.layers.back().hout;
  tape.probs.colwise() += p.output.bias;
  for (Eigen::Index c = 0; c < N; ++c) {
    auto col = tape.probs.col(c);
    const double m = col.maxCoeff();
    col = (col.array() - m).exp().matrix();
    col /= col.sum();
  }
}

BatchState final_state_of(const Tape& tape, const BatchState& initial) {
  if (tape.length == 0) return initial;
  BatchState s;
  for (const auto& lt : tape.layers) s.layers.push_back(lt.hout.rightCols(tape.batch));
  return s;
}

void accumulate_affine(AffineParams& g, const MatrixXd& d, const MatrixXd& x) {
  g.weight.noalias() = d * x.transpose();
  g.bias = d.rowwise().sum();
}

}  // namespace

void validate(const TrainConfig& c) {
  validate(c.network);
  if (c.bptt_window < 2) throw InvalidArgument("bptt_window must be at least 2");
  if (!(c.learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (c.batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (c.max_epochs < 0) throw InvalidArgument("max_epochs must be non-negative");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0)) {
    throw InvalidArgument("optimizer betas must lie in [0,1)");
  }
  if (!(c.epsilon > 0.0)) throw InvalidArgument("optimizer epsilon must be positive");
  if (!(c.gradient_clip > 0.0)) throw InvalidArgument("gradient_clip must be positive");
}

double learning_rate_at(const TrainConfig& c, int epoch) {
  if (!(c.final_learning_rate > 0.0) || c.max_epochs <= 1) return c.learning_rate;
  const double progress = static_cast<double>(epoch) / static_cast<double>(c.max_epochs - 1);
  return c.final_learning_rate +
         0.5 * (c.learning_rate - c.final_learning_rate) * (1.0 + std::cos(std::numbers::pi * progress));
}

double cross_entropy(const Vector& probs, MuLawCode target) {
  return -std::log(probs[target] + kProbabilityFloor);
}

std::size_t WindowBatch::valid_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

BatchState BatchState::zeros(const NetworkConfig& config, int batch) {
  BatchState s;
  s.layers.assign(config.n_layers, MatrixXd::Zero(config.hidden, batch));
  return s;
}

BatchBpttResult bptt_gradients(const NetworkParams& p, const WindowBatch& w, const BatchState& initial) {
  const int B = w.batch;
  const int T = w.length;
  const auto N = static_cast<std::size_t>(B) * T;
  if (w.frames.size() != N || w.targets.size() != N || w.mask.size() != N) {
    throw InvalidArgument("window batch arrays do not match batch x length");
  }
  if (static_cast<int>(initial.layers.size()) != p.config.n_layers) throw InvalidArgument("initial state layers");

  // Buffers are reused across calls; after the first window of a given
  // shape nothing here touches the allocator.
  thread_local Tape tape;
  thread_local MatrixXd dlogits, dh_out, daz, dar, dan, dh, dh_next, drh;
  run_forward(p, w, initial, tape);

  BatchBpttResult out;
  out.gradients = NetworkParams::zeros(p.config);
  out.final_state = final_state_of(tape, initial);
  out.count = w.valid_count();
  if (N == 0) return out;

  // Output layer: softmax cross-entropy gradient (p - onehot) / count.
  dlogits = tape.probs;
  const double inv = out.count ? 1.0 / static_cast<double>(out.count) : 0.0;
  for (std::size_t c = 0; c < N; ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    if (!w.mask[c]) {
      dlogits.col(col).setZero();
      continue;
    }
    const MuLawCode target = w.targets[c];
    out.loss_sum += -std::log(tape.probs(target, col) + kProbabilityFloor);
    dlogits(target, col) -= 1.0;
    dlogits.col(col) *= inv;
  }
  accumulate_affine(out.gradients.output, dlogits, tape.layers.back().hout);
  dh_out.noalias() = p.output.weight.transpose() * dlogits;  // d loss / d(layer output), direct path

  const int H = p.config.hidden;
  for (MatrixXd* m : {&daz, &dar, &dan}) m->resize(H, static_cast<Eigen::Index>(N));
  for (MatrixXd* m : {&dh, &dh_next, &drh}) m->resize(H, B);
  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const auto& lp = p.layers[li];
    const auto& lt = tape.layers[li];
    auto& g = out.gradients.layers[li];
    dh_next.setZero();
    for (int t = T - 1; t >= 0; --t) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(t) * B;
      dh = dh_out.middleCols(c0, B) + dh_next;
      const auto z = lt.z.middleCols(c0, B).array();
      const auto r = lt.r.middleCols(c0, B).array();
      const auto cand = lt.cand.middleCols(c0, B).array();
      const auto hp = lt.hprev.middleCols(c0, B).array();

      daz.middleCols(c0, B) = (dh.array() * (hp - cand) * z * (1.0 - z)).matrix();
      dan.middleCols(c0, B) = (dh.array() * (1.0 - z) * (1.0 - cand.square())).matrix();
      drh.noalias() = lp.u_h.transpose() * dan.middleCols(c0, B);
      dar.middleCols(c0, B) = (drh.array() * hp * r * (1.0 - r)).matrix();

      dh_next = (dh.array() * z + drh.array() * r).matrix();
      dh_next.noalias() += lp.u_z.transpose() * daz.middleCols(c0, B);
      dh_next.noalias() += lp.u_r.transpose() * dar.middleCols(c0, B);
    }

    const MatrixXd& x = li == 0 ? tape.x0 : tape.layers[li - 1].hout;
    g.w_z.noalias() = daz * x.transpose();
    g.w_r.noalias() = dar * x.transpose();
    g.w_h.noalias() = dan * x.transpose();
    g.u_z.noalias() = daz * lt.hprev.transpose();
    g.u_r.noalias() = dar * lt.hprev.transpose();
    g.u_h.noalias() = dan * lt.rh.transpose();
    g.b_z = daz.rowwise().sum();
    g.b_r = dar.rowwise().sum();
    g.b_h = dan.rowwise().sum();

    dh_out.noalias() = lp.w_z.transpose() * daz;
    dh_out.noalias() += lp.w_r.transpose() * dar;
    dh_out.noalias() += lp.w_h.transpose() * dan;
  }
  accumulate_affine(out.gradients.input, dh_out, tape.frames);
  return out;
}

BpttResult bptt_gradients(const NetworkParams& params, std::span<const WindowStep> window, const HiddenState& initial) {
  WindowBatch w;
  w.batch = 1;
  w.length = static_cast<int>(window.size());
  for (const auto& s : window) {
    w.frames.push_back(s.frame);
    w.targets.push_back(s.target);
    w.mask.push_back(1);
  }
  BatchState init;
  for (const auto& h : initial.layers) init.layers.push_back(h);
  auto r = bptt_gradients(params, w, init);
  BpttResult out;
  out.gradients = std::move(r.gradients);
  out.mean_loss = r.mean_loss();
  for (const auto& m : r.final_state.layers) out.final_state.layers.push_back(m.col(0));
  return out;
}

std::vector<double> window_losses(const NetworkParams& params, const WindowBatch& w, BatchState& state) {
  thread_local Tape tape;
  run_forward(params, w, state, tape);
  std::vector<double> losses(w.frames.size(), 0.0);
  for (std::size_t c = 0; c < losses.size(); ++c) {
    if (w.mask[c]) losses[c] = -std::log(tape.probs(w.targets[c], static_cast<Eigen::Index>(c)) + kProbabilityFloor);
  }
  state = final_state_of(tape, state);
  return losses;
}

TrainState TrainState::fresh(NetworkParams params) {
  TrainState s;
  s.first_moment = NetworkParams::zeros(params.config);
  s.second_moment = NetworkParams::zeros(params.config);
  s.params = std::move(params);
  return s;
}

double global_norm(const NetworkParams& g) {
  double sq = 0.0;
  for (auto s : tensors(g)) {
    for (double v : s) sq += v * v;
  }
  return std::sqrt(sq);
}

double optimizer_step(TrainState& state, NetworkParams gradients, const TrainConfig& c) {
  const double norm = global_norm(gradients);
  if (!std::isfinite(norm)) throw DivergenceError("non-finite gradient norm", state.epoch, state.step);
  const double scale = norm > c.gradient_clip ? c.gradient_clip / norm : 1.0;

  state.step += 1;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  auto theta = tensors(state.params);
  auto m = tensors(state.first_moment);
  auto v = tensors(state.second_moment);
  const auto g = tensors(gradients);
  for (std::size_t k = 0; k < theta.size(); ++k) {
    for (std::size_t i = 0; i < theta[k].size(); ++i) {
      const double gi = g[k][i] * scale;
      m[k][i] = c.beta1 * m[k][i] + (1.0 - c.beta1) * gi;
      v[k][i] = c.beta2 * v[k][i] + (1.0 - c.beta2) * gi * gi;
      const double m_hat = m[k][i] / correction1;
      const double v_hat = v[k][i] / correction2;
      theta[k][i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
  return norm;
}

WindowBatch make_window(std::span<const TrainingSequence* const> sequences, std::size_t start, int length) {
  WindowBatch w;
  w.batch = static_cast<int>(sequences.size());
  w.length = length;
  const auto N = static_cast<std::size_t>(w.batch) * length;
  w.frames.resize(N);
  w.targets.resize(N);
  w.mask.resize(N);
  for (int t = 0; t < length; ++t) {
    for (int b = 0; b < w.batch; ++b) {
      const auto& seq = *sequences[static_cast<std::size_t>(b)];
      const std::size_t idx = start + static_cast<std::size_t>(t);
      const std::size_t c = static_cast<std::size_t>(t) * w.batch + b;
      if (idx < seq.size()) {
        w.frames[c] = seq.frames[idx];
        w.targets[c] = seq.targets[idx];
        w.mask[c] = 1;
      } else {
        const ControlFrame last = seq.frames.empty() ? ControlFrame{} : seq.frames.back();
        w.frames[c] = {code_to_input(kSilenceCode), last.pitch, 0.0, last.instrument};
        w.targets[c] = kSilenceCode;
        w.mask[c] = 0;
      }
    }
  }
  return w;
}

namespace {

void append_log(const std::filesystem::path& path, const EpochRecord& r) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError(path, "cannot open training log");
  if (fresh) out << "epoch,step,mean_loss,wall_time\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld,%lld,%.9g,%.3f\n", static_cast<long long>(r.epoch),
                static_cast<long long>(r.step), r.mean_loss, r.wall_time);
  out << buf;
}

}  // namespace

TrainResult train(const std::vector<TrainingSequence>& sequences, const TrainConfig& config,
                  std::optional<NetworkParams> initial, const EpochCallback& on_epoch) {
  validate(config);
  NetworkParams params = initial ? std::move(*initial) : init_params(config.network, config.seed);
  validate(params);
  if (params.config != config.network) throw InvalidArgument("initial parameters do not match network config");

  TrainResult result;
  result.state = TrainState::fresh(std::move(params));
  auto& state = result.state;

  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto t0 = std::chrono::steady_clock::now();

  TrainConfig step_config = config;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    state.epoch = epoch;
    step_config.learning_rate = learning_rate_at(config, epoch);
    // Fisher-Yates with an explicit draw so the order does not depend on the
    // standard library's shuffle implementation.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(config.batch_size)) {
      std::vector<const TrainingSequence*> batch;
      std::size_t max_len = 0;
      for (std::size_t k = b0; k < std::min(order.size(), b0 + config.batch_size); ++k) {
        const auto* seq = &sequences[order[k]];
        if (seq->size() == 0) continue;
        batch.push_back(seq);
        max_len = std::max(max_len, seq->size());
      }
      if (batch.empty()) continue;

      BatchState carry = BatchState::zeros(config.network, static_cast<int>(batch.size()));
      for (std::size_t start = 0; start < max_len; start += static_cast<std::size_t>(config.bptt_window)) {
        const int len = static_cast<int>(std::min<std::size_t>(config.bptt_window, max_len - start));
        const auto window = make_window(batch, start, len);
        auto r = bptt_gradients(state.params, window, carry);
        if (!std::isfinite(r.loss_sum)) throw DivergenceError("non-finite training loss", epoch, state.step);
        optimizer_step(state, std::move(r.gradients), step_config);
        carry = std::move(r.final_state);
        loss_sum += r.loss_sum;
        loss_count += r.count;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = state.step;
    rec.mean_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    state.running_loss = rec.mean_loss;
    result.history.push_back(rec);
    spdlog::debug("epoch {} step {} loss {:.5f} ({:.1f}s)", rec.epoch, rec.step, rec.mean_loss, rec.wall_time);
    if (!config.log_path.empty()) append_log(config.log_path, rec);
    if (on_epoch) on_epoch(rec);
    if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() && (epoch + 1) % config.checkpoint_every == 0) {
      save_checkpoint(state.params, config.checkpoint_path);
    }
  }
  state.epoch = config.max_epochs;
  if (!config.checkpoint_path.empty()) save_checkpoint(state.params, config.checkpoint_path);
  return result;
}

TrainResult train(const DatasetManifest& manifest, const TrainConfig& config, const EpochCallback& on_epoch) {
  const auto sequences = load_sequences(manifest);
  return train(sequences, config, std::nullopt, on_epoch);
}

}  // namespace tsynth
