#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "transientsynth/network.hpp"
#include "transientsynth/synthdata.hpp"

namespace tsynth {

struct TrainConfig {
  double learning_rate = 1e-3;
  int bptt_window = 256;
  int batch_size = 8;
  int max_epochs = 100;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double gradient_clip = 5.0;
  // Cosine decay from learning_rate to this value over max_epochs; <= 0
  // keeps the rate constant.
  double final_learning_rate = 0.0;
  NetworkConfig network;
  // Optional outputs. Empty paths are skipped.
  std::filesystem::path log_path;         // append-only CSV: epoch,step,mean_loss,wall_time
  std::filesystem::path checkpoint_path;  // final (and periodic) checkpoint
  int checkpoint_every = 0;               // epochs; 0 writes only the final checkpoint
};

// Throws InvalidArgument on bptt_window < 2, non-positive learning rate, etc.
void validate(const TrainConfig& config);

// Learning rate used during `epoch` (0-based).
double learning_rate_at(const TrainConfig& config, int epoch);

inline constexpr double kProbabilityFloor = 1e-12;

// -ln(probs[target] + 1e-12), in nats.
double cross_entropy(const Vector& probs, MuLawCode target);

// One element of a single-sequence training window.
struct WindowStep {
  ControlFrame frame;
  MuLawCode target = kSilenceCode;
};

struct BpttResult {
  NetworkParams gradients;  // d(mean loss)/d(theta), same shape as the parameters
  HiddenState final_state;
  double mean_loss = 0.0;
};

// Exact gradients of the mean cross-entropy over the window by reverse-mode
// accumulation through the unrolled stack. The gradient does not flow into
// `initial` (truncation point).
BpttResult bptt_gradients(const NetworkParams& params, std::span<const WindowStep> window, const HiddenState& initial);

// A window over several sequences at once. Column-block layout: element
// (t, b) lives at index t * batch + b. Masked elements (trailing padding)
// contribute nothing to the loss.
struct WindowBatch {
  int batch = 0;
  int length = 0;
  std::vector<ControlFrame> frames;
  std::vector<MuLawCode> targets;
  std::vector<std::uint8_t> mask;

  std::size_t valid_count() const;
};

// Hidden state for a batch: one hidden x batch matrix per layer.
struct BatchState {
  std::vector<Eigen::MatrixXd> layers;

  static BatchState zeros(const NetworkConfig& config, int batch);
};

struct BatchBpttResult {
  NetworkParams gradients;
  BatchState final_state;
  double loss_sum = 0.0;
  std::size_t count = 0;

  double mean_loss() const { return count ? loss_sum / static_cast<double>(count) : 0.0; }
};

BatchBpttResult bptt_gradients(const NetworkParams& params, const WindowBatch& window, const BatchState& initial);

// Per-element losses of a forward pass only (no gradients); used to check
// state carry across chunk boundaries.
std::vector<double> window_losses(const NetworkParams& params, const WindowBatch& window, BatchState& state);

struct TrainState {
  NetworkParams params;
  NetworkParams first_moment;
  NetworkParams second_moment;
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double running_loss = 0.0;

  static TrainState fresh(NetworkParams params);
};

double global_norm(const NetworkParams& gradients);

// Clips `gradients` to config.gradient_clip by global norm, then applies one
// bias-corrected adaptive-moment update. Returns the pre-clip norm.
double optimizer_step(TrainState& state, NetworkParams gradients, const TrainConfig& config);

struct EpochRecord {
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  double mean_loss = 0.0;
  double wall_time = 0.0;
};

struct TrainResult {
  TrainState state;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Epoch loop: seeded shuffle, batches of equal (padded) length, zero state
// per sequence, non-overlapping windows with state carry, one optimizer step
// per window.
TrainResult train(const std::vector<TrainingSequence>& sequences, const TrainConfig& config,
                  std::optional<NetworkParams> initial = std::nullopt, const EpochCallback& on_epoch = {});

// Loads and validates the dataset named by the manifest, then trains on it.
TrainResult train(const DatasetManifest& manifest, const TrainConfig& config, const EpochCallback& on_epoch = {});

// Assembles the padded window starting at `start` for the given sequences.
WindowBatch make_window(std::span<const TrainingSequence* const> sequences, std::size_t start, int length);

}  // namespace tsynth
