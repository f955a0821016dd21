#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <stop_token>
#include <vector>

#include "transientsynth/network.hpp"
#include "transientsynth/synthesis.hpp"

namespace tsynth {

// Single-producer hand-off for the latest control values. The producer
// (socket reader, UI thread) publishes; the generation loop reads without
// ever blocking. Intermediate values between two reads are lost on purpose.
class ControlMailbox {
 public:
  ControlMailbox() = default;
  explicit ControlMailbox(const Controls& initial) { publish(initial); }

  void publish(const Controls& c);
  // Consistent snapshot; `version` counts publishes.
  Controls read(std::uint64_t* version = nullptr) const;
  std::uint64_t version() const { return seq_.load(std::memory_order_acquire) / 2; }

 private:
  std::atomic<std::uint64_t> seq_{0};
  std::atomic<double> pitch_{0.0};
  std::atomic<double> volume_{0.0};
  std::atomic<double> instrument_{0.0};
};

struct AudioBlock {
  std::uint64_t index = 0;
  std::uint64_t first_sample = 0;
  std::vector<std::int16_t> pcm;
  Controls first_controls{};       // controls applied to the first sample
  std::uint64_t control_version = 0;  // mailbox version seen at the last sample
  std::vector<float> activations;  // probe layer after the last sample; empty unless probed
};

// Bounded FIFO between the generation loop and the consumer.
class BlockQueue {
 public:
  explicit BlockQueue(std::size_t capacity);

  // False if full or closed.
  bool try_push(AudioBlock&& block);
  // Waits for room; false once closed.
  bool push(AudioBlock&& block);
  std::optional<AudioBlock> pop();  // nullopt when closed and drained
  std::optional<AudioBlock> try_pop();
  std::optional<AudioBlock> pop_for(std::chrono::milliseconds timeout);

  void close();
  bool closed() const;
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<AudioBlock> items_;
  bool closed_ = false;
};

struct StreamOptions {
  std::size_t block_size = 128;
  bool paced = true;           // one block per block_size / sample_rate seconds of wall time
  bool drop_when_full = true;  // else wait for the consumer
  std::uint64_t prime_seed = 0;
  int probe_every = 8;         // attach activations to every n-th block while probing
  int probe_layer = -1;        // 0-based; -1 = deepest
  std::optional<ControlSchedule> script;  // replaces the mailbox when set
  std::optional<std::uint64_t> max_blocks;
  int sample_rate = kSampleRate;
  std::function<void()> on_block;  // called after each block is queued or dropped
};

struct StreamStats {
  std::atomic<std::uint64_t> blocks{0};
  std::atomic<std::uint64_t> dropped{0};
  std::atomic<std::uint64_t> underruns{0};
};

// Generation loop. Runs until stop is requested, the queue is closed, or
// max_blocks have been produced. `probing` toggles activation capture.
void run_stream(const NetworkParams& params, const ControlMailbox& controls, BlockQueue& out,
                const StreamOptions& options, StreamStats& stats, std::stop_token stop,
                const std::atomic<bool>* probing = nullptr);

}  // namespace tsynth
