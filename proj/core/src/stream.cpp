#include "transientsynth/stream.hpp"

#include <thread>

#include "transientsynth/errors.hpp"
#include "transientsynth/wav.hpp"

namespace tsynth {

void ControlMailbox::publish(const Controls& c) {
  const auto s = seq_.load(std::memory_order_relaxed);
  seq_.store(s + 1, std::memory_order_relaxed);
  std::atomic_thread_fence(std::memory_order_release);
  pitch_.store(c.pitch, std::memory_order_relaxed);
  volume_.store(c.volume, std::memory_order_relaxed);
  instrument_.store(c.instrument, std::memory_order_relaxed);
  seq_.store(s + 2, std::memory_order_release);
}

Controls ControlMailbox::read(std::uint64_t* version) const {
  for (;;) {
    const auto s0 = seq_.load(std::memory_order_acquire);
    if (s0 & 1U) {
      std::this_thread::yield();
      continue;
    }
    Controls c{pitch_.load(std::memory_order_relaxed), volume_.load(std::memory_order_relaxed),
               instrument_.load(std::memory_order_relaxed)};
    std::atomic_thread_fence(std::memory_order_acquire);
    if (seq_.load(std::memory_order_relaxed) == s0) {
      if (version) *version = s0 / 2;
      return c;
    }
  }
}

BlockQueue::BlockQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidArgument("block queue capacity must be positive");
}

bool BlockQueue::try_push(AudioBlock&& block) {
  {
    std::lock_guard lock(mu_);
    if (closed_ || items_.size() >= capacity_) return false;
    items_.push_back(std::move(block));
  }
  not_empty_.notify_one();
  return true;
}

bool BlockQueue::push(AudioBlock&& block) {
  {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(block));
  }
  not_empty_.notify_one();
  return true;
}

std::optional<AudioBlock> BlockQueue::pop() {
  std::unique_lock lock(mu_);
  not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
  if (items_.empty()) return std::nullopt;
  std::optional<AudioBlock> b(std::in_place, std::move(items_.front()));
  items_.pop_front();
  lock.unlock();
  not_full_.notify_one();
  return b;
}

std::optional<AudioBlock> BlockQueue::try_pop() {
  std::unique_lock lock(mu_);
  if (items_.empty()) return std::nullopt;
  std::optional<AudioBlock> b(std::in_place, std::move(items_.front()));
  items_.pop_front();
  lock.unlock();
  not_full_.notify_one();
  return b;
}

std::optional<AudioBlock> BlockQueue::pop_for(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!not_empty_.wait_for(lock, timeout, [&] { return closed_ || !items_.empty(); })) return std::nullopt;
  if (items_.empty()) return std::nullopt;
  std::optional<AudioBlock> b(std::in_place, std::move(items_.front()));
  items_.pop_front();
  lock.unlock();
  not_full_.notify_one();
  return b;
}

void BlockQueue::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  not_empty_.notify_all();
  not_full_.notify_all();
}

bool BlockQueue::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::size_t BlockQueue::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

void run_stream(const NetworkParams& params, const ControlMailbox& controls, BlockQueue& out,
                const StreamOptions& options, StreamStats& stats, std::stop_token stop,
                const std::atomic<bool>* probing) {
  if (options.block_size == 0) throw InvalidArgument("block size must be positive");
  if (options.probe_every < 1) throw InvalidArgument("probe_every must be >= 1");
  const int n_layers = params.config.n_layers;
  const int probe_layer = options.probe_layer < 0 ? n_layers - 1 : options.probe_layer;
  if (probe_layer >= n_layers) throw InvalidArgument("probe layer out of range");

  Generator gen(params, options.prime_seed);
  std::optional<ControlSchedule::Cursor> cursor;
  if (options.script) cursor.emplace(*options.script);

  using clock = std::chrono::steady_clock;
  const auto block_period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(static_cast<double>(options.block_size) / options.sample_rate));
  auto anchor = clock::now();
  std::uint64_t anchored_block = 0;

  std::uint64_t sample = 0;
  std::uint64_t seen_version = ~std::uint64_t{0};
  Controls current{};
  Activations acts;

  for (std::uint64_t b = 0; !stop.stop_requested(); ++b) {
    if (options.max_blocks && b >= *options.max_blocks) break;
    AudioBlock block;
    block.index = b;
    block.first_sample = sample;
    block.pcm.resize(options.block_size);
    for (std::size_t i = 0; i < options.block_size; ++i, ++sample) {
      if (cursor) {
        current = cursor->at_sample(sample, options.sample_rate);
      } else if (controls.version() != seen_version) {
        current = controls.read(&seen_version);
      }
      if (i == 0) block.first_controls = current;
      const MuLawCode code = gen.step(current);
      block.pcm[i] = to_pcm16(mulaw_decode(code));
    }
    block.control_version = cursor ? 0 : seen_version;
    if (probing && probing->load(std::memory_order_relaxed) && (b + 1) % options.probe_every == 0) {
      gen.copy_activations(acts);
      const auto hidden = static_cast<std::size_t>(params.config.hidden);
      const auto* first = acts.data() + static_cast<std::size_t>(probe_layer) * hidden;
      block.activations.assign(first, first + hidden);
    }

    if (options.paced) {
      const auto due = anchor + block_period * static_cast<long>(b + 1 - anchored_block);
      const auto now = clock::now();
      if (now > due + block_period) {
        // fell behind real time by more than a block: count it and re-anchor
        stats.underruns.fetch_add(1, std::memory_order_relaxed);
        anchor = now;
        anchored_block = b + 1;
      } else if (now < due) {
        std::this_thread::sleep_until(due);
      }
    }

    if (options.drop_when_full) {
      if (out.closed()) break;
      if (!out.try_push(std::move(block))) {
        if (out.closed()) break;
        stats.dropped.fetch_add(1, std::memory_order_relaxed);
      }
    } else if (!out.push(std::move(block))) {
      break;
    }
    stats.blocks.fetch_add(1, std::memory_order_relaxed);
    if (options.on_block) options.on_block();
  }
}

}  // namespace tsynth
